//! Criterion benchmarks for `pansharp-core`; see `benches/`.
