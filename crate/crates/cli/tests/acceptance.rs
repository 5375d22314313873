//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line before
//! asserting; run with `--nocapture` to see the summary.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use pansharp_core::atrous::{atrous_decompose, atrous_reconstruct, detail_sum, B3_TAPS};
use pansharp_core::fusion::{
    fuse_atrous_additive, fuse_brovey, fuse_hpm_boxcar, fuse_ihs, fuse_wavelet_hpm, PcaBasis,
};
use pansharp_core::harness::render_csv;
use pansharp_core::io::{export_f32_raw, import_f32_raw, save_band, save_multiband, BitDepth};
use pansharp_core::metrics::{correlation, entropy, mutual_information, q_index};
use pansharp_core::raster::{histogram_match, upsample, Border, Kernel2D};
use pansharp_core::{
    load_band, load_multiband, run_evaluation, synth_scene, EvalConfig, FusionMethod,
    FusionParams, MultiBandImage, RasterBand,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, what: &str, ok: bool, detail: impl AsRef<str>) {
    println!(
        "AC{id} {}: {what} ({})",
        if ok { "PASS" } else { "FAIL" },
        detail.as_ref()
    );
    assert!(ok, "AC{id} failed: {what} ({})", detail.as_ref());
}

fn uniform(w: usize, h: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> RasterBand {
    RasterBand::from_fn(w, h, |_, _| rng.gen_range(lo..hi)).unwrap()
}

fn random_ms(bands: usize, w: usize, h: usize, rng: &mut ChaCha8Rng) -> MultiBandImage {
    MultiBandImage::new((0..bands).map(|_| uniform(w, h, 0.2, 1.0, rng)).collect()).unwrap()
}

#[test]
fn ac1_perfect_reconstruction() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (w, h) = (rng.gen_range(64..=257), rng.gen_range(64..=257));
        let levels = rng.gen_range(1..=3);
        let x = uniform(w, h, 0.0, 1.0, &mut rng);
        let back = atrous_reconstruct(&atrous_decompose(&x, levels).unwrap());
        worst = worst.max(back.max_abs_diff(&x) / x.max_abs());
    }
    let elapsed = start.elapsed();
    report(
        1,
        "à trous perfect reconstruction on 50 random bands",
        worst < 1e-9 && elapsed < Duration::from_secs(5),
        format!("max rel err {worst:.3e}, {elapsed:.2?}"),
    );
}

/// c_n by direct 2-D convolution with explicitly holed B3 kernels.
fn oracle_residual(pan: &RasterBand, levels: usize) -> RasterBand {
    let mut c = pan.clone();
    for j in 1..=levels {
        let step = 1 << (j - 1);
        let mut taps = vec![0.0; 4 * step + 1];
        for (k, w) in B3_TAPS.iter().enumerate() {
            taps[k * step] = *w;
        }
        c = Kernel2D::separable(&taps).unwrap().apply(&c, Border::Mirror);
    }
    c
}

#[test]
fn ac2_wavelet_hpm_identity_and_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let params = FusionParams::default();
    let (mut identity_err, mut oracle_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let (w, h) = (rng.gen_range(24..=64), rng.gen_range(24..=64));
        let pan = uniform(w, h, 0.5, 1.5, &mut rng);
        let ms = random_ms(3, w, h, &mut rng);

        let d = atrous_decompose(&pan, params.levels).unwrap();
        let lowpass = pan.zip_map(&detail_sum(&d), |p, s| p - s).unwrap();
        identity_err = identity_err.max(lowpass.max_abs_diff(d.residual()));

        let fused = fuse_wavelet_hpm(&ms, &pan, &params).unwrap();
        let c_n = oracle_residual(&pan, params.levels);
        let eps = 1e-6 * pan.samples().iter().sum::<f64>() / pan.len() as f64;
        for (fb, mb) in fused.bands().iter().zip(ms.bands()) {
            for i in 0..fb.len() {
                let (m, p, c) = (mb.samples()[i], pan.samples()[i], c_n.samples()[i]);
                let expect = m + (p - c) * m / c.max(eps);
                oracle_err = oracle_err.max((fb.samples()[i] - expect).abs());
            }
        }
    }
    report(
        2,
        "PAN - Σw_j equals c_n; wavelet HPM matches oracle",
        identity_err < 1e-9 && oracle_err < 1e-12,
        format!("identity {identity_err:.3e}, oracle {oracle_err:.3e}"),
    );
}

#[test]
fn ac3_constant_pan_leaves_ms_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = FusionParams::default();
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let ms = random_ms(4, 16, 16, &mut rng);
        let ms_up = ms.map_bands(|b| upsample(b, 4)).unwrap();
        let pan = RasterBand::filled(64, 64, rng.gen_range(10.0..500.0)).unwrap();
        for f in [fuse_hpm_boxcar, fuse_atrous_additive, fuse_wavelet_hpm] {
            worst = worst.max(f(&ms_up, &pan, &params).unwrap().max_abs_diff(&ms_up));
        }
    }
    report(
        3,
        "constant PAN: HPM, AWL, WHPM return the upsampled MS",
        worst < 1e-9,
        format!("max abs diff {worst:.3e}"),
    );
}

/// Independent MI/entropy: per-pixel bin assignment and a double loop over
/// every (bin_a, bin_b) pair that rescans the image.
fn brute_force_mi(a: &RasterBand, b: &RasterBand, bins: usize) -> (f64, f64) {
    let bin_of = |band: &RasterBand, v: f64| {
        let (lo, hi) = band.min_max();
        if hi == lo {
            0
        } else {
            let k = ((v - lo) / (hi - lo) * bins as f64).floor() as usize;
            k.min(bins - 1)
        }
    };
    let n = a.len() as f64;
    let pa: Vec<f64> = (0..bins)
        .map(|x| a.samples().iter().filter(|&&v| bin_of(a, v) == x).count() as f64 / n)
        .collect();
    let pb: Vec<f64> = (0..bins)
        .map(|y| b.samples().iter().filter(|&&v| bin_of(b, v) == y).count() as f64 / n)
        .collect();
    let mut mi = 0.0;
    for x in 0..bins {
        for y in 0..bins {
            let joint = a
                .samples()
                .iter()
                .zip(b.samples())
                .filter(|(&u, &v)| bin_of(a, u) == x && bin_of(b, v) == y)
                .count() as f64
                / n;
            if joint > 0.0 {
                mi += joint * (joint / (pa[x] * pb[y])).ln();
            }
        }
    }
    let h: f64 = pa.iter().filter(|&&p| p > 0.0).map(|p| -p * p.ln()).sum();
    (mi, h)
}

#[test]
fn ac4_metric_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = Vec::new();

    let a = uniform(32, 32, 0.0, 10.0, &mut rng);
    let cc_self = correlation(&a, &a).unwrap();
    let cc_neg = correlation(&a, &a.map(|v| -v).unwrap()).unwrap();
    let cc_aff = correlation(&a, &a.map(|v| 2.0 * v + 5.0).unwrap()).unwrap();
    if (cc_self - 1.0).abs() >= 1e-12 || (cc_neg + 1.0).abs() >= 1e-12 || (cc_aff - 1.0).abs() >= 1e-12 {
        failures.push(format!("CC {cc_self} {cc_neg} {cc_aff}"));
    }

    let mut mi_worst: f64 = 0.0;
    let mut sym_worst: f64 = 0.0;
    let mut ent_worst: f64 = 0.0;
    for _ in 0..10 {
        let x = uniform(8, 8, 0.0, 1.0, &mut rng);
        let y = x.zip_map(&uniform(8, 8, 0.0, 1.0, &mut rng), |p, q| p + q).unwrap();
        let (oracle_mi, _) = brute_force_mi(&x, &y, 4);
        let (oracle_self, oracle_h) = brute_force_mi(&x, &x, 4);
        let mi_xy = mutual_information(&x, &y, 4).unwrap();
        let mi_yx = mutual_information(&y, &x, 4).unwrap();
        let mi_xx = mutual_information(&x, &x, 4).unwrap();
        mi_worst = mi_worst.max((mi_xy - oracle_mi).abs()).max((mi_xx - oracle_self).abs());
        sym_worst = sym_worst.max((mi_xy - mi_yx).abs());
        ent_worst = ent_worst
            .max((mi_xx - oracle_h).abs())
            .max((entropy(&x, 4).unwrap() - oracle_h).abs());
    }
    if mi_worst >= 1e-12 || sym_worst >= 1e-12 || ent_worst >= 1e-9 {
        failures.push(format!("MI oracle {mi_worst:e}, sym {sym_worst:e}, H {ent_worst:e}"));
    }

    let q_self = q_index(&a, &a, 8).unwrap();
    if (q_self - 1.0).abs() >= 1e-12 {
        failures.push(format!("Q(A,A) = {q_self}"));
    }

    let mut rows = 0;
    for seed in 0..4 {
        let scene = synth_scene(100 + seed, 64, 4, 3).unwrap();
        let config = EvalConfig {
            q_window: 4 + 2 * seed as usize,
            ..Default::default()
        };
        for row in run_evaluation(&config, &scene).unwrap() {
            match row.outcome {
                Ok(r) => {
                    if let Err(e) = r.check_invariants() {
                        failures.push(format!("{}: {e}", row.method));
                    }
                    rows += 1;
                }
                Err(e) => failures.push(format!("{}: {e}", row.method)),
            }
        }
    }
    if rows < 20 {
        failures.push(format!("only {rows} report rows"));
    }

    report(
        4,
        "CC/MI/Q identities and report invariants",
        failures.is_empty(),
        if failures.is_empty() {
            format!("MI oracle diff {mi_worst:.1e}, {rows} rows checked")
        } else {
            failures.join("; ")
        },
    );
}

#[test]
fn ac5_independent_noise_mi() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = uniform(256, 256, 0.0, 1.0, &mut rng);
    let b = uniform(256, 256, 0.0, 1.0, &mut rng);
    let mi = mutual_information(&a, &b, 64).unwrap();
    report(5, "independent uniform bands have MI < 0.05", mi < 0.05, format!("MI {mi:.4}"));
}

fn pansharp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pansharp"))
}

fn run_cli_evaluate(dir: &Path, tag: &str) -> Vec<u8> {
    let out = dir.join(format!("report_{tag}.csv"));
    let images = dir.join(format!("images_{tag}"));
    let status = pansharp()
        .args(["evaluate", "--ms"])
        .arg(dir.join("scene/ms.txt"))
        .arg("--pan")
        .arg(dir.join("scene/pan.pgm"))
        .arg("--out")
        .arg(&out)
        .arg("--save-images")
        .arg(&images)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    std::fs::read(out).unwrap()
}

#[test]
fn ac6_default_scene_pipeline() {
    let start = Instant::now();
    let mut failures = Vec::new();

    // Library path on the in-memory scene.
    let scene = synth_scene(42, 256, 4, 3).unwrap();
    let config = EvalConfig::default();
    let rows = run_evaluation(&config, &scene).unwrap();
    let csv_a = render_csv(&rows);
    let csv_b = render_csv(&run_evaluation(&config, &synth_scene(42, 256, 4, 3).unwrap()).unwrap());
    if csv_a != csv_b {
        failures.push("library CSV differs between runs".to_owned());
    }
    if rows.len() != 6 {
        failures.push(format!("{} rows", rows.len()));
    }
    let mut cc = std::collections::HashMap::new();
    for row in &rows {
        match &row.outcome {
            Ok(r) => {
                if let Err(e) = r.check_invariants() {
                    failures.push(format!("{}: {e}", row.method));
                }
                cc.insert(row.method, r.cc_avg);
            }
            Err(e) => failures.push(format!("{}: {e}", row.method)),
        }
    }
    let whpm = cc.get(&FusionMethod::WaveletHpm).copied().unwrap_or(f64::NAN);
    let hpm = cc.get(&FusionMethod::HpmBoxcar).copied().unwrap_or(f64::NAN);
    if !(whpm >= hpm) {
        failures.push(format!("whpm cc {whpm} < hpm cc {hpm}"));
    }

    // Command-line path through quantized files, run twice.
    let dir = tempfile::tempdir().unwrap();
    let synth = pansharp()
        .args(["synth", "--seed", "42", "--size", "256", "--ratio", "4", "--bands", "3", "--out"])
        .arg(dir.path().join("scene"))
        .output()
        .unwrap();
    assert!(synth.status.success());
    let first = run_cli_evaluate(dir.path(), "a");
    let second = run_cli_evaluate(dir.path(), "b");
    if first != second {
        failures.push("CLI CSV differs between runs".to_owned());
    }
    let text = String::from_utf8(first).unwrap();
    if text.lines().count() != 7 || text.contains("NaN") {
        failures.push(format!("unexpected CLI report:\n{text}"));
    }
    let cli_cc = |name: &str| -> f64 {
        text.lines()
            .find(|l| l.starts_with(&format!("{name},")))
            .and_then(|l| l.split(',').nth(1))
            .and_then(|v| v.parse().ok())
            .unwrap_or(f64::NAN)
    };
    if !(cli_cc("whpm") >= cli_cc("hpm")) {
        failures.push(format!("CLI whpm cc {} < hpm cc {}", cli_cc("whpm"), cli_cc("hpm")));
    }
    for tag in ["a", "b"] {
        for m in FusionMethod::ALL {
            let p = dir.path().join(format!("images_{tag}/{}.txt", m.name()));
            if load_multiband(&p).map(|img| img.dims()) .ok() != Some((256, 256)) {
                failures.push(format!("missing fused image {}", p.display()));
            }
        }
    }

    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(30) {
        failures.push(format!("took {elapsed:.2?}"));
    }
    report(
        6,
        "default synthetic scene: six valid deterministic rows, WHPM cc >= HPM cc",
        failures.is_empty(),
        if failures.is_empty() {
            format!("whpm cc {whpm:.4} vs hpm {hpm:.4}, {elapsed:.2?}")
        } else {
            failures.join("; ")
        },
    );
}

#[test]
fn ac7_brovey_ratios_and_ihs_intensity() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let params = FusionParams::default();
    let (mut ratio_err, mut ihs_err): (f64, f64) = (0.0, 0.0);
    for seed in 0..5 {
        let scene = synth_scene(700 + seed, 64, 4, 3).unwrap();
        let ms_up = scene.ms.map_bands(|b| upsample(b, 4)).unwrap();
        let eps = params.epsilon_for(&scene.pan);

        let fused = fuse_brovey(&ms_up, &scene.pan, &params).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let (fi, fj) = (fused.band(i).samples(), fused.band(j).samples());
                let (mi, mj) = (ms_up.band(i).samples(), ms_up.band(j).samples());
                for k in 0..fi.len() {
                    if mj[k] > eps && fj[k] > eps {
                        ratio_err = ratio_err.max((fi[k] / fj[k] - mi[k] / mj[k]).abs());
                    }
                }
            }
        }

        let pan = scene.pan.map(|v| v + rng.gen_range(-5.0..5.0)).unwrap();
        let fused = fuse_ihs(&ms_up, &pan, &params).unwrap();
        let i_band = ms_up.band(0)
            .zip_map(ms_up.band(1), |a, b| a + b)
            .unwrap()
            .zip_map(ms_up.band(2), |s, c| (s + c) / 3.0)
            .unwrap();
        let matched = histogram_match(&pan, &i_band).unwrap();
        let f_mean = fused.band(0)
            .zip_map(fused.band(1), |a, b| a + b)
            .unwrap()
            .zip_map(fused.band(2), |s, c| (s + c) / 3.0)
            .unwrap();
        ihs_err = ihs_err.max(f_mean.max_abs_diff(&matched));
    }
    report(
        7,
        "Brovey preserves band ratios; IHS intensity equals matched PAN",
        ratio_err < 1e-9 && ihs_err < 1e-9,
        format!("ratio {ratio_err:.3e}, intensity {ihs_err:.3e}"),
    );
}

#[test]
fn ac8_pca_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for bands in 3..=8 {
        for _ in 0..3 {
            let ms = MultiBandImage::new(
                (0..bands).map(|_| uniform(40, 36, 10.0, 250.0, &mut rng)).collect(),
            )
            .unwrap();
            let basis = PcaBasis::fit(&ms).unwrap();
            let back = basis.inverse(&basis.forward(&ms).unwrap()).unwrap();
            worst = worst.max(back.max_abs_diff(&ms));
        }
    }
    report(8, "PCA forward/inverse reproduces MS", worst < 1e-9, format!("max abs diff {worst:.3e}"));
}

#[test]
fn ac9_file_round_trip_and_mismatch_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut failures = Vec::new();

    for (depth, max) in [(BitDepth::Eight, 255u32), (BitDepth::Sixteen, 65535)] {
        let band = RasterBand::from_fn(37, 23, |_, _| f64::from(rng.gen_range(0..=max))).unwrap();
        let p = dir.path().join(format!("b{max}.pgm"));
        save_band(&band, &p, depth).unwrap();
        if load_band(&p).unwrap() != band {
            failures.push(format!("{max}-maxval PGM round trip"));
        }
        let img = MultiBandImage::new(vec![band.clone(), band.map(|v| (max as f64) - v).unwrap()]).unwrap();
        let m = dir.path().join(format!("img{max}.txt"));
        save_multiband(&img, &m, depth).unwrap();
        if load_multiband(&m).unwrap() != img {
            failures.push(format!("{max}-maxval manifest round trip"));
        }
    }

    let plane = RasterBand::from_fn(19, 11, |_, _| f64::from(rng.gen::<f32>() - 0.5)).unwrap();
    let raw = dir.path().join("plane.raw");
    export_f32_raw(&plane, &raw).unwrap();
    if import_f32_raw(&raw).unwrap() != plane {
        failures.push("f32 raw round trip".to_owned());
    }

    save_band(&RasterBand::filled(8, 8, 1.0).unwrap(), dir.path().join("a.pgm"), BitDepth::Eight).unwrap();
    save_band(&RasterBand::filled(8, 6, 1.0).unwrap(), dir.path().join("b.pgm"), BitDepth::Eight).unwrap();
    save_band(&RasterBand::filled(32, 32, 1.0).unwrap(), dir.path().join("pan.pgm"), BitDepth::Eight).unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "band=a.pgm\nband=b.pgm\n").unwrap();
    let code = pansharp()
        .args(["fuse", "--method", "whpm", "--ms"])
        .arg(&bad)
        .arg("--pan")
        .arg(dir.path().join("pan.pgm"))
        .arg("--out")
        .arg(dir.path().join("out.txt"))
        .output()
        .unwrap()
        .status
        .code();
    if code != Some(2) {
        failures.push(format!("mismatched manifest exit code {code:?}"));
    }

    report(
        9,
        "lossless band/manifest/raw round trips; mismatched manifest exits 2",
        failures.is_empty(),
        if failures.is_empty() { "ok".to_owned() } else { failures.join("; ") },
    );
}
