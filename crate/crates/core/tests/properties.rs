use pansharp_core::atrous::{atrous_decompose, detail_sum};
use pansharp_core::metrics::{correlation, mutual_information, q_index};
use pansharp_core::raster::{boxcar_filter, downsample, histogram_match, upsample};
use pansharp_core::{fuse, FusionMethod, FusionParams, MultiBandImage, RasterBand};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise(w: usize, h: usize, lo: f64, hi: f64, seed: u64) -> RasterBand {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RasterBand::from_fn(w, h, |_, _| rng.gen_range(lo..hi)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn resample_round_trip_keeps_constants(v in -1e4f64..1e4, w in 1usize..12, h in 1usize..12, f in 1usize..6) {
        let c = RasterBand::filled(w, h, v).unwrap();
        let rt = downsample(&upsample(&c, f).unwrap(), f).unwrap();
        prop_assert!(rt.max_abs_diff(&c) < 1e-9 * v.abs().max(1.0));
    }

    #[test]
    fn downsample_and_boxcar_keep_mean(seed: u64, f in 1usize..5, half in 0usize..4) {
        let x = noise(8 * f, 8 * f, 0.0, 100.0, seed);
        prop_assert!((downsample(&x, f).unwrap().mean() - x.mean()).abs() < 1e-9);
        let window = 2 * half + 1;
        prop_assert!((boxcar_filter(&x, window).unwrap().mean() - x.mean()).abs() < 1e-9);
    }

    #[test]
    fn histogram_match_is_idempotent(seed: u64) {
        let src = noise(20, 20, 0.0, 1.0, seed);
        let reference = noise(20, 20, 50.0, 90.0, seed.wrapping_add(1));
        let once = histogram_match(&src, &reference).unwrap();
        let twice = histogram_match(&once, &reference).unwrap();
        prop_assert!(twice.max_abs_diff(&once) < 1e-9);
    }

    #[test]
    fn correlation_affine_invariance(seed: u64, a in 0.01f64..100.0, b in -100.0f64..100.0) {
        let x = noise(16, 16, 0.0, 1.0, seed);
        let y = noise(16, 16, 0.0, 1.0, seed ^ 0xabcdef);
        let base = correlation(&x, &y).unwrap();
        let moved = correlation(&x.map(|v| a * v + b).unwrap(), &y).unwrap();
        prop_assert!((base - moved).abs() < 1e-12);
        let flipped = correlation(&x.map(|v| -v).unwrap(), &y).unwrap();
        prop_assert!((base + flipped).abs() < 1e-12);
    }

    #[test]
    fn mi_and_q_are_symmetric(seed: u64, bins in 2usize..80) {
        let x = noise(24, 24, 0.0, 1.0, seed);
        let y = x.zip_map(&noise(24, 24, 0.0, 1.0, seed ^ 7), |p, q| p * p + q).unwrap();
        let xy = mutual_information(&x, &y, bins).unwrap();
        prop_assert!(xy >= -1e-12);
        prop_assert!((xy - mutual_information(&y, &x, bins).unwrap()).abs() < 1e-12);
        let q = q_index(&x, &y, 8).unwrap();
        prop_assert!((q - q_index(&y, &x, 8).unwrap()).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&q));
    }

    #[test]
    fn whpm_denominator_identity(seed: u64, levels in 1usize..=3) {
        let pan = noise(40, 40, 0.0, 1000.0, seed);
        let d = atrous_decompose(&pan, levels).unwrap();
        let low = pan.zip_map(&detail_sum(&d), |p, s| p - s).unwrap();
        prop_assert!(low.max_abs_diff(d.residual()) < 1e-9);
    }
}

#[test]
fn constant_pan_equal_to_intensity_is_identity() {
    // Flat MS whose band mean equals the constant PAN.
    let ms = MultiBandImage::new(vec![
        RasterBand::filled(32, 32, 80.0).unwrap(),
        RasterBand::filled(32, 32, 100.0).unwrap(),
        RasterBand::filled(32, 32, 120.0).unwrap(),
    ])
    .unwrap();
    let pan = RasterBand::filled(32, 32, 100.0).unwrap();
    for m in [
        FusionMethod::Brovey,
        FusionMethod::Ihs,
        FusionMethod::HpmBoxcar,
        FusionMethod::AtrousAdditive,
        FusionMethod::WaveletHpm,
    ] {
        let f = fuse(m, &ms, &pan, &FusionParams::default()).unwrap();
        assert!(f.max_abs_diff(&ms) < 1e-9, "{m}");
    }
    // Flat MS has no principal axes to substitute into.
    assert!(fuse(FusionMethod::Pca, &ms, &pan, &FusionParams::default()).is_err());
}

#[test]
fn whpm_modulation_identity_where_guard_inactive() {
    // F_i * L == MS_i * PAN wherever L = PAN - Σw exceeds epsilon.
    let ms = MultiBandImage::new((0..3).map(|s| noise(48, 48, 10.0, 200.0, s)).collect()).unwrap();
    let pan = noise(48, 48, 50.0, 400.0, 99);
    let params = FusionParams::default();
    let eps = params.epsilon_for(&pan);
    let low = atrous_decompose(&pan, params.levels).unwrap().residual().clone();
    let f = fuse(FusionMethod::WaveletHpm, &ms, &pan, &params).unwrap();
    let mut checked = 0;
    for (fb, mb) in f.bands().iter().zip(ms.bands()) {
        for i in 0..fb.len() {
            let l = low.samples()[i];
            if l > eps {
                let lhs = fb.samples()[i] * l;
                let rhs = mb.samples()[i] * pan.samples()[i];
                assert!((lhs - rhs).abs() <= 1e-6 * rhs.abs());
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 3 * 48 * 48);
}

#[test]
fn guard_clamps_zero_denominators() {
    // PAN is dark except one bright pixel: far from it the lowpass is exactly
    // zero, the clamp engages, and the zero detail leaves MS untouched.
    let mut samples = vec![0.0; 32 * 32];
    samples[16 * 32 + 16] = 100.0;
    let pan = RasterBand::new(32, 32, samples).unwrap();
    let ms = MultiBandImage::new(vec![noise(32, 32, 1.0, 2.0, 1); 2]).unwrap();
    let params = FusionParams { boxcar_window: 3, levels: 1, ..Default::default() };
    for m in [FusionMethod::HpmBoxcar, FusionMethod::WaveletHpm] {
        let f = fuse(m, &ms, &pan, &params).unwrap();
        for (fb, mb) in f.bands().iter().zip(ms.bands()) {
            assert!(fb.samples().iter().all(|v| v.is_finite()));
            assert_eq!(fb.get(2, 2), mb.get(2, 2), "{m}");
        }
    }
}
