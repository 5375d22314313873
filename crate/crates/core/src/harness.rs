//! Evaluation harness: synthetic scenes, reduced-resolution degradation, and
//! the per-method comparison table.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fusion::{fuse, FusionMethod, FusionParams};
use crate::io::{save_multiband, BitDepth};
use crate::metrics::{avg_correlation, avg_mutual_information, qnr, MetricsReport, QnrParams};
use crate::raster::{boxcar_filter, downsample, upsample, MultiBandImage, RasterBand};

/// A co-registered MS/PAN pair, optionally with the high-resolution truth it
/// was generated from.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub ms: MultiBandImage,
    pub pan: RasterBand,
    pub truth: Option<MultiBandImage>,
    /// Convex weights mapping truth bands to PAN, for generated scenes.
    pub pan_weights: Option<Vec<f64>>,
}

impl Scene {
    pub fn new(ms: MultiBandImage, pan: RasterBand) -> Result<Self> {
        let scene = Self {
            ms,
            pan,
            truth: None,
            pan_weights: None,
        };
        scene.ratio()?;
        Ok(scene)
    }

    /// Integer PAN:MS scale factor, identical on both axes.
    pub fn ratio(&self) -> Result<usize> {
        let (mw, mh) = self.ms.dims();
        let (pw, ph) = self.pan.dims();
        if pw % mw != 0 || ph % mh != 0 || pw / mw != ph / mh {
            return Err(Error::structural(format!(
                "PAN {pw}x{ph} is not an integer multiple of MS {mw}x{mh}"
            )));
        }
        Ok(pw / mw)
    }
}

/// Deterministic test scene: `size`×`size` PAN, MS at `size / ratio`.
///
/// The truth bands share rectangles, thin lines and a smoothed texture with
/// band-specific gains, on top of per-band gradients and slow undulations.
/// MS is the block-averaged truth and PAN a positive convex combination of
/// the truth bands.
pub fn synth_scene(seed: u64, size: usize, ratio: usize, bands: usize) -> Result<Scene> {
    if ratio == 0 || size == 0 || !size.is_multiple_of(ratio) {
        return Err(Error::param(format!(
            "scene size {size} must be a positive multiple of ratio {ratio}"
        )));
    }
    if bands < 3 {
        return Err(Error::param(format!("a scene needs at least 3 bands, got {bands}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = size as f64;

    // Shared high-frequency structure.
    let mut structure = vec![0.0; size * size];
    for _ in 0..14 {
        let (x0, y0) = (rng.gen_range(0.0..s), rng.gen_range(0.0..s));
        let (rw, rh) = (rng.gen_range(0.04..0.3) * s, rng.gen_range(0.04..0.3) * s);
        let amp = rng.gen_range(-60.0..80.0);
        for y in 0..size {
            for x in 0..size {
                let (fx, fy) = (x as f64, y as f64);
                if fx >= x0 && fx < x0 + rw && fy >= y0 && fy < y0 + rh {
                    structure[y * size + x] += amp;
                }
            }
        }
    }
    for _ in 0..8 {
        // Line through (px, py) with direction angle theta, 1-2 px wide.
        let (px, py) = (rng.gen_range(0.0..s), rng.gen_range(0.0..s));
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        let half_width = rng.gen_range(0.5..1.2);
        let amp = rng.gen_range(-70.0..70.0);
        let (nx, ny) = (-theta.sin(), theta.cos());
        for y in 0..size {
            for x in 0..size {
                let d = (x as f64 - px) * nx + (y as f64 - py) * ny;
                if d.abs() <= half_width {
                    structure[y * size + x] += amp;
                }
            }
        }
    }
    let raw_texture =
        RasterBand::from_fn(size, size, |_, _| rng.gen_range(-1.0..1.0))?;
    let texture = boxcar_filter(&raw_texture, if size >= 3 { 3 } else { 1 })?;

    let mut truth = Vec::with_capacity(bands);
    for _ in 0..bands {
        let base = rng.gen_range(180.0..420.0);
        let (gx, gy) = (rng.gen_range(-60.0..60.0), rng.gen_range(-60.0..60.0));
        let (wave_amp, fx, fy, phase) = (
            rng.gen_range(10.0..40.0),
            rng.gen_range(0.5..2.5),
            rng.gen_range(0.5..2.5),
            rng.gen_range(0.0..std::f64::consts::TAU),
        );
        let structure_gain = rng.gen_range(0.6..1.4);
        let texture_gain = rng.gen_range(15.0..40.0);
        let noise_sigma = 1.5;
        let mut samples = Vec::with_capacity(size * size);
        for y in 0..size {
            for x in 0..size {
                let (u, v) = (x as f64 / s, y as f64 / s);
                let smooth = base
                    + gx * u
                    + gy * v
                    + wave_amp * (std::f64::consts::TAU * (fx * u + fy * v) + phase).sin();
                let detail = structure_gain * structure[y * size + x]
                    + texture_gain * texture.get(x, y)
                    + noise_sigma * rng.gen_range(-1.0..1.0);
                samples.push((smooth + detail).max(1.0));
            }
        }
        truth.push(RasterBand::new(size, size, samples)?);
    }
    let truth = MultiBandImage::new(truth)?;

    let raw: Vec<f64> = (0..bands).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let mut pan = vec![0.0; size * size];
    for (wgt, band) in weights.iter().zip(truth.bands()) {
        for (p, v) in pan.iter_mut().zip(band.samples()) {
            *p += wgt * v;
        }
    }
    let pan = RasterBand::new(size, size, pan)?;
    let ms = truth.map_bands(|b| downsample(b, ratio))?;

    Ok(Scene {
        ms,
        pan,
        truth: Some(truth),
        pan_weights: Some(weights),
    })
}

/// Reduced-resolution pair: both inputs block-averaged by `ratio`.
pub fn wald_degrade(
    ms: &MultiBandImage,
    pan: &RasterBand,
    ratio: usize,
) -> Result<(MultiBandImage, RasterBand)> {
    Ok((ms.map_bands(|b| downsample(b, ratio))?, downsample(pan, ratio)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub methods: Vec<FusionMethod>,
    /// `ratio` is taken from the scene; the other fields apply as given.
    pub params: FusionParams,
    pub mi_bins: usize,
    pub q_window: usize,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    /// Evaluate at reduced scale with the original MS as reference.
    pub wald: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            methods: FusionMethod::ALL.to_vec(),
            params: FusionParams::default(),
            mi_bins: 64,
            q_window: 8,
            seed: 42,
            output_dir: None,
            wald: false,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::param("no fusion methods selected"));
        }
        if self.mi_bins < 2 {
            return Err(Error::param("MI bin count must be at least 2"));
        }
        if self.q_window < 2 {
            return Err(Error::param("Q-index window must be at least 2"));
        }
        Ok(())
    }
}

/// Outcome of one method; failures are kept so a batch never aborts.
#[derive(Debug)]
pub struct EvalRow {
    pub method: FusionMethod,
    pub outcome: Result<MetricsReport>,
}

struct Prepared {
    ms_up: MultiBandImage,
    pan: RasterBand,
    // Reference for the CC/MI "spectral" half: the upsampled MS at full
    // scale, the original MS under the reduced-resolution protocol.
    reference: MultiBandImage,
    ms_native: MultiBandImage,
    ratio: usize,
}

fn prepare(config: &EvalConfig, scene: &Scene) -> Result<Prepared> {
    let ratio = scene.ratio()?;
    if config.wald {
        let (ms_low, pan_low) = wald_degrade(&scene.ms, &scene.pan, ratio)?;
        Ok(Prepared {
            ms_up: ms_low.map_bands(|b| upsample(b, ratio))?,
            pan: pan_low,
            reference: scene.ms.clone(),
            ms_native: ms_low,
            ratio,
        })
    } else {
        let ms_up = scene.ms.map_bands(|b| upsample(b, ratio))?;
        Ok(Prepared {
            reference: ms_up.clone(),
            ms_up,
            pan: scene.pan.clone(),
            ms_native: scene.ms.clone(),
            ratio,
        })
    }
}

fn evaluate_method(
    method: FusionMethod,
    config: &EvalConfig,
    prep: &Prepared,
) -> Result<MetricsReport> {
    let params = FusionParams {
        ratio: prep.ratio,
        ..config.params
    };
    let fused = fuse(method, &prep.ms_up, &prep.pan, &params)?;
    if let Some(dir) = &config.output_dir {
        save_multiband(&fused, dir.join(format!("{}.txt", method.name())), BitDepth::Sixteen)?;
    }
    let cc_avg = avg_correlation(&fused, &prep.reference, &prep.pan)?;
    let mi_avg = avg_mutual_information(&fused, &prep.reference, &prep.pan, config.mi_bins)?;
    let score = qnr(
        &fused,
        &prep.ms_native,
        &prep.pan,
        &QnrParams {
            ratio: prep.ratio,
            q_window: config.q_window,
            ..Default::default()
        },
    )?;
    Ok(MetricsReport {
        method,
        cc_avg,
        mi_avg,
        d_lambda: score.d_lambda,
        d_s: score.d_s,
        qnr: score.qnr,
    })
}

/// Fuses and scores every configured method, in configuration order.
pub fn run_evaluation(config: &EvalConfig, scene: &Scene) -> Result<Vec<EvalRow>> {
    config.validate()?;
    let prep = prepare(config, scene)?;
    if let Some(dir) = &config.output_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(config
        .methods
        .iter()
        .map(|&method| EvalRow {
            method,
            outcome: evaluate_method(method, config, &prep),
        })
        .collect())
}

pub const CSV_HEADER: &str = "method,cc_avg,mi_avg,d_lambda,d_s,qnr";

/// CSV text, one row per method; failed methods carry `NaN` values.
pub fn render_csv(rows: &[EvalRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        match &row.outcome {
            Ok(r) => writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{:.6},{:.6}",
                row.method, r.cc_avg, r.mi_avg, r.d_lambda, r.d_s, r.qnr
            ),
            Err(_) => writeln!(out, "{},NaN,NaN,NaN,NaN,NaN", row.method),
        }
        .expect("writing to a String cannot fail");
    }
    out
}

/// Aligned console table with methods as columns, in comparison-table order.
pub fn render_table(rows: &[EvalRow]) -> String {
    let mut ordered: Vec<&EvalRow> = rows.iter().collect();
    ordered.sort_by_key(|r| r.method.table_rank());

    type Getter = fn(&MetricsReport) -> f64;
    let metric_rows: [(&str, Getter); 5] = [
        ("CC", |r| r.cc_avg),
        ("MI", |r| r.mi_avg),
        ("D_lambda", |r| r.d_lambda),
        ("D_s", |r| r.d_s),
        ("QNR", |r| r.qnr),
    ];
    let mut out = String::new();
    let _ = write!(out, "{:<10}", "metric");
    for r in &ordered {
        let _ = write!(out, "{:>10}", r.method.name());
    }
    out.push('\n');
    for (label, get) in metric_rows {
        let _ = write!(out, "{label:<10}");
        for r in &ordered {
            match &r.outcome {
                Ok(rep) => {
                    let _ = write!(out, "{:>10.4}", get(rep));
                }
                Err(_) => {
                    let _ = write!(out, "{:>10}", "failed");
                }
            }
        }
        out.push('\n');
    }
    for r in &ordered {
        if let Err(e) = &r.outcome {
            let _ = writeln!(out, "{}: {e}", r.method);
        }
    }
    out
}

pub fn emit_report(rows: &[EvalRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_csv(rows)).map_err(|e| Error::io(path, e))
}
