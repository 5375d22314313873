//! Fusion quality metrics: Pearson correlation, histogram mutual information,
//! the universal image quality index, and the no-reference QNR score.

use crate::error::{Error, Result};
use crate::fusion::FusionMethod;
use crate::raster::{downsample, MultiBandImage, RasterBand};

/// Pearson linear correlation.
pub fn correlation(a: &RasterBand, b: &RasterBand) -> Result<f64> {
    a.require_same_dims(b)?;
    let (ma, mb) = (a.mean(), b.mean());
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.samples().iter().zip(b.samples()) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::degenerate("correlation of a zero-variance band"));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

fn check_triplet(fused: &MultiBandImage, ms_up: &MultiBandImage, pan: &RasterBand) -> Result<()> {
    if fused.band_count() != ms_up.band_count() {
        return Err(Error::structural(format!(
            "fused image has {} bands, reference MS has {}",
            fused.band_count(),
            ms_up.band_count()
        )));
    }
    if fused.dims() != ms_up.dims() || fused.dims() != pan.dims() {
        return Err(Error::structural("fused, MS and PAN must share one grid"));
    }
    Ok(())
}

/// Average of a pairwise score against PAN and against each band's own MS.
fn averaged(
    fused: &MultiBandImage,
    ms_up: &MultiBandImage,
    pan: &RasterBand,
    score: impl Fn(&RasterBand, &RasterBand) -> Result<f64>,
) -> Result<f64> {
    check_triplet(fused, ms_up, pan)?;
    let n = fused.band_count() as f64;
    let mut vs_pan = 0.0;
    let mut vs_ms = 0.0;
    for (f, m) in fused.bands().iter().zip(ms_up.bands()) {
        vs_pan += score(f, pan)?;
        vs_ms += score(f, m)?;
    }
    Ok(0.5 * (vs_pan / n + vs_ms / n))
}

/// `½ [mean_i CC(F_i, PAN) + mean_i CC(F_i, MS_i)]`
pub fn avg_correlation(
    fused: &MultiBandImage,
    ms_up: &MultiBandImage,
    pan: &RasterBand,
) -> Result<f64> {
    averaged(fused, ms_up, pan, correlation)
}

/// Joint histogram of two bands, each binned linearly over its own range.
#[derive(Debug, Clone)]
pub struct JointHistogram {
    bins: usize,
    counts: Vec<u64>,
    marginal_a: Vec<u64>,
    marginal_b: Vec<u64>,
    total: u64,
}

/// Bin index of every sample: linear over `[min, max]`, max in the top bin.
pub fn bin_indices(band: &RasterBand, bins: usize) -> Vec<usize> {
    let (lo, hi) = band.min_max();
    let span = hi - lo;
    if span <= 0.0 {
        return vec![0; band.len()];
    }
    let scale = bins as f64 / span;
    band.samples()
        .iter()
        .map(|&v| (((v - lo) * scale) as usize).min(bins - 1))
        .collect()
}

impl JointHistogram {
    pub fn new(a: &RasterBand, b: &RasterBand, bins: usize) -> Result<Self> {
        a.require_same_dims(b)?;
        if bins < 2 {
            return Err(Error::param(format!("histogram needs at least 2 bins, got {bins}")));
        }
        let ia = bin_indices(a, bins);
        let ib = bin_indices(b, bins);
        let mut counts = vec![0u64; bins * bins];
        let mut marginal_a = vec![0u64; bins];
        let mut marginal_b = vec![0u64; bins];
        for (&x, &y) in ia.iter().zip(&ib) {
            counts[x * bins + y] += 1;
            marginal_a[x] += 1;
            marginal_b[y] += 1;
        }
        Ok(Self {
            bins,
            counts,
            marginal_a,
            marginal_b,
            total: a.len() as u64,
        })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Count for (bin of `a`, bin of `b`).
    pub fn count(&self, x: usize, y: usize) -> u64 {
        self.counts[x * self.bins + y]
    }

    pub fn marginal_a(&self) -> &[u64] {
        &self.marginal_a
    }

    pub fn marginal_b(&self) -> &[u64] {
        &self.marginal_b
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Mutual information in nats.
    pub fn mutual_information(&self) -> f64 {
        let n = self.total as f64;
        let mut mi = 0.0;
        for x in 0..self.bins {
            let pa = self.marginal_a[x];
            if pa == 0 {
                continue;
            }
            for y in 0..self.bins {
                let c = self.counts[x * self.bins + y];
                if c == 0 {
                    continue;
                }
                let pb = self.marginal_b[y];
                // p_ab / (p_a p_b) = c n / (pa pb)
                mi += (c as f64 / n) * ((c as f64 * n) / (pa as f64 * pb as f64)).ln();
            }
        }
        mi
    }
}

pub fn mutual_information(a: &RasterBand, b: &RasterBand, bins: usize) -> Result<f64> {
    Ok(JointHistogram::new(a, b, bins)?.mutual_information())
}

/// Shannon entropy (nats) of a band under the same binning as the MI.
pub fn entropy(a: &RasterBand, bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::param(format!("histogram needs at least 2 bins, got {bins}")));
    }
    let mut counts = vec![0u64; bins];
    for i in bin_indices(a, bins) {
        counts[i] += 1;
    }
    let n = a.len() as f64;
    Ok(counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum())
}

/// `½ [mean_i MI(F_i, PAN) + mean_i MI(F_i, MS_i)]`
pub fn avg_mutual_information(
    fused: &MultiBandImage,
    ms_up: &MultiBandImage,
    pan: &RasterBand,
    bins: usize,
) -> Result<f64> {
    averaged(fused, ms_up, pan, |a, b| mutual_information(a, b, bins))
}

/// Universal image quality index averaged over non-overlapping blocks.
///
/// Blocks are `window`×`window` (clamped to the image size); partial blocks at
/// the right and bottom edges are dropped, as are blocks whose denominator
/// vanishes.
pub fn q_index(a: &RasterBand, b: &RasterBand, window: usize) -> Result<f64> {
    a.require_same_dims(b)?;
    if window < 2 {
        return Err(Error::param(format!("Q-index window must be at least 2, got {window}")));
    }
    let (w, h) = a.dims();
    let (bw, bh) = (window.min(w), window.min(h));
    let npx = (bw * bh) as f64;
    let mut sum = 0.0;
    let mut used = 0usize;

    for by in (0..=h - bh).step_by(bh) {
        for bx in (0..=w - bw).step_by(bw) {
            let (mut sa, mut sb) = (0.0, 0.0);
            for y in by..by + bh {
                for x in bx..bx + bw {
                    sa += a.get(x, y);
                    sb += b.get(x, y);
                }
            }
            let (ma, mb) = (sa / npx, sb / npx);
            let (mut vaa, mut vbb, mut vab) = (0.0, 0.0, 0.0);
            for y in by..by + bh {
                for x in bx..bx + bw {
                    let (da, db) = (a.get(x, y) - ma, b.get(x, y) - mb);
                    vaa += da * da;
                    vbb += db * db;
                    vab += da * db;
                }
            }
            let (vaa, vbb, vab) = (vaa / npx, vbb / npx, vab / npx);
            let den = (vaa + vbb) * (ma * ma + mb * mb);
            if den > 0.0 {
                sum += 4.0 * vab * ma * mb / den;
                used += 1;
            }
        }
    }
    if used == 0 {
        return Err(Error::degenerate("every Q-index block is flat"));
    }
    Ok(sum / used as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QnrParams {
    pub ratio: usize,
    pub q_window: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for QnrParams {
    fn default() -> Self {
        Self {
            ratio: 4,
            q_window: 8,
            alpha: 1.0,
            beta: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QnrScore {
    pub d_lambda: f64,
    pub d_s: f64,
    pub qnr: f64,
}

/// No-reference quality: spectral distortion from inter-band Q drift, spatial
/// distortion from band-to-PAN Q drift, combined as
/// `(1 - D_λ)^α (1 - D_s)^β`.
pub fn qnr(
    fused: &MultiBandImage,
    ms_orig: &MultiBandImage,
    pan: &RasterBand,
    params: &QnrParams,
) -> Result<QnrScore> {
    let n = fused.band_count();
    if ms_orig.band_count() != n {
        return Err(Error::structural(format!(
            "fused image has {n} bands, original MS has {}",
            ms_orig.band_count()
        )));
    }
    if fused.dims() != pan.dims() {
        return Err(Error::structural("fused image and PAN must share one grid"));
    }
    let r = params.ratio;
    if r == 0 || ms_orig.width() * r != pan.width() || ms_orig.height() * r != pan.height() {
        return Err(Error::structural(format!(
            "PAN {}x{} is not the MS grid {}x{} scaled by {r}",
            pan.width(),
            pan.height(),
            ms_orig.width(),
            ms_orig.height()
        )));
    }
    let win = params.q_window;

    let mut d_lambda = 0.0;
    if n > 1 {
        for i in 0..n {
            for j in i + 1..n {
                let qf = q_index(fused.band(i), fused.band(j), win)?;
                let qm = q_index(ms_orig.band(i), ms_orig.band(j), win)?;
                // Q is symmetric, so each unordered pair stands for two terms.
                d_lambda += 2.0 * (qf - qm).abs();
            }
        }
        d_lambda /= (n * (n - 1)) as f64;
    }

    let pan_low = downsample(pan, r)?;
    let mut d_s = 0.0;
    for i in 0..n {
        let qf = q_index(fused.band(i), pan, win)?;
        let qm = q_index(ms_orig.band(i), &pan_low, win)?;
        d_s += (qf - qm).abs();
    }
    d_s /= n as f64;

    let qnr = (1.0 - d_lambda).powf(params.alpha) * (1.0 - d_s).powf(params.beta);
    Ok(QnrScore {
        d_lambda,
        d_s,
        qnr,
    })
}

/// One row of the method comparison table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub method: FusionMethod,
    pub cc_avg: f64,
    pub mi_avg: f64,
    pub d_lambda: f64,
    pub d_s: f64,
    pub qnr: f64,
}

impl MetricsReport {
    /// Checks value ranges and the QNR product identity (α = β = 1).
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(-1.0..=1.0).contains(&self.cc_avg) {
            return Err(format!("cc_avg {} outside [-1, 1]", self.cc_avg));
        }
        if !(self.mi_avg >= -1e-12) {
            return Err(format!("mi_avg {} is negative", self.mi_avg));
        }
        for (name, v) in [("d_lambda", self.d_lambda), ("d_s", self.d_s), ("qnr", self.qnr)] {
            if !unit(v) {
                return Err(format!("{name} {v} outside [0, 1]"));
            }
        }
        let product = (1.0 - self.d_lambda) * (1.0 - self.d_s);
        if (self.qnr - product).abs() > 1e-12 {
            return Err(format!("qnr {} != (1 - d_lambda)(1 - d_s) = {product}", self.qnr));
        }
        Ok(())
    }
}
