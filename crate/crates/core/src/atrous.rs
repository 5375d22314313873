//! Undecimated ("à trous") wavelet transform with the B3 cubic-spline kernel.
//!
//! Level `j` smooths the previous approximation with `[1, 4, 6, 4, 1] / 16`
//! dilated by `2^(j-1)` (i.e. `2^(j-1) - 1` zeros between taps), applied along
//! rows then columns. The detail plane is the difference between successive
//! approximations, so the source is exactly the residual plus all planes.

use crate::error::{Error, Result};
use crate::raster::{convolve_separable, Border, RasterBand};

/// B3 cubic-spline taps.
pub const B3_TAPS: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletDecomposition {
    planes: Vec<RasterBand>,
    residual: RasterBand,
}

impl WaveletDecomposition {
    /// Assembles a decomposition from detail planes `w_1..w_n` and residual `c_n`.
    pub fn new(planes: Vec<RasterBand>, residual: RasterBand) -> Result<Self> {
        if planes.is_empty() {
            return Err(Error::structural("a decomposition needs at least one plane"));
        }
        for (j, p) in planes.iter().enumerate() {
            if p.dims() != residual.dims() {
                return Err(Error::structural(format!(
                    "plane {} is {}x{} but the residual is {}x{}",
                    j + 1,
                    p.width(),
                    p.height(),
                    residual.width(),
                    residual.height()
                )));
            }
        }
        Ok(Self { planes, residual })
    }

    pub fn planes(&self) -> &[RasterBand] {
        &self.planes
    }

    pub fn residual(&self) -> &RasterBand {
        &self.residual
    }

    pub fn levels(&self) -> usize {
        self.planes.len()
    }
}

/// Deepest level count whose dilated kernel fits inside a `min_dim` image.
pub fn max_levels(min_dim: usize) -> usize {
    let mut n = 0;
    while (1usize << n) * 4 < min_dim {
        n += 1;
    }
    n
}

fn dilated_taps(level: usize) -> Vec<(isize, f64)> {
    let step = 1isize << (level - 1);
    B3_TAPS
        .iter()
        .enumerate()
        .map(|(k, &w)| ((k as isize - 2) * step, w))
        .collect()
}

pub fn atrous_decompose(band: &RasterBand, levels: usize) -> Result<WaveletDecomposition> {
    atrous_decompose_with(band, levels, Border::Mirror)
}

pub fn atrous_decompose_with(
    band: &RasterBand,
    levels: usize,
    border: Border,
) -> Result<WaveletDecomposition> {
    if levels == 0 {
        return Err(Error::param("wavelet level count must be at least 1"));
    }
    let min_dim = band.width().min(band.height());
    let footprint = levels
        .checked_sub(1)
        .and_then(|s| 1usize.checked_shl(s as u32))
        .and_then(|d| d.checked_mul(4))
        .map(|d| d + 1);
    if footprint.is_none_or(|f| f > min_dim) {
        return Err(Error::param(format!(
            "{levels} wavelet levels do not fit a {}x{} band; at most {} levels are feasible",
            band.width(),
            band.height(),
            max_levels(min_dim)
        )));
    }

    let mut planes = Vec::with_capacity(levels);
    let mut current = band.clone();
    for j in 1..=levels {
        let smooth = convolve_separable(&current, &dilated_taps(j), border);
        let detail: Vec<f64> = current
            .samples()
            .iter()
            .zip(smooth.samples())
            .map(|(c, s)| c - s)
            .collect();
        planes.push(RasterBand::from_parts(band.width(), band.height(), detail));
        current = smooth;
    }
    WaveletDecomposition::new(planes, current)
}

/// Pixelwise sum of all detail planes.
pub fn detail_sum(decomp: &WaveletDecomposition) -> RasterBand {
    let (w, h) = decomp.residual.dims();
    let mut acc = vec![0.0; w * h];
    for p in &decomp.planes {
        for (a, v) in acc.iter_mut().zip(p.samples()) {
            *a += v;
        }
    }
    RasterBand::from_parts(w, h, acc)
}

/// Residual plus every detail plane.
pub fn atrous_reconstruct(decomp: &WaveletDecomposition) -> RasterBand {
    let details = detail_sum(decomp);
    let (w, h) = details.dims();
    let out = decomp
        .residual
        .samples()
        .iter()
        .zip(details.samples())
        .map(|(r, d)| r + d)
        .collect();
    RasterBand::from_parts(w, h, out)
}
