//! Pansharpening rules.
//!
//! Every method expects the multispectral image already resampled onto the
//! panchromatic grid (see [`crate::raster::upsample`]); all outputs share the
//! PAN dimensions and the MS band count. Results are unclipped `f64`.

use std::fmt;
use std::str::FromStr;

use crate::atrous::{atrous_decompose, detail_sum};
use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigen, SquareMatrix, SymmetricEigen};
use crate::raster::{boxcar_filter, histogram_match, MultiBandImage, RasterBand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FusionMethod {
    Brovey,
    Ihs,
    Pca,
    HpmBoxcar,
    AtrousAdditive,
    WaveletHpm,
}

impl FusionMethod {
    /// Every method, in the column order of the published comparison table.
    pub const ALL: [FusionMethod; 6] = [
        FusionMethod::WaveletHpm,
        FusionMethod::HpmBoxcar,
        FusionMethod::AtrousAdditive,
        FusionMethod::Brovey,
        FusionMethod::Pca,
        FusionMethod::Ihs,
    ];

    /// Short name used on the command line and in reports.
    pub fn name(self) -> &'static str {
        match self {
            FusionMethod::Brovey => "brovey",
            FusionMethod::Ihs => "ihs",
            FusionMethod::Pca => "pca",
            FusionMethod::HpmBoxcar => "hpm",
            FusionMethod::AtrousAdditive => "awl",
            FusionMethod::WaveletHpm => "whpm",
        }
    }

    /// Position in [`FusionMethod::ALL`].
    pub fn table_rank(self) -> usize {
        Self::ALL.iter().position(|&m| m == self).unwrap()
    }
}

impl fmt::Display for FusionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FusionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::param(format!(
                    "unknown fusion method `{s}` (expected one of brovey, ihs, pca, hpm, awl, whpm)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionParams {
    /// À trous levels for the wavelet methods.
    pub levels: usize,
    /// Odd boxcar window for the boxcar HPM lowpass.
    pub boxcar_window: usize,
    /// Denominator floor. `None` selects `1e-6 * mean(PAN)`.
    pub epsilon: Option<f64>,
    /// PAN:MS linear resolution ratio.
    pub ratio: usize,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self::for_ratio(4)
    }
}

impl FusionParams {
    /// Defaults scaled to a resolution ratio: `log2(ratio)` levels (at least
    /// one) and a `2 * ratio + 1` boxcar.
    pub fn for_ratio(ratio: usize) -> Self {
        let levels = (usize::BITS - ratio.max(2).leading_zeros() - 1) as usize;
        Self {
            levels,
            boxcar_window: 2 * ratio.max(1) + 1,
            epsilon: None,
            ratio,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::param("levels must be at least 1"));
        }
        if self.boxcar_window < 3 || self.boxcar_window.is_multiple_of(2) {
            return Err(Error::param(format!(
                "boxcar window must be odd and at least 3, got {}",
                self.boxcar_window
            )));
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::param(format!("epsilon must be positive, got {eps}")));
            }
        }
        if self.ratio == 0 {
            return Err(Error::param("ratio must be at least 1"));
        }
        Ok(())
    }

    /// The denominator floor actually used for a given PAN band.
    pub fn epsilon_for(&self, pan: &RasterBand) -> f64 {
        self.epsilon.unwrap_or_else(|| {
            let e = 1e-6 * pan.mean();
            if e > 0.0 {
                e
            } else {
                f64::MIN_POSITIVE
            }
        })
    }
}

fn check_inputs(ms: &MultiBandImage, pan: &RasterBand, params: &FusionParams) -> Result<()> {
    params.validate()?;
    if ms.dims() != pan.dims() {
        return Err(Error::structural(format!(
            "MS is {}x{} but PAN is {}x{}; upsample MS onto the PAN grid first",
            ms.width(),
            ms.height(),
            pan.width(),
            pan.height()
        )));
    }
    Ok(())
}

/// `F_i = MS_i + detail * MS_i / max(lowpass, eps)` for every band.
fn modulate(
    ms: &MultiBandImage,
    detail: &RasterBand,
    lowpass: &RasterBand,
    eps: f64,
) -> Result<MultiBandImage> {
    ms.map_bands(|band| {
        let out = band
            .samples()
            .iter()
            .zip(detail.samples())
            .zip(lowpass.samples())
            .map(|((&m, &d), &l)| m + d * m / l.max(eps))
            .collect();
        RasterBand::new(band.width(), band.height(), out)
    })
}

fn add_to_each(ms: &MultiBandImage, delta: &RasterBand) -> Result<MultiBandImage> {
    ms.map_bands(|band| band.zip_map(delta, |m, d| m + d))
}

/// High-pass modulation with a boxcar lowpass.
pub fn fuse_hpm_boxcar(
    ms: &MultiBandImage,
    pan: &RasterBand,
    params: &FusionParams,
) -> Result<MultiBandImage> {
    check_inputs(ms, pan, params)?;
    let pan_low = boxcar_filter(pan, params.boxcar_window)?;
    let detail = pan.zip_map(&pan_low, |p, l| p - l)?;
    modulate(ms, &detail, &pan_low, params.epsilon_for(pan))
}

/// Additive à trous injection: every band receives the summed PAN detail planes.
pub fn fuse_atrous_additive(
    ms: &MultiBandImage,
    pan: &RasterBand,
    params: &FusionParams,
) -> Result<MultiBandImage> {
    check_inputs(ms, pan, params)?;
    let decomp = atrous_decompose(pan, params.levels)?;
    add_to_each(ms, &detail_sum(&decomp))
}

/// High-pass modulation driven by à trous detail planes.
///
/// The PAN detail `D` is the sum of the B3 wavelet planes and the modulation
/// denominator is `PAN - D`, which telescopes to the wavelet residual. Using
/// the wavelet lowpass instead of a boxcar removes the ripple a boxcar's
/// frequency response leaves in the injected detail.
pub fn fuse_wavelet_hpm(
    ms: &MultiBandImage,
    pan: &RasterBand,
    params: &FusionParams,
) -> Result<MultiBandImage> {
    check_inputs(ms, pan, params)?;
    let decomp = atrous_decompose(pan, params.levels)?;
    let detail = detail_sum(&decomp);
    let lowpass = pan.zip_map(&detail, |p, d| p - d)?;

    let drift = lowpass.max_abs_diff(decomp.residual());
    let tol = 1e-9 * pan.max_abs().max(1.0);
    if drift > tol {
        return Err(Error::structural(format!(
            "PAN minus detail differs from the wavelet residual by {drift:e}"
        )));
    }
    modulate(ms, &detail, &lowpass, params.epsilon_for(pan))
}

fn band_mean(ms: &MultiBandImage) -> RasterBand {
    let (w, h) = ms.dims();
    let mut acc = vec![0.0; w * h];
    for band in ms.bands() {
        for (a, v) in acc.iter_mut().zip(band.samples()) {
            *a += v;
        }
    }
    let n = ms.band_count() as f64;
    acc.iter_mut().for_each(|v| *v /= n);
    RasterBand::from_parts(w, h, acc)
}

/// Brovey ratio transform against the arithmetic band mean.
pub fn fuse_brovey(
    ms: &MultiBandImage,
    pan: &RasterBand,
    params: &FusionParams,
) -> Result<MultiBandImage> {
    check_inputs(ms, pan, params)?;
    let eps = params.epsilon_for(pan);
    let intensity = band_mean(ms);
    let gain = pan.zip_map(&intensity, |p, i| p / i.max(eps))?;
    ms.map_bands(|band| band.zip_map(&gain, |m, g| m * g))
}

// A constant PAN carries no spatial pattern to rescale; it collapses to the
// reference mean.
fn match_or_flatten(pan: &RasterBand, reference: &RasterBand) -> Result<RasterBand> {
    match histogram_match(pan, reference) {
        Err(Error::Degenerate(_)) if pan.std_dev() <= f64::EPSILON * pan.mean().abs() => {
            RasterBand::filled(pan.width(), pan.height(), reference.mean())
        }
        other => other,
    }
}

/// Linear-intensity IHS substitution in its additive form.
pub fn fuse_ihs(
    ms: &MultiBandImage,
    pan: &RasterBand,
    params: &FusionParams,
) -> Result<MultiBandImage> {
    check_inputs(ms, pan, params)?;
    if ms.band_count() != 3 {
        return Err(Error::param(format!(
            "IHS fusion needs exactly 3 bands, got {}",
            ms.band_count()
        )));
    }
    let intensity = band_mean(ms);
    let matched = match_or_flatten(pan, &intensity)?;
    let delta = matched.zip_map(&intensity, |p, i| p - i)?;
    add_to_each(ms, &delta)
}

/// Principal-component basis of a multiband image.
#[derive(Debug, Clone)]
pub struct PcaBasis {
    means: Vec<f64>,
    eigen: SymmetricEigen,
}

impl PcaBasis {
    /// Eigendecomposition of the band covariance, eigenvalues descending,
    /// each loading vector oriented to a positive component sum.
    pub fn fit(ms: &MultiBandImage) -> Result<Self> {
        let n = ms.band_count();
        if n < 2 {
            return Err(Error::param("PCA fusion needs at least 2 bands"));
        }
        let means: Vec<f64> = ms.bands().iter().map(RasterBand::mean).collect();
        let pixels = ms.bands()[0].len() as f64;
        let mut cov = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let (a, b) = (ms.band(i).samples(), ms.band(j).samples());
                let s: f64 = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| (x - means[i]) * (y - means[j]))
                    .sum();
                cov.set(i, j, s / pixels);
                cov.set(j, i, s / pixels);
            }
        }

        let mut eigen = jacobi_eigen(&cov);
        let largest = eigen.values[0];
        let smallest = eigen.values[n - 1];
        if !(largest > 0.0) || !(smallest > 1e-12 * largest) {
            return Err(Error::degenerate(format!(
                "band covariance is singular (eigenvalues {largest:e} .. {smallest:e})"
            )));
        }
        for k in 0..n {
            let col = eigen.vector(k);
            let sum: f64 = col.iter().sum();
            let flip = if sum != 0.0 {
                sum < 0.0
            } else {
                col.iter().find(|v| **v != 0.0).is_some_and(|v| *v < 0.0)
            };
            if flip {
                for r in 0..n {
                    eigen.vectors.set(r, k, -eigen.vectors.get(r, k));
                }
            }
        }
        Ok(Self { means, eigen })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigen.values
    }

    /// Loading vector of component `k` (0 = PC1).
    pub fn loading(&self, k: usize) -> Vec<f64> {
        self.eigen.vector(k)
    }

    /// Projects centered pixels onto the principal axes.
    pub fn forward(&self, ms: &MultiBandImage) -> Result<Vec<RasterBand>> {
        let n = self.means.len();
        if ms.band_count() != n {
            return Err(Error::structural(format!(
                "basis has {n} bands, image has {}",
                ms.band_count()
            )));
        }
        let (w, h) = ms.dims();
        let mut comps = vec![vec![0.0; w * h]; n];
        for (i, band) in ms.bands().iter().enumerate() {
            let mu = self.means[i];
            for (k, comp) in comps.iter_mut().enumerate() {
                let v = self.eigen.vectors.get(i, k);
                for (c, x) in comp.iter_mut().zip(band.samples()) {
                    *c += v * (x - mu);
                }
            }
        }
        Ok(comps
            .into_iter()
            .map(|c| RasterBand::from_parts(w, h, c))
            .collect())
    }

    pub fn inverse(&self, components: &[RasterBand]) -> Result<MultiBandImage> {
        let n = self.means.len();
        if components.len() != n {
            return Err(Error::structural(format!(
                "basis has {n} components, got {}",
                components.len()
            )));
        }
        let (w, h) = components[0].dims();
        let mut bands = Vec::with_capacity(n);
        for i in 0..n {
            let mut out = vec![self.means[i]; w * h];
            for (k, comp) in components.iter().enumerate() {
                comp.require_same_dims(&components[0])?;
                let v = self.eigen.vectors.get(i, k);
                for (o, c) in out.iter_mut().zip(comp.samples()) {
                    *o += v * c;
                }
            }
            bands.push(RasterBand::new(w, h, out)?);
        }
        MultiBandImage::new(bands)
    }
}

/// PC1 substitution with a histogram-matched PAN.
pub fn fuse_pca(
    ms: &MultiBandImage,
    pan: &RasterBand,
    params: &FusionParams,
) -> Result<MultiBandImage> {
    check_inputs(ms, pan, params)?;
    let basis = PcaBasis::fit(ms)?;
    let mut comps = basis.forward(ms)?;
    comps[0] = histogram_match(pan, &comps[0])?;
    basis.inverse(&comps)
}

pub fn fuse(
    method: FusionMethod,
    ms: &MultiBandImage,
    pan: &RasterBand,
    params: &FusionParams,
) -> Result<MultiBandImage> {
    match method {
        FusionMethod::Brovey => fuse_brovey(ms, pan, params),
        FusionMethod::Ihs => fuse_ihs(ms, pan, params),
        FusionMethod::Pca => fuse_pca(ms, pan, params),
        FusionMethod::HpmBoxcar => fuse_hpm_boxcar(ms, pan, params),
        FusionMethod::AtrousAdditive => fuse_atrous_additive(ms, pan, params),
        FusionMethod::WaveletHpm => fuse_wavelet_hpm(ms, pan, params),
    }
}
