//! Raster containers and the resampling / filtering primitives shared by the
//! fusion and metric code.
//!
//! Every operation here is a pure function: inputs are borrowed and a new
//! band is returned. Convolutions extend the image by half-sample mirror
//! reflection (`x[-1] = x[0]`) unless a caller explicitly asks for periodic
//! wrap. Under that rule any normalized kernel preserves the global mean.

use crate::error::{Error, Result};

/// A single band of real-valued samples stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterBand {
    width: usize,
    height: usize,
    samples: Vec<f64>,
}

impl RasterBand {
    pub fn new(width: usize, height: usize, samples: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param(format!(
                "band dimensions must be positive, got {width}x{height}"
            )));
        }
        if samples.len() != width * height {
            return Err(Error::structural(format!(
                "{} samples supplied for a {width}x{height} band",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!(
                "non-finite sample at ({}, {})",
                i % width,
                i / width
            )));
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    /// Band with every sample set to `value`.
    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut samples = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                samples.push(f(x, y));
            }
        }
        Self::new(width, height, samples)
    }

    // Callers inside the crate guarantee the invariants (dims come from an
    // existing band, values are finite combinations of finite samples).
    pub(crate) fn from_parts(width: usize, height: usize, samples: Vec<f64>) -> Self {
        debug_assert_eq!(samples.len(), width * height);
        Self {
            width,
            height,
            samples,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    #[inline]
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.samples[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Population standard deviation.
    pub fn std_dev(&self) -> f64 {
        let m = self.mean();
        let var = self
            .samples
            .iter()
            .map(|v| (v - m) * (v - m))
            .sum::<f64>()
            / self.samples.len() as f64;
        var.sqrt()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Applies `f` to every sample. Non-finite results are rejected.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.samples.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Pixelwise combination of two equally sized bands.
    pub fn zip_map(&self, other: &RasterBand, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.require_same_dims(other)?;
        Self::new(
            self.width,
            self.height,
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn require_same_dims(&self, other: &RasterBand) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::structural(format!(
                "band dimensions differ: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    /// Largest absolute pixelwise difference; bands must share dims.
    pub fn max_abs_diff(&self, other: &RasterBand) -> f64 {
        assert_eq!(self.dims(), other.dims(), "max_abs_diff on mismatched bands");
        self.samples
            .iter()
            .zip(&other.samples)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Co-registered bands sharing one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiBandImage {
    bands: Vec<RasterBand>,
}

impl MultiBandImage {
    pub fn new(bands: Vec<RasterBand>) -> Result<Self> {
        let Some(first) = bands.first() else {
            return Err(Error::param("an image needs at least one band"));
        };
        let dims = first.dims();
        if let Some((i, b)) = bands.iter().enumerate().find(|(_, b)| b.dims() != dims) {
            return Err(Error::structural(format!(
                "band {i} is {}x{} but band 0 is {}x{}",
                b.width(),
                b.height(),
                dims.0,
                dims.1
            )));
        }
        Ok(Self { bands })
    }

    pub fn bands(&self) -> &[RasterBand] {
        &self.bands
    }

    pub fn band(&self, i: usize) -> &RasterBand {
        &self.bands[i]
    }

    pub fn band_count(&self) -> usize {
        self.bands.len()
    }

    pub fn into_bands(self) -> Vec<RasterBand> {
        self.bands
    }

    pub fn width(&self) -> usize {
        self.bands[0].width()
    }

    pub fn height(&self) -> usize {
        self.bands[0].height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.bands[0].dims()
    }

    /// Applies a fallible band operation to every band.
    pub fn map_bands(&self, f: impl Fn(&RasterBand) -> Result<RasterBand>) -> Result<Self> {
        Self::new(self.bands.iter().map(f).collect::<Result<Vec<_>>>()?)
    }

    pub fn max_abs_diff(&self, other: &MultiBandImage) -> f64 {
        assert_eq!(self.band_count(), other.band_count());
        self.bands
            .iter()
            .zip(&other.bands)
            .fold(0.0, |m, (a, b)| m.max(a.max_abs_diff(b)))
    }
}

/// How samples beyond the image edge are synthesized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Border {
    /// Reflect about the pixel edge, repeating the border sample.
    #[default]
    Mirror,
    /// Wrap around (circular).
    Periodic,
}

impl Border {
    /// Maps a possibly out-of-range coordinate onto `0..n`.
    #[inline]
    pub fn index(self, i: isize, n: usize) -> usize {
        let n = n as isize;
        match self {
            Border::Periodic => i.rem_euclid(n) as usize,
            Border::Mirror => {
                let r = i.rem_euclid(2 * n);
                (if r < n { r } else { 2 * n - 1 - r }) as usize
            }
        }
    }
}

/// Normalized, point-symmetric lowpass kernel applied by direct 2-D convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2D {
    size: usize,
    weights: Vec<f64>,
}

impl Kernel2D {
    pub fn new(size: usize, weights: Vec<f64>) -> Result<Self> {
        if size == 0 || size.is_multiple_of(2) {
            return Err(Error::param(format!("kernel size must be odd, got {size}")));
        }
        if weights.len() != size * size {
            return Err(Error::structural(format!(
                "{} weights for a {size}x{size} kernel",
                weights.len()
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::param(format!("kernel weights sum to {sum}, not 1")));
        }
        let n = weights.len();
        if (0..n).any(|i| (weights[i] - weights[n - 1 - i]).abs() > 1e-15) {
            return Err(Error::param("kernel is not symmetric under 180° rotation"));
        }
        Ok(Self { size, weights })
    }

    pub fn boxcar(size: usize) -> Result<Self> {
        let w = 1.0 / (size * size) as f64;
        Self::new(size, vec![w; size * size])
    }

    /// Outer product of a 1-D tap vector with itself.
    pub fn separable(taps: &[f64]) -> Result<Self> {
        let weights = taps
            .iter()
            .flat_map(|a| taps.iter().map(move |b| a * b))
            .collect();
        Self::new(taps.len(), weights)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Direct (non-separable) convolution. Slow; intended for small kernels
    /// and for cross-checking the separable fast paths.
    pub fn apply(&self, band: &RasterBand, border: Border) -> RasterBand {
        let half = (self.size / 2) as isize;
        let (w, h) = band.dims();
        let mut out = Vec::with_capacity(band.len());
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut acc = 0.0;
                for ky in -half..=half {
                    let sy = border.index(y + ky, h);
                    for kx in -half..=half {
                        let sx = border.index(x + kx, w);
                        let k = ((ky + half) as usize) * self.size + (kx + half) as usize;
                        acc += self.weights[k] * band.get(sx, sy);
                    }
                }
                out.push(acc);
            }
        }
        RasterBand::from_parts(w, h, out)
    }
}

/// Convolves rows then columns with the same sparse 1-D filter given as
/// `(offset, weight)` pairs.
pub(crate) fn convolve_separable(
    band: &RasterBand,
    taps: &[(isize, f64)],
    border: Border,
) -> RasterBand {
    let (w, h) = band.dims();
    let src = band.samples();

    let mut rows = vec![0.0; w * h];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        let dst = &mut rows[y * w..(y + 1) * w];
        for (x, d) in dst.iter_mut().enumerate() {
            *d = taps
                .iter()
                .map(|&(off, k)| k * line[border.index(x as isize + off, w)])
                .sum();
        }
    }

    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for &(off, k) in taps {
            let sy = border.index(y as isize + off, h);
            let srow = &rows[sy * w..(sy + 1) * w];
            let drow = &mut out[y * w..(y + 1) * w];
            for (d, s) in drow.iter_mut().zip(srow) {
                *d += k * s;
            }
        }
    }
    RasterBand::from_parts(w, h, out)
}

/// Moving-average lowpass over a `window`×`window` neighborhood.
pub fn boxcar_filter(band: &RasterBand, window: usize) -> Result<RasterBand> {
    let limit = band.width().min(band.height());
    if window.is_multiple_of(2) || window < 1 || window > limit {
        return Err(Error::param(format!(
            "boxcar window must be odd and within 1..={limit}, got {window}"
        )));
    }
    if window == 1 {
        return Ok(band.clone());
    }
    let half = (window / 2) as isize;
    let k = 1.0 / window as f64;
    let taps: Vec<_> = (-half..=half).map(|o| (o, k)).collect();
    Ok(convolve_separable(band, &taps, Border::Mirror))
}

// Keys cubic convolution kernel with a = -0.5; reproduces polynomials up to
// degree 2.
fn cubic_weights(t: f64) -> [f64; 4] {
    const A: f64 = -0.5;
    let near = |d: f64| ((A + 2.0) * d - (A + 3.0)) * d * d + 1.0;
    let far = |d: f64| ((A * d - 5.0 * A) * d + 8.0 * A) * d - 4.0 * A;
    [far(1.0 + t), near(t), near(1.0 - t), far(2.0 - t)]
}

struct AxisResampler {
    // For every output coordinate, the first source index and four weights.
    taps: Vec<([usize; 4], [f64; 4])>,
}

impl AxisResampler {
    fn new(src_len: usize, factor: usize) -> Self {
        let taps = (0..src_len * factor)
            .map(|o| {
                // Pixel centers stay aligned: output center maps into source
                // pixel space at (o + 0.5) / factor - 0.5.
                let pos = (o as f64 + 0.5) / factor as f64 - 0.5;
                let base = pos.floor();
                let t = pos - base;
                let base = base as isize;
                let idx = [-1, 0, 1, 2].map(|d| Border::Mirror.index(base + d, src_len));
                (idx, cubic_weights(t))
            })
            .collect();
        Self { taps }
    }
}

/// Bicubic interpolation onto a grid `factor` times denser in each axis.
pub fn upsample(band: &RasterBand, factor: usize) -> Result<RasterBand> {
    if factor == 0 {
        return Err(Error::param("upsampling factor must be at least 1"));
    }
    if factor == 1 {
        return Ok(band.clone());
    }
    let (w, h) = band.dims();
    let (ow, oh) = (w * factor, h * factor);
    let cols = AxisResampler::new(w, factor);
    let rows = AxisResampler::new(h, factor);

    let src = band.samples();
    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for (x, (idx, wt)) in cols.taps.iter().enumerate() {
            horiz[y * ow + x] = (0..4).map(|k| wt[k] * line[idx[k]]).sum();
        }
    }

    let mut out = vec![0.0; ow * oh];
    for (y, (idx, wt)) in rows.taps.iter().enumerate() {
        let drow = &mut out[y * ow..(y + 1) * ow];
        for k in 0..4 {
            let srow = &horiz[idx[k] * ow..(idx[k] + 1) * ow];
            for (d, s) in drow.iter_mut().zip(srow) {
                *d += wt[k] * s;
            }
        }
    }
    Ok(RasterBand::from_parts(ow, oh, out))
}

/// Boxcar prefilter of width `factor` followed by decimation, i.e. the mean
/// of each non-overlapping `factor`×`factor` block.
pub fn downsample(band: &RasterBand, factor: usize) -> Result<RasterBand> {
    if factor == 0 {
        return Err(Error::param("downsampling factor must be at least 1"));
    }
    let (w, h) = band.dims();
    if w % factor != 0 || h % factor != 0 {
        return Err(Error::param(format!(
            "{w}x{h} band is not divisible by factor {factor}"
        )));
    }
    if factor == 1 {
        return Ok(band.clone());
    }
    let (ow, oh) = (w / factor, h / factor);
    let norm = 1.0 / (factor * factor) as f64;
    let mut out = vec![0.0; ow * oh];
    for y in 0..h {
        let row = &band.samples()[y * w..(y + 1) * w];
        let drow = &mut out[(y / factor) * ow..(y / factor + 1) * ow];
        for (d, block) in drow.iter_mut().zip(row.chunks_exact(factor)) {
            *d += block.iter().sum::<f64>();
        }
    }
    out.iter_mut().for_each(|v| *v *= norm);
    Ok(RasterBand::from_parts(ow, oh, out))
}

/// Affine moment match: rescales `source` so its mean and standard deviation
/// equal those of `reference`.
pub fn histogram_match(source: &RasterBand, reference: &RasterBand) -> Result<RasterBand> {
    let (ms, ss) = (source.mean(), source.std_dev());
    if !(ss > f64::EPSILON * ms.abs()) {
        return Err(Error::degenerate(
            "cannot match a band with zero standard deviation",
        ));
    }
    let (mr, sr) = (reference.mean(), reference.std_dev());
    let gain = sr / ss;
    source.map(|v| (v - ms) * gain + mr)
}
