//! Pansharpening toolkit.
//!
//! The headline method is [`fusion::fuse_wavelet_hpm`]: high-pass modulation
//! where the PAN detail and lowpass come from an à trous B3-spline wavelet
//! decomposition rather than a boxcar filter. Five baselines (boxcar HPM,
//! additive à trous, Brovey, IHS, PCA) and the CC / MI / QNR metrics used to
//! compare them live alongside it, plus a small evaluation harness.

// `!(x > y)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atrous;
pub mod error;
pub mod fusion;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod raster;

pub use atrous::{atrous_decompose, atrous_reconstruct, detail_sum, WaveletDecomposition};
pub use error::{Error, Result};
pub use fusion::{fuse, FusionMethod, FusionParams};
pub use harness::{run_evaluation, synth_scene, wald_degrade, EvalConfig, EvalRow, Scene};
pub use io::{load_band, load_multiband, save_band, save_multiband, BitDepth};
pub use metrics::{MetricsReport, QnrParams, QnrScore};
pub use raster::{Border, Kernel2D, MultiBandImage, RasterBand};
