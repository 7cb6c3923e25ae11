//! No-reference image sharpness assessment toolkit.
//!
//! The crate is organized around four pieces:
//!
//! * [`kernel`] — synthesis of band-pass FIR kernels that mimic the
//!   visual-sensitivity response: a generalized Gaussian models the
//!   spectral falloff of natural images, even-order frequency polynomials
//!   are fitted to its inverse, and each polynomial term is realized as a
//!   lowpass FIR differentiator.
//! * [`pipeline`] — the deterministic blur-scoring pipeline: background
//!   masking, separable decomposition, rectification, an l1/2 feature
//!   map, percentile-driven retention, and a negative-log central moment
//!   score.
//! * [`stats`] — evaluation of objective scores against subjective data:
//!   PLCC/SRCC/KRCC/RMSE, the five-parameter logistic mapping, joint
//!   two-kernel calibration, and significance-pair ROC measures.
//! * [`bench`] — manifest ingestion, synthetic blur series, batch
//!   scoring, scalability runs, and report emission.
//!
//! Everything is pure and deterministic: identical inputs produce
//! bit-identical outputs on the same platform, and batch scoring may be
//! parallelized freely.

pub mod bench;
pub mod kernel;
pub mod pipeline;
pub mod raster;
pub mod stats;

pub use kernel::{FirKernel, GgParams, HvsKernelSpec, PolyCoeffs};
pub use pipeline::{score_combo, score_single, ComboConfig, SharpnessScore};
pub use raster::GrayImage;
