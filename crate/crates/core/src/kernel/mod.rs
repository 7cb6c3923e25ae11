//! Visual-sensitivity FIR kernel synthesis.
//!
//! The kernel is built in four stages: model the spectral falloff of
//! natural images with a generalized Gaussian, invert it below a cutoff
//! to obtain the boost target, fit even-order frequency-polynomial
//! coefficients to that target, and realize each even derivative order
//! as a lowpass FIR differentiator. The superposition of the weighted
//! differentiators is the kernel; it is normalized to unit peak
//! frequency response.

mod design;
mod gg;
pub mod presets;

pub use design::{design_derivative_kernel, design_derivative_kernel_with_stop_weight};
pub use gg::{fit_polynomial_coeffs, gg_pdf, gg_spectrum, gg_spectrum_with_support, target_response};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of frequency samples used for fitting grids over `[0, pi]`.
pub const FIT_GRID_LEN: usize = 1024;

/// Number of frequency samples in the dense grid used for peak
/// normalization and response checks over `[0, pi]`.
pub const DENSE_GRID_LEN: usize = 4097;

/// Stop-band weights tried in turn by [`synthesize`] until the
/// assembled kernel meets the band-pass shape contract.
const STOP_WEIGHT_LADDER: [f64; 4] = [1.0, 4.0, 16.0, 64.0];

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("invalid generalized Gaussian parameters: alpha={alpha}, beta={beta} (both must be positive and finite)")]
    InvalidGgParams { alpha: f64, beta: f64 },
    #[error("invalid kernel spec: {0}")]
    InvalidSpec(String),
    #[error("frequency grid is empty")]
    EmptyGrid,
    #[error("frequency grid must be sorted and contained in [0, pi]")]
    InvalidGrid,
    #[error("non-finite input x={0}")]
    NonFiniteInput(f64),
    #[error("spectrum below 1e-12 at omega={omega:.6} inside the passband; choose a smaller cutoff")]
    SpectrumUnderflow { omega: f64 },
    #[error("need at least {need} passband samples for a {terms}-term fit, got {got}")]
    TooFewSamples { need: usize, got: usize, terms: usize },
    #[error("rank-deficient polynomial fit design (duplicate grid points?)")]
    RankDeficientFit,
    #[error("tap_length {tap_length} too short for derivative order {order}: need at least order + 1")]
    TapLengthTooShort { order: usize, tap_length: usize },
    #[error("derivative design system is singular for order {order}, tap_length {tap_length}")]
    SingularDesign { order: usize, tap_length: usize },
    #[error("coefficient/kernel count mismatch: {coeffs} coefficients vs {kernels} kernels")]
    CountMismatch { coeffs: usize, kernels: usize },
    #[error("all-zero kernel: peak frequency response is zero, normalization undefined")]
    AllZeroKernel,
}

/// Scale and shape of the generalized Gaussian blur model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GgParams {
    /// Scale: the standard deviation of the density.
    pub alpha: f64,
    /// Shape: 2 is Gaussian, 1 is Laplace.
    pub beta: f64,
}

impl GgParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, KernelError> {
        if !(alpha.is_finite() && beta.is_finite() && alpha > 0.0 && beta > 0.0) {
            return Err(KernelError::InvalidGgParams { alpha, beta });
        }
        Ok(Self { alpha, beta })
    }

    /// Internal scaling parameter `A` relating the scale to the exponent,
    /// chosen so the density variance equals `alpha^2`.
    pub fn scaling(&self) -> f64 {
        let g1 = statrs::function::gamma::gamma(1.0 / self.beta);
        let g3 = statrs::function::gamma::gamma(3.0 / self.beta);
        (self.alpha * self.alpha * g1 / g3).sqrt()
    }
}

/// Full recipe for one synthesized kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HvsKernelSpec {
    pub gg: GgParams,
    /// Passband edge in radians per sample, in `(0, pi)`.
    pub cutoff: f64,
    /// Number of even-order polynomial terms (derivative orders 2..=2N).
    pub terms: usize,
    /// FIR support; odd, at least `2 * terms + 1`.
    pub tap_length: usize,
    /// Central moment order used by the scoring pipeline; even, >= 2.
    pub moment: u32,
}

impl HvsKernelSpec {
    pub fn new(
        gg: GgParams,
        cutoff: f64,
        terms: usize,
        tap_length: usize,
        moment: u32,
    ) -> Result<Self, KernelError> {
        if !(cutoff.is_finite() && cutoff > 0.0 && cutoff < std::f64::consts::PI) {
            return Err(KernelError::InvalidSpec(format!(
                "cutoff {cutoff} outside (0, pi)"
            )));
        }
        if terms == 0 {
            return Err(KernelError::InvalidSpec("terms must be >= 1".into()));
        }
        if tap_length % 2 == 0 || tap_length < 2 * terms + 1 {
            return Err(KernelError::InvalidSpec(format!(
                "tap_length {tap_length} must be odd and >= 2*terms+1 = {}",
                2 * terms + 1
            )));
        }
        if moment < 2 || moment % 2 != 0 {
            return Err(KernelError::InvalidSpec(format!(
                "moment {moment} must be even and >= 2"
            )));
        }
        Ok(Self { gg, cutoff, terms, tap_length, moment })
    }
}

/// Fitted coefficients of the even-order frequency polynomial, one per
/// term `omega^(2n)`, n = 1..=N.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCoeffs {
    pub c: Vec<f64>,
    /// Root-mean-square fit residual on the passband samples.
    pub residual_rms: f64,
}

/// A realized symmetric FIR kernel.
///
/// Taps are stored full length, center-symmetric: `taps[center + k] ==
/// taps[center - k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirKernel {
    pub taps: Vec<f64>,
    /// Divisor applied so the peak frequency-response magnitude is 1;
    /// 1.0 for unnormalized kernels.
    pub norm_gain: f64,
}

impl FirKernel {
    pub fn new(taps: Vec<f64>) -> Self {
        debug_assert!(taps.len() % 2 == 1);
        Self { taps, norm_gain: 1.0 }
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Half support `(L - 1) / 2`.
    pub fn half_len(&self) -> usize {
        (self.taps.len() - 1) / 2
    }

    /// Real-valued frequency response of the symmetric kernel at `omega`
    /// (may be negative).
    pub fn response_at(&self, omega: f64) -> f64 {
        let m = self.half_len();
        let mut acc = self.taps[m];
        for k in 1..=m {
            acc += (self.taps[m + k] + self.taps[m - k]) * (k as f64 * omega).cos();
        }
        acc
    }

    /// Largest response magnitude over the dense grid.
    pub fn peak_response(&self) -> f64 {
        dense_omega_grid()
            .into_iter()
            .map(|w| self.response_at(w).abs())
            .fold(0.0, f64::max)
    }
}

/// Uniform inclusive grid of [`DENSE_GRID_LEN`] frequencies on `[0, pi]`.
pub fn dense_omega_grid() -> Vec<f64> {
    uniform_grid(DENSE_GRID_LEN)
}

/// Uniform inclusive grid of [`FIT_GRID_LEN`] frequencies on `[0, pi]`.
pub fn fit_omega_grid() -> Vec<f64> {
    uniform_grid(FIT_GRID_LEN)
}

fn uniform_grid(len: usize) -> Vec<f64> {
    let step = std::f64::consts::PI / (len - 1) as f64;
    (0..len)
        .map(|i| {
            if i == len - 1 {
                std::f64::consts::PI
            } else {
                i as f64 * step
            }
        })
        .collect()
}

/// Frequency-response magnitude `|DTFT(taps)(omega)|` per grid point.
///
/// Computes the full complex modulus; for the symmetric kernels built
/// here it coincides with `|response_at|` exactly.
pub fn kernel_response(kernel: &FirKernel, omega_grid: &[f64]) -> Result<Vec<f64>, KernelError> {
    validate_grid(omega_grid)?;
    let m = kernel.half_len() as i64;
    Ok(omega_grid
        .iter()
        .map(|&w| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, t) in kernel.taps.iter().enumerate() {
                let j = i as i64 - m;
                re += t * (w * j as f64).cos();
                im -= t * (w * j as f64).sin();
            }
            (re * re + im * im).sqrt()
        })
        .collect())
}

pub(crate) fn validate_grid(grid: &[f64]) -> Result<(), KernelError> {
    if grid.is_empty() {
        return Err(KernelError::EmptyGrid);
    }
    let mut prev = -0.0;
    for &w in grid {
        if !w.is_finite() || w < 0.0 || w > std::f64::consts::PI || w < prev {
            return Err(KernelError::InvalidGrid);
        }
        prev = w;
    }
    Ok(())
}

/// Superpose weighted derivative kernels and normalize to unit peak
/// response.
///
/// Shorter kernels are zero-padded centrally to the longest support.
/// `norm_gain` records the peak magnitude divided out.
pub fn assemble_hvs_kernel(
    coeffs: &PolyCoeffs,
    derivative_kernels: &[FirKernel],
) -> Result<FirKernel, KernelError> {
    if coeffs.c.len() != derivative_kernels.len() {
        return Err(KernelError::CountMismatch {
            coeffs: coeffs.c.len(),
            kernels: derivative_kernels.len(),
        });
    }
    let target_len = derivative_kernels.iter().map(FirKernel::len).max().unwrap_or(0);
    if target_len == 0 {
        return Err(KernelError::AllZeroKernel);
    }
    let mut taps = vec![0.0; target_len];
    for (c, k) in coeffs.c.iter().zip(derivative_kernels) {
        let pad = (target_len - k.len()) / 2;
        if k.len() + 2 * pad != target_len {
            return Err(KernelError::CountMismatch {
                coeffs: coeffs.c.len(),
                kernels: derivative_kernels.len(),
            });
        }
        for (i, t) in k.taps.iter().enumerate() {
            taps[pad + i] += c * t;
        }
    }
    let mut out = FirKernel::new(taps);
    let gain = out.peak_response();
    if gain <= 0.0 || !gain.is_finite() {
        return Err(KernelError::AllZeroKernel);
    }
    for t in &mut out.taps {
        *t /= gain;
    }
    out.norm_gain = gain;
    Ok(out)
}

/// End-to-end kernel synthesis for a spec.
///
/// The resulting response is band-pass: zero at DC, peaked inside the
/// passband, small beyond `1.3 * cutoff`. The stop-band weight is
/// escalated until the assembled response stays within a tenth of the
/// peak there.
pub fn synthesize(spec: &HvsKernelSpec) -> Result<FirKernel, KernelError> {
    let grid = fit_omega_grid();
    let min_half_support = (spec.tap_length - 1) as f64 / 2.0;
    let spectrum = gg_spectrum_with_support(&spec.gg, &grid, min_half_support)?;
    let target = target_response_from_spectrum(&spectrum, &grid, spec.cutoff)?;

    let passband: Vec<(f64, f64)> = grid
        .iter()
        .zip(&target)
        .filter(|(w, _)| **w > 0.0 && **w <= spec.cutoff)
        .map(|(w, t)| (*w, *t))
        .collect();
    let coeffs = fit_polynomial_coeffs(&passband, spec.terms)?;

    let stopband_start = (1.3 * spec.cutoff).min(std::f64::consts::PI);
    let dense = dense_omega_grid();
    let mut best: Option<(f64, FirKernel)> = None;
    for &stop_weight in &STOP_WEIGHT_LADDER {
        let kernels: Vec<FirKernel> = (1..=spec.terms)
            .map(|n| {
                design_derivative_kernel_with_stop_weight(
                    2 * n,
                    spec.cutoff,
                    spec.tap_length,
                    stop_weight,
                )
            })
            .collect::<Result<_, _>>()?;
        let assembled = assemble_hvs_kernel(&coeffs, &kernels)?;
        let stop_max = dense
            .iter()
            .filter(|w| **w >= stopband_start)
            .map(|&w| assembled.response_at(w).abs())
            .fold(0.0, f64::max);
        if stop_max <= 0.1 {
            return Ok(assembled);
        }
        if best.as_ref().map_or(true, |(m, _)| stop_max < *m) {
            best = Some((stop_max, assembled));
        }
    }
    // No ladder entry met the shape target; return the closest.
    Ok(best.expect("ladder is non-empty").1)
}

/// Inverse-spectrum fit target: `spectrum^-1` in the passband, zero in
/// the stopband.
pub(crate) fn target_response_from_spectrum(
    spectrum: &[f64],
    grid: &[f64],
    cutoff: f64,
) -> Result<Vec<f64>, KernelError> {
    grid.iter()
        .zip(spectrum)
        .map(|(&w, &s)| {
            if w <= cutoff {
                if s < 1e-12 {
                    Err(KernelError::SpectrumUnderflow { omega: w })
                } else {
                    Ok(1.0 / s)
                }
            } else {
                Ok(0.0)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gg_params_reject_nonpositive() {
        assert!(GgParams::new(0.0, 2.0).is_err());
        assert!(GgParams::new(1.0, -1.0).is_err());
        assert!(GgParams::new(f64::NAN, 1.0).is_err());
        assert!(GgParams::new(1.7, 1.4).is_ok());
    }

    #[test]
    fn spec_validation() {
        let gg = GgParams::new(1.7, 1.4).unwrap();
        assert!(HvsKernelSpec::new(gg, 0.6 * std::f64::consts::PI, 3, 25, 12).is_ok());
        // even tap length
        assert!(HvsKernelSpec::new(gg, 1.0, 3, 24, 12).is_err());
        // too short for 2N-th derivative
        assert!(HvsKernelSpec::new(gg, 1.0, 3, 5, 12).is_err());
        // odd moment
        assert!(HvsKernelSpec::new(gg, 1.0, 3, 25, 7).is_err());
        // cutoff out of range
        assert!(HvsKernelSpec::new(gg, 3.5, 3, 25, 12).is_err());
    }

    #[test]
    fn kernel_response_examples() {
        let lap = FirKernel::new(vec![1.0, -2.0, 1.0]);
        let r = kernel_response(&lap, &[0.0, std::f64::consts::PI]).unwrap();
        assert!(r[0].abs() < 1e-12);
        assert!((r[1] - 4.0).abs() < 1e-12);

        let ident = FirKernel::new(vec![0.0, 1.0, 0.0]);
        let r = kernel_response(&ident, &[0.3, 1.1, 2.9]).unwrap();
        for v in r {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_response_rejects_bad_grid() {
        let k = FirKernel::new(vec![1.0, -2.0, 1.0]);
        assert!(matches!(kernel_response(&k, &[]), Err(KernelError::EmptyGrid)));
        assert!(kernel_response(&k, &[0.5, 0.2]).is_err());
        assert!(kernel_response(&k, &[4.0]).is_err());
    }

    #[test]
    fn assemble_single_term_is_normalized_passthrough() {
        let k = FirKernel::new(vec![1.0, -2.0, 1.0]);
        let coeffs = PolyCoeffs { c: vec![1.0], residual_rms: 0.0 };
        let out = assemble_hvs_kernel(&coeffs, &[k.clone()]).unwrap();
        // peak of 2cos(w) - 2 has magnitude 4 at pi
        assert!((out.norm_gain - 4.0).abs() < 1e-12);
        for (o, t) in out.taps.iter().zip(&k.taps) {
            assert!((o - t / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn assemble_scalar_linearity() {
        let k = FirKernel::new(vec![1.0, -2.0, 1.0]);
        let coeffs = PolyCoeffs { c: vec![2.0], residual_rms: 0.0 };
        let out = assemble_hvs_kernel(&coeffs, &[k]).unwrap();
        // pre-normalization taps were [2, -4, 2]; norm_gain returns them
        for (o, want) in out.taps.iter().zip([2.0, -4.0, 2.0]) {
            assert!((o * out.norm_gain - want).abs() < 1e-12);
        }
    }

    #[test]
    fn assemble_all_zero_errors() {
        let k = FirKernel::new(vec![1.0, -2.0, 1.0]);
        let coeffs = PolyCoeffs { c: vec![0.0], residual_rms: 0.0 };
        assert!(matches!(
            assemble_hvs_kernel(&coeffs, &[k]),
            Err(KernelError::AllZeroKernel)
        ));
    }

    #[test]
    fn assemble_count_mismatch() {
        let k = FirKernel::new(vec![1.0, -2.0, 1.0]);
        let coeffs = PolyCoeffs { c: vec![1.0, 2.0], residual_rms: 0.0 };
        assert!(assemble_hvs_kernel(&coeffs, &[k]).is_err());
    }

    #[test]
    fn assemble_pads_centrally() {
        let short = FirKernel::new(vec![1.0, -2.0, 1.0]);
        let long = FirKernel::new(vec![0.5, 0.0, -1.0, 0.0, 0.5]);
        let coeffs = PolyCoeffs { c: vec![1.0, 1.0], residual_rms: 0.0 };
        let out = assemble_hvs_kernel(&coeffs, &[short, long]).unwrap();
        assert_eq!(out.len(), 5);
        let raw: Vec<f64> = out.taps.iter().map(|t| t * out.norm_gain).collect();
        let want = [0.5, 1.0, -3.0, 1.0, 0.5];
        for (r, w) in raw.iter().zip(want) {
            assert!((r - w).abs() < 1e-12);
        }
    }

    #[test]
    fn synthesized_kernel_is_symmetric_zero_dc_unit_peak() {
        let spec = HvsKernelSpec::new(
            GgParams::new(1.7, 1.4).unwrap(),
            0.6 * std::f64::consts::PI,
            3,
            25,
            12,
        )
        .unwrap();
        let k = synthesize(&spec).unwrap();
        let m = k.half_len();
        for i in 0..=m {
            assert_eq!(k.taps[m + i].to_bits(), k.taps[m - i].to_bits());
        }
        let dc: f64 = k.taps.iter().sum();
        assert!(dc.abs() <= 1e-10, "dc={dc}");
        assert!((k.peak_response() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn synthesize_is_deterministic() {
        let spec = HvsKernelSpec::new(
            GgParams::new(0.7, 0.8).unwrap(),
            0.6 * std::f64::consts::PI,
            3,
            25,
            4,
        )
        .unwrap();
        let a = synthesize(&spec).unwrap();
        let b = synthesize(&spec).unwrap();
        assert_eq!(a.norm_gain.to_bits(), b.norm_gain.to_bits());
        for (x, y) in a.taps.iter().zip(&b.taps) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
