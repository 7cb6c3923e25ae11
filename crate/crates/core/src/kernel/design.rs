//! Lowpass FIR differentiator design.
//!
//! A symmetric kernel of odd length realizes the even derivative order
//! `2n`: its frequency response tracks `(-1)^n omega^(2n)` across the
//! passband and is suppressed beyond `1.3 * cutoff`. The taps solve a
//! weighted least-squares problem over a dense frequency grid in the
//! basis `2(cos(k w) - 1)` (zero DC by construction), subject to hard
//! moment constraints that pin the Taylor behavior at DC:
//!
//! * `sum_k k^(2j) g_k = 0` for `j = 1..n-1`
//! * `sum_k k^(2n) g_k = (2n)!/2`
//!
//! For the minimal support `tap_length = order + 1` the constraints
//! determine the kernel completely (order 2, length 3 gives the exact
//! second difference `[1, -2, 1]`).

use super::{fit_omega_grid, FirKernel, KernelError};
use nalgebra::{DMatrix, DVector};

/// Relative-error floor in the passband weighting: below this response
/// magnitude the fit switches to an absolute-error criterion.
const PASSBAND_FLOOR: f64 = 1e-3;

/// Weight applied to the outer passband `(0.8 * cutoff, cutoff]`.
const PASSBAND_TAPER: f64 = 0.1;

/// Design a symmetric FIR kernel for the even derivative `order` with
/// the default stop-band weight.
pub fn design_derivative_kernel(
    order: usize,
    cutoff: f64,
    tap_length: usize,
) -> Result<FirKernel, KernelError> {
    design_derivative_kernel_with_stop_weight(order, cutoff, tap_length, 1.0)
}

/// [`design_derivative_kernel`] with an explicit stop-band weight, used
/// by the synthesis loop to trade passband accuracy for stop-band
/// suppression.
pub fn design_derivative_kernel_with_stop_weight(
    order: usize,
    cutoff: f64,
    tap_length: usize,
    stop_weight: f64,
) -> Result<FirKernel, KernelError> {
    if order < 2 || order % 2 != 0 {
        return Err(KernelError::InvalidSpec(format!(
            "derivative order {order} must be even and >= 2"
        )));
    }
    if tap_length % 2 == 0 {
        return Err(KernelError::InvalidSpec(format!(
            "tap_length {tap_length} must be odd"
        )));
    }
    if !(cutoff > 0.0 && cutoff <= std::f64::consts::PI) {
        return Err(KernelError::InvalidSpec(format!("cutoff {cutoff} outside (0, pi]")));
    }
    if tap_length < order + 1 {
        return Err(KernelError::TapLengthTooShort { order, tap_length });
    }

    let half = (tap_length - 1) / 2;
    let n = order / 2;
    let grid = fit_omega_grid();
    let stop_start = (1.3 * cutoff).min(std::f64::consts::PI);
    let cutoff_pow = cutoff.powi(order as i32);

    // Row weights: relative error with a floor over the inner passband,
    // tapered over the outer passband, zero across the transition band,
    // and amplitude-normalized over the stop band.
    let mut rows: Vec<(f64, f64, f64)> = Vec::with_capacity(grid.len());
    for &w in &grid {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        if w <= cutoff {
            let target = sign * w.powi(order as i32);
            let mut weight = 1.0 / w.powi(order as i32).max(PASSBAND_FLOOR);
            if w > 0.8 * cutoff {
                weight *= PASSBAND_TAPER;
            }
            rows.push((w, target, weight));
        } else if w >= stop_start {
            rows.push((w, 0.0, stop_weight / cutoff_pow));
        }
    }

    // Weighted least squares in the DC-null basis phi_k(w) = 2(cos kw - 1).
    let mut h: DMatrix<f64> = DMatrix::zeros(half, half);
    let mut rhs: DVector<f64> = DVector::zeros(half);
    for &(w, target, weight) in &rows {
        let phi: Vec<f64> = (1..=half).map(|k| 2.0 * ((k as f64 * w).cos() - 1.0)).collect();
        let w2 = weight * weight;
        for i in 0..half {
            rhs[i] += w2 * phi[i] * target;
            for j in 0..half {
                h[(i, j)] += w2 * phi[i] * phi[j];
            }
        }
    }

    // Hard moment constraints.
    let mut cons: DMatrix<f64> = DMatrix::zeros(n, half);
    let mut cons_rhs: DVector<f64> = DVector::zeros(n);
    for j in 1..=n {
        for k in 1..=half {
            cons[(j - 1, k - 1)] = (k as f64).powi(2 * j as i32);
        }
    }
    cons_rhs[n - 1] = factorial(order) / 2.0;

    // KKT system [2H C^T; C 0] [g; mu] = [2 rhs; d].
    let dim = half + n;
    let mut kkt: DMatrix<f64> = DMatrix::zeros(dim, dim);
    let mut full_rhs: DVector<f64> = DVector::zeros(dim);
    for i in 0..half {
        full_rhs[i] = 2.0 * rhs[i];
        for j in 0..half {
            kkt[(i, j)] = 2.0 * h[(i, j)];
        }
        for j in 0..n {
            kkt[(i, half + j)] = cons[(j, i)];
            kkt[(half + j, i)] = cons[(j, i)];
        }
    }
    for j in 0..n {
        full_rhs[half + j] = cons_rhs[j];
    }

    let solution = kkt
        .lu()
        .solve(&full_rhs)
        .ok_or(KernelError::SingularDesign { order, tap_length })?;
    if solution.iter().any(|v| !v.is_finite()) {
        return Err(KernelError::SingularDesign { order, tap_length });
    }

    let mut taps = vec![0.0; tap_length];
    let mut center = 0.0;
    for k in 1..=half {
        let g = solution[k - 1];
        taps[half + k] = g;
        taps[half - k] = g;
        center -= 2.0 * g;
    }
    taps[half] = center;
    Ok(FirKernel::new(taps))
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::dense_omega_grid;
    use std::f64::consts::PI;

    /// Moment-constraint oracle for the fully determined 3-tap case:
    /// g0 + 2 g1 = 0 and 2 g1 = 2! give [1, -2, 1] uniquely.
    #[test]
    fn three_tap_second_difference() {
        let k = design_derivative_kernel(2, PI, 3).unwrap();
        for (t, want) in k.taps.iter().zip([1.0, -2.0, 1.0]) {
            assert!((t - want).abs() < 1e-9, "taps {:?}", k.taps);
        }
    }

    #[test]
    fn dc_response_is_zero() {
        for (order, len) in [(2, 9), (4, 15), (6, 25)] {
            let k = design_derivative_kernel(order, 0.6 * PI, len).unwrap();
            let sum: f64 = k.taps.iter().sum();
            assert!(sum.abs() <= 1e-10, "order {order}: dc {sum}");
            assert!(k.response_at(0.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn tolerance_bands_at_design_cutoff() {
        let cutoff = 0.6 * PI;
        let grid = dense_omega_grid();
        for order in [2usize, 4, 6] {
            let k = design_derivative_kernel(order, cutoff, 25).unwrap();
            let sign = if (order / 2) % 2 == 0 { 1.0 } else { -1.0 };
            for &w in &grid {
                let d = k.response_at(w);
                if w <= 0.8 * cutoff {
                    let target = sign * w.powi(order as i32);
                    let tol = 0.02 * w.powi(order as i32).max(1e-3);
                    assert!(
                        (d - target).abs() <= tol,
                        "order {order} w {w}: {d} vs {target}"
                    );
                } else if w >= 1.3 * cutoff {
                    assert!(
                        d.abs() <= 0.05 * cutoff.powi(order as i32),
                        "order {order} stopband w {w}: {d}"
                    );
                }
            }
        }
    }

    #[test]
    fn order_four_mid_passband_value() {
        let k = design_derivative_kernel(4, 0.6 * PI, 25).unwrap();
        let w = 0.3 * PI;
        let want = w.powi(4);
        let got = k.response_at(w);
        assert!((got - want).abs() / want < 0.02, "{got} vs {want}");
    }

    #[test]
    fn too_short_support_is_an_error() {
        assert!(matches!(
            design_derivative_kernel(6, 0.6 * PI, 5),
            Err(KernelError::TapLengthTooShort { .. })
        ));
    }

    #[test]
    fn rejects_odd_order_and_even_length() {
        assert!(design_derivative_kernel(3, 1.0, 9).is_err());
        assert!(design_derivative_kernel(2, 1.0, 8).is_err());
    }

    #[test]
    fn symmetric_by_construction() {
        let k = design_derivative_kernel(4, 0.5 * PI, 21).unwrap();
        let m = k.half_len();
        for i in 0..=m {
            assert_eq!(k.taps[m + i].to_bits(), k.taps[m - i].to_bits());
        }
    }
}
