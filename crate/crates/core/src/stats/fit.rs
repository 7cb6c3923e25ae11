//! Five-parameter logistic regression and the joint two-column
//! calibration, both solved by deterministic multi-start Nelder-Mead.

use super::StatsError;

/// Parameters of the five-parameter logistic mapping.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LogisticParams {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
}

impl LogisticParams {
    fn from_slice(p: &[f64]) -> Self {
        Self { k1: p[0], k2: p[1], k3: p[2], k4: p[3], k5: p[4] }
    }

    fn to_vec(self) -> Vec<f64> {
        vec![self.k1, self.k2, self.k3, self.k4, self.k5]
    }
}

/// Joint calibration result for a two-column score matrix.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ComboFit {
    pub params: LogisticParams,
    pub weights: (f64, f64),
    pub final_rmse: f64,
}

/// Optimizer knobs; the defaults are what the fitting entry points use.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub diameter_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_iterations: 2000, diameter_tolerance: 1e-10 }
    }
}

/// `k1 (1/2 + 1/(1 + exp(k2 (x - k3)))) + k4 x + k5`, elementwise.
///
/// The exponent is clamped so the sigmoid saturates to {0, 1} instead of
/// producing non-finite intermediates.
pub fn logistic_map(x: &[f64], k: &LogisticParams) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let e = (k.k2 * (v - k.k3)).clamp(-700.0, 700.0);
            k.k1 * (0.5 + 1.0 / (1.0 + e.exp())) + k.k4 * v + k.k5
        })
        .collect()
}

fn fit_rmse(x: &[f64], y: &[f64], k: &LogisticParams) -> f64 {
    let yhat = logistic_map(x, k);
    let sse: f64 = yhat.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (sse / y.len() as f64).sqrt()
}

/// Closed-form affine fit `y ~ k4 x + k5` expressed in logistic
/// parameters with `k1 = 0`.
fn affine_start(x: &[f64], y: &[f64]) -> LogisticParams {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    LogisticParams { k1: 0.0, k2: 1.0, k3: mx, k4: slope, k5: my - slope * mx }
}

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|&a| (a - m) * (a - m)).sum::<f64>() / n).sqrt()
}

fn range(v: &[f64]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &a in v {
        lo = lo.min(a);
        hi = hi.max(a);
    }
    hi - lo
}

/// Fit the five-parameter logistic mapping by least squares.
///
/// Deterministic multi-start Nelder-Mead: the affine closed form, two
/// sigmoid-dominant starts with opposite slopes, and a perturbation of
/// the best of those. The result is never worse than the affine fit.
pub fn fit_logistic(x: &[f64], y: &[f64]) -> Result<(LogisticParams, f64), StatsError> {
    fit_logistic_with(x, y, FitOptions::default())
}

pub fn fit_logistic_with(
    x: &[f64],
    y: &[f64],
    opts: FitOptions,
) -> Result<(LogisticParams, f64), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 6 {
        return Err(StatsError::TooFew { need: 6, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }

    let affine = affine_start(x, y);
    let ry = range(y);
    let sx = std_dev(x).max(1e-12);
    let mx = x.iter().sum::<f64>() / x.len() as f64;
    let ymin = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let sig_pos = LogisticParams { k1: ry, k2: 4.0 / sx, k3: mx, k4: 0.0, k5: ymin };
    let sig_neg = LogisticParams { k2: -4.0 / sx, ..sig_pos };

    let mut starts = vec![affine.to_vec(), sig_pos.to_vec(), sig_neg.to_vec()];
    let best_seed = starts
        .iter()
        .min_by(|a, b| {
            f64::total_cmp(
                &fit_rmse(x, y, &LogisticParams::from_slice(a)),
                &fit_rmse(x, y, &LogisticParams::from_slice(b)),
            )
        })
        .cloned()
        .expect("non-empty starts");
    let perturbed: Vec<f64> = best_seed
        .iter()
        .map(|&p| p * 1.05 + 0.01 * (1.0 + p.abs()))
        .collect();
    starts.push(perturbed);

    let objective = |p: &[f64]| fit_rmse(x, y, &LogisticParams::from_slice(p));
    let scale = param_scales(&[ry.max(1e-6), 4.0 / sx, sx.max(1e-6), 1.0, ry.max(1e-6)]);

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut any_converged = false;
    for start in &starts {
        let result = nelder_mead(&objective, start, &scale, opts);
        any_converged |= result.converged;
        if best.as_ref().map_or(true, |(_, f)| result.fmin < *f) {
            best = Some((result.xmin, result.fmin));
        }
    }
    let (mut params, mut best_rmse) = best.expect("at least one start");

    // guarantee the affine fallback
    let affine_rmse = fit_rmse(x, y, &affine);
    if affine_rmse < best_rmse {
        params = affine.to_vec();
        best_rmse = affine_rmse;
    }
    if !any_converged {
        return Err(StatsError::NonConvergence { best_params: params, best_rmse });
    }
    Ok((LogisticParams::from_slice(&params), best_rmse))
}

/// Joint 7-parameter calibration of two score columns against the
/// subjective values: `y ~ Q(w1 c1 + w2 c2)`.
pub fn fit_combo(columns: &[[f64; 2]], y: &[f64]) -> Result<ComboFit, StatsError> {
    fit_combo_with(columns, y, FitOptions::default())
}

pub fn fit_combo_with(
    columns: &[[f64; 2]],
    y: &[f64],
    opts: FitOptions,
) -> Result<ComboFit, StatsError> {
    if columns.len() != y.len() {
        return Err(StatsError::LengthMismatch(columns.len(), y.len()));
    }
    if columns.len() < 8 {
        return Err(StatsError::TooFew { need: 8, got: columns.len() });
    }
    if y.iter().any(|v| !v.is_finite())
        || columns.iter().flatten().any(|v| !v.is_finite())
    {
        return Err(StatsError::NonFinite);
    }

    let col: [Vec<f64>; 2] = [
        columns.iter().map(|c| c[0]).collect(),
        columns.iter().map(|c| c[1]).collect(),
    ];

    let combined = |w1: f64, w2: f64| -> Vec<f64> {
        columns.iter().map(|c| w1 * c[0] + w2 * c[1]).collect()
    };
    let objective = |p: &[f64]| {
        let k = LogisticParams::from_slice(&p[..5]);
        let x = combined(p[5], p[6]);
        let yhat = logistic_map(&x, &k);
        let sse: f64 = yhat.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        (sse / y.len() as f64).sqrt()
    };

    // a non-convergent seed fit still carries its best parameters
    let seed_fit = |x: &[f64]| -> Result<(LogisticParams, f64), StatsError> {
        match fit_logistic_with(x, y, opts) {
            Ok(r) => Ok(r),
            Err(StatsError::NonConvergence { best_params, best_rmse }) => {
                Ok((LogisticParams::from_slice(&best_params), best_rmse))
            }
            Err(e) => Err(e),
        }
    };

    // start 1: best single column, unit weight on it
    let fit0 = seed_fit(&col[0])?;
    let fit1 = seed_fit(&col[1])?;
    let (best_col, best_fit) = if fit0.1 <= fit1.1 { (0, fit0) } else { (1, fit1) };
    let mut start_a = best_fit.0.to_vec();
    start_a.extend_from_slice(if best_col == 0 { &[1.0, 0.0] } else { &[0.0, 1.0] });

    // start 2: equal weights
    let avg = combined(0.5, 0.5);
    let fit_avg = seed_fit(&avg)?;
    let mut start_b = fit_avg.0.to_vec();
    start_b.extend_from_slice(&[0.5, 0.5]);

    let ry = range(y);
    let sx = std_dev(&avg).max(1e-12);
    let scale = param_scales(&[
        ry.max(1e-6),
        4.0 / sx,
        sx.max(1e-6),
        1.0,
        ry.max(1e-6),
        0.5,
        0.5,
    ]);

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut any_converged = false;
    for start in [&start_a, &start_b] {
        let result = nelder_mead(&objective, start, &scale, opts);
        any_converged |= result.converged;
        if best.as_ref().map_or(true, |(_, f)| result.fmin < *f) {
            best = Some((result.xmin, result.fmin));
        }
    }
    let (p, fmin) = best.expect("two starts");
    // a single-column fit is always in the feasible set
    let (p, fmin) = if best_fit.1 < fmin { (start_a, best_fit.1) } else { (p, fmin) };
    if !any_converged {
        return Err(StatsError::NonConvergence { best_params: p, best_rmse: fmin });
    }
    Ok(ComboFit {
        params: LogisticParams::from_slice(&p[..5]),
        weights: (p[5], p[6]),
        final_rmse: fmin,
    })
}

fn param_scales(base: &[f64]) -> Vec<f64> {
    base.iter().map(|&b| if b.abs() > 1e-12 { b.abs() } else { 1.0 }).collect()
}

struct NmResult {
    xmin: Vec<f64>,
    fmin: f64,
    converged: bool,
}

/// Standard Nelder-Mead with reflection 1, expansion 2, contraction 1/2,
/// shrink 1/2. Fully deterministic.
fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: &F,
    start: &[f64],
    scale: &[f64],
    opts: FitOptions,
) -> NmResult {
    let dim = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((start.to_vec(), f(start)));
    for i in 0..dim {
        let mut v = start.to_vec();
        v[i] += 0.1 * scale[i];
        let fv = f(&v);
        simplex.push((v, fv));
    }

    let mut converged = false;
    for _ in 0..opts.max_iterations {
        simplex.sort_by(|a, b| f64::total_cmp(&a.1, &b.1));

        let diameter = simplex[1..]
            .iter()
            .map(|(v, _)| {
                v.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        let scale_ref = 1.0 + simplex[0].0.iter().map(|v| v.abs()).fold(0.0, f64::max);
        // stop on a collapsed simplex or on a flat objective (plateau
        // valleys keep the simplex wide while f has fully converged)
        let f_spread = simplex[dim].1 - simplex[0].1;
        if diameter < opts.diameter_tolerance * scale_ref
            || f_spread.abs() < 1e-12 * (1.0 + simplex[0].1.abs())
        {
            converged = true;
            break;
        }

        let worst = simplex[dim].clone();
        let second_worst_f = simplex[dim - 1].1;
        let best_f = simplex[0].1;
        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|(v, _)| v[j]).sum::<f64>() / dim as f64)
            .collect();

        let point_at = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let reflected = point_at(1.0);
        let fr = f(&reflected);
        if fr < best_f {
            let expanded = point_at(2.0);
            let fe = f(&expanded);
            if fe < fr {
                simplex[dim] = (expanded, fe);
            } else {
                simplex[dim] = (reflected, fr);
            }
        } else if fr < second_worst_f {
            simplex[dim] = (reflected, fr);
        } else {
            let contracted = if fr < worst.1 { point_at(0.5) } else { point_at(-0.5) };
            let fc = f(&contracted);
            if fc < worst.1.min(fr) {
                simplex[dim] = (contracted, fc);
            } else {
                // shrink toward the best vertex
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    for (v, b) in entry.0.iter_mut().zip(&best) {
                        *v = b + 0.5 * (*v - *b);
                    }
                    entry.1 = f(&entry.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| f64::total_cmp(&a.1, &b.1));
    NmResult { xmin: simplex[0].0.clone(), fmin: simplex[0].1, converged }
}
