//! Evaluation statistics for objective-vs-subjective score tables.

mod fit;

pub use fit::{fit_combo, fit_logistic, logistic_map, ComboFit, FitOptions, LogisticParams};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least {need} observations, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("constant vector: correlation undefined")]
    ConstantVector,
    #[error("all pairs tied: rank correlation undefined")]
    AllTied,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("one outcome class is empty: AUC undefined")]
    EmptyClass,
    #[error("no significant pairs")]
    NoSignificantPairs,
    #[error("optimizer did not converge; best rmse {best_rmse}")]
    NonConvergence { best_params: Vec<f64>, best_rmse: f64 },
}

/// Objective/subjective score table with optional per-item subjective
/// spread and content grouping.
#[derive(Debug, Clone, Default)]
pub struct ScorePairs {
    pub objective: Vec<f64>,
    pub subjective: Vec<f64>,
    pub subjective_std: Option<Vec<f64>>,
    pub group: Option<Vec<String>>,
}

impl ScorePairs {
    pub fn new(objective: Vec<f64>, subjective: Vec<f64>) -> Result<Self, StatsError> {
        if objective.len() != subjective.len() {
            return Err(StatsError::LengthMismatch(objective.len(), subjective.len()));
        }
        if objective.iter().chain(&subjective).any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite);
        }
        Ok(Self { objective, subjective, subjective_std: None, group: None })
    }

    pub fn len(&self) -> usize {
        self.objective.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objective.is_empty()
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooFew { need: 3, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

/// Pearson linear correlation coefficient.
pub fn plcc(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ConstantVector);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Ranks with average ranks for ties (1-based).
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| f64::total_cmp(&x[a], &x[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank-order correlation: Pearson on average ranks.
pub fn srcc(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_pair(x, y)?;
    plcc(&average_ranks(x), &average_ranks(y))
}

/// Kendall tau-b with tie correction.
///
/// Discordant pairs are counted as merge-sort inversions after sorting
/// by `(x, y)`; ties are counted in a linear pass.
pub fn krcc(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_pair(x, y)?;
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        f64::total_cmp(&x[a], &x[b]).then(f64::total_cmp(&y[a], &y[b]))
    });

    let n0 = n * (n - 1) / 2;
    let mut ties_x = 0usize;
    let mut ties_joint = 0usize;
    {
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && x[idx[j + 1]] == x[idx[i]] {
                j += 1;
            }
            let run = j - i + 1;
            ties_x += run * (run - 1) / 2;
            // joint ties inside the x-run
            let mut a = i;
            while a <= j {
                let mut b = a;
                while b + 1 <= j && y[idx[b + 1]] == y[idx[a]] {
                    b += 1;
                }
                let jr = b - a + 1;
                ties_joint += jr * (jr - 1) / 2;
                a = b + 1;
            }
            i = j + 1;
        }
    }
    let mut ties_y = 0usize;
    {
        let mut ys: Vec<f64> = y.to_vec();
        ys.sort_by(f64::total_cmp);
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && ys[j + 1] == ys[i] {
                j += 1;
            }
            let run = j - i + 1;
            ties_y += run * (run - 1) / 2;
            i = j + 1;
        }
    }

    let mut seq: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let discordant = count_inversions(&mut seq);

    let denom = ((n0 - ties_x) as f64) * ((n0 - ties_y) as f64);
    if denom <= 0.0 {
        return Err(StatsError::AllTied);
    }
    // concordant + discordant = n0 - ties_x - ties_y + ties_joint
    let cd = n0 - ties_x - ties_y + ties_joint;
    let concordant = cd - discordant;
    Ok((concordant as f64 - discordant as f64) / denom.sqrt())
}

/// Strict inversions (a later element smaller than an earlier one).
fn count_inversions(seq: &mut [f64]) -> usize {
    let n = seq.len();
    if n < 2 {
        return 0;
    }
    let mut buf = seq.to_vec();
    merge_count(seq, &mut buf)
}

fn merge_count(seq: &mut [f64], buf: &mut [f64]) -> usize {
    let n = seq.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let (left, right) = seq.split_at_mut(mid);
    let (bl, br) = buf.split_at_mut(mid);
    let mut inv = merge_count(left, bl) + merge_count(right, br);
    let (mut i, mut j, mut k) = (0, 0, 0);
    while i < left.len() && j < right.len() {
        if right[j] < left[i] {
            inv += left.len() - i;
            buf[k] = right[j];
            j += 1;
        } else {
            buf[k] = left[i];
            i += 1;
        }
        k += 1;
    }
    while i < left.len() {
        buf[k] = left[i];
        i += 1;
        k += 1;
    }
    while j < right.len() {
        buf[k] = right[j];
        j += 1;
        k += 1;
    }
    seq.copy_from_slice(&buf[..n]);
    inv
}

/// Root mean squared error.
pub fn rmse(yhat: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if yhat.len() != y.len() {
        return Err(StatsError::LengthMismatch(yhat.len(), y.len()));
    }
    if yhat.is_empty() {
        return Err(StatsError::TooFew { need: 1, got: 0 });
    }
    let sse: f64 = yhat.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sse / y.len() as f64).sqrt())
}

/// Which element of an unordered pair has the higher subjective score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Better {
    First,
    Second,
}

/// Significance labels over all unordered index pairs `(i < j)`.
#[derive(Debug, Clone)]
pub struct PairLabels {
    /// `(i, j, significant, better)`; `better` is defined only for
    /// significant pairs.
    pub pairs: Vec<(usize, usize, bool, Option<Better>)>,
}

/// Configuration for [`pair_significance`].
#[derive(Debug, Clone, Copy)]
pub struct SignificanceConfig {
    /// Absolute subjective difference that counts as significant when no
    /// per-item spread is available. Zero means any distinct values.
    pub threshold: f64,
}

impl Default for SignificanceConfig {
    fn default() -> Self {
        Self { threshold: 0.0 }
    }
}

/// Label every unordered pair as significantly different or similar.
///
/// With per-item spread present, pair `(i, j)` is significant when
/// `|Yi - Yj| > 1.96 * sqrt(si^2 + sj^2)`; otherwise when
/// `|Yi - Yj| > threshold`.
pub fn pair_significance(pairs: &ScorePairs, cfg: SignificanceConfig) -> Result<PairLabels, StatsError> {
    let n = pairs.len();
    if n < 2 {
        return Err(StatsError::TooFew { need: 2, got: n });
    }
    let y = &pairs.subjective;
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let delta = (y[i] - y[j]).abs();
            let significant = match &pairs.subjective_std {
                Some(std) => delta > 1.96 * (std[i] * std[i] + std[j] * std[j]).sqrt(),
                None => delta > cfg.threshold,
            };
            let better = significant.then(|| {
                if y[i] > y[j] {
                    Better::First
                } else {
                    Better::Second
                }
            });
            out.push((i, j, significant, better));
        }
    }
    Ok(PairLabels { pairs: out })
}

/// Mann-Whitney AUC of `positive` vs `negative` statistic values, with
/// half credit for ties.
pub fn mann_whitney_auc(positive: &[f64], negative: &[f64]) -> Result<f64, StatsError> {
    if positive.is_empty() || negative.is_empty() {
        return Err(StatsError::EmptyClass);
    }
    let mut pooled: Vec<(f64, bool)> = positive
        .iter()
        .map(|&v| (v, true))
        .chain(negative.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|a, b| f64::total_cmp(&a.0, &b.0));
    let n = pooled.len();
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let avg_rank = (i + j + 2) as f64 / 2.0;
        for item in &pooled[i..=j] {
            if item.1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let np = positive.len() as f64;
    let nn = negative.len() as f64;
    Ok((rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn))
}

/// Orientation of the objective score with respect to "better".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreOrientation {
    HigherIsBetter,
    LowerIsBetter,
}

impl ScoreOrientation {
    pub fn sign(self) -> f64 {
        match self {
            ScoreOrientation::HigherIsBetter => 1.0,
            ScoreOrientation::LowerIsBetter => -1.0,
        }
    }
}

/// Different-vs-similar AUC: can `|delta C|` separate significant from
/// non-significant pairs?
pub fn auc_ds(objective: &[f64], labels: &PairLabels) -> Result<f64, StatsError> {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for &(i, j, significant, _) in &labels.pairs {
        let stat = (objective[i] - objective[j]).abs();
        if significant {
            pos.push(stat);
        } else {
            neg.push(stat);
        }
    }
    mann_whitney_auc(&pos, &neg)
}

/// Better-vs-worse AUC over significant pairs.
///
/// Each significant pair contributes the oriented score difference
/// `better - worse`; the AUC compares these against their mirrored
/// negatives (a pair read in the opposite order), so 1.0 means the
/// objective orders every significant pair correctly and 0.5 is chance.
pub fn auc_bw(
    objective: &[f64],
    labels: &PairLabels,
    orientation: ScoreOrientation,
) -> Result<f64, StatsError> {
    let diffs = oriented_diffs(objective, labels, orientation)?;
    let mirrored: Vec<f64> = diffs.iter().map(|d| -d).collect();
    mann_whitney_auc(&diffs, &mirrored)
}

/// Fraction of significant pairs ordered correctly by the objective
/// score; ties count as incorrect.
pub fn c0(
    objective: &[f64],
    labels: &PairLabels,
    orientation: ScoreOrientation,
) -> Result<f64, StatsError> {
    let diffs = oriented_diffs(objective, labels, orientation)?;
    let correct = diffs.iter().filter(|&&d| d > 0.0).count();
    Ok(correct as f64 / diffs.len() as f64)
}

fn oriented_diffs(
    objective: &[f64],
    labels: &PairLabels,
    orientation: ScoreOrientation,
) -> Result<Vec<f64>, StatsError> {
    let sign = orientation.sign();
    let diffs: Vec<f64> = labels
        .pairs
        .iter()
        .filter(|(_, _, significant, _)| *significant)
        .map(|&(i, j, _, better)| {
            let d = objective[i] - objective[j];
            match better.expect("significant pair carries a better side") {
                Better::First => sign * d,
                Better::Second => -sign * d,
            }
        })
        .collect();
    if diffs.is_empty() {
        return Err(StatsError::NoSignificantPairs);
    }
    Ok(diffs)
}
