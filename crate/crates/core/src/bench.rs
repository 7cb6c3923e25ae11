//! Dataset ingestion, batch scoring, calibration and report emission.
//!
//! A manifest is a CSV with header `path,subjective[,std][,group]`;
//! relative paths resolve against the manifest's directory. Scoring
//! fans out across a worker pool (capped by the optional
//! `ACUITY_WORKERS` environment variable) and aggregates by manifest
//! index, so results are bit-identical for any worker count.

use crate::kernel::presets::KernelFile;
use crate::kernel::FirKernel;
use crate::pipeline::{score_single, ScoreError};
use crate::raster::{gaussian_blur, GrayImage, RasterError};
use crate::stats::{
    auc_bw, auc_ds, c0, fit_combo, fit_logistic, logistic_map, pair_significance, plcc, rmse,
    srcc, ComboFit, LogisticParams, ScoreOrientation, ScorePairs, SignificanceConfig, StatsError,
};
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("manifest {path} line {line}: {message}")]
    ManifestRow { path: PathBuf, line: usize, message: String },
    #[error("failed to read image {path}: {message}")]
    ImageRead { path: PathBuf, message: String },
    #[error("image {path}: {source}")]
    Raster {
        path: PathBuf,
        #[source]
        source: RasterError,
    },
    #[error("image {path}: {source}")]
    Score {
        path: PathBuf,
        #[source]
        source: ScoreError,
    },
    #[error("need at least 3 scorable images, got {0}")]
    TooFewScorable(usize),
    #[error("a combined score needs exactly 2 kernels, got {0}")]
    BadKernelCount(usize),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub subjective: f64,
    pub std: Option<f64>,
    pub group: Option<String>,
}

/// Parse a manifest CSV. Errors carry 1-based line numbers (the header
/// is line 1).
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>, BenchError> {
    let err = |message: String| BenchError::Manifest { path: path.to_path_buf(), message };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| err(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let path_col = col("path").ok_or_else(|| err("missing `path` column".into()))?;
    let subj_col = col("subjective").ok_or_else(|| err("missing `subjective` column".into()))?;
    let std_col = col("std");
    let group_col = col("group");
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();

    let mut entries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let row_err = |message: String| BenchError::ManifestRow {
            path: path.to_path_buf(),
            line,
            message,
        };
        let record = record.map_err(|e| row_err(e.to_string()))?;
        let raw_path = record
            .get(path_col)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| row_err("empty path".into()))?;
        let subjective: f64 = record
            .get(subj_col)
            .unwrap_or("")
            .parse()
            .map_err(|_| row_err(format!("non-numeric subjective `{}`", record.get(subj_col).unwrap_or(""))))?;
        if !subjective.is_finite() {
            return Err(row_err(format!("non-finite subjective {subjective}")));
        }
        let std = match std_col.and_then(|c| record.get(c)).filter(|s| !s.is_empty()) {
            Some(s) => Some(
                s.parse::<f64>()
                    .map_err(|_| row_err(format!("non-numeric std `{s}`")))?,
            ),
            None => None,
        };
        let group = group_col
            .and_then(|c| record.get(c))
            .filter(|s| !s.is_empty())
            .map(str::to_string);
        let mut entry_path = PathBuf::from(raw_path);
        if entry_path.is_relative() {
            entry_path = base.join(entry_path);
        }
        entries.push(ManifestEntry { path: entry_path, subjective, std, group });
    }
    Ok(entries)
}

/// Decode an image file into a normalized grayscale raster.
///
/// 8/16-bit PNG, 8-bit JPEG and TIFF decode through the same luma
/// conversion, so scores are codec-independent for lossless formats.
pub fn load_gray(path: &Path) -> Result<GrayImage, BenchError> {
    let img = image::open(path).map_err(|e| BenchError::ImageRead {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let raster = |r: Result<GrayImage, RasterError>| {
        r.map_err(|source| BenchError::Raster { path: path.to_path_buf(), source })
    };
    match img {
        image::DynamicImage::ImageLuma8(l) => {
            let (w, h) = l.dimensions();
            raster(crate::raster::gray_from_luma_u8(w as usize, h as usize, l.as_raw()))
        }
        image::DynamicImage::ImageLuma16(l) => {
            let (w, h) = l.dimensions();
            raster(crate::raster::gray_from_luma_u16(w as usize, h as usize, l.as_raw()))
        }
        image::DynamicImage::ImageRgb16(rgb) => {
            let (w, h) = rgb.dimensions();
            raster(crate::raster::to_gray_u16(w as usize, h as usize, rgb.as_raw()))
        }
        other => {
            let rgb = other.to_rgb8();
            let (w, h) = rgb.dimensions();
            raster(crate::raster::to_gray_u8(w as usize, h as usize, rgb.as_raw()))
        }
    }
}

/// Write a grayscale raster as 16-bit PNG (lossless for the pipeline's
/// precision needs).
pub fn save_gray_png(img: &GrayImage, path: &Path) -> Result<(), BenchError> {
    let buf: Vec<u16> = img
        .pixels()
        .iter()
        .map(|&v| (v * 65535.0).round().clamp(0.0, 65535.0) as u16)
        .collect();
    let out: image::ImageBuffer<image::Luma<u16>, Vec<u16>> =
        image::ImageBuffer::from_raw(img.width() as u32, img.height() as u32, buf)
            .expect("buffer sized from raster");
    out.save(path).map_err(|e| BenchError::ImageRead {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Blur series for metric validation. `sigma = 0` passes the image
/// through unchanged.
pub fn blur_series(img: &GrayImage, sigmas: &[f64]) -> Result<Vec<GrayImage>, RasterError> {
    sigmas
        .iter()
        .map(|&s| {
            if s == 0.0 {
                Ok(img.clone())
            } else {
                gaussian_blur(img, s)
            }
        })
        .collect()
}

/// Kernels to score with, plus combination weights when two kernels
/// form a single combined score.
#[derive(Debug, Clone)]
pub struct KernelSetup {
    /// `(kernel, moment order, descriptor)` per kernel.
    pub kernels: Vec<(FirKernel, u32, KernelFile)>,
    pub weights: Option<(f64, f64)>,
}

impl KernelSetup {
    pub fn single(kernel: FirKernel, moment: u32, descriptor: KernelFile) -> Self {
        Self { kernels: vec![(kernel, moment, descriptor)], weights: None }
    }
}

/// How to orient the objective score against "better" for the
/// significance measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrientationConfig {
    /// Use the sign of the raw-score SRCC (matches the sign-agnostic
    /// reporting convention).
    Auto,
    Fixed(ScoreOrientation),
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub significance: SignificanceConfig,
    pub orientation: OrientationConfig,
    /// Median-of-3 timing repetitions per image.
    pub timed: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            significance: SignificanceConfig::default(),
            orientation: OrientationConfig::Auto,
            timed: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PerImage {
    pub path: String,
    pub subjective: f64,
    /// Per-kernel scores, in kernel order.
    pub scores: Vec<f64>,
    /// Combined objective score (equals `scores[0]` for one kernel).
    pub objective: f64,
    pub fitted: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Exclusion {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BenchReport {
    pub kernels: Vec<KernelFile>,
    pub weights: Option<(f64, f64)>,
    /// True when the weights were fitted on this manifest rather than
    /// supplied.
    pub weights_fitted: bool,
    pub sig_threshold: f64,
    /// Resolved orientation: "higher-is-better" or "lower-is-better".
    pub orientation: String,
    pub n_scored: usize,
    pub per_image: Vec<PerImage>,
    pub excluded: Vec<Exclusion>,
    pub logistic: LogisticParams,
    pub plcc: f64,
    pub srcc: f64,
    pub krcc: f64,
    pub rmse: f64,
    pub auc_ds: Option<f64>,
    pub auc_bw: Option<f64>,
    pub c0: Option<f64>,
    pub mean_seconds_per_image: f64,
}

fn thread_pool() -> Option<rayon::ThreadPool> {
    let workers: usize = std::env::var("ACUITY_WORKERS").ok()?.parse().ok()?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .ok()
}

struct ScoredEntry {
    scores: Vec<f64>,
    seconds: f64,
}

fn score_entry(
    img: &GrayImage,
    setup: &KernelSetup,
    timed: bool,
) -> Result<ScoredEntry, ScoreError> {
    let reps = if timed { 3 } else { 1 };
    let mut scores = Vec::with_capacity(setup.kernels.len());
    let mut times = Vec::with_capacity(reps);
    for rep in 0..reps {
        let start = Instant::now();
        let mut this_run = Vec::with_capacity(setup.kernels.len());
        for (kernel, moment, _) in &setup.kernels {
            this_run.push(score_single(img, kernel, *moment)?.value);
        }
        times.push(start.elapsed().as_secs_f64());
        if rep == 0 {
            scores = this_run;
        }
    }
    times.sort_by(f64::total_cmp);
    Ok(ScoredEntry { scores, seconds: times[times.len() / 2] })
}

/// Score every manifest image, calibrate the logistic mapping, and
/// compute the full statistics table.
///
/// Images failing with an empty foreground or a degenerate moment are
/// excluded and listed; any other failure aborts. With two kernels and
/// no weights, the combination weights are fitted on this manifest.
pub fn run_benchmark(
    entries: &[ManifestEntry],
    setup: &KernelSetup,
    cfg: &BenchConfig,
) -> Result<BenchReport, BenchError> {
    if setup.kernels.is_empty() || setup.kernels.len() > 2 {
        return Err(BenchError::BadKernelCount(setup.kernels.len()));
    }

    // Decode serially (decode time is excluded from timing), score in
    // parallel keyed by index.
    let mut images = Vec::with_capacity(entries.len());
    for entry in entries {
        images.push(load_gray(&entry.path)?);
    }

    let work = |i: usize| score_entry(&images[i], setup, cfg.timed);
    let results: Vec<Result<ScoredEntry, ScoreError>> = match thread_pool() {
        Some(pool) => pool.install(|| (0..entries.len()).into_par_iter().map(work).collect()),
        None => (0..entries.len()).into_par_iter().map(work).collect(),
    };

    let mut scored: Vec<(&ManifestEntry, ScoredEntry)> = Vec::new();
    let mut excluded = Vec::new();
    for (entry, result) in entries.iter().zip(results) {
        match result {
            Ok(s) => scored.push((entry, s)),
            Err(e @ (ScoreError::EmptyForeground | ScoreError::DegenerateMoment)) => {
                excluded.push(Exclusion {
                    path: entry.path.display().to_string(),
                    reason: e.to_string(),
                });
            }
            Err(source) => {
                return Err(BenchError::Score { path: entry.path.clone(), source })
            }
        }
    }
    if scored.len() < 3 {
        return Err(BenchError::TooFewScorable(scored.len()));
    }

    let subjective: Vec<f64> = scored.iter().map(|(e, _)| e.subjective).collect();
    let stds: Option<Vec<f64>> = scored
        .iter()
        .map(|(e, _)| e.std)
        .collect::<Option<Vec<f64>>>();

    // Combined objective score.
    let (weights, weights_fitted, objective): (Option<(f64, f64)>, bool, Vec<f64>) =
        if setup.kernels.len() == 2 {
            let cols: Vec<[f64; 2]> = scored
                .iter()
                .map(|(_, s)| [s.scores[0], s.scores[1]])
                .collect();
            match setup.weights {
                Some(w) => {
                    let x = cols.iter().map(|c| w.0 * c[0] + w.1 * c[1]).collect();
                    (Some(w), false, x)
                }
                None => {
                    let fit: ComboFit = fit_combo(&cols, &subjective)?;
                    let w = fit.weights;
                    let x = cols.iter().map(|c| w.0 * c[0] + w.1 * c[1]).collect();
                    (Some(w), true, x)
                }
            }
        } else {
            (None, false, scored.iter().map(|(_, s)| s.scores[0]).collect())
        };

    let (logistic, fit_rmse_value) = fit_logistic(&objective, &subjective)?;
    let fitted = logistic_map(&objective, &logistic);

    let plcc_value = plcc(&fitted, &subjective)?;
    let srcc_value = srcc(&objective, &subjective)?;
    let krcc_value = crate::stats::krcc(&objective, &subjective)?;
    let _ = rmse(&fitted, &subjective)?; // same as fit_rmse_value; sanity only

    let orientation = match cfg.orientation {
        OrientationConfig::Fixed(o) => o,
        OrientationConfig::Auto => {
            if srcc_value >= 0.0 {
                ScoreOrientation::HigherIsBetter
            } else {
                ScoreOrientation::LowerIsBetter
            }
        }
    };

    let mut pairs = ScorePairs::new(objective.clone(), subjective.clone())?;
    pairs.subjective_std = stds;
    let labels = pair_significance(&pairs, cfg.significance)?;
    let auc_ds_value = auc_ds(&objective, &labels).ok();
    let auc_bw_value = auc_bw(&objective, &labels, orientation).ok();
    let c0_value = c0(&objective, &labels, orientation).ok();

    let mean_seconds = scored.iter().map(|(_, s)| s.seconds).sum::<f64>() / scored.len() as f64;
    let per_image: Vec<PerImage> = scored
        .iter()
        .zip(&objective)
        .zip(&fitted)
        .map(|(((entry, s), &obj), &fit)| PerImage {
            path: entry.path.display().to_string(),
            subjective: entry.subjective,
            scores: s.scores.clone(),
            objective: obj,
            fitted: fit,
            seconds: s.seconds,
        })
        .collect();

    Ok(BenchReport {
        kernels: setup.kernels.iter().map(|(_, _, d)| d.clone()).collect(),
        weights,
        weights_fitted,
        sig_threshold: cfg.significance.threshold,
        orientation: match orientation {
            ScoreOrientation::HigherIsBetter => "higher-is-better".into(),
            ScoreOrientation::LowerIsBetter => "lower-is-better".into(),
        },
        n_scored: scored.len(),
        per_image,
        excluded,
        logistic,
        plcc: plcc_value,
        srcc: srcc_value,
        krcc: krcc_value,
        rmse: fit_rmse_value,
        auc_ds: auc_ds_value,
        auc_bw: auc_bw_value,
        c0: c0_value,
        mean_seconds_per_image: mean_seconds,
    })
}

/// One Monte-Carlo subsample result.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScalabilityRow {
    pub fraction: f64,
    pub trial: usize,
    pub plcc: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct ScalabilityTable {
    pub rows: Vec<ScalabilityRow>,
    pub warnings: Vec<String>,
}

/// Subsample the score table at each fraction `trials` times (without
/// replacement, seeded) and record the logistic-fitted PLCC per subset.
/// Pure function of its arguments.
pub fn run_scalability(
    objective: &[f64],
    subjective: &[f64],
    fractions: &[f64],
    trials: usize,
    seed: u64,
) -> Result<ScalabilityTable, BenchError> {
    if objective.len() != subjective.len() {
        return Err(StatsError::LengthMismatch(objective.len(), subjective.len()).into());
    }
    let n = objective.len();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut table = ScalabilityTable::default();
    for &fraction in fractions {
        for trial in 0..trials {
            let k = ((fraction * n as f64).floor() as usize).min(n);
            if k < 3 {
                table.warnings.push(format!(
                    "fraction {fraction} trial {trial}: subset of {k} images skipped (need 3)"
                ));
                continue;
            }
            let idx = rand::seq::index::sample(&mut rng, n, k);
            let xs: Vec<f64> = idx.iter().map(|i| objective[i]).collect();
            let ys: Vec<f64> = idx.iter().map(|i| subjective[i]).collect();
            match subset_plcc(&xs, &ys) {
                Ok(v) => table.rows.push(ScalabilityRow { fraction, trial, plcc: v }),
                Err(e) => table.warnings.push(format!(
                    "fraction {fraction} trial {trial}: skipped ({e})"
                )),
            }
        }
    }
    Ok(table)
}

fn subset_plcc(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    let (params, _) = fit_logistic(x, y)?;
    plcc(&logistic_map(x, &params), y)
}

/// Report output formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Plain-decimal formatting with at least 12 significant digits.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 {
        return format!("{:.12}", 0.0);
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).clamp(0, 40) as usize;
    format!("{x:.decimals$}")
}

/// Serialize a report to disk.
///
/// JSON carries the full report (round-trips exactly); CSV emits
/// per-image `path,objective,subjective,fitted` rows for scatter plots.
pub fn emit_report(report: &BenchReport, path: &Path, format: ReportFormat) -> Result<(), BenchError> {
    match format {
        ReportFormat::Json => {
            let json = serde_json::to_string_pretty(report)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
            std::fs::write(path, json)?;
        }
        ReportFormat::Csv => {
            let mut out = String::from("path,objective,subjective,fitted\n");
            for row in &report.per_image {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    row.path,
                    format_sig12(row.objective),
                    format_sig12(row.subjective),
                    format_sig12(row.fitted),
                ));
            }
            std::fs::write(path, out)?;
        }
    }
    Ok(())
}

pub fn load_report(path: &Path) -> Result<BenchReport, BenchError> {
    let data = std::fs::read_to_string(path)?;
    serde_json::from_str(&data)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e).into())
}
