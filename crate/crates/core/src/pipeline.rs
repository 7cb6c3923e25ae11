//! The blur-scoring pipeline.
//!
//! A grayscale image is scored in fixed stages: dark-background
//! masking, separable decomposition with the synthesized kernel along
//! both axes, rectification, pooling of a 95th-percentile statistic
//! into a retention ratio, an l1/2 feature map, top-fraction selection,
//! and the negative log of a high-order central moment. Every stage is
//! deterministic; the score is invariant to transposing or rotating the
//! image by 180 degrees.

use crate::kernel::FirKernel;
use crate::raster::{convolve_cols, convolve_rows, GrayImage, RasterError};
use thiserror::Error;

/// Dark-background threshold on normalized gray values.
pub const BACKGROUND_THRESHOLD: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("empty foreground: every pixel below the background threshold")]
    EmptyForeground,
    #[error("degenerate moment: retained features carry no variation (constant or empty image?)")]
    DegenerateMoment,
    #[error("feature map requires rectified (non-negative) inputs; found {0}")]
    NegativeFeature(f64),
    #[error("dimension mismatch between feature fields")]
    DimensionMismatch,
    #[error("moment order {0} must be even and >= 2")]
    BadMomentOrder(u32),
    #[error("retention fraction {0} outside (0, 1]")]
    BadRetention(f64),
    #[error("threshold {0} outside [0, 1)")]
    BadThreshold(f64),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Per-pixel decomposed responses; may be negative before rectification.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureField {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

/// Pixels bright enough to score.
#[derive(Debug, Clone)]
pub struct ForegroundMask {
    pub width: usize,
    pub height: usize,
    pub mask: Vec<bool>,
    pub valid_count: usize,
}

/// Scalar sharpness result for one kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharpnessScore {
    /// `-ln(moment_value)`. Larger means blurrier.
    pub value: f64,
    /// The m-th central moment of the retained features.
    pub moment_value: f64,
    /// Number of retained feature-map pixels.
    pub retained: usize,
    /// 95th-percentile pooled response statistic.
    pub sigma: f64,
}

/// Two kernels with moment orders and combination weights.
#[derive(Debug, Clone)]
pub struct ComboConfig {
    pub kernels: [(FirKernel, u32); 2],
    pub weights: (f64, f64),
}

/// Mask of pixels at or above `threshold`.
pub fn background_mask(img: &GrayImage, threshold: f64) -> Result<ForegroundMask, ScoreError> {
    if !(0.0..1.0).contains(&threshold) {
        return Err(ScoreError::BadThreshold(threshold));
    }
    let mask: Vec<bool> = img.pixels().iter().map(|&p| p >= threshold).collect();
    let valid_count = mask.iter().filter(|&&m| m).count();
    if valid_count == 0 {
        return Err(ScoreError::EmptyForeground);
    }
    Ok(ForegroundMask { width: img.width(), height: img.height(), mask, valid_count })
}

/// Decompose along the horizontal (`gx`) and vertical (`gy`) axes.
pub fn decompose(
    img: &GrayImage,
    kernel: &FirKernel,
) -> Result<(FeatureField, FeatureField), ScoreError> {
    let (w, h) = (img.width(), img.height());
    let gx = convolve_rows(img.pixels(), w, h, &kernel.taps)?;
    let gy = convolve_cols(img.pixels(), w, h, &kernel.taps)?;
    Ok((
        FeatureField { width: w, height: h, values: gx },
        FeatureField { width: w, height: h, values: gy },
    ))
}

/// Elementwise `max(x, 0)`.
pub fn relu(f: &FeatureField) -> FeatureField {
    FeatureField {
        width: f.width,
        height: f.height,
        values: f.values.iter().map(|&v| v.max(0.0)).collect(),
    }
}

/// l1/2 feature map `(sqrt(gx) + sqrt(gy))^2` of rectified responses.
pub fn feature_map(gx: &FeatureField, gy: &FeatureField) -> Result<FeatureField, ScoreError> {
    if gx.width != gy.width || gx.height != gy.height {
        return Err(ScoreError::DimensionMismatch);
    }
    let values = gx
        .values
        .iter()
        .zip(&gy.values)
        .map(|(&a, &b)| {
            if a < 0.0 {
                return Err(ScoreError::NegativeFeature(a));
            }
            if b < 0.0 {
                return Err(ScoreError::NegativeFeature(b));
            }
            let s = a.sqrt() + b.sqrt();
            Ok(s * s)
        })
        .collect::<Result<_, _>>()?;
    Ok(FeatureField { width: gx.width, height: gx.height, values })
}

/// 95th percentile (lower nearest rank) of the pooled rectified
/// responses at mask-valid locations.
pub fn sigma_stat(
    gx: &FeatureField,
    gy: &FeatureField,
    mask: &ForegroundMask,
) -> Result<f64, ScoreError> {
    if gx.width != mask.width || gx.height != mask.height {
        return Err(ScoreError::DimensionMismatch);
    }
    let mut pool = Vec::with_capacity(2 * mask.valid_count);
    for (v, &m) in gx.values.iter().zip(&mask.mask) {
        if m {
            pool.push(*v);
        }
    }
    for (v, &m) in gy.values.iter().zip(&mask.mask) {
        if m {
            pool.push(*v);
        }
    }
    if pool.is_empty() {
        return Err(ScoreError::EmptyForeground);
    }
    let n = pool.len();
    let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
    let (_, nth, _) = pool.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(*nth)
}

/// Retained-pixel ratio: a sigmoid that keeps more pixels for sparse
/// (sharp) decompositions. Strictly decreasing, range (0.09, 0.59).
pub fn retention_ratio(sigma: f64) -> f64 {
    0.25 * (1.0 - (60.0 * (sigma - 0.095)).tanh()) + 0.09
}

/// The `max(1, floor(p * valid))` largest mask-valid feature values,
/// descending.
///
/// Selection and ordering compare values only; equal values are
/// interchangeable in the returned vector, which is what makes the
/// result independent of pixel enumeration order.
pub fn select_top(
    m: &FeatureField,
    mask: &ForegroundMask,
    p: f64,
) -> Result<Vec<f64>, ScoreError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(ScoreError::BadRetention(p));
    }
    if m.width != mask.width || m.height != mask.height {
        return Err(ScoreError::DimensionMismatch);
    }
    let mut valid: Vec<f64> = m
        .values
        .iter()
        .zip(&mask.mask)
        .filter_map(|(v, &keep)| keep.then_some(*v))
        .collect();
    if valid.is_empty() {
        return Err(ScoreError::EmptyForeground);
    }
    let k = ((p * valid.len() as f64).floor() as usize).max(1).min(valid.len());
    let desc = |a: &f64, b: &f64| f64::total_cmp(b, a);
    if k < valid.len() {
        valid.select_nth_unstable_by(k - 1, desc);
    }
    valid.truncate(k);
    valid.sort_unstable_by(desc);
    Ok(valid)
}

/// Population m-th central moment, even `m >= 2`.
pub fn central_moment(values: &[f64], m: u32) -> Result<f64, ScoreError> {
    if m < 2 || m % 2 != 0 {
        return Err(ScoreError::BadMomentOrder(m));
    }
    if values.is_empty() {
        return Err(ScoreError::DegenerateMoment);
    }
    // constant input is exactly zero; the mean of n copies of v is not
    // always v in floating point
    if values.iter().all(|&v| v == values[0]) {
        return Ok(0.0);
    }
    let n = values.len() as f64;
    let mean: f64 = values.iter().sum::<f64>() / n;
    let acc: f64 = values.iter().map(|&v| (v - mean).powi(m as i32)).sum();
    Ok(acc / n)
}

/// Score one image with one kernel.
pub fn score_single(img: &GrayImage, kernel: &FirKernel, m: u32) -> Result<SharpnessScore, ScoreError> {
    let mask = background_mask(img, BACKGROUND_THRESHOLD)?;
    let (gx, gy) = decompose(img, kernel)?;
    let gx = relu(&gx);
    let gy = relu(&gy);
    let sigma = sigma_stat(&gx, &gy, &mask)?;
    let p = retention_ratio(sigma);
    let features = feature_map(&gx, &gy)?;
    let retained = select_top(&features, &mask, p)?;
    let moment_value = central_moment(&retained, m)?;
    if moment_value <= 0.0 {
        return Err(ScoreError::DegenerateMoment);
    }
    Ok(SharpnessScore {
        value: -moment_value.ln(),
        moment_value,
        retained: retained.len(),
        sigma,
    })
}

/// Weighted combination of two single-kernel scores.
pub fn score_combo(img: &GrayImage, cfg: &ComboConfig) -> Result<f64, ScoreError> {
    let c1 = score_single(img, &cfg.kernels[0].0, cfg.kernels[0].1)?;
    let c2 = score_single(img, &cfg.kernels[1].0, cfg.kernels[1].1)?;
    Ok(cfg.weights.0 * c1.value + cfg.weights.1 * c2.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(width: usize, height: usize, values: Vec<f64>) -> FeatureField {
        FeatureField { width, height, values }
    }

    fn full_mask(width: usize, height: usize) -> ForegroundMask {
        ForegroundMask {
            width,
            height,
            mask: vec![true; width * height],
            valid_count: width * height,
        }
    }

    fn test_kernel() -> FirKernel {
        // normalized second difference: peak response 1 at pi
        FirKernel { taps: vec![0.25, -0.5, 0.25], norm_gain: 4.0 }
    }

    #[test]
    fn mask_threshold_boundary() {
        let img = GrayImage::new(3, 1, vec![0.04, 0.05, 0.06]).unwrap();
        let m = background_mask(&img, 0.05).unwrap();
        assert_eq!(m.mask, vec![false, true, true]);
        assert_eq!(m.valid_count, 2);
    }

    #[test]
    fn mask_uniform_images() {
        let bright = GrayImage::new(4, 4, vec![0.5; 16]).unwrap();
        assert_eq!(background_mask(&bright, 0.05).unwrap().valid_count, 16);
        let dark = GrayImage::new(4, 4, vec![0.01; 16]).unwrap();
        assert!(matches!(
            background_mask(&dark, 0.05),
            Err(ScoreError::EmptyForeground)
        ));
    }

    #[test]
    fn relu_examples_and_idempotence() {
        let f = field(3, 1, vec![-1.0, 0.0, 0.7]);
        let r = relu(&f);
        assert_eq!(r.values, vec![0.0, 0.0, 0.7]);
        assert_eq!(relu(&r).values, r.values);
    }

    #[test]
    fn feature_map_examples() {
        let gx = field(3, 1, vec![0.0, 1.0, 0.25]);
        let gy = field(3, 1, vec![0.0, 1.0, 0.25]);
        let m = feature_map(&gx, &gy).unwrap();
        assert_eq!(m.values[0], 0.0);
        assert!((m.values[1] - 4.0).abs() < 1e-15);
        assert!((m.values[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn feature_map_rejects_negative() {
        let gx = field(1, 1, vec![-0.1]);
        let gy = field(1, 1, vec![0.1]);
        assert!(matches!(
            feature_map(&gx, &gy),
            Err(ScoreError::NegativeFeature(_))
        ));
    }

    #[test]
    fn sigma_constant_distribution() {
        let gx = field(2, 2, vec![0.3; 4]);
        let gy = field(2, 2, vec![0.3; 4]);
        let s = sigma_stat(&gx, &gy, &full_mask(2, 2)).unwrap();
        assert_eq!(s, 0.3);
    }

    #[test]
    fn sigma_nearest_rank() {
        // pooled {1..=100}: rank ceil(95) = 95 -> value 95
        let gx = field(10, 5, (1..=50).map(f64::from).collect());
        let gy = field(10, 5, (51..=100).map(f64::from).collect());
        let s = sigma_stat(&gx, &gy, &full_mask(10, 5)).unwrap();
        assert_eq!(s, 95.0);

        // pooled {0,0,0,10}: ceil(0.95*4) = 4 -> 10
        let gx = field(2, 1, vec![0.0, 0.0]);
        let gy = field(2, 1, vec![0.0, 10.0]);
        let s = sigma_stat(&gx, &gy, &full_mask(2, 1)).unwrap();
        assert_eq!(s, 10.0);
    }

    #[test]
    fn retention_examples() {
        assert!((retention_ratio(0.095) - 0.34).abs() < 1e-12);
        // 1/4 (1 - tanh(-5.7)) + 0.09 evaluated at high precision
        assert!((retention_ratio(0.0) - 0.5899944023202475).abs() < 1e-12);
        assert!((retention_ratio(1.0) - 0.09).abs() < 1e-15);
        // strictly decreasing across the active band, non-increasing
        // beyond (tanh saturates in f64 near sigma ~ 0.4)
        let mut prev = retention_ratio(0.0);
        for i in 1..=100 {
            let sigma = i as f64 * 0.003;
            let v = retention_ratio(sigma);
            assert!(v < prev, "sigma {sigma}");
            prev = v;
        }
        for i in 1..=50 {
            let v = retention_ratio(0.3 + i as f64 * 0.05);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn select_top_examples() {
        let m = field(4, 1, vec![5.0, 3.0, 9.0, 1.0]);
        let mask = full_mask(4, 1);
        assert_eq!(select_top(&m, &mask, 0.5).unwrap(), vec![9.0, 5.0]);
        assert_eq!(select_top(&m, &mask, 1.0).unwrap(), vec![9.0, 5.0, 3.0, 1.0]);
        // floor(0.05 * 4) = 0 clamps to 1
        assert_eq!(select_top(&m, &mask, 0.05).unwrap(), vec![9.0]);
        assert!(select_top(&m, &mask, 0.0).is_err());
        assert!(select_top(&m, &mask, 1.5).is_err());
    }

    #[test]
    fn central_moment_examples() {
        assert_eq!(central_moment(&[0.7; 9], 2).unwrap(), 0.0);
        assert!((central_moment(&[0.0, 2.0], 2).unwrap() - 1.0).abs() < 1e-15);
        assert!((central_moment(&[1.0, 2.0, 3.0, 4.0], 2).unwrap() - 1.25).abs() < 1e-15);
        assert!(matches!(
            central_moment(&[1.0, 2.0], 3),
            Err(ScoreError::BadMomentOrder(3))
        ));
    }

    #[test]
    fn central_moment_translation_invariant() {
        let vals: Vec<f64> = (0..40).map(|i| (i as f64 * 0.917).sin().abs()).collect();
        let base = central_moment(&vals, 6).unwrap();
        let shifted: Vec<f64> = vals.iter().map(|v| v + 13.25).collect();
        let moved = central_moment(&shifted, 6).unwrap();
        assert!((base - moved).abs() <= 1e-12 * base.abs().max(1.0));
    }

    #[test]
    fn score_constant_image_is_degenerate() {
        let img = GrayImage::new(8, 8, vec![0.5; 64]).unwrap();
        assert!(matches!(
            score_single(&img, &test_kernel(), 2),
            Err(ScoreError::DegenerateMoment)
        ));
    }

    #[test]
    fn score_transpose_and_rotation_invariant() {
        let px: Vec<f64> = (0..24 * 17)
            .map(|i| (0.5 + 0.49 * ((i as f64) * 0.7171).sin()).clamp(0.0, 1.0))
            .collect();
        let img = GrayImage::new(24, 17, px).unwrap();
        let k = test_kernel();
        let a = score_single(&img, &k, 4).unwrap();
        let b = score_single(&img.transpose(), &k, 4).unwrap();
        let c = score_single(&img.rotate_180(), &k, 4).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.value.to_bits(), c.value.to_bits());
        assert_eq!(a.retained, b.retained);
        assert_eq!(a.sigma.to_bits(), c.sigma.to_bits());
    }

    #[test]
    fn combo_linear_form() {
        let px: Vec<f64> = (0..20 * 20)
            .map(|i| (0.5 + 0.4 * ((i as f64) * 0.311).cos()).clamp(0.0, 1.0))
            .collect();
        let img = GrayImage::new(20, 20, px).unwrap();
        let k = test_kernel();
        let c1 = score_single(&img, &k, 2).unwrap().value;
        let c2 = score_single(&img, &k, 4).unwrap().value;

        let cfg = ComboConfig {
            kernels: [(k.clone(), 2), (k.clone(), 4)],
            weights: (1.0, 0.0),
        };
        assert_eq!(score_combo(&img, &cfg).unwrap(), c1);

        let cfg = ComboConfig { kernels: [(k.clone(), 2), (k, 4)], weights: (2.0, -1.0) };
        let got = score_combo(&img, &cfg).unwrap();
        assert!((got - (2.0 * c1 - c2)).abs() < 1e-12);
    }
}
