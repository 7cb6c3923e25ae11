//! Normalized grayscale rasters and separable convolution.
//!
//! All pipeline arithmetic runs on row-major `f64` rasters in `[0, 1]`.
//! Convolution uses symmetric (mirror, edge-repeating) boundary padding
//! and a paired summation order chosen so that transposing or rotating
//! the input permutes the output bit-exactly.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("zero-sized image ({width}x{height})")]
    ZeroSized { width: usize, height: usize },
    #[error("pixel buffer length {len} does not match {width}x{height}")]
    LengthMismatch { len: usize, width: usize, height: usize },
    #[error("pixel value {value} at index {index} outside [0, 1] or non-finite")]
    PixelOutOfRange { value: f64, index: usize },
    #[error("channel buffer length {len} is not a multiple of 3")]
    NotRgb { len: usize },
    #[error("image {width}x{height} smaller than kernel support {support}")]
    SmallerThanKernel { width: usize, height: usize, support: usize },
    #[error("blur sigma {0} must be positive")]
    NonPositiveSigma(f64),
}

/// A normalized grayscale raster.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::ZeroSized { width, height });
        }
        if pixels.len() != width * height {
            return Err(RasterError::LengthMismatch { len: pixels.len(), width, height });
        }
        for (index, &value) in pixels.iter().enumerate() {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(RasterError::PixelOutOfRange { value, index });
            }
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn transpose(&self) -> GrayImage {
        GrayImage {
            width: self.height,
            height: self.width,
            pixels: transpose_buf(&self.pixels, self.width, self.height),
        }
    }

    pub fn rotate_180(&self) -> GrayImage {
        let mut pixels = self.pixels.clone();
        pixels.reverse();
        GrayImage { width: self.width, height: self.height, pixels }
    }
}

fn transpose_buf(src: &[f64], width: usize, height: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    for y in 0..height {
        for x in 0..width {
            out[x * height + y] = src[y * width + x];
        }
    }
    out
}

/// Luma conversion from interleaved 8-bit RGB.
pub fn to_gray_u8(width: usize, height: usize, rgb: &[u8]) -> Result<GrayImage, RasterError> {
    to_gray_scaled(width, height, rgb, 255.0)
}

/// Luma conversion from interleaved 16-bit RGB.
pub fn to_gray_u16(width: usize, height: usize, rgb: &[u16]) -> Result<GrayImage, RasterError> {
    to_gray_scaled(width, height, rgb, 65535.0)
}

fn to_gray_scaled<T: Copy + Into<f64>>(
    width: usize,
    height: usize,
    rgb: &[T],
    full_scale: f64,
) -> Result<GrayImage, RasterError> {
    if rgb.len() % 3 != 0 {
        return Err(RasterError::NotRgb { len: rgb.len() });
    }
    let pixels = rgb
        .chunks_exact(3)
        .map(|px| {
            let luma =
                0.299 * px[0].into() + 0.587 * px[1].into() + 0.114 * px[2].into();
            (luma / full_scale).clamp(0.0, 1.0)
        })
        .collect();
    GrayImage::new(width, height, pixels)
}

/// Single-channel input passes through scaled to `[0, 1]`.
pub fn gray_from_luma_u8(width: usize, height: usize, luma: &[u8]) -> Result<GrayImage, RasterError> {
    GrayImage::new(width, height, luma.iter().map(|&v| f64::from(v) / 255.0).collect())
}

pub fn gray_from_luma_u16(
    width: usize,
    height: usize,
    luma: &[u16],
) -> Result<GrayImage, RasterError> {
    GrayImage::new(width, height, luma.iter().map(|&v| f64::from(v) / 65535.0).collect())
}

/// Mirror index with edge repetition: ...x1 x0 | x0 x1 ... xn-1 | xn-1...
#[inline]
fn mirror(i: isize, len: usize) -> usize {
    let n = len as isize;
    let mut j = i;
    // converges in one step whenever the kernel support fits the row
    loop {
        if j < 0 {
            j = -j - 1;
        } else if j >= n {
            j = 2 * n - 1 - j;
        } else {
            return j as usize;
        }
    }
}

/// Convolve every row with symmetric taps under mirror padding.
///
/// `taps` must be center-symmetric (every kernel in this crate is).
/// The accumulation pairs the two samples equidistant from the center
/// (`t[k] * (row[i-k] + row[i+k])`) so reversing a row reverses the
/// output bit-exactly.
pub fn convolve_rows(
    pixels: &[f64],
    width: usize,
    height: usize,
    taps: &[f64],
) -> Result<Vec<f64>, RasterError> {
    debug_assert_eq!(taps.len() % 2, 1);
    let half = (taps.len() - 1) / 2;
    if width < taps.len() || height < taps.len() {
        return Err(RasterError::SmallerThanKernel { width, height, support: taps.len() });
    }
    let mut out = vec![0.0; pixels.len()];
    for y in 0..height {
        let row = &pixels[y * width..(y + 1) * width];
        let out_row = &mut out[y * width..(y + 1) * width];
        // boundary region
        for x in 0..half.min(width) {
            out_row[x] = conv_at_mirror(row, x, taps, half);
        }
        // interior: direct slicing, same pairing order
        for x in half..width.saturating_sub(half) {
            let mut acc = taps[half] * row[x];
            for k in 1..=half {
                acc += taps[half + k] * (row[x - k] + row[x + k]);
            }
            out_row[x] = acc;
        }
        for x in width.saturating_sub(half).max(half)..width {
            out_row[x] = conv_at_mirror(row, x, taps, half);
        }
    }
    Ok(out)
}

#[inline]
fn conv_at_mirror(row: &[f64], x: usize, taps: &[f64], half: usize) -> f64 {
    let n = row.len();
    let xi = x as isize;
    let mut acc = taps[half] * row[x];
    for k in 1..=half {
        let k_i = k as isize;
        let a = row[mirror(xi - k_i, n)];
        let b = row[mirror(xi + k_i, n)];
        acc += taps[half + k] * (a + b);
    }
    acc
}

/// Separable convolution along columns, implemented as
/// transpose / row-convolve / transpose so the arithmetic per output
/// element is identical to the row pass.
pub fn convolve_cols(
    pixels: &[f64],
    width: usize,
    height: usize,
    taps: &[f64],
) -> Result<Vec<f64>, RasterError> {
    let t = transpose_buf(pixels, width, height);
    let c = convolve_rows(&t, height, width, taps)?;
    Ok(transpose_buf(&c, height, width))
}

/// Separable Gaussian blur with kernel radius `ceil(4 sigma)`, taps
/// normalized to unit sum, mirror padding. Preserves `[0, 1]`.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> Result<GrayImage, RasterError> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(RasterError::NonPositiveSigma(sigma));
    }
    let radius = (4.0 * sigma).ceil() as usize;
    let mut taps = Vec::with_capacity(2 * radius + 1);
    for k in -(radius as isize)..=(radius as isize) {
        let t = k as f64 / sigma;
        taps.push((-0.5 * t * t).exp());
    }
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }

    let (w, h) = (img.width, img.height);
    if taps.len() > w || taps.len() > h {
        return Err(RasterError::SmallerThanKernel {
            width: w,
            height: h,
            support: taps.len(),
        });
    }
    let gx = convolve_rows(&img.pixels, w, h, &taps)?;
    let mut out = convolve_cols(&gx, w, h, &taps)?;
    for v in &mut out {
        *v = v.clamp(0.0, 1.0);
    }
    GrayImage::new(w, h, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(width: usize, height: usize, v: f64) -> GrayImage {
        GrayImage::new(width, height, vec![v; width * height]).unwrap()
    }

    #[test]
    fn to_gray_white_black_red() {
        let g = to_gray_u8(3, 1, &[255, 255, 255, 0, 0, 0, 255, 0, 0]).unwrap();
        assert!((g.get(0, 0) - 1.0).abs() < 1e-12);
        assert_eq!(g.get(1, 0), 0.0);
        assert!((g.get(2, 0) - 0.299).abs() < 1e-12);
    }

    #[test]
    fn to_gray_16_bit_full_scale() {
        let g = to_gray_u16(1, 1, &[65535, 65535, 65535]).unwrap();
        assert!((g.get(0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gray_image_validation() {
        assert!(GrayImage::new(0, 4, vec![]).is_err());
        assert!(GrayImage::new(2, 2, vec![0.0; 3]).is_err());
        assert!(GrayImage::new(2, 2, vec![0.0, 0.5, 1.0, 1.5]).is_err());
        assert!(GrayImage::new(2, 2, vec![0.0, 0.5, 1.0, f64::NAN]).is_err());
    }

    #[test]
    fn impulse_reproduces_taps() {
        let mut px = vec![0.0; 9 * 9];
        px[4 * 9 + 4] = 1.0;
        let taps = [0.25, -0.5, 1.0, -0.5, 0.25];
        let out = convolve_rows(&px, 9, 9, &taps).unwrap();
        for (k, want) in taps.iter().enumerate() {
            let x = 4 - 2 + k;
            assert!((out[4 * 9 + x] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_dc_kernel_annihilates_constants() {
        let img = constant(16, 12, 0.37);
        let out = convolve_rows(img.pixels(), 16, 12, &[1.0, -2.0, 1.0]).unwrap();
        for v in out {
            assert!(v.abs() <= 1e-10);
        }
    }

    #[test]
    fn transpose_symmetry_of_separable_passes() {
        // decompose(I^T).gx == decompose(I).gy^T, element-for-element
        let px: Vec<f64> = (0..12 * 7).map(|i| (i as f64 * 0.61803) % 1.0).collect();
        let img = GrayImage::new(12, 7, px).unwrap();
        let taps = [0.1, -0.2, 0.2, -0.2, 0.1];
        let gy = convolve_cols(img.pixels(), 12, 7, &taps).unwrap();
        let t = img.transpose();
        let gx_t = convolve_rows(t.pixels(), 7, 12, &taps).unwrap();
        let gy_t = transpose_buf(&gy, 12, 7);
        for (a, b) in gx_t.iter().zip(&gy_t) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn row_reversal_reverses_output_bit_exactly() {
        let (w, h) = (31, 6);
        let px: Vec<f64> = (0..w * h).map(|i| (i as f64 * 0.7548) % 1.0).collect();
        let taps = [0.11, -0.31, 0.4, -0.31, 0.11];
        let fwd = convolve_rows(&px, w, h, &taps).unwrap();
        // flip each row horizontally
        let mut flipped = px.clone();
        for row in flipped.chunks_exact_mut(w) {
            row.reverse();
        }
        let rev = convolve_rows(&flipped, w, h, &taps).unwrap();
        for y in 0..h {
            for x in 0..w {
                assert_eq!(
                    fwd[y * w + x].to_bits(),
                    rev[y * w + (w - 1 - x)].to_bits()
                );
            }
        }
    }

    #[test]
    fn blur_keeps_constant_image() {
        let img = constant(24, 24, 0.6);
        let out = gaussian_blur(&img, 1.3).unwrap();
        for v in out.pixels() {
            assert!((v - 0.6).abs() <= 1e-12);
        }
    }

    #[test]
    fn blur_impulse_is_symmetric_unit_mass() {
        let mut px = vec![0.0; 33 * 33];
        px[16 * 33 + 16] = 1.0;
        let img = GrayImage::new(33, 33, px).unwrap();
        let out = gaussian_blur(&img, 1.0).unwrap();
        let total: f64 = out.pixels().iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        for d in 1..=4usize {
            assert!((out.get(16 - d, 16) - out.get(16 + d, 16)).abs() < 1e-15);
            assert!((out.get(16, 16 - d) - out.get(16, 16 + d)).abs() < 1e-15);
        }
    }

    #[test]
    fn blur_semigroup() {
        let px: Vec<f64> = (0..48 * 48)
            .map(|i| {
                let x = (i % 48) as f64 / 47.0;
                let y = (i / 48) as f64 / 47.0;
                0.5 + 0.4 * (6.0 * x).sin() * (5.0 * y).cos()
            })
            .map(|v| v.clamp(0.0, 1.0))
            .collect();
        let img = GrayImage::new(48, 48, px).unwrap();
        let twice = gaussian_blur(&gaussian_blur(&img, 1.0).unwrap(), 1.2).unwrap();
        let once = gaussian_blur(&img, (1.0f64 + 1.2 * 1.2).sqrt()).unwrap();
        let max_abs = twice
            .pixels()
            .iter()
            .zip(once.pixels())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_abs < 1e-3, "max diff {max_abs}");
    }

    #[test]
    fn blur_preserves_mean() {
        let px: Vec<f64> = (0..40 * 40).map(|i| (i as f64 * 0.3137) % 1.0).collect();
        let img = GrayImage::new(40, 40, px).unwrap();
        let before: f64 = img.pixels().iter().sum::<f64>() / img.pixels().len() as f64;
        let out = gaussian_blur(&img, 2.0).unwrap();
        let after: f64 = out.pixels().iter().sum::<f64>() / out.pixels().len() as f64;
        assert!((before - after).abs() < 1e-6);
    }

    #[test]
    fn blur_rejects_bad_sigma() {
        let img = constant(16, 16, 0.5);
        assert!(gaussian_blur(&img, 0.0).is_err());
        assert!(gaussian_blur(&img, -1.0).is_err());
    }
}
