//! Image-space augmentation (reflection, rotation, translation) and
//! bilinear resizing.
//!
//! Augmentation applies its steps in a fixed order: reflections, then
//! rotation about the image center, then an integer translation. Pixels
//! with no source are filled with 0.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest translation magnitude, in pixels, along either axis.
pub const MAX_SHIFT: i32 = 30;
/// Largest rotation, in degrees.
pub const MAX_ROTATION_DEG: f64 = 90.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ImageError {
    #[error("image dimensions must be at least 1x1, got {height}x{width}")]
    EmptyDimensions { height: usize, width: usize },
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    Channels(usize),
    #[error("pixel buffer holds {actual} bytes, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
    #[error("augmentation parameter out of range: {0}")]
    ParamRange(&'static str),
}

/// H × W × C 8-bit image, row-major with interleaved channels (RGB when C = 3).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    pixels: Vec<u8>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if height == 0 || width == 0 {
            return Err(ImageError::EmptyDimensions { height, width });
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::Channels(channels));
        }
        let expected = height * width * channels;
        if pixels.len() != expected {
            return Err(ImageError::BufferSize { expected, actual: pixels.len() });
        }
        Ok(Self { height, width, channels, pixels })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: u8) -> Result<Self, ImageError> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    /// The channel values of pixel `(row, col)`.
    pub fn pixel(&self, row: usize, col: usize) -> &[u8] {
        let i = (row * self.width + col) * self.channels;
        &self.pixels[i..i + self.channels]
    }

    fn blank_like(&self) -> Self {
        Self { pixels: vec![0; self.pixels.len()], ..*self }
    }

    fn copy_pixel(&mut self, row: usize, col: usize, src: &Image, src_row: usize, src_col: usize) {
        let c = self.channels;
        let d = (row * self.width + col) * c;
        let s = (src_row * src.width + src_col) * c;
        self.pixels[d..d + c].copy_from_slice(&src.pixels[s..s + c]);
    }

    /// Channel value at integer coordinates, 0 outside the image.
    fn at_or_zero(&self, row: isize, col: isize, ch: usize) -> f64 {
        if row < 0 || col < 0 || row as usize >= self.height || col as usize >= self.width {
            0.0
        } else {
            f64::from(self.pixels[(row as usize * self.width + col as usize) * self.channels + ch])
        }
    }
}

/// One draw of the augmentation operator's random parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentationParams {
    /// Positive moves content right.
    pub shift_x: i32,
    /// Positive moves content down.
    pub shift_y: i32,
    /// Mirror left-right.
    pub flip_x: bool,
    /// Mirror top-bottom.
    pub flip_y: bool,
    /// Counter-clockwise rotation in degrees, `[0, 90]`.
    pub rotation_deg: f64,
}

impl AugmentationParams {
    pub const IDENTITY: Self = Self { shift_x: 0, shift_y: 0, flip_x: false, flip_y: false, rotation_deg: 0.0 };

    pub fn validate(&self) -> Result<(), ImageError> {
        if self.shift_x.abs() > MAX_SHIFT || self.shift_y.abs() > MAX_SHIFT {
            return Err(ImageError::ParamRange("shift must be within [-30, 30]"));
        }
        if !(0.0..=MAX_ROTATION_DEG).contains(&self.rotation_deg) {
            return Err(ImageError::ParamRange("rotation must be within [0, 90] degrees"));
        }
        Ok(())
    }
}

/// Shifts uniform over the integers in `[-30, 30]`, each flip with
/// probability ½, rotation uniform over `[0, 90]` degrees.
pub fn sample_params<R: Rng + ?Sized>(rng: &mut R) -> AugmentationParams {
    AugmentationParams {
        shift_x: rng.random_range(-MAX_SHIFT..=MAX_SHIFT),
        shift_y: rng.random_range(-MAX_SHIFT..=MAX_SHIFT),
        flip_x: rng.random_bool(0.5),
        flip_y: rng.random_bool(0.5),
        rotation_deg: rng.random_range(0.0..=MAX_ROTATION_DEG),
    }
}

/// Parameters for one sample, derived from `(seed, sample_id)` alone so the
/// assignment does not depend on processing order.
pub fn params_for_sample(seed: u64, sample_id: &str) -> AugmentationParams {
    let mut key = Vec::with_capacity(8 + sample_id.len());
    key.extend_from_slice(&seed.to_le_bytes());
    key.extend_from_slice(sample_id.as_bytes());
    sample_params(&mut ChaCha8Rng::seed_from_u64(crate::fnv1a64(&key)))
}

pub fn flip_horizontal(img: &Image) -> Image {
    let mut out = img.blank_like();
    for r in 0..img.height {
        for c in 0..img.width {
            out.copy_pixel(r, c, img, r, img.width - 1 - c);
        }
    }
    out
}

pub fn flip_vertical(img: &Image) -> Image {
    let mut out = img.blank_like();
    let row_len = img.width * img.channels;
    for r in 0..img.height {
        let s = (img.height - 1 - r) * row_len;
        out.pixels[r * row_len..(r + 1) * row_len].copy_from_slice(&img.pixels[s..s + row_len]);
    }
    out
}

/// Exact 90° counter-clockwise rotation of a square image.
fn rotate90_square(img: &Image) -> Image {
    let n = img.width;
    let mut out = img.blank_like();
    for r in 0..n {
        for c in 0..n {
            out.copy_pixel(r, c, img, c, n - 1 - r);
        }
    }
    out
}

/// Rounds half up and clamps to the 8-bit range.
fn to_u8(v: f64) -> u8 {
    libm::floor(v + 0.5).clamp(0.0, 255.0) as u8
}

/// Counter-clockwise rotation about the image center, same output size.
/// 0° is the identity and 90° on a square image is an exact permutation;
/// other cases resample bilinearly with zeros outside the source.
pub fn rotate(img: &Image, degrees: f64) -> Image {
    if degrees == 0.0 {
        return img.clone();
    }
    if degrees == 90.0 && img.height == img.width {
        return rotate90_square(img);
    }
    let theta = degrees.to_radians();
    let (sin, cos) = (libm::sin(theta), libm::cos(theta));
    let cy = (img.height as f64 - 1.0) / 2.0;
    let cx = (img.width as f64 - 1.0) / 2.0;
    let mut out = img.blank_like();
    for r in 0..img.height {
        for c in 0..img.width {
            let dx = c as f64 - cx;
            let dy = r as f64 - cy;
            let sx = cx + dx * cos - dy * sin;
            let sy = cy + dx * sin + dy * cos;
            let x0 = libm::floor(sx);
            let y0 = libm::floor(sy);
            let (tx, ty) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as isize, y0 as isize);
            for ch in 0..img.channels {
                let top = img.at_or_zero(y0, x0, ch) * (1.0 - tx) + img.at_or_zero(y0, x0 + 1, ch) * tx;
                let bottom = img.at_or_zero(y0 + 1, x0, ch) * (1.0 - tx) + img.at_or_zero(y0 + 1, x0 + 1, ch) * tx;
                out.pixels[(r * img.width + c) * img.channels + ch] = to_u8(top * (1.0 - ty) + bottom * ty);
            }
        }
    }
    out
}

/// Integer translation; vacated pixels are 0.
pub fn translate(img: &Image, shift_x: i32, shift_y: i32) -> Image {
    let mut out = img.blank_like();
    let (h, w) = (img.height as isize, img.width as isize);
    for r in 0..h {
        let sr = r - shift_y as isize;
        if sr < 0 || sr >= h {
            continue;
        }
        for c in 0..w {
            let sc = c - shift_x as isize;
            if sc < 0 || sc >= w {
                continue;
            }
            out.copy_pixel(r as usize, c as usize, img, sr as usize, sc as usize);
        }
    }
    out
}

/// Applies reflections, then rotation, then translation.
pub fn augment(img: &Image, p: &AugmentationParams) -> Image {
    let mut out = img.clone();
    if p.flip_x {
        out = flip_horizontal(&out);
    }
    if p.flip_y {
        out = flip_vertical(&out);
    }
    out = rotate(&out, p.rotation_deg);
    if p.shift_x != 0 || p.shift_y != 0 {
        out = translate(&out, p.shift_x, p.shift_y);
    }
    out
}

/// Bilinear resize with edge-aligned sampling: output corners sample input
/// corners exactly. Results round half up.
pub fn resize_bilinear(img: &Image, out_h: usize, out_w: usize) -> Result<Image, ImageError> {
    if out_h == 0 || out_w == 0 {
        return Err(ImageError::EmptyDimensions { height: out_h, width: out_w });
    }
    if out_h == img.height && out_w == img.width {
        return Ok(img.clone());
    }
    let src_coord = |i: usize, n_out: usize, n_in: usize| -> (usize, usize, f64) {
        if n_out == 1 || n_in == 1 {
            return (0, 0, 0.0);
        }
        let s = i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64;
        let lo = (libm::floor(s) as usize).min(n_in - 1);
        let hi = (lo + 1).min(n_in - 1);
        (lo, hi, s - lo as f64)
    };
    let ch = img.channels;
    let mut pixels = vec![0u8; out_h * out_w * ch];
    for r in 0..out_h {
        let (y0, y1, ty) = src_coord(r, out_h, img.height);
        for c in 0..out_w {
            let (x0, x1, tx) = src_coord(c, out_w, img.width);
            for k in 0..ch {
                let p = |y: usize, x: usize| f64::from(img.pixels[(y * img.width + x) * ch + k]);
                let top = p(y0, x0) * (1.0 - tx) + p(y0, x1) * tx;
                let bottom = p(y1, x0) * (1.0 - tx) + p(y1, x1) * tx;
                pixels[(r * out_w + c) * ch + k] = to_u8(top * (1.0 - ty) + bottom * ty);
            }
        }
    }
    Image::new(out_h, out_w, ch, pixels)
}
