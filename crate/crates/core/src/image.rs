//! 8-bit raster images and the frame preprocessing chain: keep the top
//! square of a portrait capture, then bilinear-resize it.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Side length of the square kept from a portrait capture (480 × 640 input).
pub const CROP_SIDE: usize = 480;
/// Side length fed to the classifier.
pub const MODEL_SIDE: usize = 224;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImageError {
    BadChannelCount(usize),
    BufferSize { expected: usize, actual: usize },
    NotPortrait { width: usize, height: usize },
    NotSquare { width: usize, height: usize },
    InvalidTarget(usize),
    WrongSize { expected: usize, width: usize, height: usize },
}

impl fmt::Display for ImageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImageError::BadChannelCount(c) => write!(f, "unsupported channel count {c}"),
            ImageError::BufferSize { expected, actual } => {
                write!(f, "pixel buffer has {actual} bytes, expected {expected}")
            }
            ImageError::NotPortrait { width, height } => {
                write!(f, "image {width}x{height} is not portrait")
            }
            ImageError::NotSquare { width, height } => {
                write!(f, "image {width}x{height} is not square")
            }
            ImageError::InvalidTarget(t) => write!(f, "invalid resize target {t}"),
            ImageError::WrongSize { expected, width, height } => {
                write!(f, "expected {expected}x{expected} input, got {width}x{height}")
            }
        }
    }
}

impl core::error::Error for ImageError {}

impl Image {
    /// `pixels` is row-major, channel-interleaved.
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        pixels: Vec<u8>,
    ) -> Result<Self, ImageError> {
        if channels != 1 && channels != 3 {
            return Err(ImageError::BadChannelCount(channels));
        }
        let expected = width * height * channels;
        if pixels.len() != expected {
            return Err(ImageError::BufferSize {
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Image {
            width,
            height,
            channels,
            pixels,
        })
    }

    pub fn gray(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        Self::new(width, height, 1, pixels)
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Image {
            width,
            height,
            channels: 1,
            pixels: vec![value; width * height],
        }
    }

    pub fn from_fn<F: FnMut(usize, usize) -> u8>(width: usize, height: usize, mut f: F) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Image {
            width,
            height,
            channels: 1,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
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

    /// Sample at column `x`, row `y`, channel `c`.
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    /// Rec. 601 luma. Gray images are returned unchanged.
    pub fn to_gray(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let pixels = self
            .pixels
            .chunks_exact(3)
            .map(|rgb| {
                let y = 0.299 * rgb[0] as f64 + 0.587 * rgb[1] as f64 + 0.114 * rgb[2] as f64;
                round_to_u8(y)
            })
            .collect();
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            pixels,
        }
    }
}

fn round_to_u8(v: f64) -> u8 {
    libm::floor(v + 0.5).clamp(0.0, 255.0) as u8
}

/// Keeps the top `width` rows of a portrait image.
pub fn crop_to_square(img: &Image) -> Result<Image, ImageError> {
    if img.height < img.width {
        return Err(ImageError::NotPortrait {
            width: img.width,
            height: img.height,
        });
    }
    let row = img.width * img.channels;
    Ok(Image {
        width: img.width,
        height: img.width,
        channels: img.channels,
        pixels: img.pixels[..row * img.width].to_vec(),
    })
}

/// Bilinear resize of a square image to `target × target`.
pub fn resize_bilinear(img: &Image, target: usize) -> Result<Image, ImageError> {
    if img.width != img.height {
        return Err(ImageError::NotSquare {
            width: img.width,
            height: img.height,
        });
    }
    resize_bilinear_to(img, target, target)
}

struct Tap {
    lo: usize,
    hi: usize,
    frac: f64,
}

/// Half-pixel-centre source positions, clamped to the border.
fn taps(src: usize, dst: usize) -> Vec<Tap> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = libm::floor(s) as usize;
            Tap {
                lo,
                hi: (lo + 1).min(src - 1),
                frac: s - lo as f64,
            }
        })
        .collect()
}

/// Bilinear resize to an arbitrary `width × height`.
pub fn resize_bilinear_to(img: &Image, width: usize, height: usize) -> Result<Image, ImageError> {
    if width == 0 || height == 0 {
        return Err(ImageError::InvalidTarget(0));
    }
    if img.width == 0 || img.height == 0 {
        return Err(ImageError::InvalidTarget(0));
    }
    let xs = taps(img.width, width);
    let ys = taps(img.height, height);
    let ch = img.channels;
    let mut pixels = Vec::with_capacity(width * height * ch);
    for ty in &ys {
        for tx in &xs {
            for c in 0..ch {
                let p = |x: usize, y: usize| img.get(x, y, c) as f64;
                let top = p(tx.lo, ty.lo) * (1.0 - tx.frac) + p(tx.hi, ty.lo) * tx.frac;
                let bottom = p(tx.lo, ty.hi) * (1.0 - tx.frac) + p(tx.hi, ty.hi) * tx.frac;
                pixels.push(round_to_u8(top * (1.0 - ty.frac) + bottom * ty.frac));
            }
        }
    }
    Ok(Image {
        width,
        height,
        channels: ch,
        pixels,
    })
}

/// Full chain applied to every frame before feature extraction:
/// top-square crop, resize to `target`, Rec. 601 gray.
pub fn preprocess(img: &Image, target: usize) -> Result<Image, ImageError> {
    let square = crop_to_square(img)?;
    Ok(resize_bilinear(&square, target)?.to_gray())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crop_keeps_top_rows() {
        let img = Image::from_fn(4, 6, |_, y| y as u8 * 10);
        let out = crop_to_square(&img).unwrap();
        assert_eq!((out.width(), out.height()), (4, 4));
        assert_eq!(out.pixels(), &img.pixels()[..16]);

        let portrait = Image::from_fn(CROP_SIDE, 640, |x, y| (x ^ y) as u8);
        let out = crop_to_square(&portrait).unwrap();
        assert_eq!((out.width(), out.height()), (480, 480));
        assert_eq!(out.pixels(), &portrait.pixels()[..480 * 480]);
    }

    #[test]
    fn crop_of_square_is_identity() {
        let img = Image::from_fn(8, 8, |x, y| (x * 31 + y * 7) as u8);
        assert_eq!(crop_to_square(&img).unwrap(), img);
    }

    #[test]
    fn crop_rejects_landscape() {
        let img = Image::filled(6, 4, 0);
        assert_eq!(
            crop_to_square(&img),
            Err(ImageError::NotPortrait { width: 6, height: 4 })
        );
    }

    #[test]
    fn resize_constant_and_mean() {
        let img = Image::filled(480, 480, 77);
        let out = resize_bilinear(&img, MODEL_SIDE).unwrap();
        assert_eq!((out.width(), out.height()), (224, 224));
        assert!(out.pixels().iter().all(|&p| p == 77));

        // Sole output sample sits at source (0.5, 0.5): the mean of all four.
        let img = Image::gray(2, 2, vec![0, 2, 4, 6]).unwrap();
        assert_eq!(resize_bilinear(&img, 1).unwrap().pixels(), &[3]);
    }

    #[test]
    fn resize_rejects_zero_target() {
        let img = Image::filled(4, 4, 0);
        assert_eq!(resize_bilinear(&img, 0), Err(ImageError::InvalidTarget(0)));
    }

    #[test]
    fn upscale_of_two_pixels() {
        // 2 -> 4 columns: source x = -0.25, 0.25, 0.75, 1.25 clamped.
        let img = Image::gray(2, 2, vec![0, 100, 0, 100]).unwrap();
        let out = resize_bilinear(&img, 4).unwrap();
        assert_eq!(&out.pixels()[..4], &[0, 25, 75, 100]);
    }

    #[test]
    fn rgb_to_gray_uses_rec601() {
        let img = Image::new(1, 1, 3, vec![255, 0, 0]).unwrap();
        assert_eq!(img.to_gray().pixels(), &[76]);
        let img = Image::new(1, 1, 3, vec![10, 200, 30]).unwrap();
        // 2.99 + 117.4 + 3.42 = 123.81
        assert_eq!(img.to_gray().pixels(), &[124]);
    }
}
