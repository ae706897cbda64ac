//! Texture descriptor for the baseline classifier.
//!
//! Layout of the 274-value vector:
//!
//! | range     | content                                                    |
//! |-----------|------------------------------------------------------------|
//! | `0..256`  | rotation-invariant 8-neighbour LBP histogram, L1-normalised |
//! | `256..272`| forward-difference gradient magnitude histogram, L1-normalised |
//! | `272`     | mean intensity / 255                                       |
//! | `273`     | intensity variance / 255²                                  |
//!
//! LBP codes set bit `n` when neighbour `n` is at least as bright as the
//! centre, so a flat patch yields code `0xFF`. Each code is folded onto the
//! smallest value among its eight bit rotations; the histogram keeps all 256
//! slots so bin indices are the folded codes themselves.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::image::{Image, ImageError, MODEL_SIDE};

pub const LBP_BINS: usize = 256;
pub const GRADIENT_BINS: usize = 16;
pub const FEATURE_LEN: usize = LBP_BINS + GRADIENT_BINS + 2;

pub const LBP_RANGE: core::ops::Range<usize> = 0..LBP_BINS;
pub const GRADIENT_RANGE: core::ops::Range<usize> = LBP_BINS..LBP_BINS + GRADIENT_BINS;
pub const MEAN_INDEX: usize = LBP_BINS + GRADIENT_BINS;
pub const VARIANCE_INDEX: usize = MEAN_INDEX + 1;

/// Identifies this exact recipe; vectors with different ids never mix.
pub const DESCRIPTOR_ID: &str = "lbp8-rot256+grad16-fwd+moments@224-rec601";

/// Largest forward-difference magnitude on 8-bit data: 255·√2.
const MAX_GRADIENT: f64 = 360.624_458_405_139_2;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub descriptor_id: String,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, descriptor_id: impl Into<String>) -> Self {
        FeatureVector {
            values,
            descriptor_id: descriptor_id.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn squared_distance(&self, other: &FeatureVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// Smallest value among the eight rotations of `code`.
pub const fn min_rotation(code: u8) -> u8 {
    let mut best = code;
    let mut i = 1;
    while i < 8 {
        let r = code.rotate_right(i);
        if r < best {
            best = r;
        }
        i += 1;
    }
    best
}

const ROTATION_TABLE: [u8; 256] = {
    let mut table = [0u8; 256];
    let mut i = 0;
    while i < 256 {
        table[i] = min_rotation(i as u8);
        i += 1;
    }
    table
};

/// Neighbour offsets, clockwise from north.
const NEIGHBOURS: [(isize, isize); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

/// LBP code at an interior pixel of a gray image.
pub fn lbp_code(img: &Image, x: usize, y: usize) -> u8 {
    let center = img.get(x, y, 0);
    let mut code = 0u8;
    for (bit, (dx, dy)) in NEIGHBOURS.iter().enumerate() {
        let nx = (x as isize + dx) as usize;
        let ny = (y as isize + dy) as usize;
        if img.get(nx, ny, 0) >= center {
            code |= 1 << bit;
        }
    }
    code
}

fn normalise(hist: &mut [f64]) {
    let total: f64 = hist.iter().sum();
    if total > 0.0 {
        hist.iter_mut().for_each(|v| *v /= total);
    }
}

/// Computes the descriptor of a preprocessed 224 × 224 frame. RGB input is
/// converted to gray first.
pub fn extract_features(img: &Image) -> Result<FeatureVector, ImageError> {
    if img.width() != MODEL_SIDE || img.height() != MODEL_SIDE {
        return Err(ImageError::WrongSize {
            expected: MODEL_SIDE,
            width: img.width(),
            height: img.height(),
        });
    }
    let gray = img.to_gray();
    Ok(FeatureVector::new(describe(&gray), DESCRIPTOR_ID))
}

/// Descriptor of a gray image of any size ≥ 3 × 3.
pub fn describe(gray: &Image) -> Vec<f64> {
    let (w, h) = (gray.width(), gray.height());
    let mut values = vec![0.0; FEATURE_LEN];

    let lbp = &mut values[LBP_RANGE];
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            lbp[ROTATION_TABLE[lbp_code(gray, x, y) as usize] as usize] += 1.0;
        }
    }
    normalise(lbp);

    let grad = &mut values[GRADIENT_RANGE];
    for y in 0..h {
        for x in 0..w {
            let p = gray.get(x, y, 0) as f64;
            let gx = if x + 1 < w { gray.get(x + 1, y, 0) as f64 - p } else { 0.0 };
            let gy = if y + 1 < h { gray.get(x, y + 1, 0) as f64 - p } else { 0.0 };
            let magnitude = libm::sqrt(gx * gx + gy * gy) / MAX_GRADIENT;
            let bin = ((magnitude * GRADIENT_BINS as f64) as usize).min(GRADIENT_BINS - 1);
            grad[bin] += 1.0;
        }
    }
    normalise(grad);

    let n = (w * h) as f64;
    let mean = gray.pixels().iter().map(|&p| p as f64).sum::<f64>() / n;
    let variance = gray
        .pixels()
        .iter()
        .map(|&p| (p as f64 - mean) * (p as f64 - mean))
        .sum::<f64>()
        / n;
    values[MEAN_INDEX] = mean / 255.0;
    values[VARIANCE_INDEX] = variance / (255.0 * 255.0);
    values
}
