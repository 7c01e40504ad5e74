//! Spatial-average image signature.
//!
//! The image is reduced to 8-bit grayscale, box-downscaled onto a 32×32
//! grid, and summarised by the per-row and per-column means of that grid.
//! The 64 profile bytes, hex encoded, form a 128-character signature that
//! rides in the watermark next to the device fingerprint.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::RasterImage;

pub const GRID: usize = 32;
/// Smallest side accepted for signatures, so every grid tile spans at least 2×2 pixels.
pub const MIN_SIGNATURE_SIDE: usize = 2 * GRID;
pub const SIGNATURE_HEX_LEN: usize = 4 * GRID;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SignatureError {
    #[error("unsupported channel count {0}")]
    UnsupportedChannelCount(usize),
    #[error("image {width}x{height} is smaller than the required {min}x{min}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("signature must be {SIGNATURE_HEX_LEN} lowercase hex characters")]
    Malformed,
}

#[inline]
fn div_round_half_up(num: u64, den: u64) -> u64 {
    (2 * num + den) / (2 * den)
}

/// ITU-R BT.601 luma, `round(0.299 R + 0.587 G + 0.114 B)`, computed in
/// exact integer arithmetic. Gray input is returned unchanged.
pub fn to_grayscale(img: &RasterImage) -> Result<RasterImage, SignatureError> {
    match img.channels() {
        1 => Ok(img.clone()),
        3 => {
            let gray = img
                .samples()
                .chunks_exact(3)
                .map(|px| {
                    let weighted =
                        299 * u32::from(px[0]) + 587 * u32::from(px[1]) + 114 * u32::from(px[2]);
                    ((weighted + 500) / 1000).min(255) as u8
                })
                .collect();
            Ok(RasterImage::gray(img.width(), img.height(), gray).expect("same geometry"))
        }
        n => Err(SignatureError::UnsupportedChannelCount(n)),
    }
}

/// Boundaries `round(i * dim / n)` for `i = 0..=n`.
fn tile_edges(dim: usize, n: usize) -> Vec<usize> {
    (0..=n)
        .map(|i| div_round_half_up((i * dim) as u64, n as u64) as usize)
        .collect()
}

/// Box-averages a gray image onto an `n×n` grid (row-major). Tiles partition
/// the image and may differ in size by one pixel when `n` does not divide
/// the dimension.
pub fn downscale_grid(gray: &RasterImage, n: usize) -> Result<Vec<u8>, SignatureError> {
    if gray.channels() != 1 {
        return Err(SignatureError::UnsupportedChannelCount(gray.channels()));
    }
    let (w, h) = (gray.width(), gray.height());
    if w < n || h < n {
        return Err(SignatureError::ImageTooSmall {
            width: w,
            height: h,
            min: n,
        });
    }
    let xs = tile_edges(w, n);
    let ys = tile_edges(h, n);
    let samples = gray.samples();
    let mut grid = Vec::with_capacity(n * n);
    for gy in 0..n {
        for gx in 0..n {
            let mut sum = 0u64;
            for y in ys[gy]..ys[gy + 1] {
                let row = &samples[y * w + xs[gx]..y * w + xs[gx + 1]];
                sum += row.iter().map(|&v| u64::from(v)).sum::<u64>();
            }
            let count = ((ys[gy + 1] - ys[gy]) * (xs[gx + 1] - xs[gx])) as u64;
            grid.push(div_round_half_up(sum, count) as u8);
        }
    }
    Ok(grid)
}

/// Row and column intensity profiles of the 32×32 grid.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ImageSignature {
    row_profile: [u8; GRID],
    col_profile: [u8; GRID],
}

impl ImageSignature {
    pub fn compute(img: &RasterImage) -> Result<Self, SignatureError> {
        let (w, h) = (img.width(), img.height());
        if w < MIN_SIGNATURE_SIDE || h < MIN_SIGNATURE_SIDE {
            return Err(SignatureError::ImageTooSmall {
                width: w,
                height: h,
                min: MIN_SIGNATURE_SIDE,
            });
        }
        let grid = downscale_grid(&to_grayscale(img)?, GRID)?;
        let mut row_profile = [0u8; GRID];
        let mut col_profile = [0u8; GRID];
        for i in 0..GRID {
            let row: u64 = grid[i * GRID..(i + 1) * GRID].iter().map(|&v| u64::from(v)).sum();
            let col: u64 = (0..GRID).map(|r| u64::from(grid[r * GRID + i])).sum();
            row_profile[i] = div_round_half_up(row, GRID as u64) as u8;
            col_profile[i] = div_round_half_up(col, GRID as u64) as u8;
        }
        Ok(Self {
            row_profile,
            col_profile,
        })
    }

    pub fn from_profiles(row_profile: [u8; GRID], col_profile: [u8; GRID]) -> Self {
        Self {
            row_profile,
            col_profile,
        }
    }

    pub fn from_hex(hex: &str) -> Result<Self, SignatureError> {
        if hex.len() != SIGNATURE_HEX_LEN || hex.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(SignatureError::Malformed);
        }
        let bytes = hex::decode(hex).map_err(|_| SignatureError::Malformed)?;
        let mut row_profile = [0u8; GRID];
        let mut col_profile = [0u8; GRID];
        row_profile.copy_from_slice(&bytes[..GRID]);
        col_profile.copy_from_slice(&bytes[GRID..]);
        Ok(Self {
            row_profile,
            col_profile,
        })
    }

    pub fn row_profile(&self) -> &[u8; GRID] {
        &self.row_profile
    }

    pub fn col_profile(&self) -> &[u8; GRID] {
        &self.col_profile
    }

    /// Row profile followed by column profile.
    pub fn profile_bytes(&self) -> [u8; 2 * GRID] {
        let mut out = [0u8; 2 * GRID];
        out[..GRID].copy_from_slice(&self.row_profile);
        out[GRID..].copy_from_slice(&self.col_profile);
        out
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.profile_bytes())
    }

    /// Largest absolute per-byte difference between two signatures.
    pub fn max_byte_delta(&self, other: &ImageSignature) -> u8 {
        self.profile_bytes()
            .iter()
            .zip(other.profile_bytes().iter())
            .map(|(a, b)| a.abs_diff(*b))
            .max()
            .unwrap_or(0)
    }

    pub fn correlation(&self, other: &ImageSignature) -> f64 {
        signature_correlation(self, other)
    }
}

impl fmt::Debug for ImageSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ImageSignature({})", self.to_hex())
    }
}

impl fmt::Display for ImageSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for ImageSignature {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for ImageSignature {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Self::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Pearson correlation of two equal-length sample vectors, with the
/// degenerate cases pinned: both constant gives 1.0 if equal and 0.0
/// otherwise; exactly one constant gives 0.0.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "pearson over unequal lengths");
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    match (saa == 0.0, sbb == 0.0) {
        (true, true) => {
            if a == b {
                1.0
            } else {
                0.0
            }
        }
        (true, false) | (false, true) => 0.0,
        // sqrt(x * x) == x exactly, so identical vectors give exactly 1.
        (false, false) => (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0),
    }
}

/// Pearson correlation over the concatenated 64-byte profile vectors.
pub fn signature_correlation(a: &ImageSignature, b: &ImageSignature) -> f64 {
    let va: Vec<f64> = a.profile_bytes().iter().map(|&v| f64::from(v)).collect();
    let vb: Vec<f64> = b.profile_bytes().iter().map(|&v| f64::from(v)).collect();
    pearson(&va, &vb)
}
