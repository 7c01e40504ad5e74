//! PSNR with blocking effect.
//!
//! The blocking-effect factor is measured on the luminance of the error
//! image (test − reference), so identical images score `+∞` and the factor
//! only reflects block structure the distortion introduced.

use super::{check_shape, mse, psnr_from_mse, QualityError};
use crate::raster::RasterImage;

pub const BLOCK_SIZE: usize = 8;

fn luma_error(reference: &RasterImage, test: &RasterImage) -> Vec<f64> {
    let ch = reference.channels();
    reference
        .samples()
        .chunks_exact(ch)
        .zip(test.samples().chunks_exact(ch))
        .map(|(r, t)| {
            let luma = |p: &[u8]| {
                if ch == 1 {
                    f64::from(p[0])
                } else {
                    0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2])
                }
            };
            luma(t) - luma(r)
        })
        .collect()
}

/// `η · max(0, D_B − D_Bc)`, where `D_B` and `D_Bc` are the mean squared
/// neighbour differences across and inside `B×B` block boundaries and
/// `η = log2(B) / log2(min(width, height))`.
pub fn blocking_effect_factor(plane: &[f64], w: usize, h: usize, block: usize) -> f64 {
    let (mut sb, mut nb, mut sc, mut nc) = (0.0, 0usize, 0.0, 0usize);
    let mut pair = |a: f64, b: f64, boundary: bool| {
        let d = (a - b).powi(2);
        if boundary {
            sb += d;
            nb += 1;
        } else {
            sc += d;
            nc += 1;
        }
    };
    for y in 0..h {
        for x in 0..w.saturating_sub(1) {
            pair(plane[y * w + x], plane[y * w + x + 1], (x + 1) % block == 0);
        }
    }
    for y in 0..h.saturating_sub(1) {
        for x in 0..w {
            pair(plane[y * w + x], plane[(y + 1) * w + x], (y + 1) % block == 0);
        }
    }
    let db = if nb == 0 { 0.0 } else { sb / nb as f64 };
    let dbc = if nc == 0 { 0.0 } else { sc / nc as f64 };
    let side = w.min(h);
    if db <= dbc || side < 2 {
        return 0.0;
    }
    let eta = (block as f64).log2() / (side as f64).log2();
    eta * (db - dbc)
}

/// `10·log10(255² / (MSE + BEF))`, with MSE over all channels.
pub fn psnrb(reference: &RasterImage, test: &RasterImage) -> Result<f64, QualityError> {
    check_shape(reference, test)?;
    let m = mse(reference, test)?;
    let err = luma_error(reference, test);
    let bef = blocking_effect_factor(&err, reference.width(), reference.height(), BLOCK_SIZE);
    Ok(psnr_from_mse(m + bef))
}
