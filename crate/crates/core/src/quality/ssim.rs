//! SSIM (11×11 Gaussian window, σ = 1.5) and five-scale MS-SSIM.

use super::{check_shape, QualityError, PEAK};
use crate::raster::RasterImage;

pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
pub const MSSSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
/// Five dyadic scales leave an 11-pixel side at the coarsest one.
pub const MSSSIM_MIN_SIDE: usize = SSIM_WINDOW << 4;

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let r = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-(d * d) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable 'valid' Gaussian filter.
fn filter_valid(plane: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let n = SSIM_WINDOW;
    let ow = w - n + 1;
    let oh = h - n + 1;
    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            horiz[y * ow + x] = row[x..x + n].iter().zip(k).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|i| horiz[(y + i) * ow + x] * k[i]).sum();
        }
    }
    out
}

/// Mean SSIM and mean contrast-structure term of one plane pair.
fn ssim_plane(x: &[f64], y: &[f64], w: usize, h: usize) -> (f64, f64) {
    let k = gaussian_kernel();
    let c1 = (K1 * PEAK).powi(2);
    let c2 = (K2 * PEAK).powi(2);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let mx = filter_valid(x, w, h, &k);
    let my = filter_valid(y, w, h, &k);
    let sxx = filter_valid(&xx, w, h, &k);
    let syy = filter_valid(&yy, w, h, &k);
    let sxy = filter_valid(&xy, w, h, &k);
    let n = mx.len() as f64;
    let (mut ssim_sum, mut cs_sum) = (0.0, 0.0);
    for i in 0..mx.len() {
        let (ux, uy) = (mx[i], my[i]);
        let vx = sxx[i] - ux * ux;
        let vy = syy[i] - uy * uy;
        let cov = sxy[i] - ux * uy;
        let cs = (2.0 * cov + c2) / (vx + vy + c2);
        let l = (2.0 * ux * uy + c1) / (ux * ux + uy * uy + c1);
        ssim_sum += l * cs;
        cs_sum += cs;
    }
    (ssim_sum / n, cs_sum / n)
}

fn planes(img: &RasterImage) -> Vec<Vec<f64>> {
    (0..img.channels())
        .map(|c| img.plane(c).into_iter().map(f64::from).collect())
        .collect()
}

fn check_min_side(img: &RasterImage, min: usize) -> Result<(), QualityError> {
    if img.width() < min || img.height() < min {
        return Err(QualityError::ImageTooSmall {
            width: img.width(),
            height: img.height(),
            min,
        });
    }
    Ok(())
}

/// Mean SSIM, averaged over channels.
pub fn ssim(reference: &RasterImage, test: &RasterImage) -> Result<f64, QualityError> {
    check_shape(reference, test)?;
    check_min_side(reference, SSIM_WINDOW)?;
    let (w, h) = (reference.width(), reference.height());
    let (pr, pt) = (planes(reference), planes(test));
    let total: f64 = pr
        .iter()
        .zip(&pt)
        .map(|(x, y)| ssim_plane(x, y, w, h).0)
        .sum();
    Ok(total / pr.len() as f64)
}

/// 2×2 box average followed by decimation.
fn downsample(plane: &[f64], w: usize, h: usize) -> (Vec<f64>, usize, usize) {
    let (nw, nh) = (w / 2, h / 2);
    let mut out = Vec::with_capacity(nw * nh);
    for y in 0..nh {
        for x in 0..nw {
            let i = 2 * y * w + 2 * x;
            out.push((plane[i] + plane[i + 1] + plane[i + w] + plane[i + w + 1]) / 4.0);
        }
    }
    (out, nw, nh)
}

/// Five-scale MS-SSIM averaged over channels. Negative per-scale terms are
/// clamped to zero before exponentiation, so the result lies in `[0, 1]`.
pub fn msssim(reference: &RasterImage, test: &RasterImage) -> Result<f64, QualityError> {
    check_shape(reference, test)?;
    check_min_side(reference, MSSSIM_MIN_SIDE)?;
    let (pr, pt) = (planes(reference), planes(test));
    let mut total = 0.0;
    for (x0, y0) in pr.into_iter().zip(pt) {
        let (mut x, mut y) = (x0, y0);
        let (mut w, mut h) = (reference.width(), reference.height());
        let mut value = 1.0;
        for (scale, weight) in MSSSIM_WEIGHTS.iter().enumerate() {
            let (s, cs) = ssim_plane(&x, &y, w, h);
            let term = if scale == MSSSIM_WEIGHTS.len() - 1 { s } else { cs };
            value *= term.max(0.0).powf(*weight);
            if scale + 1 < MSSSIM_WEIGHTS.len() {
                let (nx, nw, nh) = downsample(&x, w, h);
                let (ny, _, _) = downsample(&y, w, h);
                x = nx;
                y = ny;
                w = nw;
                h = nh;
            }
        }
        total += value;
    }
    Ok(total / reference.channels() as f64)
}
