//! Global spectral-fidelity metrics: ERGAS, RASE, SAM and SCC.

use serde::Serialize;

use super::{check_shape, QualityError};
use crate::raster::RasterImage;
use crate::signature::pearson;

/// 3×3 Laplacian high-pass kernel used by SCC.
const LAPLACIAN: [[f64; 3]; 3] = [[-1.0, -1.0, -1.0], [-1.0, 8.0, -1.0], [-1.0, -1.0, -1.0]];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralMetrics {
    pub ergas: f64,
    pub scc: f64,
    pub rase: f64,
    pub sam_rad: f64,
}

/// Per-channel `(RMSE_k, μ_k)` with `μ_k` taken from the reference.
fn channel_stats(reference: &RasterImage, test: &RasterImage) -> Vec<(f64, f64)> {
    let n = (reference.width() * reference.height()) as f64;
    (0..reference.channels())
        .map(|c| {
            let (mut sq, mut sum) = (0u64, 0u64);
            for (&a, &b) in reference
                .samples()
                .iter()
                .skip(c)
                .step_by(reference.channels())
                .zip(test.samples().iter().skip(c).step_by(test.channels()))
            {
                let d = u64::from(a.abs_diff(b));
                sq += d * d;
                sum += u64::from(a);
            }
            ((sq as f64 / n).sqrt(), sum as f64 / n)
        })
        .collect()
}

/// `100 · sqrt(mean_k (RMSE_k / μ_k)²)` at unit resolution ratio.
pub fn ergas(reference: &RasterImage, test: &RasterImage) -> Result<f64, QualityError> {
    check_shape(reference, test)?;
    let stats = channel_stats(reference, test);
    let mut acc = 0.0;
    for (k, (rmse, mu)) in stats.iter().enumerate() {
        if *mu == 0.0 {
            return Err(QualityError::ZeroMeanChannel(k));
        }
        acc += (rmse / mu).powi(2);
    }
    Ok(100.0 * (acc / stats.len() as f64).sqrt())
}

/// `(100 / μ) · sqrt(mean_k RMSE_k²)` with `μ` the mean of the reference.
pub fn rase(reference: &RasterImage, test: &RasterImage) -> Result<f64, QualityError> {
    check_shape(reference, test)?;
    let stats = channel_stats(reference, test);
    let k = stats.len() as f64;
    let mu = stats.iter().map(|s| s.1).sum::<f64>() / k;
    if mu == 0.0 {
        return Err(QualityError::ZeroMeanChannel(0));
    }
    let ms = stats.iter().map(|s| s.0 * s.0).sum::<f64>() / k;
    Ok(100.0 / mu * ms.sqrt())
}

/// Mean angle between per-pixel channel vectors. Pixels where either vector
/// is zero are skipped; with no usable pixels the result is 0.
pub fn sam(reference: &RasterImage, test: &RasterImage) -> Result<f64, QualityError> {
    check_shape(reference, test)?;
    let ch = reference.channels();
    if ch < 2 {
        return Err(QualityError::NotMultiChannel);
    }
    let (mut total, mut count) = (0.0, 0usize);
    for (x, y) in reference
        .samples()
        .chunks_exact(ch)
        .zip(test.samples().chunks_exact(ch))
    {
        let (mut nx, mut ny, mut dot) = (0i64, 0i64, 0i64);
        for (&a, &b) in x.iter().zip(y) {
            let (a, b) = (i64::from(a), i64::from(b));
            nx += a * a;
            ny += b * b;
            dot += a * b;
        }
        if nx == 0 || ny == 0 {
            continue;
        }
        // Lagrange identity: |x|²|y|² − (x·y)² = |x ∧ y|², exact in integers.
        let cross_sq = i128::from(nx) * i128::from(ny) - i128::from(dot) * i128::from(dot);
        total += (cross_sq as f64).sqrt().atan2(dot as f64);
        count += 1;
    }
    Ok(if count == 0 { 0.0 } else { total / count as f64 })
}

fn laplacian_valid(img: &RasterImage, c: usize) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let mut out = Vec::with_capacity((w - 2) * (h - 2));
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let mut acc = 0.0;
            for (dy, row) in LAPLACIAN.iter().enumerate() {
                for (dx, k) in row.iter().enumerate() {
                    acc += k * f64::from(img.get(x + dx - 1, y + dy - 1, c));
                }
            }
            out.push(acc);
        }
    }
    out
}

/// Pearson correlation of Laplacian responses, averaged over channels.
pub fn scc(reference: &RasterImage, test: &RasterImage) -> Result<f64, QualityError> {
    check_shape(reference, test)?;
    if reference.width() < 3 || reference.height() < 3 {
        return Err(QualityError::ImageTooSmall {
            width: reference.width(),
            height: reference.height(),
            min: 3,
        });
    }
    let ch = reference.channels();
    let total: f64 = (0..ch)
        .map(|c| pearson(&laplacian_valid(reference, c), &laplacian_valid(test, c)))
        .sum();
    Ok(total / ch as f64)
}

pub fn spectral_metrics(
    reference: &RasterImage,
    test: &RasterImage,
) -> Result<SpectralMetrics, QualityError> {
    Ok(SpectralMetrics {
        ergas: ergas(reference, test)?,
        scc: scc(reference, test)?,
        rase: rase(reference, test)?,
        sam_rad: sam(reference, test)?,
    })
}
