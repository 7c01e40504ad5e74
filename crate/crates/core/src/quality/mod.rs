//! Full-reference image quality metrics.
//!
//! All metrics take a reference and a test image of identical shape and
//! treat every channel as an independent plane unless noted otherwise.
//! Windowed metrics slide an 8×8 window with stride 1.

mod psnrb;
mod spectral;
mod ssim;
mod windowed;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::raster::RasterImage;

pub use psnrb::{blocking_effect_factor, psnrb, BLOCK_SIZE};
pub use spectral::{ergas, rase, sam, scc, spectral_metrics, SpectralMetrics};
pub use ssim::{msssim, ssim, MSSSIM_WEIGHTS, MSSSIM_MIN_SIDE, SSIM_WINDOW};
pub use windowed::{rmse_sw, uqi, DEFAULT_WINDOW};

pub const PEAK: f64 = 255.0;

#[derive(Debug, Error, PartialEq)]
pub enum QualityError {
    #[error("images differ in shape ({0:?} vs {1:?})")]
    ShapeMismatch((usize, usize, usize), (usize, usize, usize)),
    #[error("window {window} exceeds image {width}x{height}")]
    WindowTooLarge {
        window: usize,
        width: usize,
        height: usize,
    },
    #[error("image {width}x{height} is below the minimum side {min}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("reference channel {0} has zero mean")]
    ZeroMeanChannel(usize),
    #[error("metric needs at least two channels")]
    NotMultiChannel,
}

fn shape(img: &RasterImage) -> (usize, usize, usize) {
    (img.width(), img.height(), img.channels())
}

pub(crate) fn check_shape(a: &RasterImage, b: &RasterImage) -> Result<(), QualityError> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(QualityError::ShapeMismatch(shape(a), shape(b)))
    }
}

/// Mean squared sample difference over all channels.
pub fn mse(reference: &RasterImage, test: &RasterImage) -> Result<f64, QualityError> {
    check_shape(reference, test)?;
    let sum: u64 = reference
        .samples()
        .iter()
        .zip(test.samples())
        .map(|(&a, &b)| {
            let d = u64::from(a.abs_diff(b));
            d * d
        })
        .sum();
    Ok(sum as f64 / reference.samples().len() as f64)
}

pub fn rmse(reference: &RasterImage, test: &RasterImage) -> Result<f64, QualityError> {
    Ok(mse(reference, test)?.sqrt())
}

/// `10·log10(255² / mse)`; `+∞` for `mse == 0`.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (PEAK * PEAK / mse).log10()
    }
}

pub fn psnr(reference: &RasterImage, test: &RasterImage) -> Result<f64, QualityError> {
    Ok(psnr_from_mse(mse(reference, test)?))
}

fn ser_real<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

/// Every metric for one image pair. Metrics that are undefined for the pair
/// (zero-mean reference channel, single channel for SAM, image too small
/// for MS-SSIM) are `None` and serialise as `null`. Infinite PSNR values
/// serialise as the string `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityReport {
    pub mse: f64,
    pub rmse: f64,
    #[serde(serialize_with = "ser_real")]
    pub psnr_db: f64,
    pub rmse_sw: f64,
    pub uqi: f64,
    pub ssim: f64,
    pub ergas: Option<f64>,
    pub scc: f64,
    pub rase: Option<f64>,
    pub sam_rad: Option<f64>,
    pub msssim: Option<f64>,
    #[serde(serialize_with = "ser_real")]
    pub psnrb_db: f64,
}

impl QualityReport {
    pub const CSV_HEADER: &'static str =
        "mse,rmse,psnr_db,rmse_sw,uqi,ssim,ergas,scc,rase,sam_rad,msssim,psnrb_db";

    pub fn csv_row(&self) -> String {
        fn real(v: f64) -> String {
            if v.is_infinite() && v > 0.0 {
                "inf".into()
            } else {
                v.to_string()
            }
        }
        fn opt(v: Option<f64>) -> String {
            v.map(real).unwrap_or_default()
        }
        [
            real(self.mse),
            real(self.rmse),
            real(self.psnr_db),
            real(self.rmse_sw),
            real(self.uqi),
            real(self.ssim),
            opt(self.ergas),
            real(self.scc),
            opt(self.rase),
            opt(self.sam_rad),
            opt(self.msssim),
            real(self.psnrb_db),
        ]
        .join(",")
    }
}

/// Computes every metric. Shape mismatches and images too small for the
/// mandatory windows (SSIM needs 11×11) are errors; metrics that are merely
/// undefined for the pair become `None`.
pub fn quality_report(
    reference: &RasterImage,
    test: &RasterImage,
) -> Result<QualityReport, QualityError> {
    let mse = mse(reference, test)?;
    Ok(QualityReport {
        mse,
        rmse: mse.sqrt(),
        psnr_db: psnr_from_mse(mse),
        rmse_sw: rmse_sw(reference, test, DEFAULT_WINDOW)?,
        uqi: uqi(reference, test, DEFAULT_WINDOW)?,
        ssim: ssim(reference, test)?,
        ergas: ergas(reference, test).ok(),
        scc: scc(reference, test)?,
        rase: rase(reference, test).ok(),
        sam_rad: sam(reference, test).ok(),
        msssim: msssim(reference, test).ok(),
        psnrb_db: psnrb(reference, test)?,
    })
}
