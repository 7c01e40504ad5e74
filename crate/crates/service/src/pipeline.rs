//! Acquisition-side stamping and verifier-side authentication.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use provmark_core::raster::RasterError;
use provmark_core::signature::SignatureError;
use provmark_core::watermark::{embed_frame, extract_frame, Extraction, WatermarkError};
use provmark_core::{
    DeviceFeatureSet, FusedPayload, ImageSignature, PreSharedKey, RasterImage, SubbandPlan,
    WatermarkFrame,
};
use serde::Serialize;
use thiserror::Error;

use crate::registry::Registry;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Signature(#[from] SignatureError),
    #[error(transparent)]
    Watermark(#[from] WatermarkError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("invalid file name {0:?}")]
    InvalidName(String),
    #[error("{0} is outside the watermarked-image directory")]
    OutsideStore(PathBuf),
    #[error("storage: {0}")]
    Io(#[from] io::Error),
}

/// Signature, fused payload, masking, framing and embedding in one step.
pub fn acquire_and_stamp(
    img: &RasterImage,
    features: &DeviceFeatureSet,
    key: &PreSharedKey,
    plan: &SubbandPlan,
) -> Result<RasterImage, PipelineError> {
    let sig = ImageSignature::compute(img)?;
    let payload = FusedPayload::fuse(&features.fingerprint(), &sig);
    let frame = WatermarkFrame::from_payload(&payload, &key.derive_mask());
    Ok(embed_frame(img, &frame, plan)?)
}

/// The only directory stamped images are written to or shared from.
#[derive(Debug, Clone)]
pub struct WatermarkStore {
    dir: PathBuf,
}

impl WatermarkStore {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, PipelineError> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(Self {
            dir: fs::canonicalize(dir.as_ref())?,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes `img` as PNG under a bare file name.
    pub fn store(&self, name: &str, img: &RasterImage) -> Result<PathBuf, PipelineError> {
        let bare = Path::new(name)
            .file_name()
            .is_some_and(|f| f == name && !name.starts_with('.'));
        if !bare || !name.ends_with(".png") {
            return Err(PipelineError::InvalidName(name.to_string()));
        }
        let path = self.dir.join(name);
        img.save_png(&path)?;
        Ok(path)
    }

    pub fn stamp_and_store(
        &self,
        name: &str,
        img: &RasterImage,
        features: &DeviceFeatureSet,
        key: &PreSharedKey,
        plan: &SubbandPlan,
    ) -> Result<PathBuf, PipelineError> {
        let stamped = acquire_and_stamp(img, features, key, plan)?;
        self.store(name, &stamped)
    }

    /// Reads a stored image for sharing. Anything resolving outside the
    /// store, including through symlinks, is refused.
    pub fn share(&self, path: impl AsRef<Path>) -> Result<Vec<u8>, PipelineError> {
        let path = path.as_ref();
        let resolved = fs::canonicalize(path).map_err(|_| PipelineError::OutsideStore(path.into()))?;
        if !resolved.starts_with(&self.dir) {
            return Err(PipelineError::OutsideStore(path.into()));
        }
        Ok(fs::read(resolved)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Authentic,
    UnknownDevice,
    Tampered,
    NoWatermark,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub bytes: u8,
    pub corr: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            bytes: 3,
            corr: 0.98,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub device_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extracted_dfp: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signature_similarity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_byte_delta: Option<u8>,
    pub details: String,
}

impl VerificationReport {
    pub fn no_watermark(details: impl Into<String>) -> Self {
        Self {
            verdict: Verdict::NoWatermark,
            device_id: None,
            extracted_dfp: None,
            signature_similarity: None,
            max_byte_delta: None,
            details: details.into(),
        }
    }
}

/// Default plan for an image, or `None` when no frame can fit.
pub fn plan_for(img: &RasterImage, delta: f64) -> Result<Option<SubbandPlan>, PipelineError> {
    match SubbandPlan::for_image(img, delta) {
        Ok(p) => Ok(Some(p)),
        Err(WatermarkError::CapacityExceeded { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Extracts, unmasks and checks a frame against the registry and against
/// the image it arrived in. Read-only with respect to the registry.
pub fn verify_image(
    img: &RasterImage,
    key: &PreSharedKey,
    plan: &SubbandPlan,
    registry: &Registry,
    tol: Tolerances,
) -> Result<VerificationReport, PipelineError> {
    if img.channels() != 3 {
        return Ok(VerificationReport::no_watermark("grayscale image cannot carry a frame"));
    }
    let frame = match extract_frame(img, plan) {
        Ok(Extraction::Frame(f)) => f,
        Ok(Extraction::NoWatermark) => {
            return Ok(VerificationReport::no_watermark("no valid frame (magic or checksum mismatch)"))
        }
        Err(WatermarkError::DimensionsTooSmall { .. }) => {
            return Ok(VerificationReport::no_watermark("image too small to carry a frame"))
        }
        Err(e) => return Err(e.into()),
    };
    let payload = frame.unmask(&key.derive_mask());
    let dfp = payload.device_segment().to_string();
    let embedded = ImageSignature::from_hex(payload.image_segment())?;
    let received = ImageSignature::compute(img)?;
    let similarity = embedded.correlation(&received);
    let delta = embedded.max_byte_delta(&received);

    let mut report = VerificationReport {
        verdict: Verdict::UnknownDevice,
        device_id: None,
        extracted_dfp: Some(dfp.clone()),
        signature_similarity: Some(similarity),
        max_byte_delta: Some(delta),
        details: String::new(),
    };
    let Some(record) = registry.lookup_fingerprint(&dfp) else {
        report.details = "device fingerprint not registered".into();
        return Ok(report);
    };
    report.device_id = Some(record.device_id);
    if delta <= tol.bytes && similarity >= tol.corr {
        report.verdict = Verdict::Authentic;
        report.details = "device registered and image signature matches".into();
    } else {
        report.verdict = Verdict::Tampered;
        report.details = format!(
            "image signature drifted beyond tolerance (max byte delta {delta}, correlation {similarity:.4})"
        );
    }
    Ok(report)
}
