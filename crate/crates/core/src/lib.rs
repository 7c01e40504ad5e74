//! Core algorithms for acquisition-time image provenance.
//!
//! A capturing device is identified by a fingerprint derived from its
//! feature set ([`dfp`]). Each captured image is summarised by a short
//! spatial-average signature ([`signature`]). The two are fused, masked with
//! a pre-shared key and embedded blindly into the image's wavelet domain
//! ([`watermark`]). [`quality`] measures how much the embedding costs, and
//! [`devfing`] simulates the board-level LCR fingerprint generator together
//! with its error-correcting key recovery.

pub mod devfing;
pub mod dfp;
pub mod quality;
pub mod raster;
pub mod signature;
pub mod watermark;

pub use dfp::{DeviceFeatureSet, DeviceFingerprint, KeyMask, PreSharedKey};
pub use raster::RasterImage;
pub use signature::ImageSignature;
pub use watermark::{FusedPayload, SubbandPlan, WatermarkFrame};
