//! Payload fusion and the framed bit string that is actually embedded.
//!
//! ```text
//! frame = magic (8 hex) ‖ masked payload (256 hex) ‖ crc32 (8 hex)
//! ```
//!
//! The CRC covers the ASCII hex text of `magic ‖ body`. Bits are taken from
//! each hex nibble most-significant first.

use std::fmt;

use thiserror::Error;

use crate::dfp::{apply_mask, DeviceFingerprint, DfpError, KeyMask, FINGERPRINT_HEX_LEN, MASK_HEX_LEN};
use crate::signature::{ImageSignature, SignatureError, SIGNATURE_HEX_LEN};

pub const FRAME_MAGIC: &str = "70726d31";
pub const FRAME_HEX_LEN: usize = 8 + MASK_HEX_LEN + 8;
pub const FRAME_BITS: usize = FRAME_HEX_LEN * 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrameError {
    #[error("expected {expected} characters, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("invalid hex in frame")]
    InvalidHex,
    #[error("frame magic mismatch")]
    BadMagic,
    #[error("frame checksum mismatch")]
    BadChecksum,
    #[error(transparent)]
    Mask(#[from] DfpError),
    #[error(transparent)]
    Signature(#[from] SignatureError),
}

fn is_lower_hex(s: &str) -> bool {
    s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

/// Device fingerprint (128 hex) followed by image signature (128 hex).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FusedPayload(String);

impl FusedPayload {
    pub fn fuse(dfp: &DeviceFingerprint, sig: &ImageSignature) -> Self {
        let mut hex = String::with_capacity(MASK_HEX_LEN);
        hex.push_str(dfp.as_str());
        hex.push_str(&sig.to_hex());
        Self(hex)
    }

    pub fn from_hex(hex: &str) -> Result<Self, FrameError> {
        if hex.len() != MASK_HEX_LEN {
            return Err(FrameError::LengthMismatch {
                expected: MASK_HEX_LEN,
                actual: hex.len(),
            });
        }
        if !is_lower_hex(hex) {
            return Err(FrameError::InvalidHex);
        }
        Ok(Self(hex.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn device_segment(&self) -> &str {
        &self.0[..FINGERPRINT_HEX_LEN]
    }

    pub fn image_segment(&self) -> &str {
        &self.0[FINGERPRINT_HEX_LEN..]
    }

    /// Inverse of [`FusedPayload::fuse`].
    pub fn split(&self) -> Result<(DeviceFingerprint, ImageSignature), FrameError> {
        debug_assert_eq!(self.image_segment().len(), SIGNATURE_HEX_LEN);
        Ok((
            DeviceFingerprint::from_hex(self.device_segment())?,
            ImageSignature::from_hex(self.image_segment())?,
        ))
    }

    pub fn mask(&self, mask: &KeyMask) -> String {
        apply_mask(&self.0, mask).expect("payload is validated hex of mask length")
    }
}

/// A validated frame: magic and checksum are implied by the body.
#[derive(Clone, PartialEq, Eq)]
pub struct WatermarkFrame {
    body: String,
}

fn checksum(body: &str) -> String {
    let mut hasher = crc32fast::Hasher::new();
    hasher.update(FRAME_MAGIC.as_bytes());
    hasher.update(body.as_bytes());
    format!("{:08x}", hasher.finalize())
}

impl WatermarkFrame {
    /// Wraps a masked payload body (256 hex).
    pub fn seal(masked_body: &str) -> Result<Self, FrameError> {
        FusedPayload::from_hex(masked_body)?;
        Ok(Self {
            body: masked_body.to_string(),
        })
    }

    /// Masks a fused payload and frames it.
    pub fn from_payload(payload: &FusedPayload, mask: &KeyMask) -> Self {
        Self {
            body: payload.mask(mask),
        }
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn crc(&self) -> String {
        checksum(&self.body)
    }

    pub fn unmask(&self, mask: &KeyMask) -> FusedPayload {
        FusedPayload(apply_mask(&self.body, mask).expect("validated body"))
    }

    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(FRAME_HEX_LEN);
        s.push_str(FRAME_MAGIC);
        s.push_str(&self.body);
        s.push_str(&self.crc());
        s
    }

    pub fn from_hex(hex: &str) -> Result<Self, FrameError> {
        if hex.len() != FRAME_HEX_LEN {
            return Err(FrameError::LengthMismatch {
                expected: FRAME_HEX_LEN,
                actual: hex.len(),
            });
        }
        if !is_lower_hex(hex) {
            return Err(FrameError::InvalidHex);
        }
        if &hex[..8] != FRAME_MAGIC {
            return Err(FrameError::BadMagic);
        }
        let body = &hex[8..8 + MASK_HEX_LEN];
        if hex[8 + MASK_HEX_LEN..] != checksum(body) {
            return Err(FrameError::BadChecksum);
        }
        Ok(Self {
            body: body.to_string(),
        })
    }

    pub fn to_bits(&self) -> Vec<bool> {
        self.to_hex()
            .bytes()
            .flat_map(|b| {
                let v = (b as char).to_digit(16).expect("hex");
                (0..4).rev().map(move |i| (v >> i) & 1 == 1)
            })
            .collect()
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self, FrameError> {
        if bits.len() != FRAME_BITS {
            return Err(FrameError::LengthMismatch {
                expected: FRAME_BITS,
                actual: bits.len(),
            });
        }
        let hex: String = bits
            .chunks_exact(4)
            .map(|n| {
                let v = n.iter().fold(0u32, |acc, &b| (acc << 1) | u32::from(b));
                char::from_digit(v, 16).expect("nibble")
            })
            .collect();
        Self::from_hex(&hex)
    }
}

impl fmt::Debug for WatermarkFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WatermarkFrame({})", self.to_hex())
    }
}
