//! Blind wavelet-domain watermarking.
//!
//! The frame bits are carried by the level-1 HL and LH Haar coefficients of
//! the blue channel (HL first, then LH, each in raster order). Every bit is
//! written to `redundancy` consecutive carriers with dither QIM and read
//! back by majority vote, which absorbs the ±1 noise introduced when the
//! reconstructed plane is rounded and clamped to bytes.
//!
//! Only full 2×2 blocks carry data: for odd dimensions the final column or
//! row is left untouched.

pub mod dwt;
pub mod frame;
pub mod qim;

use thiserror::Error;

use crate::raster::RasterImage;
use dwt::{dwt_forward, dwt_inverse, Plane, Subbands};
pub use frame::{FrameError, FusedPayload, WatermarkFrame, FRAME_BITS, FRAME_HEX_LEN, FRAME_MAGIC};
use qim::{qim_decode_bit, qim_embed_bit, round_half_up};

pub const DEFAULT_DELTA: f64 = 8.0;
pub const MAX_REDUNDANCY: usize = 31;
pub const MIN_REDUNDANCY: usize = 3;
/// Channel index of the carrier plane (blue).
pub const CARRIER_CHANNEL: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum WatermarkError {
    #[error("image must be RGB, got {0} channel(s)")]
    NotRgb(usize),
    #[error("payload needs {needed} carriers but the image offers {capacity}")]
    CapacityExceeded { needed: usize, capacity: usize },
    #[error("image {width}x{height} is too small for the subband plan")]
    DimensionsTooSmall { width: usize, height: usize },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
}

/// Carriers available in a `width × height` image: `|HL| + |LH|` over full blocks.
pub fn capacity(width: usize, height: usize) -> usize {
    2 * (width / 2) * (height / 2)
}

/// Quantisation step and repetition factor. Neither is stored in the image;
/// embedder and extractor must agree on them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubbandPlan {
    delta: f64,
    redundancy: usize,
}

impl SubbandPlan {
    pub fn new(delta: f64, redundancy: usize) -> Result<Self, WatermarkError> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(WatermarkError::InvalidPlan(format!("delta must be positive, got {delta}")));
        }
        if redundancy < MIN_REDUNDANCY || redundancy % 2 == 0 {
            return Err(WatermarkError::InvalidPlan(format!(
                "redundancy must be odd and at least {MIN_REDUNDANCY}, got {redundancy}"
            )));
        }
        Ok(Self { delta, redundancy })
    }

    /// Largest odd redundancy (capped at 31) whose frame fits the image.
    pub fn for_dimensions(width: usize, height: usize, delta: f64) -> Result<Self, WatermarkError> {
        let cap = capacity(width, height);
        let mut r = (cap / FRAME_BITS).min(MAX_REDUNDANCY);
        if r % 2 == 0 {
            r = r.saturating_sub(1);
        }
        if r < MIN_REDUNDANCY {
            return Err(WatermarkError::CapacityExceeded {
                needed: FRAME_BITS * MIN_REDUNDANCY,
                capacity: cap,
            });
        }
        Self::new(delta, r)
    }

    pub fn for_image(img: &RasterImage, delta: f64) -> Result<Self, WatermarkError> {
        Self::for_dimensions(img.width(), img.height(), delta)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn redundancy(&self) -> usize {
        self.redundancy
    }

    pub fn carriers_needed(&self) -> usize {
        FRAME_BITS * self.redundancy
    }

    fn check_fits(&self, width: usize, height: usize) -> Result<(), WatermarkError> {
        let cap = capacity(width, height);
        if self.carriers_needed() > cap {
            return Err(WatermarkError::CapacityExceeded {
                needed: self.carriers_needed(),
                capacity: cap,
            });
        }
        Ok(())
    }
}

/// Outcome of [`extract_frame`]; a missing watermark is not an error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Extraction {
    Frame(WatermarkFrame),
    NoWatermark,
}

impl Extraction {
    pub fn frame(self) -> Option<WatermarkFrame> {
        match self {
            Extraction::Frame(f) => Some(f),
            Extraction::NoWatermark => None,
        }
    }
}

fn carrier_bands(img: &RasterImage) -> Result<Subbands, WatermarkError> {
    if img.channels() != 3 {
        return Err(WatermarkError::NotRgb(img.channels()));
    }
    let (w, h) = (img.width() & !1, img.height() & !1);
    if w == 0 || h == 0 {
        return Err(WatermarkError::DimensionsTooSmall {
            width: img.width(),
            height: img.height(),
        });
    }
    let blue = img.plane(CARRIER_CHANNEL);
    let full_w = img.width();
    let cropped: Vec<f64> = (0..h)
        .flat_map(|y| blue[y * full_w..y * full_w + w].iter().map(|&v| f64::from(v)))
        .collect();
    Ok(dwt_forward(&Plane::new(w, h, cropped)))
}

/// Carrier coefficients in embedding order: HL raster, then LH raster.
pub fn carriers(bands: &Subbands) -> Vec<f64> {
    bands.hl.iter().chain(bands.lh.iter()).copied().collect()
}

fn set_carrier(bands: &mut Subbands, index: usize, value: f64) {
    let n = bands.hl.len();
    if index < n {
        bands.hl[index] = value;
    } else {
        bands.lh[index - n] = value;
    }
}

/// Writes each bit onto `redundancy` consecutive carriers.
pub fn embed_bits(
    img: &RasterImage,
    bits: &[bool],
    plan: &SubbandPlan,
) -> Result<RasterImage, WatermarkError> {
    let mut bands = carrier_bands(img)?;
    let (w, h) = (bands.width, bands.height);
    let needed = bits.len() * plan.redundancy;
    let cap = capacity(w, h);
    if needed > cap {
        return Err(WatermarkError::CapacityExceeded {
            needed,
            capacity: cap,
        });
    }
    let coeffs = carriers(&bands);
    for (i, &bit) in bits.iter().enumerate() {
        let start = i * plan.redundancy;
        for (k, &c) in coeffs.iter().enumerate().skip(start).take(plan.redundancy) {
            set_carrier(&mut bands, k, qim_embed_bit(c, bit, plan.delta));
        }
    }
    let plane = dwt_inverse(&bands).expect("shapes unchanged");
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            let v = round_half_up(plane.at(x, y)).clamp(0.0, 255.0) as u8;
            out.set(x, y, CARRIER_CHANNEL, v);
        }
    }
    Ok(out)
}

/// Majority vote over consecutive groups of `redundancy` carriers.
pub fn vote_bits(carriers: &[f64], n_bits: usize, redundancy: usize, delta: f64) -> Vec<bool> {
    carriers[..n_bits * redundancy]
        .chunks_exact(redundancy)
        .map(|group| {
            let ones = group.iter().filter(|&&c| qim_decode_bit(c, delta)).count();
            2 * ones > redundancy
        })
        .collect()
}

pub fn extract_bits(
    img: &RasterImage,
    n_bits: usize,
    plan: &SubbandPlan,
) -> Result<Vec<bool>, WatermarkError> {
    let bands = carrier_bands(img)?;
    let cap = capacity(bands.width, bands.height);
    if n_bits * plan.redundancy > cap {
        return Err(WatermarkError::DimensionsTooSmall {
            width: img.width(),
            height: img.height(),
        });
    }
    Ok(vote_bits(&carriers(&bands), n_bits, plan.redundancy, plan.delta))
}

/// Embeds a frame into an RGB image. Store the result losslessly.
pub fn embed_frame(
    img: &RasterImage,
    frame: &WatermarkFrame,
    plan: &SubbandPlan,
) -> Result<RasterImage, WatermarkError> {
    if img.channels() != 3 {
        return Err(WatermarkError::NotRgb(img.channels()));
    }
    plan.check_fits(img.width(), img.height())?;
    embed_bits(img, &frame.to_bits(), plan)
}

/// Reads a frame back. Images whose decoded bits fail the magic or checksum
/// test yield [`Extraction::NoWatermark`].
pub fn extract_frame(img: &RasterImage, plan: &SubbandPlan) -> Result<Extraction, WatermarkError> {
    let bits = extract_bits(img, FRAME_BITS, plan)?;
    Ok(match WatermarkFrame::from_bits(&bits) {
        Ok(frame) => Extraction::Frame(frame),
        Err(_) => Extraction::NoWatermark,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rgb(w: usize, h: usize, rng: &mut impl Rng) -> RasterImage {
        RasterImage::from_fn(w, h, 3, |_, _, _| rng.random()).unwrap()
    }

    fn random_frame(rng: &mut impl Rng) -> WatermarkFrame {
        let body: String = (0..256)
            .map(|_| char::from_digit(rng.random_range(0..16), 16).unwrap())
            .collect();
        WatermarkFrame::seal(&body).unwrap()
    }

    #[test]
    fn default_plan_for_vga() {
        let plan = SubbandPlan::for_dimensions(640, 480, DEFAULT_DELTA).unwrap();
        assert_eq!(capacity(640, 480), 153_600);
        assert_eq!(plan.redundancy(), 31);
        // 1088 * 5 = 5440 <= 2 * 40 * 70 = 5600 < 1088 * 7.
        assert_eq!(SubbandPlan::for_dimensions(80, 140, 8.0).unwrap().redundancy(), 5);
        // 1088 * 4 = 4352 carriers -> largest odd is 3.
        assert_eq!(SubbandPlan::for_dimensions(64, 136, 8.0).unwrap().redundancy(), 3);
        assert!(matches!(
            SubbandPlan::for_dimensions(64, 64, 8.0),
            Err(WatermarkError::CapacityExceeded { .. })
        ));
    }

    #[test]
    fn plan_validation() {
        assert!(SubbandPlan::new(0.0, 3).is_err());
        assert!(SubbandPlan::new(f64::NAN, 3).is_err());
        assert!(SubbandPlan::new(8.0, 4).is_err());
        assert!(SubbandPlan::new(8.0, 1).is_err());
        assert!(SubbandPlan::new(8.0, 5).is_ok());
    }

    #[test]
    fn round_trip_odd_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let img = random_rgb(161, 123, &mut rng);
        let plan = SubbandPlan::for_image(&img, DEFAULT_DELTA).unwrap();
        let frame = random_frame(&mut rng);
        let marked = embed_frame(&img, &frame, &plan).unwrap();
        assert_eq!(extract_frame(&marked, &plan).unwrap(), Extraction::Frame(frame));
        // The unpaired last column and row are untouched.
        for y in 0..123 {
            assert_eq!(marked.get(160, y, 2), img.get(160, y, 2));
        }
        for x in 0..161 {
            assert_eq!(marked.get(x, 122, 2), img.get(x, 122, 2));
        }
    }

    #[test]
    fn only_blue_changes_and_within_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let img = random_rgb(256, 200, &mut rng);
        let plan = SubbandPlan::for_image(&img, DEFAULT_DELTA).unwrap();
        let marked = embed_frame(&img, &random_frame(&mut rng), &plan).unwrap();
        let bound = (plan.delta() / 2.0).ceil() as i32 + 1;
        for (i, (a, b)) in img.samples().iter().zip(marked.samples()).enumerate() {
            if i % 3 == CARRIER_CHANNEL {
                assert!((i32::from(*a) - i32::from(*b)).abs() <= bound);
            } else {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn embedding_twice_is_nearly_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            // Clamping in the first pass would push carriers off the lattice.
            let img = RasterImage::from_fn(200, 180, 3, |_, _, _| rng.random_range(16..240)).unwrap();
            let plan = SubbandPlan::for_image(&img, DEFAULT_DELTA).unwrap();
            let frame = random_frame(&mut rng);
            let once = embed_frame(&img, &frame, &plan).unwrap();
            let twice = embed_frame(&once, &frame, &plan).unwrap();
            let max = once
                .samples()
                .iter()
                .zip(twice.samples())
                .map(|(a, b)| a.abs_diff(*b))
                .max()
                .unwrap();
            assert!(max <= 1, "max delta {max}");
        }
    }

    #[test]
    fn majority_vote_tolerates_minority_flips() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let img = random_rgb(320, 240, &mut rng);
        let plan = SubbandPlan::new(DEFAULT_DELTA, 7).unwrap();
        let frame = random_frame(&mut rng);
        let marked = embed_frame(&img, &frame, &plan).unwrap();
        let mut coeffs = carriers(&carrier_bands(&marked).unwrap());
        // Push floor(7/2) = 3 carriers of every group onto the opposite lattice.
        for (bit_index, bit) in frame.to_bits().into_iter().enumerate() {
            let base = bit_index * 7;
            for c in &mut coeffs[base..base + 3] {
                *c = qim_embed_bit(*c, !bit, plan.delta());
            }
        }
        let bits = vote_bits(&coeffs, FRAME_BITS, 7, plan.delta());
        assert_eq!(WatermarkFrame::from_bits(&bits).unwrap(), frame);

        // One more flip in the first group inverts that bit and breaks the frame.
        let first = frame.to_bits()[0];
        coeffs[3] = qim_embed_bit(coeffs[3], !first, plan.delta());
        let bits = vote_bits(&coeffs, FRAME_BITS, 7, plan.delta());
        assert_eq!(bits[0], !first);
        assert!(WatermarkFrame::from_bits(&bits).is_err());
    }

    #[test]
    fn errors() {
        let gray = RasterImage::gray(640, 480, vec![0; 640 * 480]).unwrap();
        let plan = SubbandPlan::new(8.0, 31).unwrap();
        let frame = WatermarkFrame::seal(&"0".repeat(256)).unwrap();
        assert_eq!(embed_frame(&gray, &frame, &plan), Err(WatermarkError::NotRgb(1)));
        assert!(matches!(extract_frame(&gray, &plan), Err(WatermarkError::NotRgb(1))));

        let small = RasterImage::rgb(100, 100, vec![0; 100 * 100 * 3]).unwrap();
        assert!(matches!(
            embed_frame(&small, &frame, &plan),
            Err(WatermarkError::CapacityExceeded { .. })
        ));
        assert!(matches!(
            extract_frame(&small, &plan),
            Err(WatermarkError::DimensionsTooSmall { .. })
        ));
    }

    #[test]
    fn clean_images_carry_no_watermark() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let img = random_rgb(200, 180, &mut rng);
            let plan = SubbandPlan::for_image(&img, DEFAULT_DELTA).unwrap();
            assert_eq!(extract_frame(&img, &plan).unwrap(), Extraction::NoWatermark);
        }
    }
}
