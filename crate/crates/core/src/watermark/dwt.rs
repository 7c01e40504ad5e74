//! One-level orthonormal 2-D Haar transform.
//!
//! For each 2×2 block `[a b; c d]`:
//!
//! ```text
//! LL = (a + b + c + d) / 2    LH = (a - b + c - d) / 2
//! HL = (a + b - c - d) / 2    HH = (a - b - c + d) / 2
//! ```
//!
//! The transform is its own inverse up to the block layout, so
//! reconstruction is exact in exact arithmetic.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DwtError {
    #[error("subband shapes are inconsistent")]
    ShapeMismatch,
}

/// Row-major real-valued plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height, "plane buffer size");
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Self {
        Self::new(width, height, bytes.iter().map(|&b| f64::from(b)).collect())
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Level-1 subbands, each `half_width × half_height`. `width`/`height`
/// are the dimensions of the plane before edge-replication padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Subbands {
    pub width: usize,
    pub height: usize,
    pub half_width: usize,
    pub half_height: usize,
    pub ll: Vec<f64>,
    pub lh: Vec<f64>,
    pub hl: Vec<f64>,
    pub hh: Vec<f64>,
}

impl Subbands {
    pub fn padded(&self) -> bool {
        self.width % 2 == 1 || self.height % 2 == 1
    }
}

/// Forward transform. Odd dimensions are padded by replicating the last
/// column and/or row; the original size is kept for [`dwt_inverse`].
pub fn dwt_forward(plane: &Plane) -> Subbands {
    let (w, h) = (plane.width, plane.height);
    let (hw, hh_) = (w.div_ceil(2), h.div_ceil(2));
    let px = |x: usize, y: usize| plane.at(x.min(w - 1), y.min(h - 1));
    let n = hw * hh_;
    let (mut ll, mut lh, mut hl, mut hh) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for by in 0..hh_ {
        for bx in 0..hw {
            let a = px(2 * bx, 2 * by);
            let b = px(2 * bx + 1, 2 * by);
            let c = px(2 * bx, 2 * by + 1);
            let d = px(2 * bx + 1, 2 * by + 1);
            ll.push((a + b + c + d) / 2.0);
            lh.push((a - b + c - d) / 2.0);
            hl.push((a + b - c - d) / 2.0);
            hh.push((a - b - c + d) / 2.0);
        }
    }
    Subbands {
        width: w,
        height: h,
        half_width: hw,
        half_height: hh_,
        ll,
        lh,
        hl,
        hh,
    }
}

/// Inverse transform, cropping any padding added by [`dwt_forward`].
pub fn dwt_inverse(bands: &Subbands) -> Result<Plane, DwtError> {
    let (hw, hh_) = (bands.half_width, bands.half_height);
    let n = hw * hh_;
    if [&bands.ll, &bands.lh, &bands.hl, &bands.hh]
        .iter()
        .any(|b| b.len() != n)
        || bands.width.div_ceil(2) != hw
        || bands.height.div_ceil(2) != hh_
    {
        return Err(DwtError::ShapeMismatch);
    }
    let (w, h) = (bands.width, bands.height);
    let mut data = vec![0.0; w * h];
    let mut put = |x: usize, y: usize, v: f64| {
        if x < w && y < h {
            data[y * w + x] = v;
        }
    };
    for by in 0..hh_ {
        for bx in 0..hw {
            let i = by * hw + bx;
            let (s, h1, v1, d1) = (bands.ll[i], bands.lh[i], bands.hl[i], bands.hh[i]);
            put(2 * bx, 2 * by, (s + h1 + v1 + d1) / 2.0);
            put(2 * bx + 1, 2 * by, (s - h1 + v1 - d1) / 2.0);
            put(2 * bx, 2 * by + 1, (s + h1 - v1 - d1) / 2.0);
            put(2 * bx + 1, 2 * by + 1, (s - h1 - v1 + d1) / 2.0);
        }
    }
    Ok(Plane::new(w, h, data))
}
