//! Dither quantization index modulation on a single coefficient.
//!
//! Bit 0 lives on the lattice `Δ·ℤ`, bit 1 on `Δ·ℤ + Δ/2`. Embedding moves
//! a coefficient to the nearest point of the requested lattice (at most
//! `Δ/2` away); decoding picks the lattice with the nearer point.

/// Round half up, `floor(x + 0.5)`.
#[inline]
pub fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

#[inline]
fn dither(bit: bool, delta: f64) -> f64 {
    if bit {
        delta / 2.0
    } else {
        0.0
    }
}

#[inline]
fn nearest_on_lattice(c: f64, bit: bool, delta: f64) -> f64 {
    let d = dither(bit, delta);
    delta * round_half_up((c - d) / delta) + d
}

pub fn qim_embed_bit(c: f64, bit: bool, delta: f64) -> f64 {
    debug_assert!(delta > 0.0);
    nearest_on_lattice(c, bit, delta)
}

/// Ties go to bit 0.
pub fn qim_decode_bit(c: f64, delta: f64) -> bool {
    debug_assert!(delta > 0.0);
    let d0 = (c - nearest_on_lattice(c, false, delta)).abs();
    let d1 = (c - nearest_on_lattice(c, true, delta)).abs();
    d1 < d0
}
