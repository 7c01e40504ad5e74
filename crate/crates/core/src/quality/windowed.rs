//! Sliding-window metrics (RMSE_SW, UQI) over summed-area tables.
//!
//! Window sums are exact integers, so the degenerate-window tests in UQI
//! are exact as well.

use super::{check_shape, QualityError};
use crate::raster::RasterImage;

pub const DEFAULT_WINDOW: usize = 8;

/// Inclusive-exclusive summed-area table with a zero border.
struct Integral {
    stride: usize,
    data: Vec<i64>,
}

impl Integral {
    fn new(w: usize, h: usize, mut f: impl FnMut(usize, usize) -> i64) -> Self {
        let stride = w + 1;
        let mut data = vec![0i64; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0i64;
            for x in 0..w {
                row += f(x, y);
                data[(y + 1) * stride + x + 1] = data[y * stride + x + 1] + row;
            }
        }
        Self { stride, data }
    }

    #[inline]
    fn window(&self, x: usize, y: usize, size: usize) -> i64 {
        let s = self.stride;
        self.data[(y + size) * s + x + size] - self.data[y * s + x + size]
            - self.data[(y + size) * s + x]
            + self.data[y * s + x]
    }
}

struct WindowSums {
    sx: i64,
    sy: i64,
    sxx: i64,
    syy: i64,
    sxy: i64,
}

/// Calls `visit` with the per-window sums for every channel and position.
fn for_each_window(
    reference: &RasterImage,
    test: &RasterImage,
    window: usize,
    mut visit: impl FnMut(&WindowSums),
) -> Result<(), QualityError> {
    check_shape(reference, test)?;
    let (w, h) = (reference.width(), reference.height());
    if window == 0 || window > w || window > h {
        return Err(QualityError::WindowTooLarge {
            window,
            width: w,
            height: h,
        });
    }
    for c in 0..reference.channels() {
        let x = |px: usize, py: usize| i64::from(reference.get(px, py, c));
        let y = |px: usize, py: usize| i64::from(test.get(px, py, c));
        let ix = Integral::new(w, h, x);
        let iy = Integral::new(w, h, y);
        let ixx = Integral::new(w, h, |a, b| x(a, b) * x(a, b));
        let iyy = Integral::new(w, h, |a, b| y(a, b) * y(a, b));
        let ixy = Integral::new(w, h, |a, b| x(a, b) * y(a, b));
        for py in 0..=h - window {
            for px in 0..=w - window {
                visit(&WindowSums {
                    sx: ix.window(px, py, window),
                    sy: iy.window(px, py, window),
                    sxx: ixx.window(px, py, window),
                    syy: iyy.window(px, py, window),
                    sxy: ixy.window(px, py, window),
                });
            }
        }
    }
    Ok(())
}

/// Mean over all windows (and channels) of the per-window RMSE.
pub fn rmse_sw(
    reference: &RasterImage,
    test: &RasterImage,
    window: usize,
) -> Result<f64, QualityError> {
    let n = (window * window) as f64;
    let (mut total, mut count) = (0.0, 0usize);
    for_each_window(reference, test, window, |s| {
        let sq = s.sxx - 2 * s.sxy + s.syy;
        total += (sq as f64 / n).sqrt();
        count += 1;
    })?;
    Ok(total / count as f64)
}

/// Universal quality index averaged over windows. Windows with a zero
/// denominator count as 1 when reference and test agree there and are
/// skipped otherwise; if every window is skipped the index is 0.
pub fn uqi(reference: &RasterImage, test: &RasterImage, window: usize) -> Result<f64, QualityError> {
    let n = (window * window) as i128;
    let (mut total, mut count) = (0.0, 0usize);
    for_each_window(reference, test, window, |s| {
        let (sx, sy) = (i128::from(s.sx), i128::from(s.sy));
        // All terms scaled by n² relative to the textbook moments.
        let cov = n * i128::from(s.sxy) - sx * sy;
        let var_sum = n * i128::from(s.sxx) - sx * sx + n * i128::from(s.syy) - sy * sy;
        let mean_sq = sx * sx + sy * sy;
        let den = var_sum * mean_sq;
        if den == 0 {
            if s.sxx - 2 * s.sxy + s.syy == 0 {
                total += 1.0;
                count += 1;
            }
            return;
        }
        total += (4 * cov) as f64 * (sx * sy) as f64 / den as f64;
        count += 1;
    })?;
    Ok(if count == 0 { 0.0 } else { total / count as f64 })
}
