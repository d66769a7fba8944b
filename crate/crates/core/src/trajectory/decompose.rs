//! Local/global decomposition of skeleton segments.
//!
//! The global part of a frame is the joint bounding box `(cx, cy, w, h)`;
//! the local part expresses each joint relative to that box:
//! `((x - cx) / w, (y - cy) / h)`. Box sizes are floored at [`BOX_EPS`].

use super::{COORDS, GLOBAL_DIMS, JOINTS};
use crate::error::{Result, TrajkitError};
use crate::matrix::Matrix;

pub const BOX_EPS: f64 = 1e-6;

/// Splits a `T x 34` coordinate matrix into `T x 34` local and `T x 4`
/// global features.
pub fn decompose(raw: &Matrix) -> Result<(Matrix, Matrix)> {
    if raw.cols() != COORDS {
        return Err(TrajkitError::Shape(format!(
            "segment has {} columns, expected {COORDS}",
            raw.cols()
        )));
    }
    let t = raw.rows();
    let mut local = Matrix::zeros(t, COORDS);
    let mut global = Matrix::zeros(t, GLOBAL_DIMS);
    for r in 0..t {
        let row = raw.row(r);
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for j in 0..JOINTS {
            let (x, y) = (row[2 * j], row[2 * j + 1]);
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        let cx = 0.5 * (x0 + x1);
        let cy = 0.5 * (y0 + y1);
        let w = (x1 - x0).max(BOX_EPS);
        let h = (y1 - y0).max(BOX_EPS);
        global.row_mut(r).copy_from_slice(&[cx, cy, w, h]);
        let lrow = local.row_mut(r);
        for j in 0..JOINTS {
            lrow[2 * j] = (row[2 * j] - cx) / w;
            lrow[2 * j + 1] = (row[2 * j + 1] - cy) / h;
        }
    }
    Ok((local, global))
}

/// Inverse of [`decompose`]: `x = cx + w * lx`, `y = cy + h * ly`.
pub fn recompose(local: &Matrix, global: &Matrix) -> Result<Matrix> {
    if local.cols() != COORDS || global.cols() != GLOBAL_DIMS || local.rows() != global.rows() {
        return Err(TrajkitError::Shape(format!(
            "recompose expects Tx{COORDS} and Tx{GLOBAL_DIMS}, got {}x{} and {}x{}",
            local.rows(),
            local.cols(),
            global.rows(),
            global.cols()
        )));
    }
    let mut raw = Matrix::zeros(local.rows(), COORDS);
    for r in 0..local.rows() {
        let g = global.row(r);
        let l = local.row(r);
        let out = raw.row_mut(r);
        for j in 0..JOINTS {
            out[2 * j] = g[0] + g[2] * l[2 * j];
            out[2 * j + 1] = g[1] + g[3] * l[2 * j + 1];
        }
    }
    Ok(raw)
}
