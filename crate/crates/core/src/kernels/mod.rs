//! Numerical kernels: tiled products, streamed QR and the in-core SVD.

mod dense;
mod multiply;
mod qr;
mod svd;
#[cfg(test)]
pub(crate) mod testing;

use std::ops::Range;

pub use dense::Mat;
pub use multiply::{block_multiply, gram, plan_product, ProductTarget};
pub use qr::{apply_reflectors, form_q, thin_qr, QrFactors, ThinQr};
pub use svd::{svd_small, SmallSvd};

use crate::error::Result;
use crate::matrix::Block;
use crate::precision::Real;
use crate::workspace::{TiledMatrix, Workspace};

/// Rows `rows` of `m` (as viewed) as a dense row-major buffer at `T`.
pub fn gather_rows<T: Real>(ws: &Workspace, m: &TiledMatrix, rows: Range<usize>) -> Result<Vec<T>> {
    let (_, n) = m.shape();
    let base = rows.start;
    let mut out = vec![T::zero(); rows.len() * n];
    let logical = m.partition();
    for ti in logical.row_tiles_overlapping(&rows) {
        for tj in 0..logical.tile_cols() {
            let (si, sj) = if m.is_transposed() { (tj, ti) } else { (ti, tj) };
            let tile = ws.fetch(m, si, sj)?;
            let mut put = |r: usize, c: usize, v: T| {
                let (i, j) = if m.is_transposed() { (c, r) } else { (r, c) };
                if rows.contains(&i) {
                    out[(i - base) * n + j] = v;
                }
            };
            match tile.block() {
                Block::Dense(d) => {
                    let vals: Vec<T> = crate::with_values!(d.values(), v => v.iter().map(|&e| T::widen(e)).collect());
                    let (dr, dc) = (d.rows(), d.cols());
                    let (sr, sc) = if m.is_transposed() {
                        (dr.clone(), rows.start.max(dc.start)..rows.end.min(dc.end))
                    } else {
                        (rows.start.max(dr.start)..rows.end.min(dr.end), dc.clone())
                    };
                    for r in sr {
                        for c in sc.clone() {
                            put(r, c, vals[(r - dr.start) * dc.len() + (c - dc.start)]);
                        }
                    }
                }
                Block::Sparse(s) => {
                    let (sr, sc) = if m.is_transposed() { (s.rows(), rows.clone()) } else { (rows.clone(), s.cols()) };
                    for (r, c, v) in s.range_query(sr, sc) {
                        put(r as usize, c as usize, T::from_f64(v));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Whole matrix (as viewed) in core. For small factors and tests.
pub fn to_mat<T: Real>(ws: &Workspace, m: &TiledMatrix) -> Result<Mat<T>> {
    let (rows, cols) = m.shape();
    Ok(Mat::from_vec(rows, cols, gather_rows(ws, m, 0..rows)?))
}
