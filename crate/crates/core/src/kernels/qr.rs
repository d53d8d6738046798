//! Householder thin QR of a tall dense matrix, streamed over row panels.
//!
//! Factoring an `m x r` matrix takes `r + 1` passes. Pass `p` applies
//! reflector `p - 1` to each panel and, in the same sweep, gathers the
//! column norm and inner products that define reflector `p`. Reductions run
//! in global row order, so the factors do not depend on the panel height or
//! on the worker count.

use std::ops::Range;

use rayon::prelude::*;

use super::dense::Mat;
use super::gather_rows;
use crate::error::{Error, Result};
use crate::matrix::{Block, BlockPartition, MatrixId};
use crate::store::BlockId;
use crate::planner::{row_panels, Charge};
use crate::precision::Real;
use crate::workspace::{dense_block, Role, TiledMatrix, Workspace};

/// Everything but the reflector tails: `R`, the scalings `tau` and the
/// leading entries `v0` of each reflector.
#[derive(Debug, Clone, PartialEq)]
pub struct QrFactors<T> {
    pub r: Mat<T>,
    pub tau: Vec<T>,
    pub v0: Vec<T>,
}

impl<T: Real> QrFactors<T> {
    pub fn rank(&self) -> usize {
        self.tau.len()
    }

    /// Columns whose remaining part was exactly zero; their reflector is
    /// the identity.
    pub fn rank_deficient(&self) -> Vec<usize> {
        (0..self.rank()).filter(|&j| self.tau[j] == T::zero()).collect()
    }

    /// Packed as `r x (r + 2)`: `R | tau | v0`.
    pub fn pack(&self) -> Mat<T> {
        let k = self.rank();
        Mat::from_fn(k, k + 2, |i, j| match j {
            j if j < k => self.r.get(i, j),
            j if j == k => self.tau[i],
            _ => self.v0[i],
        })
    }

    pub fn unpack(m: &Mat<T>) -> Result<Self> {
        let k = m.rows();
        if m.cols() != k + 2 {
            return Err(Error::DimensionMismatch {
                op: "packed QR factors",
                left: (m.rows(), m.cols()),
                right: (k, k + 2),
            });
        }
        Ok(QrFactors {
            r: Mat::from_fn(k, k, |i, j| m.get(i, j)),
            tau: m.col(k),
            v0: m.col(k + 1),
        })
    }
}

/// A factored matrix: reflector tails below the diagonal of `reflectors`
/// plus the small factors.
#[derive(Debug, Clone)]
pub struct ThinQr<T> {
    pub reflectors: TiledMatrix,
    pub factors: QrFactors<T>,
}

/// Row panels of a dense working matrix, kept in core when the budget
/// allows and otherwise rewritten to the block store after every pass.
struct Panels<T> {
    id: MatrixId,
    scratch: MatrixId,
    cuts: Vec<usize>,
    cols: usize,
    resident: Option<Vec<Vec<T>>>,
    _charge: Option<Charge>,
}

impl<T: Real> Panels<T> {
    fn new(ws: &Workspace, id: MatrixId, rows: usize, cols: usize, role: Role) -> Result<Self> {
        let bytes = (rows * cols * T::PRECISION.bytes()) as u64;
        let partition = row_panels(rows, cols, T::PRECISION.bytes() as u64, ws.tile_limit(role))?;
        ws.tracker().set_limit(id, ws.limit_for(role));
        let in_core = ws.fits_in_core(role, bytes);
        Ok(Panels {
            id,
            scratch: MatrixId(id.0 | 0x8000_0000),
            cuts: partition.row_cuts().to_vec(),
            cols,
            resident: in_core.then(|| vec![Vec::new(); partition.tile_rows()]),
            _charge: in_core.then(|| ws.charge(id, bytes)),
        })
    }

    fn count(&self) -> usize {
        self.cuts.len() - 1
    }

    fn range(&self, p: usize) -> Range<usize> {
        self.cuts[p]..self.cuts[p + 1]
    }

    fn partition(&self) -> BlockPartition {
        BlockPartition::from_cuts(self.cuts.clone(), vec![0, self.cols]).expect("valid cuts")
    }

    /// Panel `p` and the charge that keeps it accounted while loaded.
    fn take(&mut self, ws: &Workspace, p: usize) -> Result<(Vec<T>, Option<Charge>)> {
        if let Some(r) = self.resident.as_mut() {
            return Ok((std::mem::take(&mut r[p]), None));
        }
        let id = BlockId {
            matrix: self.scratch,
            row_start: self.cuts[p],
            col_start: 0,
        };
        let block = ws.store().load_block(&id)?;
        let charge = ws.charge(self.id, block.bytes() as u64);
        let data = match block.as_ref() {
            Block::Dense(d) => crate::with_values!(d.values(), v => v.iter().map(|&e| T::widen(e)).collect()),
            Block::Sparse(_) => unreachable!("panels are dense"),
        };
        Ok((data, Some(charge)))
    }

    fn put(&mut self, ws: &Workspace, p: usize, data: Vec<T>) -> Result<()> {
        if let Some(r) = self.resident.as_mut() {
            r[p] = data;
            return Ok(());
        }
        let block = Block::Dense(dense_block(self.range(p), 0..self.cols, data));
        ws.store().store_block(self.scratch, &block)?;
        Ok(())
    }

    /// Publish as a matrix with the same row panels.
    fn finish(mut self, ws: &Workspace, role: Role) -> Result<TiledMatrix> {
        // the builder takes over the accounting as panels move into it
        self._charge = None;
        let rows = *self.cuts.last().unwrap();
        let mut b = ws.dense_builder(self.id, rows, self.cols, T::PRECISION, self.partition(), role)?;
        for p in 0..self.count() {
            let (data, _c) = self.take(ws, p)?;
            b.put(Block::Dense(dense_block(self.range(p), 0..self.cols, data)))?;
        }
        let out = b.finish()?;
        if self.resident.is_none() {
            ws.flush()?;
            ws.store().remove_matrix(self.scratch)?;
        }
        Ok(out)
    }
}

/// Factor a dense `m x r` matrix (`m >= r`). The reflector tails are stored
/// as matrix `reflectors_id`.
pub fn thin_qr<T: Real>(ws: &Workspace, y: &TiledMatrix, reflectors_id: MatrixId) -> Result<ThinQr<T>> {
    let (m, r) = y.shape();
    if m < r {
        return Err(Error::DimensionMismatch {
            op: "thin QR needs rows >= cols",
            left: (m, r),
            right: (r, r),
        });
    }
    let mut w = Panels::<T>::new(ws, reflectors_id, m, r, Role::New)?;
    let mut rmat = Mat::<T>::zeros(r, r);
    let mut tau = vec![T::zero(); r];
    let mut v0 = vec![T::zero(); r];
    // reflector being applied in this pass: (column, tau, alpha, w)
    let mut pending: Option<(usize, T, T, Vec<T>)> = None;
    let pool = ws.pool(ws.max_threads().min(r.max(1)));

    for pass in 0..=r {
        let gather = pass < r;
        let mut norm2 = T::zero();
        let mut dots = vec![T::zero(); r];
        let mut head = vec![T::zero(); r];
        for p in 0..w.count() {
            let range = w.range(p);
            let (mut data, _charge) = if pass == 0 {
                (gather_rows::<T>(ws, y, range.clone())?, None)
            } else {
                w.take(ws, p)?
            };
            let rows = range.clone();
            if let Some((j, t, alpha, ref wv)) = pending {
                let vj = v0[j];
                for i in rows.clone().filter(|&i| i >= j) {
                    let row = &mut data[(i - rows.start) * r..(i - rows.start + 1) * r];
                    if i == j {
                        for c in j + 1..r {
                            row[c] -= t * wv[c] * vj;
                            rmat.set(j, c, row[c]);
                        }
                        row[j] = alpha;
                        rmat.set(j, j, alpha);
                    } else {
                        let vi = row[j];
                        for c in j + 1..r {
                            row[c] -= t * wv[c] * vi;
                        }
                    }
                }
            }
            if gather {
                let j = pass;
                let lo = rows.start.max(j);
                if j >= rows.start && j < rows.end {
                    head.copy_from_slice(&data[(j - rows.start) * r..(j - rows.start + 1) * r]);
                }
                for i in lo..rows.end {
                    let x = data[(i - rows.start) * r + j];
                    norm2 += x * x;
                }
                let panel = &data;
                pool.install(|| {
                    dots.par_iter_mut().enumerate().skip(j + 1).for_each(|(c, d)| {
                        for i in lo..rows.end {
                            let o = (i - rows.start) * r;
                            *d += panel[o + j] * panel[o + c];
                        }
                    })
                });
            }
            w.put(ws, p, data)?;
        }
        if !gather {
            break;
        }
        let j = pass;
        let x0 = head[j];
        let norm = norm2.sqrt();
        let (t, alpha, lead) = if norm == T::zero() {
            (T::zero(), T::zero(), T::zero())
        } else {
            let alpha = if x0 >= T::zero() { -norm } else { norm };
            let two = T::one() + T::one();
            let vtv = two * alpha * (alpha - x0);
            (two / vtv, alpha, x0 - alpha)
        };
        tau[j] = t;
        v0[j] = lead;
        let wv: Vec<T> = (0..r)
            .map(|c| if c > j { dots[c] - alpha * head[c] } else { T::zero() })
            .collect();
        pending = Some((j, t, alpha, wv));
    }
    let reflectors = w.finish(ws, Role::New)?;
    Ok(ThinQr {
        reflectors,
        factors: QrFactors { r: rmat, tau, v0 },
    })
}

/// `H_0 H_1 ... H_{r-1} [c; 0]` as an `m x c.cols()` matrix `target`.
pub fn apply_reflectors<T: Real>(ws: &Workspace, qr: &ThinQr<T>, c: &Mat<T>, target: MatrixId, role: Role) -> Result<TiledMatrix> {
    let (m, r) = qr.reflectors.shape();
    let k = c.cols();
    if c.rows() != r {
        return Err(Error::DimensionMismatch {
            op: "apply reflectors",
            left: (m, r),
            right: (c.rows(), k),
        });
    }
    let f = &qr.factors;
    let mut e = Panels::<T>::new(ws, target, m, k, role)?;
    let pool = ws.pool(ws.max_threads().min(k.max(1)));
    let mut pending: Option<(usize, Vec<T>)> = None;

    for pass in 0..=r {
        let gather = pass < r;
        let j = if gather { r - 1 - pass } else { 0 };
        let mut dots = vec![T::zero(); k];
        for p in 0..e.count() {
            let rows = e.range(p);
            let (mut data, _charge) = if pass == 0 {
                let mut d = vec![T::zero(); rows.len() * k];
                for i in rows.clone().filter(|&i| i < r) {
                    d[(i - rows.start) * k..(i - rows.start + 1) * k].copy_from_slice(c.row(i));
                }
                (d, None)
            } else {
                e.take(ws, p)?
            };
            let vrows = gather_rows::<T>(ws, &qr.reflectors, rows.clone())?;
            let v_at = |i: usize, col: usize| if i == col { f.v0[col] } else { vrows[(i - rows.start) * r + col] };
            if let Some((h, ref wv)) = pending {
                let t = f.tau[h];
                if t != T::zero() {
                    for i in rows.clone().filter(|&i| i >= h) {
                        let vi = v_at(i, h);
                        let row = &mut data[(i - rows.start) * k..(i - rows.start + 1) * k];
                        for (x, &wc) in row.iter_mut().zip(wv) {
                            *x -= t * vi * wc;
                        }
                    }
                }
            }
            if gather && f.tau[j] != T::zero() {
                let lo = rows.start.max(j);
                let panel = &data;
                let vcol: Vec<T> = (lo..rows.end).map(|i| v_at(i, j)).collect();
                pool.install(|| {
                    dots.par_iter_mut().enumerate().for_each(|(col, d)| {
                        for (n, i) in (lo..rows.end).enumerate() {
                            *d += vcol[n] * panel[(i - rows.start) * k + col];
                        }
                    })
                });
            }
            e.put(ws, p, data)?;
        }
        if gather {
            pending = Some((j, dots));
        }
    }
    e.finish(ws, role)
}

/// The first `r` columns of `Q`.
pub fn form_q<T: Real>(ws: &Workspace, qr: &ThinQr<T>, target: MatrixId) -> Result<TiledMatrix> {
    let r = qr.factors.rank();
    apply_reflectors(ws, qr, &Mat::identity(r), target, Role::New)
}
