//! Tiled products `X * Y` over any mix of dense, sparse and transposed
//! operands.
//!
//! Every output entry is accumulated in increasing inner index, so results
//! do not depend on how the operands are cut or how many workers run.

use std::borrow::Cow;
use std::collections::HashMap;
use std::ops::Range;
use std::sync::atomic::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{merge_cuts, Block, BlockPartition, IndexArray, IndexWidth, MatrixDescriptor, MatrixId, SparseBlock, Values};
use crate::planner::{estimate_product, partition_for_limit, work_precision, CostEstimate};
use crate::precision::{Precision, Real};
use crate::workspace::{Role, Tile, TileCursor, TiledMatrix, Workspace};

/// Where a product goes.
#[derive(Debug, Clone)]
pub struct ProductTarget {
    pub id: MatrixId,
    pub role: Role,
    /// Output grid; chosen from the role's tile limit when absent.
    pub partition: Option<BlockPartition>,
    /// Factor applied to every output entry once it is complete. Powers of
    /// two keep the product exact.
    pub scale: f64,
}

impl ProductTarget {
    pub fn new(id: MatrixId, role: Role) -> Self {
        ProductTarget {
            id,
            role,
            partition: None,
            scale: 1.0,
        }
    }

    pub fn scaled(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_partition(mut self, partition: BlockPartition) -> Self {
        self.partition = Some(partition);
        self
    }
}

/// Rectangle of one operand, read row by row in logical orientation.
enum Operand<'a, T: Clone> {
    /// `get(i, k) = data[base + i * rs + k * cs]`, `i`, `k` relative to the
    /// rectangle origin.
    Dense {
        data: Cow<'a, [T]>,
        base: usize,
        rs: usize,
        cs: usize,
        cols: usize,
    },
    /// Column indices relative to the rectangle origin.
    Csr { ptr: Vec<usize>, idx: Vec<u32>, vals: Vec<T> },
}

impl<T: Real> Operand<'_, T> {
    fn is_empty(&self) -> bool {
        matches!(self, Operand::Csr { vals, .. } if vals.is_empty())
    }

    fn row_len(&self, i: usize) -> usize {
        match self {
            Operand::Dense { cols, .. } => *cols,
            Operand::Csr { ptr, .. } => ptr[i + 1] - ptr[i],
        }
    }

    #[inline]
    fn for_row(&self, i: usize, mut f: impl FnMut(usize, T)) {
        match self {
            Operand::Dense { data, base, rs, cs, cols } => {
                let start = base + i * rs;
                for k in 0..*cols {
                    f(k, data[start + k * cs]);
                }
            }
            Operand::Csr { ptr, idx, vals } => {
                for p in ptr[i]..ptr[i + 1] {
                    f(idx[p] as usize, vals[p]);
                }
            }
        }
    }

    /// Contiguous dense row, when available.
    #[inline]
    fn dense_row(&self, i: usize) -> Option<&[T]> {
        match self {
            Operand::Dense { data, base, rs, cs: 1, cols } => Some(&data[base + i * rs..base + i * rs + cols]),
            _ => None,
        }
    }
}

fn typed_values<T: Real>(v: &Values) -> Cow<'_, [T]> {
    match T::slice(v) {
        Some(s) => Cow::Borrowed(s),
        None => Cow::Owned(crate::with_values!(v, x => x.iter().map(|&e| T::widen(e)).collect())),
    }
}

/// View the logical rectangle `rows x cols` of a tile fetched for a matrix
/// whose view is `transposed`.
fn operand<'a, T: Real>(tile: &'a Tile, transposed: bool, rows: &Range<usize>, cols: &Range<usize>) -> Operand<'a, T> {
    let (sr, sc) = if transposed {
        (cols.clone(), rows.clone())
    } else {
        (rows.clone(), cols.clone())
    };
    match tile.block() {
        Block::Dense(d) => {
            let width = d.cols().len();
            let base = (sr.start - d.rows().start) * width + (sc.start - d.cols().start);
            let (rs, cs) = if transposed { (1, width) } else { (width, 1) };
            Operand::Dense {
                data: typed_values(d.values()),
                base,
                rs,
                cs,
                cols: cols.len(),
            }
        }
        Block::Sparse(s) => {
            let n = rows.len();
            let mut ptr = vec![0usize; n + 1];
            if !transposed {
                let mut idx = Vec::new();
                let mut vals = Vec::new();
                for (r, c, v) in s.range_query(sr, sc) {
                    ptr[r as usize - rows.start + 1] += 1;
                    idx.push((c as usize - cols.start) as u32);
                    vals.push(T::from_f64(v));
                }
                for i in 0..n {
                    ptr[i + 1] += ptr[i];
                }
                Operand::Csr { ptr, idx, vals }
            } else {
                // counting sort by stored column keeps stored rows ascending
                let entries: Vec<_> = s.range_query(sr, sc).collect();
                for &(_, c, _) in &entries {
                    ptr[c as usize - rows.start + 1] += 1;
                }
                for i in 0..n {
                    ptr[i + 1] += ptr[i];
                }
                let mut fill = ptr.clone();
                let mut idx = vec![0u32; entries.len()];
                let mut vals = vec![T::zero(); entries.len()];
                for (r, c, v) in entries {
                    let slot = &mut fill[c as usize - rows.start];
                    idx[*slot] = (r as usize - cols.start) as u32;
                    vals[*slot] = T::from_f64(v);
                    *slot += 1;
                }
                Operand::Csr { ptr, idx, vals }
            }
        }
    }
}

fn intersect(a: &Range<usize>, b: &Range<usize>) -> Range<usize> {
    a.start.max(b.start)..a.end.min(b.end).max(a.start.max(b.start))
}

/// Locate the logical tile index containing `pos` along `cuts`.
fn tile_of(cuts: &[usize], pos: usize) -> usize {
    cuts[1..].partition_point(|&c| c <= pos)
}

/// Output accumulator for one tile.
enum Accum<T> {
    Dense(Vec<T>),
    Sparse(Vec<HashMap<u32, T>>),
}

/// `out[i, j] += sum_k x[i, k] y[k, j]` for the `rows` rows of `x`, placed at
/// `(row_off, col_off)` of an output tile `width` columns wide. Returns the
/// number of multiply-adds.
fn accumulate<T: Real>(
    acc: &mut Accum<T>,
    width: usize,
    (row_off, col_off): (usize, usize),
    rows: usize,
    x: &Operand<T>,
    y: &Operand<T>,
) -> u64 {
    match acc {
        Accum::Dense(out) => out[row_off * width..(row_off + rows) * width]
            .par_chunks_mut(width)
            .enumerate()
            .map(|(i, orow)| {
                let orow = &mut orow[col_off..];
                let mut madds = 0u64;
                x.for_row(i, |k, a| {
                    if let Some(yrow) = y.dense_row(k) {
                        for (o, &b) in orow.iter_mut().zip(yrow) {
                            *o += a * b;
                        }
                        madds += yrow.len() as u64;
                    } else {
                        y.for_row(k, |j, b| orow[j] += a * b);
                        madds += y.row_len(k) as u64;
                    }
                });
                madds
            })
            .sum(),
        Accum::Sparse(out) => out[row_off..row_off + rows]
            .par_iter_mut()
            .enumerate()
            .map(|(i, orow)| {
                let mut madds = 0u64;
                x.for_row(i, |k, a| {
                    y.for_row(k, |j, b| *orow.entry((j + col_off) as u32).or_insert(T::zero()) += a * b);
                    madds += y.row_len(k) as u64;
                });
                madds
            })
            .sum(),
    }
}

/// Compute `x * y` into a new matrix.
pub fn block_multiply(ws: &Workspace, x: &TiledMatrix, y: &TiledMatrix, target: ProductTarget) -> Result<TiledMatrix> {
    match work_precision(x.precision(), y.precision()) {
        Precision::Double => multiply_typed::<f64>(ws, x, y, target),
        _ => multiply_typed::<f32>(ws, x, y, target),
    }
}

/// Descriptor, partition and cost of `x * y` without computing it.
pub fn plan_product(ws: &Workspace, x: &TiledMatrix, y: &TiledMatrix, target: &ProductTarget) -> Result<(MatrixDescriptor, CostEstimate)> {
    let cost = estimate_product(&x.descriptor(), &y.descriptor())?;
    let (m, _) = x.shape();
    let (_, n) = y.shape();
    let work = work_precision(x.precision(), y.precision());
    let mut desc = if x.is_sparse() && y.is_sparse() {
        MatrixDescriptor::sparse(target.id, m, n, cost.output_entries, work, IndexWidth::for_shape(m, n))?
    } else {
        MatrixDescriptor::dense(target.id, m, n, work)?
    };
    desc.partition = match &target.partition {
        Some(p) if p.rows() == m && p.cols() == n => p.clone(),
        Some(p) => {
            return Err(Error::DimensionMismatch {
                op: "product partition",
                left: (m, n),
                right: (p.rows(), p.cols()),
            })
        }
        None => partition_for_limit(&desc, ws.tile_limit(target.role)),
    };
    Ok((desc, cost))
}

fn multiply_typed<T: Real>(ws: &Workspace, x: &TiledMatrix, y: &TiledMatrix, target: ProductTarget) -> Result<TiledMatrix> {
    let (desc, cost) = plan_product(ws, x, y, &target)?;
    let sparse_out = desc.is_sparse();
    let out_part = desc.partition.clone();
    let (m, n) = (desc.rows, desc.cols);
    let index_width = IndexWidth::for_shape(m, n);
    let payload = cost.output_bytes;
    let pool = ws.pool_for("multiply", &cost);
    let mut builder = ws.builder(desc, out_part.clone(), target.role, payload);

    let px = x.partition();
    let py = y.partition();
    let kcuts = merge_cuts(px.col_cuts(), py.row_cuts());
    let mut xc = TileCursor::new(x);
    let mut yc = TileCursor::new(y);
    let stats = ws.stats();

    for oi in 0..out_part.tile_rows() {
        for oj in 0..out_part.tile_cols() {
            let (orows, ocols) = (out_part.row_range(oi), out_part.col_range(oj));
            let width = ocols.len();
            let tile_bytes = if sparse_out { 0 } else { (orows.len() * width * T::PRECISION.bytes()) as u64 };
            let _hold = builder.charge_tile(tile_bytes);
            let mut acc = if sparse_out {
                Accum::Sparse(vec![HashMap::new(); orows.len()])
            } else {
                Accum::Dense(vec![T::zero(); orows.len() * width])
            };
            let mut madds = 0u64;
            for seg in kcuts.windows(2) {
                let ks = seg[0]..seg[1];
                let xk = tile_of(px.col_cuts(), ks.start);
                let yk = tile_of(py.row_cuts(), ks.start);
                for xi in px.row_tiles_overlapping(&orows) {
                    let rows = intersect(&px.row_range(xi), &orows);
                    let xtile = xc.get_logical(ws, xi, xk)?;
                    let xop = operand::<T>(xtile, x.is_transposed(), &rows, &ks);
                    if xop.is_empty() {
                        stats.skipped_pairs.fetch_add(1, Ordering::Relaxed);
                        continue;
                    }
                    for yj in py.col_tiles_overlapping(&ocols) {
                        let cols = intersect(&py.col_range(yj), &ocols);
                        let ytile = yc.get_logical(ws, yk, yj)?;
                        let yop = operand::<T>(ytile, y.is_transposed(), &ks, &cols);
                        if yop.is_empty() {
                            stats.skipped_pairs.fetch_add(1, Ordering::Relaxed);
                            continue;
                        }
                        madds += pool.install(|| {
                            let at = (rows.start - orows.start, cols.start - ocols.start);
                            accumulate(&mut acc, width, at, rows.len(), &xop, &yop)
                        });
                    }
                }
            }
            stats.multiply_adds.fetch_add(madds, Ordering::Relaxed);
            if target.scale != 1.0 {
                let f = T::from_f64(target.scale);
                match &mut acc {
                    Accum::Dense(v) => v.iter_mut().for_each(|x| *x *= f),
                    Accum::Sparse(rows) => rows.iter_mut().flat_map(|r| r.values_mut()).for_each(|x| *x *= f),
                }
            }
            let block = match acc {
                Accum::Dense(v) => Block::Dense(crate::workspace::dense_block(orows, ocols, v)),
                Accum::Sparse(rows_acc) => Block::Sparse(sparse_tile(orows, ocols, rows_acc, index_width)?),
            };
            builder.put(block)?;
        }
    }
    xc.release();
    yc.release();
    builder.finish()
}

/// `B^T B`.
pub fn gram(ws: &Workspace, b: &TiledMatrix, target: ProductTarget) -> Result<TiledMatrix> {
    block_multiply(ws, &b.t(), b, target)
}

fn sparse_tile<T: Real>(rows: Range<usize>, cols: Range<usize>, acc: Vec<HashMap<u32, T>>, width: IndexWidth) -> Result<SparseBlock> {
    let mut ri = Vec::new();
    let mut ci = Vec::new();
    let mut vals = Vec::new();
    for (i, row) in acc.into_iter().enumerate() {
        let mut entries: Vec<_> = row.into_iter().collect();
        entries.sort_unstable_by_key(|e| e.0);
        for (j, v) in entries {
            ri.push((rows.start + i) as u64);
            ci.push(cols.start as u64 + j as u64);
            vals.push(v);
        }
    }
    SparseBlock::from_parts(
        rows,
        cols,
        IndexArray::with_width(width, ri),
        IndexArray::with_width(width, ci),
        Values::from_elems(vals),
    )
}
