use super::MemoryBudget;
use crate::error::{Error, Result};
use crate::matrix::{BlockPartition, MatrixDescriptor, SparseBlock};

/// Resident bytes of one dense scalar: blocks are widened to their work
/// precision while in use.
pub fn dense_scalar_bytes(desc: &MatrixDescriptor) -> u64 {
    desc.precision.work().bytes() as u64
}

fn div_ceil(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

/// Equal-cut grid `(p, q)` over `rows x cols` with the fewest tiles such
/// that every tile holds at most `limit` bytes at `scalar` bytes each.
/// Among equally many tiles the squarest grid wins, then the one with fewer
/// column cuts.
pub fn dense_grid(rows: usize, cols: usize, scalar: u64, limit: Option<u64>) -> (usize, usize) {
    let (m, n) = (rows as u64, cols as u64);
    let Some(limit) = limit else { return (1, 1) };
    if m * n * scalar <= limit {
        return (1, 1);
    }
    let mut best: Option<(u64, u64, u64, u64)> = None;
    let mut last_rows = 0;
    for p in 1..=m {
        let tile_rows = div_ceil(m, p);
        if tile_rows == last_rows {
            // same tile height as a smaller p: never better
            continue;
        }
        last_rows = tile_rows;
        if tile_rows * scalar > limit {
            continue;
        }
        let tile_cols = (limit / (tile_rows * scalar)).min(n);
        let q = div_ceil(n, tile_cols);
        let key = (p * q, p.abs_diff(q), q, p);
        if best.is_none_or(|b| key < b) {
            best = Some(key);
        }
    }
    match best {
        Some((_, _, q, p)) => (p as usize, q as usize),
        None => (rows, cols),
    }
}

/// Partition for a matrix under `limit` bytes per tile. Sparse
/// descriptors are sized from their average density; use
/// [`sparse_partition`] when the entries are at hand.
pub fn partition_for_limit(desc: &MatrixDescriptor, limit: Option<u64>) -> BlockPartition {
    if desc.is_sparse() {
        let Some(limit) = limit else {
            return BlockPartition::single(desc.rows, desc.cols);
        };
        let tiles = div_ceil(desc.payload_bytes(), limit.max(1)).max(1);
        let (m, n) = (desc.rows as u64, desc.cols as u64);
        // near-square grid with at least `tiles` tiles
        let p = ((tiles as f64 * m as f64 / n as f64).sqrt().ceil() as u64).clamp(1, m);
        let q = div_ceil(tiles, p).clamp(1, n);
        return BlockPartition::uniform(desc.rows, desc.cols, p as usize, q as usize);
    }
    let (p, q) = dense_grid(desc.rows, desc.cols, dense_scalar_bytes(desc), limit);
    BlockPartition::uniform(desc.rows, desc.cols, p, q)
}

/// Partition of an existing input matrix under `budget`.
pub fn partition_for_budget(desc: &MatrixDescriptor, budget: &MemoryBudget) -> BlockPartition {
    partition_for_limit(desc, budget.tile_limit(false))
}

/// Row panels spanning all columns, each within `limit` bytes. Fails when a
/// single row does not fit.
pub fn row_panels(rows: usize, cols: usize, scalar: u64, limit: Option<u64>) -> Result<BlockPartition> {
    let Some(limit) = limit else {
        return Ok(BlockPartition::single(rows, cols));
    };
    let row_bytes = cols as u64 * scalar;
    if row_bytes > limit {
        return Err(Error::BudgetInfeasible(format!(
            "one {cols}-column row needs {row_bytes} bytes, limit is {limit}"
        )));
    }
    let per_panel = limit / row_bytes;
    let p = div_ceil(rows as u64, per_panel) as usize;
    Ok(BlockPartition::uniform(rows, cols, p, 1))
}

/// Index of the tile containing `i` under `BlockPartition::uniform` cuts
/// (`floor(t * len / parts)`).
fn uniform_tile(i: u64, len: u64, parts: u64) -> usize {
    (((i + 1) * parts).div_ceil(len) - 1) as usize
}

fn max_tile_entries(block: &SparseBlock, p: usize, q: usize) -> u64 {
    let (m, n) = (block.rows().end as u64, block.cols().end as u64);
    let mut counts = vec![0u64; p * q];
    let (ri, ci) = (block.row_indices(), block.col_indices());
    for e in 0..block.nnz() {
        let t = uniform_tile(ri.get(e), m, p as u64) * q + uniform_tile(ci.get(e), n, q as u64);
        counts[t] += 1;
    }
    counts.into_iter().max().unwrap_or(0)
}

const SPARSE_CANDIDATE_CHECKS: usize = 256;

/// Partition of a whole sparse matrix (`rows` and `cols` start at 0) from its
/// actual entry distribution: the fewest equal-cut tiles whose stored
/// entries fit `limit` bytes.
pub fn sparse_partition(block: &SparseBlock, entry_bytes: u64, limit: Option<u64>) -> BlockPartition {
    let (rows, cols) = (block.rows().end, block.cols().end);
    let total = block.nnz() as u64 * entry_bytes;
    let Some(limit) = limit else {
        return BlockPartition::single(rows, cols);
    };
    if total <= limit {
        return BlockPartition::single(rows, cols);
    }
    // a grid whose tiles fit even when full always works
    let (fp, fq) = dense_grid(rows, cols, entry_bytes, Some(limit));
    let fallback = (fp * fq) as u64;
    let mut checks = 0;
    let mut count = div_ceil(total, limit.max(1));
    while count < fallback && checks < SPARSE_CANDIDATE_CHECKS {
        let mut pairs: Vec<(u64, u64)> = (1..=count)
            .take_while(|p| p * p <= count)
            .filter(|p| count % p == 0)
            .flat_map(|p| [(p, count / p), (count / p, p)])
            .filter(|&(p, q)| p <= rows as u64 && q <= cols as u64)
            .collect();
        pairs.sort_by_key(|&(p, q)| (p.abs_diff(q), q));
        pairs.dedup();
        for (p, q) in pairs {
            if checks == SPARSE_CANDIDATE_CHECKS {
                break;
            }
            checks += 1;
            if max_tile_entries(block, p as usize, q as usize) * entry_bytes <= limit {
                return BlockPartition::uniform(rows, cols, p as usize, q as usize);
            }
        }
        count += 1;
    }
    BlockPartition::uniform(rows, cols, fp, fq)
}
