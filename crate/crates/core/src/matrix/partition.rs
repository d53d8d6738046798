use std::ops::Range;

use serde::{Deserialize, Serialize};

/// Row and column cut points of a tile grid.
///
/// Both cut lists start at 0, end at the dimension and are strictly
/// increasing, so tile `(i, j)` covers `row_cuts[i]..row_cuts[i+1]` by
/// `col_cuts[j]..col_cuts[j+1]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockPartition {
    row_cuts: Vec<usize>,
    col_cuts: Vec<usize>,
}

fn even_cuts(len: usize, parts: usize) -> Vec<usize> {
    let parts = parts.clamp(1, len.max(1));
    (0..=parts).map(|i| i * len / parts).collect()
}

impl BlockPartition {
    pub fn single(rows: usize, cols: usize) -> Self {
        BlockPartition {
            row_cuts: vec![0, rows],
            col_cuts: vec![0, cols],
        }
    }

    /// `row_parts x col_parts` grid of near-equal tiles (sizes differ by at
    /// most one).
    pub fn uniform(rows: usize, cols: usize, row_parts: usize, col_parts: usize) -> Self {
        BlockPartition {
            row_cuts: even_cuts(rows, row_parts),
            col_cuts: even_cuts(cols, col_parts),
        }
    }

    pub fn from_cuts(row_cuts: Vec<usize>, col_cuts: Vec<usize>) -> Option<Self> {
        let ok = |c: &[usize]| c.len() >= 2 && c[0] == 0 && c.windows(2).all(|w| w[0] < w[1]);
        (ok(&row_cuts) && ok(&col_cuts)).then_some(BlockPartition { row_cuts, col_cuts })
    }

    pub fn rows(&self) -> usize {
        *self.row_cuts.last().unwrap()
    }

    pub fn cols(&self) -> usize {
        *self.col_cuts.last().unwrap()
    }

    pub fn row_cuts(&self) -> &[usize] {
        &self.row_cuts
    }

    pub fn col_cuts(&self) -> &[usize] {
        &self.col_cuts
    }

    pub fn tile_rows(&self) -> usize {
        self.row_cuts.len() - 1
    }

    pub fn tile_cols(&self) -> usize {
        self.col_cuts.len() - 1
    }

    pub fn tile_count(&self) -> usize {
        self.tile_rows() * self.tile_cols()
    }

    pub fn row_range(&self, i: usize) -> Range<usize> {
        self.row_cuts[i]..self.row_cuts[i + 1]
    }

    pub fn col_range(&self, j: usize) -> Range<usize> {
        self.col_cuts[j]..self.col_cuts[j + 1]
    }

    /// Largest tile, in scalars.
    pub fn max_tile_len(&self) -> usize {
        let span = |c: &[usize]| c.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0);
        span(&self.row_cuts) * span(&self.col_cuts)
    }

    pub fn transposed(&self) -> Self {
        BlockPartition {
            row_cuts: self.col_cuts.clone(),
            col_cuts: self.row_cuts.clone(),
        }
    }

    /// Tile-row indices whose range intersects `rows`.
    pub fn row_tiles_overlapping(&self, rows: &Range<usize>) -> Range<usize> {
        overlapping(&self.row_cuts, rows)
    }

    pub fn col_tiles_overlapping(&self, cols: &Range<usize>) -> Range<usize> {
        overlapping(&self.col_cuts, cols)
    }
}

fn overlapping(cuts: &[usize], span: &Range<usize>) -> Range<usize> {
    if span.start >= span.end {
        return 0..0;
    }
    // first tile whose end is past span.start
    let lo = cuts[1..].partition_point(|&c| c <= span.start);
    // tiles starting before span.end
    let hi = cuts[..cuts.len() - 1].partition_point(|&c| c < span.end);
    lo..hi.max(lo)
}

/// Merge two sorted cut lists over the same extent.
pub(crate) fn merge_cuts(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}
