use std::ops::Range;

use super::{Density, IndexWidth};
use crate::error::{Error, Result};
use crate::precision::{Elem, Half, Precision};

/// Scalar payload of a block at its storage precision.
#[derive(Debug, Clone, PartialEq)]
pub enum Values {
    Half(Vec<Half>),
    Single(Vec<f32>),
    Double(Vec<f64>),
}

/// Run `$body` with `$v` bound to the typed payload vector.
#[macro_export]
#[doc(hidden)]
macro_rules! with_values {
    ($values:expr, $v:ident => $body:expr) => {
        match $values {
            $crate::matrix::Values::Half($v) => $body,
            $crate::matrix::Values::Single($v) => $body,
            $crate::matrix::Values::Double($v) => $body,
        }
    };
}

impl Values {
    pub fn zeros(precision: Precision, len: usize) -> Values {
        match precision {
            Precision::Half => Values::Half(vec![Half::default(); len]),
            Precision::Single => Values::Single(vec![0.0; len]),
            Precision::Double => Values::Double(vec![0.0; len]),
        }
    }

    /// Narrow `f64` values into `precision`.
    pub fn from_f64(precision: Precision, it: impl IntoIterator<Item = f64>) -> Values {
        match precision {
            Precision::Half => Values::Half(it.into_iter().map(Half::from_f64).collect()),
            Precision::Single => Values::Single(it.into_iter().map(|v| v as f32).collect()),
            Precision::Double => Values::Double(it.into_iter().collect()),
        }
    }

    pub fn from_elems<E: Elem>(v: Vec<E>) -> Values {
        E::wrap(v)
    }

    pub fn precision(&self) -> Precision {
        match self {
            Values::Half(_) => Precision::Half,
            Values::Single(_) => Precision::Single,
            Values::Double(_) => Precision::Double,
        }
    }

    pub fn len(&self) -> usize {
        with_values!(self, v => v.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bytes(&self) -> usize {
        self.len() * self.precision().bytes()
    }

    pub fn get(&self, i: usize) -> f64 {
        with_values!(self, v => v[i].to_f64())
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        with_values!(self, v => v.iter().map(|x| x.to_f64()).collect())
    }

    /// Re-encode at another precision.
    pub fn convert(&self, precision: Precision) -> Values {
        if precision == self.precision() {
            return self.clone();
        }
        match (self, precision) {
            (Values::Half(v), Precision::Single) => Values::Single(v.iter().map(|x| x.to_f32()).collect()),
            (Values::Single(v), Precision::Half) => Values::Half(v.iter().map(|&x| Half::from_f32(x)).collect()),
            _ => Values::from_f64(precision, self.to_f64_vec()),
        }
    }
}

/// Sparse row or column indices, stored at the matrix's index width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IndexArray {
    U32(Vec<u32>),
    U64(Vec<u64>),
}

/// An index type usable by kernels.
pub trait Idx: Copy + Send + Sync + Ord + 'static {
    fn ix(self) -> usize;
    fn from_ix(i: usize) -> Self;
}

impl Idx for u32 {
    #[inline]
    fn ix(self) -> usize {
        self as usize
    }
    #[inline]
    fn from_ix(i: usize) -> Self {
        i as u32
    }
}

impl Idx for u64 {
    #[inline]
    fn ix(self) -> usize {
        self as usize
    }
    #[inline]
    fn from_ix(i: usize) -> Self {
        i as u64
    }
}

impl IndexArray {
    pub fn with_width(width: IndexWidth, it: impl IntoIterator<Item = u64>) -> IndexArray {
        match width {
            IndexWidth::W32 => IndexArray::U32(it.into_iter().map(|i| i as u32).collect()),
            IndexWidth::W64 => IndexArray::U64(it.into_iter().collect()),
        }
    }

    pub fn width(&self) -> IndexWidth {
        match self {
            IndexArray::U32(_) => IndexWidth::W32,
            IndexArray::U64(_) => IndexWidth::W64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            IndexArray::U32(v) => v.len(),
            IndexArray::U64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> u64 {
        match self {
            IndexArray::U32(v) => v[i] as u64,
            IndexArray::U64(v) => v[i],
        }
    }

    /// First position whose index is `>= bound` (array must be sorted).
    pub fn lower_bound(&self, bound: u64) -> usize {
        match self {
            IndexArray::U32(v) => v.partition_point(|&x| (x as u64) < bound),
            IndexArray::U64(v) => v.partition_point(|&x| x < bound),
        }
    }

    pub fn bytes(&self) -> usize {
        self.len() * self.width().bytes()
    }
}

/// Dense row-major tile. Ranges are in parent-matrix coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseBlock {
    rows: Range<usize>,
    cols: Range<usize>,
    values: Values,
}

impl DenseBlock {
    pub fn new(rows: Range<usize>, cols: Range<usize>, values: Values) -> Result<Self> {
        let expected = rows.len() * cols.len();
        if values.len() != expected {
            return Err(Error::LengthMismatch(format!(
                "dense block {rows:?}x{cols:?} needs {expected} values, got {}",
                values.len()
            )));
        }
        Ok(DenseBlock { rows, cols, values })
    }

    pub fn zeros(rows: Range<usize>, cols: Range<usize>, precision: Precision) -> Self {
        let len = rows.len() * cols.len();
        DenseBlock {
            rows,
            cols,
            values: Values::zeros(precision, len),
        }
    }

    /// Build from a function of parent coordinates.
    pub fn from_fn(
        rows: Range<usize>,
        cols: Range<usize>,
        precision: Precision,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Self {
        let it = rows
            .clone()
            .flat_map(|i| cols.clone().map(move |j| (i, j)))
            .map(|(i, j)| f(i, j))
            .collect::<Vec<_>>();
        DenseBlock {
            values: Values::from_f64(precision, it),
            rows,
            cols,
        }
    }

    pub fn rows(&self) -> Range<usize> {
        self.rows.clone()
    }

    pub fn cols(&self) -> Range<usize> {
        self.cols.clone()
    }

    pub fn values(&self) -> &Values {
        &self.values
    }

    pub fn into_values(self) -> Values {
        self.values
    }

    pub fn width(&self) -> usize {
        self.cols.len()
    }

    /// Offset of parent coordinate `(i, j)` in the row-major payload.
    #[inline]
    pub fn offset(&self, i: usize, j: usize) -> usize {
        (i - self.rows.start) * self.cols.len() + (j - self.cols.start)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(self.offset(i, j))
    }
}

/// Structure-of-arrays COO tile, sorted by `(row, col)` with no duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseBlock {
    rows: Range<usize>,
    cols: Range<usize>,
    row_idx: IndexArray,
    col_idx: IndexArray,
    values: Values,
}

impl SparseBlock {
    /// Assemble from unsorted triples. Duplicates are summed.
    pub fn from_triples(
        rows: Range<usize>,
        cols: Range<usize>,
        triples: impl IntoIterator<Item = (u64, u64, f64)>,
        precision: Precision,
        width: IndexWidth,
    ) -> Result<Self> {
        let mut triples: Vec<_> = triples.into_iter().collect();
        width.check(rows.end, cols.end)?;
        for &(r, c, _) in &triples {
            if !rows.contains(&(r as usize)) || !cols.contains(&(c as usize)) {
                return Err(Error::IndexOutOfRange {
                    row: r,
                    col: c,
                    rows,
                    cols,
                });
            }
        }
        triples.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(u64, u64, f64)> = Vec::with_capacity(triples.len());
        for (r, c, v) in triples {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        Ok(SparseBlock {
            row_idx: IndexArray::with_width(width, merged.iter().map(|t| t.0)),
            col_idx: IndexArray::with_width(width, merged.iter().map(|t| t.1)),
            values: Values::from_f64(precision, merged.iter().map(|t| t.2)),
            rows,
            cols,
        })
    }

    /// Wrap parallel arrays that must already be sorted and duplicate-free.
    pub fn from_parts(
        rows: Range<usize>,
        cols: Range<usize>,
        row_idx: IndexArray,
        col_idx: IndexArray,
        values: Values,
    ) -> Result<Self> {
        if row_idx.len() != col_idx.len() || row_idx.len() != values.len() {
            return Err(Error::LengthMismatch(format!(
                "rows {}, cols {}, values {}",
                row_idx.len(),
                col_idx.len(),
                values.len()
            )));
        }
        if row_idx.width() != col_idx.width() {
            return Err(Error::LengthMismatch("row/col index widths differ".into()));
        }
        row_idx.width().check(rows.end, cols.end)?;
        let mut prev: Option<(u64, u64)> = None;
        for k in 0..row_idx.len() {
            let (r, c) = (row_idx.get(k), col_idx.get(k));
            if !rows.contains(&(r as usize)) || !cols.contains(&(c as usize)) {
                return Err(Error::IndexOutOfRange {
                    row: r,
                    col: c,
                    rows,
                    cols,
                });
            }
            if prev.is_some_and(|p| p >= (r, c)) {
                return Err(Error::Unsorted(k));
            }
            prev = Some((r, c));
        }
        Ok(SparseBlock {
            rows,
            cols,
            row_idx,
            col_idx,
            values,
        })
    }

    pub fn empty(rows: Range<usize>, cols: Range<usize>, precision: Precision, width: IndexWidth) -> Self {
        SparseBlock {
            rows,
            cols,
            row_idx: IndexArray::with_width(width, []),
            col_idx: IndexArray::with_width(width, []),
            values: Values::zeros(precision, 0),
        }
    }

    pub fn rows(&self) -> Range<usize> {
        self.rows.clone()
    }

    pub fn cols(&self) -> Range<usize> {
        self.cols.clone()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_indices(&self) -> &IndexArray {
        &self.row_idx
    }

    pub fn col_indices(&self) -> &IndexArray {
        &self.col_idx
    }

    pub fn values(&self) -> &Values {
        &self.values
    }

    pub fn index_width(&self) -> IndexWidth {
        self.row_idx.width()
    }

    /// Entry positions whose row lies in `rows`. Binary search, no scan.
    pub fn row_span(&self, rows: &Range<usize>) -> Range<usize> {
        if rows.start >= rows.end {
            return 0..0;
        }
        let lo = self.row_idx.lower_bound(rows.start as u64);
        let hi = self.row_idx.lower_bound(rows.end as u64);
        lo..hi
    }

    /// Stored entries inside the rectangle `rows x cols`, in `(row, col)` order.
    pub fn range_query(
        &self,
        rows: Range<usize>,
        cols: Range<usize>,
    ) -> impl Iterator<Item = (u64, u64, f64)> + '_ {
        let span = if cols.start >= cols.end {
            0..0
        } else {
            self.row_span(&rows)
        };
        span.filter_map(move |k| {
            let c = self.col_idx.get(k);
            cols.contains(&(c as usize)).then(|| (self.row_idx.get(k), c, self.values.get(k)))
        })
    }

    pub fn triples(&self) -> impl Iterator<Item = (u64, u64, f64)> + '_ {
        (0..self.nnz()).map(|k| (self.row_idx.get(k), self.col_idx.get(k), self.values.get(k)))
    }
}

/// An immutable tile payload.
#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    Dense(DenseBlock),
    Sparse(SparseBlock),
}

impl Block {
    pub fn rows(&self) -> Range<usize> {
        match self {
            Block::Dense(b) => b.rows(),
            Block::Sparse(b) => b.rows(),
        }
    }

    pub fn cols(&self) -> Range<usize> {
        match self {
            Block::Dense(b) => b.cols(),
            Block::Sparse(b) => b.cols(),
        }
    }

    pub fn density(&self) -> Density {
        match self {
            Block::Dense(_) => Density::Dense,
            Block::Sparse(_) => Density::Sparse,
        }
    }

    pub fn precision(&self) -> Precision {
        match self {
            Block::Dense(b) => b.values.precision(),
            Block::Sparse(b) => b.values.precision(),
        }
    }

    pub fn index_width(&self) -> Option<IndexWidth> {
        match self {
            Block::Dense(_) => None,
            Block::Sparse(b) => Some(b.index_width()),
        }
    }

    /// Resident payload bytes: scalars plus index arrays.
    pub fn bytes(&self) -> usize {
        match self {
            Block::Dense(b) => b.values.bytes(),
            Block::Sparse(b) => b.values.bytes() + b.row_idx.bytes() + b.col_idx.bytes(),
        }
    }

    pub fn stored_len(&self) -> usize {
        match self {
            Block::Dense(b) => b.values.len(),
            Block::Sparse(b) => b.nnz(),
        }
    }

    pub fn as_dense(&self) -> Option<&DenseBlock> {
        match self {
            Block::Dense(b) => Some(b),
            Block::Sparse(_) => None,
        }
    }

    pub fn as_sparse(&self) -> Option<&SparseBlock> {
        match self {
            Block::Sparse(b) => Some(b),
            Block::Dense(_) => None,
        }
    }

    /// Value at parent coordinate `(i, j)`; zero for unstored sparse entries.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            Block::Dense(b) => b.get(i, j),
            Block::Sparse(b) => b.range_query(i..i + 1, j..j + 1).next().map_or(0.0, |t| t.2),
        }
    }
}

impl From<DenseBlock> for Block {
    fn from(b: DenseBlock) -> Self {
        Block::Dense(b)
    }
}

impl From<SparseBlock> for Block {
    fn from(b: SparseBlock) -> Self {
        Block::Sparse(b)
    }
}
