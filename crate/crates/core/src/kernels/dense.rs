use crate::matrix::{DenseBlock, Values};
use crate::precision::{Elem, Real};

/// Small in-core dense matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Mat::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    /// Panics unless `data.len() == rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer does not match shape");
        Mat { rows, cols, data }
    }

    pub fn from_f64(rows: usize, cols: usize, data: &[f64]) -> Self {
        Mat::from_vec(rows, cols, data.iter().map(|&v| T::from_f64(v)).collect())
    }

    /// Widen a dense block's payload to `T`.
    pub fn from_block(b: &DenseBlock) -> Self {
        let data = crate::with_values!(b.values(), v => v.iter().map(|&e| T::widen(e)).collect());
        Mat::from_vec(b.rows().len(), b.cols().len(), data)
    }

    /// Block placed at `(row0, col0)` in `T`'s precision.
    pub fn to_block(&self, row0: usize, col0: usize) -> DenseBlock {
        DenseBlock::new(row0..row0 + self.rows, col0..col0 + self.cols, Values::from_elems(self.data.clone()))
            .expect("shape matches data")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn at(&mut self, i: usize, j: usize) -> &mut T {
        &mut self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        Mat::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Plain product, inner index ascending per output entry.
    pub fn matmul(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                let orow = other.row(k);
                for (o, &b) in out.data[i * other.cols..(i + 1) * other.cols].iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| Elem::to_f64(v)).collect()
    }

    /// `max |A^T A - I|` over all entries.
    pub fn orthogonality_error(&self) -> f64 {
        let g = self.transpose().matmul(self);
        let mut worst = 0.0f64;
        for i in 0..g.rows {
            for j in 0..g.cols {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((Elem::to_f64(g.get(i, j)) - target).abs());
            }
        }
        worst
    }
}
