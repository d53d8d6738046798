//! In-core SVD: Householder bidiagonalization followed by implicit-shift
//! QR sweeps on the bidiagonal.

use super::dense::Mat;
use crate::error::{Error, Result};
use crate::precision::{Elem, Real};

/// `B = U diag(S) V^T` with `S` non-increasing and non-negative.
#[derive(Debug, Clone)]
pub struct SmallSvd<T> {
    /// `rows x k`, `k = min(rows, cols)`.
    pub u: Mat<T>,
    pub s: Vec<T>,
    /// `cols x k`.
    pub v: Mat<T>,
}

/// Householder vector for `x`: returns `(v, beta, alpha)` with
/// `(I - beta v v^T) x = alpha e_1`.
fn householder<T: Real>(x: &[T]) -> (Vec<T>, T, T) {
    let norm = x.iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
    let mut v = x.to_vec();
    if norm == T::zero() {
        return (v, T::zero(), T::zero());
    }
    let alpha = if x[0] >= T::zero() { -norm } else { norm };
    v[0] -= alpha;
    let vtv = v.iter().fold(T::zero(), |a, &e| a + e * e);
    let two = T::one() + T::one();
    (v, two / vtv, alpha)
}

/// Givens pair `(c, s, r)` with `c a + s b = r`, `-s a + c b = 0`.
fn givens<T: Real>(a: T, b: T) -> (T, T, T) {
    if b == T::zero() {
        return (T::one(), T::zero(), a);
    }
    let r = a.hypot(b);
    (a / r, b / r, r)
}

/// Rotate columns `i`, `j` of `m`: `col_i <- c col_i + s col_j`,
/// `col_j <- -s col_i + c col_j`.
fn rotate_cols<T: Real>(m: &mut Mat<T>, i: usize, j: usize, c: T, s: T) {
    for r in 0..m.rows() {
        let (a, b) = (m.get(r, i), m.get(r, j));
        m.set(r, i, c * a + s * b);
        m.set(r, j, -s * a + c * b);
    }
}

/// SVD of a tall or square matrix (`rows >= cols`).
fn svd_tall<T: Real>(a: &Mat<T>) -> Result<SmallSvd<T>> {
    let (m, n) = (a.rows(), a.cols());
    let mut w = a.clone();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n.saturating_sub(1)];
    let mut left: Vec<(Vec<T>, T)> = Vec::with_capacity(n);
    let mut right: Vec<(Vec<T>, T)> = Vec::with_capacity(n);

    for k in 0..n {
        let x: Vec<T> = (k..m).map(|i| w.get(i, k)).collect();
        let (v, beta, alpha) = householder(&x);
        if beta != T::zero() {
            for c in k..n {
                let dot = (k..m).fold(T::zero(), |acc, i| acc + v[i - k] * w.get(i, c));
                let f = beta * dot;
                for i in k..m {
                    *w.at(i, c) -= f * v[i - k];
                }
            }
        }
        d[k] = if beta != T::zero() { alpha } else { w.get(k, k) };
        left.push((v, beta));
        if k + 1 < n {
            let x: Vec<T> = (k + 1..n).map(|j| w.get(k, j)).collect();
            let (v, beta, alpha) = householder(&x);
            if beta != T::zero() {
                for r in k..m {
                    let dot = (k + 1..n).fold(T::zero(), |acc, j| acc + v[j - k - 1] * w.get(r, j));
                    let f = beta * dot;
                    for j in k + 1..n {
                        *w.at(r, j) -= f * v[j - k - 1];
                    }
                }
            }
            e[k] = if beta != T::zero() { alpha } else { w.get(k, k + 1) };
            right.push((v, beta));
        }
    }

    // U = H_0 ... H_{n-1} [I; 0], V = G_0 ... G_{n-2}
    let mut u = Mat::from_fn(m, n, |i, j| if i == j { T::one() } else { T::zero() });
    for (k, (v, beta)) in left.iter().enumerate().rev() {
        if *beta == T::zero() {
            continue;
        }
        for c in 0..n {
            let dot = (k..m).fold(T::zero(), |acc, i| acc + v[i - k] * u.get(i, c));
            let f = *beta * dot;
            for i in k..m {
                *u.at(i, c) -= f * v[i - k];
            }
        }
    }
    let mut vt = Mat::identity(n);
    for (k, (v, beta)) in right.iter().enumerate().rev() {
        if *beta == T::zero() {
            continue;
        }
        for c in 0..n {
            let dot = (k + 1..n).fold(T::zero(), |acc, i| acc + v[i - k - 1] * vt.get(i, c));
            let f = *beta * dot;
            for i in k + 1..n {
                *vt.at(i, c) -= f * v[i - k - 1];
            }
        }
    }

    bidiagonal_qr(&mut d, &mut e, &mut u, &mut vt)?;
    finish(d, u, vt)
}

/// Diagonalize the upper bidiagonal `(d, e)` by implicit-shift QR sweeps,
/// accumulating left rotations into `u` and right rotations into `v`.
fn bidiagonal_qr<T: Real>(d: &mut [T], e: &mut [T], u: &mut Mat<T>, v: &mut Mat<T>) -> Result<()> {
    let n = d.len();
    if n < 2 {
        return Ok(());
    }
    let eps = T::epsilon();
    let max_sweeps = 30 * n;
    let mut sweeps = 0;
    let anorm = (0..n).fold(T::zero(), |acc, i| {
        acc.max(d[i].abs() + if i + 1 < n { e[i].abs() } else { T::zero() })
    });
    let tiny = eps * anorm;
    loop {
        for i in 0..n - 1 {
            if e[i].abs() <= eps * (d[i].abs() + d[i + 1].abs()) || e[i].abs() <= T::min_positive_value() {
                e[i] = T::zero();
            }
        }
        let mut hi = n - 1;
        while hi > 0 && e[hi - 1] == T::zero() {
            hi -= 1;
        }
        if hi == 0 {
            return Ok(());
        }
        let mut lo = hi - 1;
        while lo > 0 && e[lo - 1] != T::zero() {
            lo -= 1;
        }

        if sweeps >= max_sweeps {
            let residual = e.iter().fold(0.0f64, |a, v| a.max(Elem::to_f64(*v).abs()));
            return Err(Error::NoConvergence { sweeps, residual });
        }
        sweeps += 1;

        // a zero diagonal inside the block: rotate its superdiagonal away
        if let Some(i) = (lo..hi).find(|&i| d[i].abs() <= tiny) {
            d[i] = T::zero();
            let mut f = e[i];
            e[i] = T::zero();
            for j in i + 1..=hi {
                // rows (i, j): zero the entry f at (i, j)
                let (c, s, r) = givens(d[j], f);
                d[j] = r;
                rotate_cols(u, j, i, c, s);
                if j < hi {
                    f = -s * e[j];
                    e[j] *= c;
                }
            }
            continue;
        }
        if d[hi].abs() <= tiny {
            d[hi] = T::zero();
            let mut f = e[hi - 1];
            e[hi - 1] = T::zero();
            for j in (lo..hi).rev() {
                // columns (j, hi): zero the entry f at (j, hi)
                let (c, s, r) = givens(d[j], f);
                d[j] = r;
                rotate_cols(v, j, hi, c, s);
                if j > lo {
                    f = -s * e[j - 1];
                    e[j - 1] *= c;
                }
            }
            continue;
        }

        // Wilkinson shift from the trailing 2x2 of B^T B
        let p = hi - 1;
        let t11 = d[p] * d[p] + if p > lo { e[p - 1] * e[p - 1] } else { T::zero() };
        let t12 = d[p] * e[p];
        let t22 = d[hi] * d[hi] + e[p] * e[p];
        let two = T::one() + T::one();
        let delta = (t11 - t22) / two;
        let denom = delta.abs() + (delta * delta + t12 * t12).sqrt();
        let mu = if denom == T::zero() {
            t22
        } else {
            let sign = if delta >= T::zero() { T::one() } else { -T::one() };
            t22 - sign * t12 * t12 / denom
        };

        let mut y = d[lo] * d[lo] - mu;
        let mut z = d[lo] * e[lo];
        for k in lo..hi {
            let (c, s, r) = givens(y, z);
            if k > lo {
                e[k - 1] = r;
            }
            let f = c * d[k] + s * e[k];
            e[k] = -s * d[k] + c * e[k];
            let g = s * d[k + 1];
            d[k + 1] *= c;
            rotate_cols(v, k, k + 1, c, s);

            let (c, s, r) = givens(f, g);
            d[k] = r;
            let f2 = c * e[k] + s * d[k + 1];
            d[k + 1] = -s * e[k] + c * d[k + 1];
            e[k] = f2;
            rotate_cols(u, k, k + 1, c, s);
            if k + 1 < hi {
                y = e[k];
                z = s * e[k + 1];
                e[k + 1] *= c;
            }
        }
    }
}

/// Non-negative, sorted, sign-normalized factors.
fn finish<T: Real>(mut d: Vec<T>, mut u: Mat<T>, mut v: Mat<T>) -> Result<SmallSvd<T>> {
    let n = d.len();
    for (j, dj) in d.iter_mut().enumerate() {
        if *dj < T::zero() {
            *dj = -*dj;
            for r in 0..v.rows() {
                let x = v.get(r, j);
                v.set(r, j, -x);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].partial_cmp(&d[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    let s: Vec<T> = order.iter().map(|&j| d[j]).collect();
    let mut us = Mat::from_fn(u.rows(), n, |i, k| u.get(i, order[k]));
    let mut vs = Mat::from_fn(v.rows(), n, |i, k| v.get(i, order[k]));
    for k in 0..n {
        // largest-magnitude entry of each left vector is positive
        let mut pick = 0;
        for i in 0..us.rows() {
            if us.get(i, k).abs() > us.get(pick, k).abs() {
                pick = i;
            }
        }
        if us.get(pick, k) < T::zero() {
            for i in 0..us.rows() {
                let x = us.get(i, k);
                us.set(i, k, -x);
            }
            for i in 0..vs.rows() {
                let x = vs.get(i, k);
                vs.set(i, k, -x);
            }
        }
    }
    u = us;
    v = vs;
    Ok(SmallSvd { u, s, v })
}

/// SVD of an in-core matrix of any shape.
pub fn svd_small<T: Real>(b: &Mat<T>) -> Result<SmallSvd<T>> {
    if b.rows() >= b.cols() {
        svd_tall(b)
    } else {
        let t = svd_tall(&b.transpose())?;
        // swap sides, then restore the sign convention on the new left side
        finish(t.s, t.v, t.u)
    }
}
