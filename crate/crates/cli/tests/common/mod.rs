//! Fixtures shared by the binary-level tests: matrix and image writers, an
//! independent Jacobi SVD, and a runner for the `oocsvd` executable.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const BIN: &str = env!("CARGO_BIN_EXE_oocsvd");

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Dense {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn minus(&self, other: &Dense) -> Dense {
        Dense {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// `k` orthonormal columns of length `n`, stored column-major.
pub fn orthonormal(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    while cols.len() < k {
        let mut v: Vec<f64> = (0..n).map(|_| gaussian(rng)).collect();
        for _ in 0..2 {
            for c in &cols {
                let d: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(c).for_each(|(a, b)| *a -= d * b);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        cols.push(v);
    }
    cols
}

/// `sum_i sigma_i u_i v_i^T` with random orthonormal `u_i`, `v_i`.
pub fn with_spectrum(m: usize, n: usize, sigma: &[f64], seed: u64) -> Dense {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = orthonormal(m, sigma.len(), &mut rng);
    let v = orthonormal(n, sigma.len(), &mut rng);
    let mut a = Dense::zeros(m, n);
    for (t, s) in sigma.iter().enumerate() {
        for i in 0..m {
            for j in 0..n {
                a.data[i * n + j] += s * u[t][i] * v[t][j];
            }
        }
    }
    a
}

/// Singular values, descending, by one-sided Jacobi rotations.
pub fn jacobi_singular_values(a: &Dense) -> Vec<f64> {
    // work on the orientation with fewer columns
    let mut cols: Vec<Vec<f64>> = if a.cols <= a.rows {
        (0..a.cols).map(|j| (0..a.rows).map(|i| a.at(i, j)).collect()).collect()
    } else {
        (0..a.rows).map(|i| a.data[i * a.cols..(i + 1) * a.cols].to_vec()).collect()
    };
    let n = cols.len();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = cols[p].iter().zip(&cols[q]).fold((0.0, 0.0, 0.0), |(a, b, g), (x, y)| {
                    (a + x * x, b + y * y, g + x * y)
                });
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                for (x, y) in left[p].iter_mut().zip(right[0].iter_mut()) {
                    let (xp, yq) = (*x, *y);
                    *x = c * xp - s * yq;
                    *y = s * xp + c * yq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut s: Vec<f64> = cols.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Coordinate Matrix Market with every entry that is not exactly zero.
pub fn write_mtx(path: &Path, a: &Dense) {
    let entries: Vec<(usize, usize, f64)> = (0..a.rows)
        .flat_map(|i| (0..a.cols).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, a.at(i, j)))
        .filter(|e| e.2 != 0.0)
        .collect();
    let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(s, "{} {} {}", a.rows, a.cols, entries.len());
    for (i, j, v) in entries {
        let _ = writeln!(s, "{} {} {v}", i + 1, j + 1);
    }
    std::fs::write(path, s).unwrap();
}

pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) {
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    bytes.extend_from_slice(pixels);
    std::fs::write(path, bytes).unwrap();
}

/// `(width, height, pixels)` of a P5 file written by the tool.
pub fn read_pgm(path: &Path) -> (usize, usize, Vec<u8>) {
    let bytes = std::fs::read(path).unwrap();
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(String::from_utf8(bytes[start..pos].to_vec()).unwrap());
    }
    assert_eq!(fields[0], "P5");
    let (w, h): (usize, usize) = (fields[1].parse().unwrap(), fields[2].parse().unwrap());
    (w, h, bytes[pos + 1..].to_vec())
}

/// Smooth shading plus a few edges and grain: a slowly decaying spectrum.
pub fn test_image(width: usize, height: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut px = Vec::with_capacity(width * height);
    for i in 0..height {
        for j in 0..width {
            let (x, y) = (j as f64 / width as f64, i as f64 / height as f64);
            let mut v = 110.0 + 60.0 * (6.0 * x + 2.0 * y).sin() * (4.0 * y).cos();
            if (x - 0.6).powi(2) + (y - 0.4).powi(2) < 0.05 {
                v += 50.0;
            }
            if x + 0.5 * y > 0.9 {
                v -= 40.0;
            }
            v += 12.0 * gaussian(&mut rng);
            px.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    px
}

pub fn pixels_as_dense(width: usize, height: usize, px: &[u8]) -> Dense {
    Dense {
        rows: height,
        cols: width,
        data: px.iter().map(|&p| p as f64).collect(),
    }
}

pub fn oocsvd(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    let mut cmd = Command::new(BIN);
    for a in args {
        cmd.arg(a.as_ref());
    }
    cmd.output().expect("spawn oocsvd")
}

pub fn run_ok(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    let out = oocsvd(args);
    assert!(
        out.status.success(),
        "oocsvd failed ({:?}): {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn read_singular_values(outdir: &Path) -> Vec<f64> {
    std::fs::read_to_string(outdir.join("S.txt"))
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect()
}

pub fn output_files(outdir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    ["U.blk", "S.blk", "V.blk", "S.txt"]
        .iter()
        .map(|f| {
            let p = outdir.join(f);
            let bytes = std::fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect()
}
