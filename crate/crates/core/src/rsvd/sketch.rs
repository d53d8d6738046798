//! Reproducible Gaussian test matrices.
//!
//! Entry `p` (row-major index) of an `n x k` matrix is one half of the
//! Box-Muller pair `p / 2`, whose two uniforms are the ChaCha20 words at a
//! fixed stream position. Any tile can be generated on its own and the
//! matrix is identical whatever the partition.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::Result;
use crate::matrix::{Block, DenseBlock, MatrixDescriptor, MatrixId};
use crate::planner::partition_for_limit;
use crate::precision::Precision;
use crate::workspace::{Role, TiledMatrix, Workspace};

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

fn pair(x: u64, y: u64) -> (f64, f64) {
    // u1 in (0, 1], u2 in [0, 1)
    let u1 = ((x >> 11) + 1) as f64 * TWO_POW_M53;
    let u2 = (y >> 11) as f64 * TWO_POW_M53;
    let radius = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (radius * c, radius * s)
}

/// Draws `start .. start + len` of the stream for `seed`.
pub fn gaussian_run(seed: u64, start: u64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    if len == 0 {
        return out;
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut p = start / 2;
    rng.set_word_pos(p as u128 * 4);
    let end = start + len as u64;
    while 2 * p < end {
        let (z0, z1) = pair(rng.next_u64(), rng.next_u64());
        for (idx, z) in [(2 * p, z0), (2 * p + 1, z1)] {
            if idx >= start && idx < end {
                out.push(z);
            }
        }
        p += 1;
    }
    out
}

/// `n x k` matrix of independent N(0, 1) draws, built tile by tile.
pub fn gaussian_matrix(
    ws: &Workspace,
    id: MatrixId,
    n: usize,
    k: usize,
    seed: u64,
    precision: Precision,
) -> Result<TiledMatrix> {
    let desc = MatrixDescriptor::dense(id, n, k, precision)?;
    let partition = partition_for_limit(&desc, ws.tile_limit(Role::New));
    let mut b = ws.dense_builder(id, n, k, precision, partition.clone(), Role::New)?;
    for ti in 0..partition.tile_rows() {
        for tj in 0..partition.tile_cols() {
            let (rows, cols) = (partition.row_range(ti), partition.col_range(tj));
            let _hold = b.charge_tile((rows.len() * cols.len() * precision.work().bytes()) as u64);
            let mut vals = Vec::with_capacity(rows.len() * cols.len());
            for i in rows.clone() {
                vals.extend(gaussian_run(seed, (i * k + cols.start) as u64, cols.len()));
            }
            let (r0, c0, w) = (rows.start, cols.start, cols.len());
            let tile = DenseBlock::from_fn(rows, cols, precision, |i, j| vals[(i - r0) * w + (j - c0)]);
            b.put(Block::Dense(tile))?;
        }
    }
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::MemoryBudget;
    use crate::workspace::WorkspaceConfig;

    fn ws(dir: &std::path::Path, limit: Option<u64>) -> Workspace {
        let budget = MemoryBudget {
            per_matrix: limit,
            ..MemoryBudget::unlimited()
        };
        Workspace::open(WorkspaceConfig::new(dir, budget)).unwrap()
    }

    #[test]
    fn runs_agree_with_any_split() {
        let whole = gaussian_run(42, 0, 101);
        let mut pieces = gaussian_run(42, 0, 37);
        pieces.extend(gaussian_run(42, 37, 1));
        pieces.extend(gaussian_run(42, 38, 63));
        assert_eq!(whole, pieces);
        assert_ne!(whole, gaussian_run(43, 0, 101));
    }

    #[test]
    fn tiled_matrix_independent_of_partition() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let w1 = ws(d1.path(), None);
        let a = gaussian_matrix(&w1, MatrixId(2), 33, 7, 9, Precision::Double).unwrap();
        let w2 = ws(d2.path(), Some(200));
        let b = gaussian_matrix(&w2, MatrixId(2), 33, 7, 9, Precision::Double).unwrap();
        assert!(b.stored_partition().tile_count() > 1);
        assert_eq!(a.to_dense_f64(&w1).unwrap(), b.to_dense_f64(&w2).unwrap());
        assert_eq!(b.to_dense_f64(&w2).unwrap(), gaussian_run(9, 0, 33 * 7));
    }

    #[test]
    fn sample_moments() {
        let n = 500_000;
        let z = gaussian_run(2024, 0, n);
        let mean = z.iter().sum::<f64>() / n as f64;
        let var = z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() <= 4.0 / (n as f64).sqrt(), "mean {mean}");
        assert!((0.98..=1.02).contains(&var), "variance {var}");
        // tails: fraction beyond 2 sigma is about 4.55%
        let tail = z.iter().filter(|x| x.abs() > 2.0).count() as f64 / n as f64;
        assert!((tail - 0.0455).abs() < 0.002, "tail {tail}");
    }
}
