use crate::error::{Error, Result};
use crate::matrix::{Density, IndexWidth, MatrixDescriptor, MatrixId};
use crate::precision::Precision;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exactness {
    Exact,
    UpperBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostEstimate {
    pub multiply_adds: u64,
    /// Both operands plus the output, all resident at once.
    pub peak_resident_bytes: u64,
    pub output_bytes: u64,
    /// Stored entries in the output (an upper bound for sparse outputs).
    pub output_entries: u64,
    pub output_density: Density,
    pub exactness: Exactness,
}

fn check_inner(x: &MatrixDescriptor, y: &MatrixDescriptor) -> Result<(usize, usize, usize)> {
    let (m, k) = x.shape();
    let (k2, n) = y.shape();
    if k != k2 {
        return Err(Error::DimensionMismatch {
            op: "product",
            left: (m, k),
            right: (k2, n),
        });
    }
    Ok((m, k, n))
}

/// Precision products are computed in: the wider operand, half counted as
/// single.
pub fn work_precision(x: Precision, y: Precision) -> Precision {
    x.combine(y).work()
}

/// Predicted cost of `x * y` (transpose views honoured).
pub fn estimate_product(x: &MatrixDescriptor, y: &MatrixDescriptor) -> Result<CostEstimate> {
    let (m, k, n) = check_inner(x, y)?;
    let (m, k, n) = (m as u64, k as u64, n as u64);
    let work = work_precision(x.precision, y.precision);
    let (madds, entries, density, exactness) = match (x.is_sparse(), y.is_sparse()) {
        (false, false) => (m * k * n, m * n, Density::Dense, Exactness::Exact),
        (true, false) => (x.nnz * n, m * n, Density::Dense, Exactness::Exact),
        (false, true) => (m * y.nnz, m * n, Density::Dense, Exactness::Exact),
        (true, true) => (
            (x.nnz.saturating_mul(n))
                .min(y.nnz.saturating_mul(m))
                .min(m.saturating_mul(k).saturating_mul(n)),
            (m * n).min(x.nnz.saturating_mul(y.nnz)),
            Density::Sparse,
            Exactness::UpperBound,
        ),
    };
    let entry_bytes = match density {
        Density::Dense => work.bytes() as u64,
        Density::Sparse => (work.bytes() + 2 * IndexWidth::for_shape(m as usize, n as usize).bytes()) as u64,
    };
    let output_bytes = entries * entry_bytes;
    Ok(CostEstimate {
        multiply_adds: madds,
        peak_resident_bytes: x.payload_bytes() + y.payload_bytes() + output_bytes,
        output_bytes,
        output_entries: entries,
        output_density: density,
        exactness,
    })
}

/// Planning descriptor for the product of a whole sub-chain. It depends
/// only on the factors, not on how they are grouped: dense when any factor
/// is dense, otherwise sparse with at most `min(rows * cols, prod nnz)`
/// entries.
pub fn chain_descriptor(factors: &[MatrixDescriptor]) -> Result<MatrixDescriptor> {
    let first = factors.first().ok_or_else(|| Error::InvalidConfig("empty chain".into()))?;
    if factors.len() == 1 {
        return Ok(first.clone());
    }
    for w in factors.windows(2) {
        check_inner(&w[0], &w[1])?;
    }
    let (m, _) = first.shape();
    let (_, n) = factors.last().unwrap().shape();
    let precision = factors.iter().fold(Precision::Half, |p, d| p.combine(d.precision)).work();
    let id = MatrixId(u32::MAX);
    if factors.iter().all(|d| d.is_sparse()) {
        let nnz = factors
            .iter()
            .fold(1u64, |acc, d| acc.saturating_mul(d.nnz))
            .min(m as u64 * n as u64);
        MatrixDescriptor::sparse(id, m, n, nnz, precision, IndexWidth::for_shape(m, n))
    } else {
        MatrixDescriptor::dense(id, m, n, precision)
    }
}

/// Binary parenthesization of a product chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssociationOrder {
    Leaf(usize),
    Product {
        left: Box<AssociationOrder>,
        right: Box<AssociationOrder>,
        cost: CostEstimate,
    },
}

impl AssociationOrder {
    /// Multiply-adds summed over every product node.
    pub fn total_multiply_adds(&self) -> u64 {
        match self {
            AssociationOrder::Leaf(_) => 0,
            AssociationOrder::Product { left, right, cost } => {
                cost.multiply_adds + left.total_multiply_adds() + right.total_multiply_adds()
            }
        }
    }

    /// Compact rendering such as `((0 1) 2)`.
    pub fn render(&self) -> String {
        match self {
            AssociationOrder::Leaf(i) => i.to_string(),
            AssociationOrder::Product { left, right, .. } => format!("({} {})", left.render(), right.render()),
        }
    }
}

/// Cheapest parenthesization of `chain[0] * chain[1] * ...` by estimated
/// multiply-adds. Ties go to the more right-leaning tree.
pub fn choose_association(chain: &[MatrixDescriptor]) -> Result<AssociationOrder> {
    let k = chain.len();
    if k < 2 {
        return Err(Error::InvalidConfig("a product chain needs at least two matrices".into()));
    }
    for w in chain.windows(2) {
        check_inner(&w[0], &w[1])?;
    }
    let mut desc: Vec<Vec<Option<MatrixDescriptor>>> = vec![vec![None; k]; k];
    for i in 0..k {
        for j in i..k {
            desc[i][j] = Some(chain_descriptor(&chain[i..=j])?);
        }
    }
    let node = |i: usize, s: usize, j: usize| {
        estimate_product(desc[i][s].as_ref().unwrap(), desc[s + 1][j].as_ref().unwrap())
    };
    // best[i][j]: (total cost, split) for chain[i..=j]
    let mut best = vec![vec![(0u64, 0usize); k]; k];
    for len in 2..=k {
        for i in 0..=k - len {
            let j = i + len - 1;
            let mut pick: Option<(u64, usize)> = None;
            for s in i..j {
                let total = best[i][s]
                    .0
                    .saturating_add(best[s + 1][j].0)
                    .saturating_add(node(i, s, j)?.multiply_adds);
                if pick.is_none_or(|p| total < p.0) {
                    pick = Some((total, s));
                }
            }
            best[i][j] = pick.unwrap();
        }
    }
    fn build(
        best: &[Vec<(u64, usize)>],
        node: &dyn Fn(usize, usize, usize) -> Result<CostEstimate>,
        i: usize,
        j: usize,
    ) -> AssociationOrder {
        if i == j {
            return AssociationOrder::Leaf(i);
        }
        let s = best[i][j].1;
        AssociationOrder::Product {
            left: Box::new(build(best, node, i, s)),
            right: Box::new(build(best, node, s + 1, j)),
            cost: node(i, s, j).expect("checked shapes"),
        }
    }
    Ok(build(&best, &node, 0, k - 1))
}

pub const DEFAULT_MIN_OPS_PER_THREAD: u64 = 100_000;

/// Worker count for an operation: one thread per `min_ops_per_thread`
/// multiply-adds, between 1 and `available`.
pub fn choose_threads(cost: &CostEstimate, available: usize, min_ops_per_thread: u64) -> usize {
    let want = cost.multiply_adds / min_ops_per_thread.max(1);
    (want.min(available as u64) as usize).clamp(1, available.max(1))
}
