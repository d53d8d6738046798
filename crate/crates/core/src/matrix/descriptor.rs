use std::fmt;

use serde::{Deserialize, Serialize};

use super::BlockPartition;
use crate::error::{Error, Result};
use crate::precision::Precision;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MatrixId(pub u32);

impl fmt::Display for MatrixId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m{:08x}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Density {
    Dense,
    Sparse,
}

impl Density {
    pub(crate) const fn code(self) -> u8 {
        match self {
            Density::Dense => 1,
            Density::Sparse => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Density> {
        match code {
            1 => Some(Density::Dense),
            2 => Some(Density::Sparse),
            _ => None,
        }
    }
}

/// Width of stored sparse row/column indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IndexWidth {
    #[serde(rename = "u32")]
    W32,
    #[serde(rename = "u64")]
    W64,
}

impl IndexWidth {
    pub const fn bytes(self) -> usize {
        match self {
            IndexWidth::W32 => 4,
            IndexWidth::W64 => 8,
        }
    }

    /// Narrowest width that can address a `rows x cols` matrix.
    pub fn for_shape(rows: usize, cols: usize) -> IndexWidth {
        if (rows.max(cols) as u64) < (1u64 << 32) {
            IndexWidth::W32
        } else {
            IndexWidth::W64
        }
    }

    pub fn check(self, rows: usize, cols: usize) -> Result<()> {
        if self == IndexWidth::W32 && rows.max(cols) as u64 >= 1u64 << 32 {
            return Err(Error::IndexWidthOverflow { rows, cols });
        }
        Ok(())
    }

    pub(crate) const fn code(self) -> u8 {
        match self {
            IndexWidth::W32 => 4,
            IndexWidth::W64 => 8,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<IndexWidth> {
        match code {
            4 => Some(IndexWidth::W32),
            8 => Some(IndexWidth::W64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Residency {
    InCore,
    OutOfCore,
}

/// Logical description of a matrix. Cheap to clone; never holds data.
///
/// `rows`, `cols` and `partition` are in storage orientation. When
/// `transposed` is set, callers see the swapped shape through
/// [`MatrixDescriptor::shape`] and [`MatrixDescriptor::logical_partition`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatrixDescriptor {
    pub id: MatrixId,
    pub rows: usize,
    pub cols: usize,
    pub density: Density,
    pub precision: Precision,
    pub index_width: Option<IndexWidth>,
    pub transposed: bool,
    pub residency: Residency,
    pub partition: BlockPartition,
    pub nnz: u64,
}

impl MatrixDescriptor {
    pub fn dense(id: MatrixId, rows: usize, cols: usize, precision: Precision) -> Result<Self> {
        check_shape(rows, cols)?;
        Ok(MatrixDescriptor {
            id,
            rows,
            cols,
            density: Density::Dense,
            precision,
            index_width: None,
            transposed: false,
            residency: Residency::InCore,
            partition: BlockPartition::single(rows, cols),
            nnz: (rows as u64) * (cols as u64),
        })
    }

    pub fn sparse(
        id: MatrixId,
        rows: usize,
        cols: usize,
        nnz: u64,
        precision: Precision,
        index_width: IndexWidth,
    ) -> Result<Self> {
        check_shape(rows, cols)?;
        index_width.check(rows, cols)?;
        Ok(MatrixDescriptor {
            id,
            rows,
            cols,
            density: Density::Sparse,
            precision,
            index_width: Some(index_width),
            transposed: false,
            residency: Residency::InCore,
            partition: BlockPartition::single(rows, cols),
            nnz,
        })
    }

    /// Shape as seen by callers (swapped under a transpose view).
    pub fn shape(&self) -> (usize, usize) {
        if self.transposed {
            (self.cols, self.rows)
        } else {
            (self.rows, self.cols)
        }
    }

    pub fn logical_partition(&self) -> BlockPartition {
        if self.transposed {
            self.partition.transposed()
        } else {
            self.partition.clone()
        }
    }

    pub fn is_sparse(&self) -> bool {
        self.density == Density::Sparse
    }

    /// Bytes of one stored entry: the scalar plus, for sparse, two indices.
    pub fn entry_bytes(&self) -> usize {
        self.precision.bytes() + self.index_width.map_or(0, |w| 2 * w.bytes())
    }

    pub fn payload_bytes(&self) -> u64 {
        self.nnz * self.entry_bytes() as u64
    }

    /// Fraction of stored entries over `rows * cols`.
    pub fn density_ratio(&self) -> f64 {
        self.nnz as f64 / (self.rows as f64 * self.cols as f64)
    }
}

/// Toggle the transpose flag. Moves no data.
pub fn transpose_view(m: &MatrixDescriptor) -> MatrixDescriptor {
    MatrixDescriptor {
        transposed: !m.transposed,
        ..m.clone()
    }
}

fn check_shape(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidShape { rows, cols });
    }
    Ok(())
}
