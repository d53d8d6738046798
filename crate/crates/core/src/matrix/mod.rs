//! Logical matrix model and in-memory tile payloads.

mod block;
mod descriptor;
mod partition;

pub use block::{Block, DenseBlock, IndexArray, Idx, SparseBlock, Values};
pub use descriptor::{transpose_view, Density, IndexWidth, MatrixDescriptor, MatrixId, Residency};
pub use partition::BlockPartition;
pub(crate) use partition::merge_cuts;
