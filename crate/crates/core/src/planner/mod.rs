//! Cost prediction, partitioning, association ordering, thread counts and
//! memory residency.

mod budget;
mod cost;
mod partition;
mod residency;

pub use budget::MemoryBudget;
pub use cost::{
    chain_descriptor, choose_association, choose_threads, estimate_product, work_precision, AssociationOrder,
    CostEstimate, Exactness, DEFAULT_MIN_OPS_PER_THREAD,
};
pub use partition::{
    dense_grid, dense_scalar_bytes, partition_for_budget, partition_for_limit, row_panels, sparse_partition,
};
pub use residency::{residency_check, Charge, Eviction, ResidencyTracker, Violation};
