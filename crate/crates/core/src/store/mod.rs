//! Persistent block storage, text/image formats and plan records.

mod blockstore;
mod codec;
mod durable;
mod lane;
pub mod mtx;
pub mod pgm;
pub mod plan;
mod record_file;
mod sparse_layout;

pub use blockstore::{load_block, store_block, BlockId, BlockStore};
pub use codec::{checksum, decode_block, encode_block, BlockFileHeader, FORMAT_VERSION, HEADER_LEN, MAGIC};
pub use durable::{durable_write, FaultInjector};
pub use lane::IoLane;
pub use plan::{load_plan, plan_dir, read_plan_header, scan_plan, step_path, write_plan_header, write_step, PlanHeader, StepRecord, StepStatus};
pub use record_file::{read_dense_record_file, read_record_file, RecordFileWriter};
pub use sparse_layout::SparseStoreLayout;
