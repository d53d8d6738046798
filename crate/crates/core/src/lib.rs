pub mod error;
pub mod exchange;
pub mod kernels;
pub mod matrix;
pub mod planner;
pub mod precision;
pub mod rsvd;
pub mod store;
pub mod workspace;

pub use error::{Error, Result};
