//! Randomized SVD with power iteration, run as a resumable plan.

mod config;
mod layout;
mod pipeline;
mod sketch;

pub use config::{PowerMode, RsvdConfig, Stage, StageTimings, DEFAULT_Q_MAX, DEFAULT_TAU};
pub use layout::{ids, layout, should_stop, StepSpec};
pub use pipeline::{
    auto_select_q, full_svd, power_apply, randomized_svd, randomized_svd_observed, resume, resume_observed,
    stored_job, InputSource, RsvdResult, StepObserver,
};
pub use sketch::{gaussian_matrix, gaussian_run};
