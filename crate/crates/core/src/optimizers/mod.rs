//! AdaGrad-family updates, single-step SGD, and the trajectory runner.

mod runner;
mod step_size;
mod update;

pub use runner::{
    run_trajectory, run_trajectory_truncated, RunStatus, Runner, StepInfo, StepRecord, TrajectoryLog,
    CSV_COORDS,
};
pub(crate) use runner::is_numeric_divergence;
pub use step_size::StepSizeFn;
pub use update::{
    step_adagrad, step_adagrad_coords, step_adagrad_norm, step_decorrelated_adagrad,
    step_decorrelated_adagrad_norm, step_single_step_sgd, Accumulator, AccumulatorOrder,
    OptimizerConfig, OptimizerState,
};
