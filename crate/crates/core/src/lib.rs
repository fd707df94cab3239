//! Adaptive step-size methods and the hard instances that separate them under
//! (L0, L1)-smoothness.
//!
//! Modules:
//! - [`numerics`]: extended-range scalars, vector helpers, finite differences, random streams
//! - [`instances`]: objectives with analytic gradients and membership certificates
//! - [`oracles`]: stochastic gradient oracles
//! - [`optimizers`]: AdaGrad-family and single-step SGD updates, trajectory runner
//! - [`analysis`]: trajectory verifiers, hitting times, random walks, tricky pairs

pub mod analysis;
pub mod error;
pub mod instances;
pub mod numerics;
pub mod optimizers;
pub mod oracles;

pub use error::{Error, Result};
pub use instances::{InstanceSpec, NoiseClass, ProblemInstance, ProblemParams};
pub use numerics::{ExtendedScalar, RandomStream, Vector};
pub use optimizers::{AccumulatorOrder, OptimizerConfig, StepSizeFn, TrajectoryLog};
pub use oracles::Oracle;
