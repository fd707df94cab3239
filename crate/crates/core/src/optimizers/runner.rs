use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::ProblemInstance;
use crate::numerics::linalg::{all_finite, norm, norm_scaled};
use crate::numerics::{RandomStream, Vector};

use super::{OptimizerConfig, OptimizerState};

/// Leading coordinates written to CSV.
pub const CSV_COORDS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// The iterate or its gradient left the finite range after step
    /// `last_finite_step`. A valid outcome for divergence runs.
    DivergedNumeric { last_finite_step: u64 },
}

/// One step of a trajectory: state at `x_t` and the update taken from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    /// `x_t`, possibly truncated to its leading coordinates.
    pub x: Vector,
    pub x_norm: f64,
    /// Oracle output `g_t`, truncated like `x`.
    pub grad: Vector,
    /// `‖∇f(x_t)‖`.
    pub grad_norm: f64,
    pub step_size: f64,
    /// Accumulator total before the step.
    pub accum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub seed: u64,
    pub config: OptimizerConfig,
    pub lemma_tag: String,
    pub dim: usize,
    /// Number of coordinates kept per record, if fewer than `dim`.
    pub truncated_to: Option<usize>,
    pub records: Vec<StepRecord>,
    pub final_x: Vector,
    pub status: RunStatus,
    pub fallback_draws: u64,
}

impl TrajectoryLog {
    /// CSV with columns `t, x_norm, x0.., grad_norm, step_size, accum`.
    pub fn to_csv(&self) -> String {
        let k = self.dim.min(CSV_COORDS);
        let mut s = String::from("t,x_norm");
        for i in 0..k {
            let _ = write!(s, ",x{i}");
        }
        s.push_str(",grad_norm,step_size,accum\n");
        for r in &self.records {
            let _ = write!(s, "{},{:e}", r.t, r.x_norm);
            for i in 0..k {
                let _ = write!(s, ",{:e}", r.x.get(i).copied().unwrap_or(f64::NAN));
            }
            let _ = writeln!(s, ",{:e},{:e},{:e}", r.grad_norm, r.step_size, r.accum);
        }
        s
    }
}

/// What [`Runner::advance`] did.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    pub grad_norm: f64,
    pub step_size: f64,
    pub fallback: bool,
}

/// Step-by-step driver with preallocated buffers.
///
/// Step `t` reads the uniform at offset `t` of the seed's stream, unless the
/// oracle is deterministic.
#[derive(Debug)]
pub struct Runner<'a> {
    instance: &'a ProblemInstance,
    config: &'a OptimizerConfig,
    state: OptimizerState,
    stream: RandomStream,
    deterministic: bool,
    grad: Vector,
    draw: Vector,
    grad_ready: bool,
    grad_norm: f64,
    fallbacks: u64,
}

impl<'a> Runner<'a> {
    pub fn new(instance: &'a ProblemInstance, config: &'a OptimizerConfig, seed: u64) -> Result<Self> {
        Self::with_stream(instance, config, RandomStream::new(seed))
    }

    pub fn with_stream(
        instance: &'a ProblemInstance,
        config: &'a OptimizerConfig,
        stream: RandomStream,
    ) -> Result<Self> {
        config.validate()?;
        let dim = instance.dim();
        Ok(Self {
            instance,
            config,
            state: config.init(instance.x0()),
            stream,
            deterministic: instance.oracle().is_deterministic(),
            grad: vec![0.0; dim],
            draw: vec![0.0; dim],
            grad_ready: false,
            grad_norm: f64::NAN,
            fallbacks: 0,
        })
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    pub fn t(&self) -> u64 {
        self.state.t
    }

    pub fn x(&self) -> &[f64] {
        &self.state.x
    }

    /// Last oracle output.
    pub fn last_draw(&self) -> &[f64] {
        &self.draw
    }

    pub fn fallback_draws(&self) -> u64 {
        self.fallbacks
    }

    /// `‖∇f(x_t)‖`, evaluated once per step.
    pub fn grad_norm(&mut self) -> Result<f64> {
        if !self.grad_ready {
            self.instance.gradient_into(&self.state.x, &mut self.grad)?;
            self.grad_norm = norm_scaled(&self.grad);
            self.grad_ready = true;
        }
        Ok(self.grad_norm)
    }

    /// Draws `g_t` at `x_t` and applies the update.
    pub fn advance(&mut self) -> Result<StepInfo> {
        let grad_norm = self.grad_norm()?;
        let u = if self.deterministic {
            0.0
        } else {
            self.stream.uniform_at(self.state.t)
        };
        let info = self
            .instance
            .draw_into(&self.state.x, &self.grad, u, &mut self.draw)?;
        if info.fallback {
            self.fallbacks += 1;
        }
        let step_size = self.config.step(&mut self.state, &self.draw)?;
        self.grad_ready = false;
        Ok(StepInfo {
            grad_norm,
            step_size,
            fallback: info.fallback,
        })
    }
}

/// True for failures that mean the run left the representable range.
pub(crate) fn is_numeric_divergence(e: &Error) -> bool {
    matches!(e, Error::Range(_))
}

/// Runs `steps` updates from `instance.x0()` and records every step.
pub fn run_trajectory(
    instance: &ProblemInstance,
    config: &OptimizerConfig,
    steps: usize,
    seed: u64,
) -> Result<TrajectoryLog> {
    run_trajectory_truncated(instance, config, steps, seed, None)
}

/// As [`run_trajectory`], keeping only the first `keep` coordinates of `x_t`
/// and `g_t` in each record.
pub fn run_trajectory_truncated(
    instance: &ProblemInstance,
    config: &OptimizerConfig,
    steps: usize,
    seed: u64,
    keep: Option<usize>,
) -> Result<TrajectoryLog> {
    if steps == 0 {
        return Err(Error::Domain("steps must be at least 1".into()));
    }
    let dim = instance.dim();
    let keep = keep.filter(|&k| k < dim);
    let cut = keep.unwrap_or(dim);
    let mut runner = Runner::new(instance, config, seed)?;
    let mut records = Vec::with_capacity(steps);
    let mut status = RunStatus::Completed;
    for _ in 0..steps {
        let t = runner.t();
        let x: Vector = runner.x()[..cut].to_vec();
        let x_norm = norm(runner.x());
        let accum = runner.state().accum.total();
        let info = match runner.advance() {
            Ok(i) => i,
            Err(e) if is_numeric_divergence(&e) => {
                status = RunStatus::DivergedNumeric { last_finite_step: t };
                break;
            }
            Err(e) => return Err(e),
        };
        records.push(StepRecord {
            t,
            x,
            x_norm,
            grad: runner.last_draw()[..cut].to_vec(),
            grad_norm: info.grad_norm,
            step_size: info.step_size,
            accum,
        });
        if !(info.grad_norm.is_finite() && all_finite(runner.x())) {
            status = RunStatus::DivergedNumeric { last_finite_step: t };
            break;
        }
    }
    Ok(TrajectoryLog {
        seed,
        config: config.clone(),
        lemma_tag: instance.lemma_tag().to_string(),
        dim,
        truncated_to: keep,
        records,
        final_x: runner.x().to_vec(),
        status,
        fallback_draws: runner.fallback_draws(),
    })
}
