use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::{hinge_objective, ProblemParams};
use crate::optimizers::OptimizerConfig;

use super::hitting::{coordinate_eta_threshold, fit_scaling_exponent, measure_hitting_time, HittingTime, HittingTimeResult, ScalingFit};

/// Runs `f` on every config, on `workers` threads if given (otherwise the
/// global pool). Results come back in input order whatever the schedule.
pub fn run_parallel<C, R, F>(configs: &[C], workers: Option<usize>, f: F) -> Result<Vec<R>>
where
    C: Sync,
    R: Send,
    F: Fn(&C) -> Result<R> + Sync + Send,
{
    let go = || configs.par_iter().map(&f).collect::<Result<Vec<R>>>();
    match workers {
        None => go(),
        Some(0) => Err(Error::Domain("workers must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))?
            .install(go),
    }
}

/// How a sweep picks `η` at each grid point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum EtaRule {
    Fixed { eta: f64 },
    /// `factor ×` [`coordinate_eta_threshold`] at the point's ε.
    Threshold { factor: f64 },
}

impl EtaRule {
    pub fn eta(&self, params: &ProblemParams, gamma: f64) -> f64 {
        match *self {
            EtaRule::Fixed { eta } => eta,
            EtaRule::Threshold { factor } => factor * coordinate_eta_threshold(params, gamma),
        }
    }
}

/// Grid of ε values on the hinge, one deterministic run each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HingeSweep {
    pub params: ProblemParams,
    pub gamma: f64,
    pub eta: EtaRule,
    pub eps_grid: Vec<f64>,
    pub t_cap: u64,
    /// `true` for decorrelated AdaGrad-Norm, `false` for decorrelated AdaGrad.
    /// They coincide in one dimension.
    #[serde(default)]
    pub norm_variant: bool,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub eta: f64,
    pub t_eps: HittingTime,
    pub lower_bound: Option<f64>,
    pub respects_bound: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub sweep: HingeSweep,
    /// Sorted by ε.
    pub rows: Vec<SweepRow>,
    /// Present when the grid has at least four reached points.
    pub fit: Option<ScalingFit>,
    pub fit_error: Option<String>,
}

pub fn hinge_sweep(sweep: &HingeSweep, workers: Option<usize>) -> Result<SweepOutcome> {
    if sweep.eps_grid.is_empty() {
        return Err(Error::Domain("eps grid is empty".into()));
    }
    let mut grid = sweep.eps_grid.clone();
    grid.sort_by(f64::total_cmp);
    let results: Vec<(f64, HittingTimeResult)> = run_parallel(&grid, workers, |&eps| {
        let p = ProblemParams {
            epsilon: eps,
            ..sweep.params
        };
        let inst = hinge_objective(&p)?;
        let eta = sweep.eta.eta(&p, sweep.gamma);
        let cfg = if sweep.norm_variant {
            OptimizerConfig::DecorrelatedAdaGradNorm { eta, gamma: sweep.gamma }
        } else {
            OptimizerConfig::DecorrelatedAdaGrad { eta, gamma: sweep.gamma }
        };
        Ok((eta, measure_hitting_time(&inst, None, &cfg, eps, sweep.t_cap, sweep.seed)?))
    })?;
    let rows: Vec<SweepRow> = grid
        .iter()
        .zip(&results)
        .map(|(&eps, (eta, r))| SweepRow {
            eps,
            eta: *eta,
            t_eps: r.t_eps,
            lower_bound: r.lower_bound,
            respects_bound: r.respects_bound(),
        })
        .collect();
    let pts: Vec<(f64, HittingTime)> = rows.iter().map(|r| (r.eps, r.t_eps)).collect();
    let (fit, fit_error) = match fit_scaling_exponent(&pts) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(SweepOutcome {
        sweep: sweep.clone(),
        rows,
        fit,
        fit_error,
    })
}
