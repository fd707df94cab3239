use serde::{Deserialize, Serialize};

use crate::error::{precondition, Result};
use crate::instances::{chain_objective, chain_schedule, max_admissible_gamma, ProblemParams, DEFAULT_CHAIN_CONSTANT};
use crate::numerics::ExtendedScalar;
use crate::optimizers::{OptimizerConfig, Runner};

/// Relative tolerance for plain-real trajectory comparisons.
pub const TRAJECTORY_TOLERANCE: f64 = 1e-9;
/// Relative tolerance between the two log-domain evaluations.
const LOG_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub params: ProblemParams,
    pub eta: f64,
    pub gamma: f64,
    pub t_max: usize,
    /// `ℓ_t ≥ 4m_{t+1}` for every `t ≤ t_max`.
    pub recurrence_ok: bool,
    pub first_recurrence_failure: Option<usize>,
    /// `min_t ln(ℓ_t / 4m_{t+1})`.
    pub min_log_margin: f64,
    /// Largest relative gap between the schedule and an independent
    /// recomputation of `ln ℓ_t`.
    pub max_log_discrepancy: f64,
    /// Knots reachable in plain reals.
    pub plain_prefix: usize,
    /// `x_t = d_t` within [`TRAJECTORY_TOLERANCE`] on the plain prefix.
    pub trajectory_ok: bool,
    pub first_trajectory_failure: Option<usize>,
    pub max_position_error: f64,
    /// `|f'(x_t)| = g_t ≥ ΔL1` on the plain prefix, and `g_t ≥ ΔL1` for all `t`.
    pub gradient_ok: bool,
    pub first_gradient_failure: Option<usize>,
    pub passed: bool,
}

/// ln(1 + e^v) without overflow.
fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

/// ln(e^a + e^b).
fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}

/// Checks the divergence construction for decorrelated AdaGrad-Norm.
///
/// The jump condition `ℓ_t ≥ 4m_{t+1}` is recomputed in plain log-space and
/// compared against the `ExtendedScalar` schedule; the optimizer is then run
/// on the chain objective over the knots representable in `f64`.
pub fn verify_chain_divergence(params: &ProblemParams, eta: f64, gamma: f64, t_max: usize) -> Result<VerificationReport> {
    params.validate()?;
    let (l0, l1) = (params.l0, params.l1);
    let rho = params.rho();
    precondition(rho >= 1.0, || format!("needs Delta*L1^2 >= L0, got {rho}"))?;
    precondition(eta.is_finite() && eta >= 1.0 / l1, || {
        format!("needs eta >= 1/L1 = {}, got {eta}", 1.0 / l1)
    })?;
    let gmax = max_admissible_gamma(params, eta);
    precondition(gamma > 0.0 && gamma <= gmax, || {
        format!("needs 0 < gamma <= {gmax}, got {gamma}")
    })?;

    let ln_base = (params.delta * l1).ln();
    let ln_g = |t: usize| -> f64 {
        let tp1 = (t + 1) as f64;
        t as f64 * (DEFAULT_CHAIN_CONSTANT * tp1 * (rho * tp1).ln_1p()).ln() + ln_base
    };
    let ln_m = |lg: f64| softplus((l1 / l0).ln() + lg).ln() - l1.ln();
    let ln4 = 4f64.ln();
    let mut ln_sum = 2.0 * gamma.ln();
    let mut ln_ell = Vec::with_capacity(t_max + 1);
    let mut first_rec = None;
    let mut min_margin = f64::INFINITY;
    for t in 0..=t_max {
        let lg = ln_g(t);
        let le = eta.ln() + lg - 0.5 * ln_sum;
        let margin = le - ln4 - ln_m(ln_g(t + 1));
        min_margin = min_margin.min(margin);
        if margin < 0.0 && first_rec.is_none() {
            first_rec = Some(t);
        }
        ln_ell.push(le);
        ln_sum = log_add(ln_sum, 2.0 * lg);
    }
    let mut report = VerificationReport {
        params: *params,
        eta,
        gamma,
        t_max,
        recurrence_ok: first_rec.is_none(),
        first_recurrence_failure: first_rec,
        min_log_margin: min_margin,
        max_log_discrepancy: f64::NAN,
        plain_prefix: 0,
        trajectory_ok: false,
        first_trajectory_failure: None,
        max_position_error: f64::NAN,
        gradient_ok: false,
        first_gradient_failure: None,
        passed: false,
    };
    if first_rec.is_some() {
        return Ok(report);
    }

    let sched = chain_schedule(params, eta, gamma, t_max)?;
    let four = ExtendedScalar::from_f64(4.0)?;
    let mut disc = 0.0_f64;
    for t in 0..=t_max {
        let ext = sched.ell[t].logmag();
        disc = disc.max(rel(ext, ln_ell[t]).min((ext - ln_ell[t]).abs()));
        if sched.ell[t] < four.mul(sched.m[t + 1]) {
            report.recurrence_ok = false;
            report.first_recurrence_failure = Some(t);
            return Ok(report);
        }
    }
    report.max_log_discrepancy = disc;
    let floor = ExtendedScalar::from_f64(params.delta * l1)?;
    let mut first_grad = sched.g.iter().position(|g| *g < floor);

    let inst = chain_objective(&sched, params)?;
    let knots = inst.chain().map_or(0, |c| c.plain_knots().len());
    report.plain_prefix = knots;
    let cfg = OptimizerConfig::DecorrelatedAdaGradNorm { eta, gamma };
    let mut runner = Runner::new(&inst, &cfg, 0)?;
    let mut first_traj = None;
    let mut max_err = 0.0_f64;
    for t in 0..knots {
        let x = runner.x()[0];
        let d = sched.d[t].to_f64();
        let err = if d == 0.0 { x.abs() } else { rel(x, d) };
        max_err = max_err.max(err);
        if !(err <= TRAJECTORY_TOLERANCE) && first_traj.is_none() {
            first_traj = Some(t);
        }
        let slope = inst.gradient(runner.x())?[0];
        let g = sched.g[t].to_f64();
        let ok = rel(-slope, g) <= TRAJECTORY_TOLERANCE && slope.abs() >= params.delta * l1;
        if !ok && first_grad.is_none_or(|f| t < f) {
            first_grad = Some(t);
        }
        if t + 1 < knots {
            runner.advance()?;
        }
    }
    report.trajectory_ok = first_traj.is_none();
    report.first_trajectory_failure = first_traj;
    report.max_position_error = max_err;
    report.gradient_ok = first_grad.is_none();
    report.first_gradient_failure = first_grad;
    report.passed = report.recurrence_ok
        && report.trajectory_ok
        && report.gradient_ok
        && disc <= LOG_TOLERANCE;
    Ok(report)
}
