use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::linalg::norm_sq;
use crate::numerics::Vector;

use super::StepSizeFn;

/// Whether the current gradient enters its own denominator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccumulatorOrder {
    /// Sum through `i = t` (AdaGrad, AdaGrad-Norm).
    IncludeCurrent,
    /// Sum through `i = t-1`, updated after the step (decorrelated variants).
    ExcludeCurrent,
}

/// Update rule and its hyperparameters. `gamma` always enters as `gamma²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerConfig {
    /// `x ← x - η/√(γ² + Σ_{i<t}‖g_i‖²)·g_t`.
    DecorrelatedAdaGradNorm { eta: f64, gamma: f64 },
    /// `x ← x - η/√(γ² + Σ_{i≤t}‖g_i‖²)·g_t`.
    AdaGradNorm { eta: f64, gamma: f64 },
    /// Per coordinate, `x_j ← x_j - η/√(γ² + Σ_{i≤t} g_{i,j}²)·g_{t,j}`.
    AdaGrad { eta: f64, gamma: f64 },
    /// Per coordinate, with sums through `i = t-1`.
    DecorrelatedAdaGrad { eta: f64, gamma: f64 },
    /// `x ← x - α(g_t)·g_t`.
    SingleStep { alpha: StepSizeFn },
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            OptimizerConfig::SingleStep { alpha } => alpha.validate(),
            OptimizerConfig::DecorrelatedAdaGradNorm { eta, gamma }
            | OptimizerConfig::AdaGradNorm { eta, gamma }
            | OptimizerConfig::AdaGrad { eta, gamma }
            | OptimizerConfig::DecorrelatedAdaGrad { eta, gamma } => {
                if !(eta.is_finite() && *eta > 0.0) {
                    return Err(Error::Domain(format!("eta must be positive and finite, got {eta}")));
                }
                if !(gamma.is_finite() && *gamma > 0.0) {
                    return Err(Error::Domain(format!("gamma must be positive and finite, got {gamma}")));
                }
                Ok(())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerConfig::DecorrelatedAdaGradNorm { .. } => "decorrelated_ada_grad_norm",
            OptimizerConfig::AdaGradNorm { .. } => "ada_grad_norm",
            OptimizerConfig::AdaGrad { .. } => "ada_grad",
            OptimizerConfig::DecorrelatedAdaGrad { .. } => "decorrelated_ada_grad",
            OptimizerConfig::SingleStep { .. } => "single_step",
        }
    }

    /// Fresh state at `x0` with an empty accumulator of the right shape.
    pub fn init(&self, x0: &[f64]) -> OptimizerState {
        let accum = match self {
            OptimizerConfig::DecorrelatedAdaGradNorm { .. } | OptimizerConfig::AdaGradNorm { .. } => {
                Accumulator::Scalar(0.0)
            }
            OptimizerConfig::AdaGrad { .. } | OptimizerConfig::DecorrelatedAdaGrad { .. } => {
                Accumulator::Coords(vec![0.0; x0.len()])
            }
            OptimizerConfig::SingleStep { .. } => Accumulator::None,
        };
        OptimizerState {
            x: x0.to_vec(),
            accum,
            t: 0,
        }
    }

    /// Applies one update in place and returns the effective step size.
    pub fn step(&self, state: &mut OptimizerState, g: &[f64]) -> Result<f64> {
        match self {
            OptimizerConfig::DecorrelatedAdaGradNorm { eta, gamma } => {
                step_adagrad_norm(state, g, *eta, *gamma, AccumulatorOrder::ExcludeCurrent)
            }
            OptimizerConfig::AdaGradNorm { eta, gamma } => {
                step_adagrad_norm(state, g, *eta, *gamma, AccumulatorOrder::IncludeCurrent)
            }
            OptimizerConfig::AdaGrad { eta, gamma } => {
                step_adagrad_coords(state, g, *eta, *gamma, AccumulatorOrder::IncludeCurrent)
            }
            OptimizerConfig::DecorrelatedAdaGrad { eta, gamma } => {
                step_adagrad_coords(state, g, *eta, *gamma, AccumulatorOrder::ExcludeCurrent)
            }
            OptimizerConfig::SingleStep { alpha } => step_single_step_sgd(state, g, alpha),
        }
    }
}

/// Denominator sums.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accumulator {
    /// `Σ‖g_i‖²`.
    Scalar(f64),
    /// `Σ g_i²` per coordinate.
    Coords(Vector),
    None,
}

impl Accumulator {
    /// Scalar sum, or the sum over coordinates.
    pub fn total(&self) -> f64 {
        match self {
            Accumulator::Scalar(s) => *s,
            Accumulator::Coords(c) => c.iter().sum(),
            Accumulator::None => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub x: Vector,
    pub accum: Accumulator,
    pub t: u64,
}

fn check_len(state: &OptimizerState, g: &[f64]) -> Result<()> {
    if state.x.len() == g.len() {
        Ok(())
    } else {
        Err(Error::Structure(format!(
            "gradient has length {} but the iterate has {}",
            g.len(),
            state.x.len()
        )))
    }
}

fn scalar_accum(state: &mut OptimizerState) -> Result<&mut f64> {
    match &mut state.accum {
        Accumulator::Scalar(s) => Ok(s),
        _ => Err(Error::Structure("expected a scalar accumulator".into())),
    }
}

/// AdaGrad-Norm with either accumulator order. Returns `η/√(γ² + S)`.
pub fn step_adagrad_norm(
    state: &mut OptimizerState,
    g: &[f64],
    eta: f64,
    gamma: f64,
    order: AccumulatorOrder,
) -> Result<f64> {
    check_len(state, g)?;
    let gsq = norm_sq(g);
    let acc = scalar_accum(state)?;
    if order == AccumulatorOrder::IncludeCurrent {
        *acc += gsq;
    }
    let step = eta / (gamma * gamma + *acc).sqrt();
    if order == AccumulatorOrder::ExcludeCurrent {
        *acc += gsq;
    }
    for (xi, gi) in state.x.iter_mut().zip(g) {
        *xi -= step * gi;
    }
    state.t += 1;
    Ok(step)
}

pub fn step_decorrelated_adagrad_norm(state: &mut OptimizerState, g: &[f64], eta: f64, gamma: f64) -> Result<f64> {
    step_adagrad_norm(state, g, eta, gamma, AccumulatorOrder::ExcludeCurrent)
}

/// Coordinate-wise AdaGrad with either accumulator order.
/// Returns `‖Δx‖/‖g‖` (0 for a zero gradient).
pub fn step_adagrad_coords(
    state: &mut OptimizerState,
    g: &[f64],
    eta: f64,
    gamma: f64,
    order: AccumulatorOrder,
) -> Result<f64> {
    check_len(state, g)?;
    let acc = match &mut state.accum {
        Accumulator::Coords(c) if c.len() == g.len() => c,
        _ => return Err(Error::Structure("expected a coordinate accumulator".into())),
    };
    let g2 = gamma * gamma;
    let mut moved = 0.0;
    for ((xi, si), &gi) in state.x.iter_mut().zip(acc.iter_mut()).zip(g) {
        if gi == 0.0 {
            continue;
        }
        if order == AccumulatorOrder::IncludeCurrent {
            *si += gi * gi;
        }
        let step = eta / (g2 + *si).sqrt();
        if order == AccumulatorOrder::ExcludeCurrent {
            *si += gi * gi;
        }
        let old = *xi;
        *xi -= step * gi;
        let dx = old - *xi;
        moved += dx * dx;
    }
    state.t += 1;
    let gn = norm_sq(g).sqrt();
    Ok(if gn > 0.0 { moved.sqrt() / gn } else { 0.0 })
}

pub fn step_adagrad(state: &mut OptimizerState, g: &[f64], eta: f64, gamma: f64) -> Result<f64> {
    step_adagrad_coords(state, g, eta, gamma, AccumulatorOrder::IncludeCurrent)
}

pub fn step_decorrelated_adagrad(state: &mut OptimizerState, g: &[f64], eta: f64, gamma: f64) -> Result<f64> {
    step_adagrad_coords(state, g, eta, gamma, AccumulatorOrder::ExcludeCurrent)
}

/// `x ← x - α(g)·g`. A zero gradient leaves `x` in place without evaluating α.
pub fn step_single_step_sgd(state: &mut OptimizerState, g: &[f64], alpha: &StepSizeFn) -> Result<f64> {
    check_len(state, g)?;
    state.t += 1;
    if g.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let a = alpha.alpha(g)?;
    for (xi, gi) in state.x.iter_mut().zip(g) {
        *xi -= a * gi;
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm_cfg(eta: f64, gamma: f64) -> OptimizerConfig {
        OptimizerConfig::DecorrelatedAdaGradNorm { eta, gamma }
    }

    #[test]
    fn first_decorrelated_step_uses_gamma_only() {
        let cfg = norm_cfg(2.0, 0.5);
        let mut s = cfg.init(&[0.0, 0.0]);
        cfg.step(&mut s, &[3.0, 0.0]).unwrap();
        assert_eq!(s.x, vec![-12.0, 0.0]);
        assert_eq!(s.accum, Accumulator::Scalar(9.0));
    }

    #[test]
    fn second_step_length_is_one_over_root_two() {
        let cfg = norm_cfg(1.0, 1.0);
        let mut s = cfg.init(&[0.0]);
        cfg.step(&mut s, &[1.0]).unwrap();
        let before = s.x[0];
        let step = cfg.step(&mut s, &[1.0]).unwrap();
        assert_eq!(step, (1.0 / 2f64.sqrt()));
        assert_eq!(before - s.x[0], (1.0 / 2f64.sqrt()));
    }

    #[test]
    fn adagrad_includes_current_gradient() {
        let sigma = 0.7;
        let cfg = OptimizerConfig::AdaGrad { eta: 1.0, gamma: sigma };
        let mut s = cfg.init(&[0.0]);
        cfg.step(&mut s, &[sigma]).unwrap();
        assert!((s.x[0] + (1.0 / 2f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn decorrelated_vs_original_at_t0() {
        let a = OptimizerConfig::AdaGrad { eta: 1.0, gamma: 1.0 };
        let d = OptimizerConfig::DecorrelatedAdaGrad { eta: 1.0, gamma: 1.0 };
        let (mut sa, mut sd) = (a.init(&[0.0]), d.init(&[0.0]));
        assert_eq!(a.step(&mut sa, &[1.0]).unwrap(), (1.0 / 2f64.sqrt()));
        assert_eq!(d.step(&mut sd, &[1.0]).unwrap(), 1.0);
    }

    #[test]
    fn zero_coordinate_untouched() {
        let cfg = OptimizerConfig::AdaGrad { eta: 1.0, gamma: 1.0 };
        let mut s = cfg.init(&[1.0, 2.0]);
        cfg.step(&mut s, &[0.0, 1.0]).unwrap();
        assert_eq!(s.x[0], 1.0);
        assert_eq!(s.accum, Accumulator::Coords(vec![0.0, 1.0]));
    }

    #[test]
    fn single_step_rules() {
        let n = OptimizerConfig::SingleStep {
            alpha: StepSizeFn::Normalized { c: 0.3 },
        };
        let mut s = n.init(&[0.0, 0.0]);
        n.step(&mut s, &[3.0, 4.0]).unwrap();
        assert!((crate::numerics::linalg::norm(&s.x) - 0.3).abs() < 1e-15);

        let clip = OptimizerConfig::SingleStep {
            alpha: StepSizeFn::Clip { eta: 1.0, c: 0.5 },
        };
        let mut s = clip.init(&[0.0]);
        clip.step(&mut s, &[10.0]).unwrap();
        assert!((s.x[0] + 0.5).abs() < 1e-15);

        let mut s = n.init(&[1.0, 1.0]);
        assert_eq!(n.step(&mut s, &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(s.x, vec![1.0, 1.0]);
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = OptimizerConfig::SingleStep {
            alpha: StepSizeFn::Clip { eta: 0.5, c: 0.5 },
        };
        let s = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<OptimizerConfig>(&s).unwrap(), cfg);
    }
}
