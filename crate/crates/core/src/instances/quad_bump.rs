use std::sync::Arc;

use crate::error::{precondition, Error, Result};
use crate::numerics::{StreamCursor, Vector};
use crate::optimizers::StepSizeFn;
use crate::oracles::{Oracle, ZeroSelector};

use super::drori::{bump_slope, bump_value, sample_bumped};
use super::{
    Field, GapValue, InstanceSpec, NoiseClass, Objective, ProblemInstance, ProblemParams,
    SmoothnessForm,
};

/// `f(x) = ε x_1 + Σ_{i=2}^{T} h_i(x_i)` where `h_i` is flat at `-a_i` on the
/// left and at `b_i` on the right, with `a_i = σ1·α(εe1 + σ1e_i)` and
/// `b_i = σ1·α(εe1 - σ1e_i)`.
#[derive(Debug)]
pub struct QuadBumpObjective {
    eps: f64,
    l0: f64,
    /// `(a_k, b_k)` per coordinate (index 0 unused).
    widths: Vec<(f64, f64)>,
    /// `α` along the trajectory for `+σ1` and `-σ1` noise.
    alphas: Vec<(f64, f64)>,
    dim: usize,
}

impl QuadBumpObjective {
    /// `(a_k, b_k)` for coordinate `k` (0-based, `k ≥ 1`).
    pub fn plateaus(&self, k: usize) -> Option<(f64, f64)> {
        (k >= 1).then(|| self.widths.get(k).copied()).flatten()
    }

    /// `3ε²/(2L0)` plus the largest `-f(x_t)` over all noise sign patterns.
    pub fn gap_surrogate(&self) -> f64 {
        let e2 = self.eps * self.eps;
        let mut run = 0.0;
        let mut worst = 0.0_f64;
        for (t, (ap, am)) in self.alphas.iter().enumerate() {
            let (a, b) = self.widths.get(t + 1).copied().unwrap_or((0.0, 0.0));
            let up = e2 * ap - 0.25 * self.l0 * a * a;
            let down = e2 * am - 0.25 * self.l0 * b * b;
            run += up.max(down);
            worst = worst.max(run);
        }
        1.5 * e2 / self.l0 + worst
    }

    fn h(&self, k: usize, x: f64) -> (f64, f64) {
        let (a, b) = self.widths[k];
        let w = if x < 0.0 { a } else { b };
        (bump_value(x, w, self.l0), bump_slope(x, w, self.l0))
    }
}

impl Field for QuadBumpObjective {
    fn value(&self, x: &[f64]) -> Result<f64> {
        let mut v = self.eps * x[0];
        for k in 1..self.widths.len() {
            v += self.h(k, x[k]).0;
        }
        Ok(v)
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        out[0] = self.eps;
        for k in 1..self.widths.len() {
            out[k] = self.h(k, x[k]).1;
        }
        Ok(())
    }

    fn sample_point(&self, cur: &mut StreamCursor) -> Vector {
        let reach = self.eps * self.alphas.iter().map(|p| p.0.max(p.1)).sum::<f64>() + 1.0;
        sample_bumped(cur, self.dim, reach, |k| {
            (k >= 1).then(|| self.widths.get(k).copied()).flatten()
        })
    }

    fn fd_step(&self) -> f64 {
        let wmin = self
            .widths
            .iter()
            .skip(1)
            .flat_map(|&(a, b)| [a, b])
            .filter(|&w| w > 0.0)
            .fold(f64::INFINITY, f64::min);
        1e-6 * if wmin.is_finite() { wmin.min(1.0) } else { 1.0 }
    }

    fn gap(&self, _x0: &[f64]) -> Result<GapValue> {
        Ok(GapValue {
            value: self.gap_surrogate(),
            surrogate: true,
        })
    }
}

/// Instance on which single-step SGD with rule `alpha` keeps
/// `‖∇f(x_t)‖ = ε` for `T` steps. Needs `dim ≥ T` and `α > 0` at the probed
/// gradients.
pub fn quad_bump_objective(
    alpha: &StepSizeFn,
    params: &ProblemParams,
    steps: usize,
    dim: usize,
) -> Result<ProblemInstance> {
    params.validate()?;
    alpha.validate()?;
    if steps == 0 {
        return Err(Error::Domain("T must be at least 1".into()));
    }
    if dim < steps {
        return Err(Error::Structure(format!("dimension {dim} is below T = {steps}")));
    }
    let (eps, l0, s1) = (params.epsilon, params.l0, params.sigma1);
    let cap = (params.delta * l0 / 3.0).sqrt();
    precondition(eps <= cap, || {
        format!("needs eps <= sqrt(Delta L0/3) = {cap}, got {eps}")
    })?;

    // Zero coordinates add exactly 0 to the norm, so the two-entry vectors
    // give the same α as the full-dimensional stochastic gradients.
    let ap = alpha.alpha(&[eps, s1])?;
    let am = alpha.alpha(&[eps, -s1])?;
    precondition(ap > 0.0 && am > 0.0, || {
        format!("step-size rule must be positive at norm sqrt(eps^2+sigma1^2), got {ap} and {am}")
    })?;
    let mut widths = vec![(0.0, 0.0); steps];
    for w in widths.iter_mut().skip(1) {
        *w = (ap * s1, am * s1);
    }

    Ok(ProblemInstance {
        spec: InstanceSpec::QuadBump {
            alpha: alpha.clone(),
            steps,
            dim,
        },
        params: *params,
        dim,
        x0: vec![0.0; dim],
        class: NoiseClass::AffineNoise {
            sigma1: s1,
            sigma2: params.sigma2,
        },
        oracle: Oracle::CoordinateRademacher {
            sigma: s1,
            selector: ZeroSelector {
                first: 1,
                last: dim,
                fallback: None,
            },
        },
        smoothness: SmoothnessForm::Lipschitz { l: l0 },
        objective: Objective::QuadBump(Arc::new(QuadBumpObjective {
            eps,
            l0,
            widths,
            alphas: vec![(ap, am); steps],
            dim,
        })),
    })
}
