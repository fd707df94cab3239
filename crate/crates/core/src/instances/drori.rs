use std::sync::Arc;

use crate::error::{precondition, Error, Result};
use crate::numerics::{StreamCursor, Vector};
use crate::oracles::{Oracle, ZeroSelector};

use super::{
    uniform, Field, GapValue, InstanceSpec, NoiseClass, Objective, ProblemInstance, ProblemParams,
    SmoothnessForm,
};

/// Bump of half-width `a`: `L0x²/2` near 0, a concave cap, then flat at `L0a²/4`.
pub(crate) fn bump_value(x: f64, a: f64, l0: f64) -> f64 {
    let s = x.abs();
    if s < 0.5 * a {
        0.5 * l0 * x * x
    } else if s <= a {
        -0.5 * l0 * (s - a) * (s - a) + 0.25 * l0 * a * a
    } else {
        0.25 * l0 * a * a
    }
}

pub(crate) fn bump_slope(x: f64, a: f64, l0: f64) -> f64 {
    let s = x.abs();
    if s < 0.5 * a {
        l0 * x
    } else if s <= a {
        -l0 * (s - a) * x.signum()
    } else {
        0.0
    }
}

/// Plateau positions the decorrelated AdaGrad-Norm iterates reach, rebuilt
/// with the optimizer's own floating-point operations.
///
/// Entry `k` is `step_k · σ` where `step_k = η/√(γ² + k·(ε² + σ²))` with the
/// accumulator summed term by term.
pub(crate) fn drori_plateaus(eps: f64, sigma: f64, eta: f64, gamma: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let per_step = 0.0 + eps * eps + sigma * sigma;
    let mut acc = 0.0_f64;
    let mut steps = Vec::with_capacity(n);
    let mut a = Vec::with_capacity(n);
    for _ in 0..n {
        let step = eta / (gamma * gamma + acc).sqrt();
        steps.push(step);
        a.push(step * sigma);
        acc += per_step;
    }
    (steps, a)
}

/// `f(x) = ε x_1 + Σ_{i=2}^{T} h_i(x_i)` with bumps whose plateaus sit where the
/// noise pushes each fresh coordinate.
#[derive(Debug)]
pub struct DroriObjective {
    eps: f64,
    l0: f64,
    /// Plateau half-width per coordinate (index 0 unused).
    a: Vec<f64>,
    /// Step sizes along the constructed trajectory.
    steps: Vec<f64>,
    dim: usize,
}

impl DroriObjective {
    /// Half-width `a_k` of the bump on coordinate `k` (0-based, `k ≥ 1`).
    pub fn plateau(&self, k: usize) -> Option<f64> {
        (k >= 1).then(|| self.a.get(k).copied()).flatten()
    }

    /// `3ε²/(2L0) + max_t (ε²Σ_{s<t} step_s - (L0/4)Σ_{k≤t} a_k²)`, the
    /// quantity bounded by Δ in place of the gap of the unbounded linear term.
    pub fn gap_surrogate(&self) -> f64 {
        let mut lin = 0.0;
        let mut bumps = 0.0;
        let mut worst = 0.0_f64;
        for (t, step) in self.steps.iter().enumerate() {
            lin += self.eps * self.eps * step;
            if let Some(a) = self.a.get(t + 1) {
                bumps += 0.25 * self.l0 * a * a;
            }
            worst = worst.max(lin - bumps);
        }
        1.5 * self.eps * self.eps / self.l0 + worst
    }
}

impl Field for DroriObjective {
    fn value(&self, x: &[f64]) -> Result<f64> {
        let mut v = self.eps * x[0];
        for (k, a) in self.a.iter().enumerate().skip(1) {
            v += bump_value(x[k], *a, self.l0);
        }
        Ok(v)
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        out[0] = self.eps;
        for (k, a) in self.a.iter().enumerate().skip(1) {
            out[k] = bump_slope(x[k], *a, self.l0);
        }
        Ok(())
    }

    fn sample_point(&self, cur: &mut StreamCursor) -> Vector {
        let reach = self.eps * self.steps.iter().sum::<f64>() + 1.0;
        sample_bumped(cur, self.dim, reach, |k| self.a.get(k).map(|&a| (a, a)))
    }

    fn fd_step(&self) -> f64 {
        let amin = self.a.iter().skip(1).copied().filter(|&a| a > 0.0).fold(f64::INFINITY, f64::min);
        1e-6 * if amin.is_finite() { amin.min(1.0) } else { 1.0 }
    }

    fn gap(&self, _x0: &[f64]) -> Result<GapValue> {
        Ok(GapValue {
            value: self.gap_surrogate(),
            surrogate: true,
        })
    }
}

/// Random point for the bump families: coordinate 0 free, each bump
/// coordinate zero, at a plateau edge, or uniform across the bump, and at
/// least one zero left among coordinates `1..dim` for the selector.
pub(crate) fn sample_bumped(
    cur: &mut StreamCursor,
    dim: usize,
    reach: f64,
    widths: impl Fn(usize) -> Option<(f64, f64)>,
) -> Vector {
    let mut x = vec![0.0; dim];
    x[0] = uniform(cur, -reach, reach);
    let mut any_zero = false;
    for (k, xk) in x.iter_mut().enumerate().skip(1) {
        let Some((neg, pos)) = widths(k) else {
            any_zero = true;
            continue;
        };
        let r = cur.next_f64();
        *xk = if r < 0.5 {
            0.0
        } else if r < 0.625 {
            -neg
        } else if r < 0.75 {
            pos
        } else {
            uniform(cur, -1.5 * neg, 1.5 * pos)
        };
        any_zero |= *xk == 0.0;
    }
    if !any_zero && dim > 1 {
        let k = 1 + (cur.next_u64() % (dim as u64 - 1)) as usize;
        x[k] = 0.0;
    }
    x
}

/// High-dimensional instance on which decorrelated AdaGrad-Norm keeps
/// `‖∇f(x_t)‖ = ε` for `T` steps.
///
/// Bumps occupy coordinates `2..=T` (1-based); `dim ≥ T`.
pub fn drori_objective(
    params: &ProblemParams,
    eta: f64,
    gamma: f64,
    steps: usize,
    dim: usize,
) -> Result<ProblemInstance> {
    params.validate()?;
    if steps == 0 {
        return Err(Error::Domain("T must be at least 1".into()));
    }
    if dim < steps {
        return Err(Error::Structure(format!("dimension {dim} is below T = {steps}")));
    }
    if !(eta > 0.0 && eta.is_finite() && gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Domain(format!(
            "eta and gamma must be positive, got eta={eta}, gamma={gamma}"
        )));
    }
    let (eps, l0, l1, delta) = (params.epsilon, params.l0, params.l1, params.delta);
    let cap = ((2f64.sqrt() / 3.0) * (delta * l0).sqrt()).min((delta * l1 * gamma / 3.0).sqrt());
    precondition(eps <= cap, || {
        format!("needs eps <= min{{(sqrt2/3)sqrt(Delta L0), sqrt(Delta L1 gamma/3)}} = {cap}, got {eps}")
    })?;

    let (step_sizes, plateaus) = drori_plateaus(eps, params.sigma, eta, gamma, steps);
    // Coordinate k (0-based, 1 ≤ k ≤ T-1) is touched at step k-1.
    let mut a = vec![0.0; steps];
    a[1..steps].copy_from_slice(&plateaus[..steps - 1]);

    Ok(ProblemInstance {
        spec: InstanceSpec::Drori {
            eta,
            gamma,
            steps,
            dim,
        },
        params: *params,
        dim,
        x0: vec![0.0; dim],
        class: NoiseClass::BoundedNoise {
            sigma: params.sigma,
        },
        oracle: Oracle::CoordinateRademacher {
            sigma: params.sigma,
            selector: ZeroSelector {
                first: 1,
                last: dim,
                fallback: Some(steps - 1),
            },
        },
        smoothness: SmoothnessForm::Lipschitz { l: l0 },
        objective: Objective::Drori(Arc::new(DroriObjective {
            eps,
            l0,
            a,
            steps: step_sizes,
            dim,
        })),
    })
}

/// Horizon `T` of the lower bound at these constants:
/// `1 + Δ²L1²σ²/(144ε⁴) + ΔL0σ² ln(1+σ²/γ²)/(24ε⁴) + Δ²L1²/(144ε²)`.
pub fn drori_lemma_horizon(params: &ProblemParams, eta: f64, gamma: f64) -> Result<f64> {
    params.validate()?;
    precondition(eta <= 1.0 / params.l1, || {
        format!("needs eta <= 1/L1 = {}, got {eta}", 1.0 / params.l1)
    })?;
    let (d, l0, l1, s, e) = (params.delta, params.l0, params.l1, params.sigma, params.epsilon);
    Ok(1.0
        + d * d * l1 * l1 * s * s / (144.0 * e.powi(4))
        + d * l0 * s * s * (s * s / (gamma * gamma)).ln_1p() / (24.0 * e.powi(4))
        + d * d * l1 * l1 / (144.0 * e * e))
}
