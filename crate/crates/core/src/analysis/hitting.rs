use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::instances::{InstanceSpec, ProblemInstance, ProblemParams};
use crate::optimizers::{is_numeric_divergence, OptimizerConfig, Runner};
use crate::oracles::Oracle;

/// First `t` with `‖∇f(x_t)‖ < ε`, or `NotReached` within the budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HittingTime {
    Reached(u64),
    NotReached,
}

impl HittingTime {
    pub fn steps(self) -> Option<u64> {
        match self {
            HittingTime::Reached(t) => Some(t),
            HittingTime::NotReached => None,
        }
    }
}

impl fmt::Display for HittingTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HittingTime::Reached(t) => write!(f, "{t}"),
            HittingTime::NotReached => f.write_str("NOT_REACHED"),
        }
    }
}

impl Serialize for HittingTime {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            HittingTime::Reached(t) => s.serialize_u64(*t),
            HittingTime::NotReached => s.serialize_str("NOT_REACHED"),
        }
    }
}

impl<'de> Deserialize<'de> for HittingTime {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(u64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(t) => Ok(HittingTime::Reached(t)),
            Raw::S(s) if s == "NOT_REACHED" => Ok(HittingTime::NotReached),
            Raw::S(s) => Err(serde::de::Error::custom(format!("bad hitting time {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HittingTimeResult {
    pub t_eps: HittingTime,
    /// Closed-form lower bound on `t_eps` where one applies.
    pub lower_bound: Option<f64>,
    /// The run left the representable range before reaching ε.
    pub diverged: bool,
    pub lemma_tag: String,
    pub params: ProblemParams,
    pub config: OptimizerConfig,
    pub eps: f64,
    pub t_cap: u64,
    pub seed: u64,
    pub fallback_draws: u64,
}

impl HittingTimeResult {
    /// `t_eps ≥ lower_bound`, counting `NotReached` as consistent.
    pub fn respects_bound(&self) -> bool {
        match (self.t_eps, self.lower_bound) {
            (HittingTime::Reached(t), Some(b)) => t as f64 >= b,
            _ => true,
        }
    }
}

/// `√2·γ/(L1σ)·ln(1 + L1ε/L0)`: at or above it decorrelated AdaGrad never
/// reaches ε on the coordinate-wise instance, at or below it the hinge is slow.
pub fn coordinate_eta_threshold(params: &ProblemParams, gamma: f64) -> f64 {
    2f64.sqrt() * gamma / (params.l1 * params.sigma) * (params.l1 * params.epsilon / params.l0).ln_1p()
}

/// `√2/L1·ln(1 + L1ε/L0)`, the divergence threshold for AdaGrad.
pub fn adagrad_eta_threshold(params: &ProblemParams) -> f64 {
    2f64.sqrt() / params.l1 * (params.l1 * params.epsilon / params.l0).ln_1p()
}

/// `Δ²/(64η²ε²)`, the hinge lower bound for the decorrelated methods. Valid
/// when `4ηε² ≤ Δγ`.
pub fn hinge_slow_bound(delta: f64, eta: f64, eps: f64) -> f64 {
    delta * delta / (64.0 * eta * eta * eps * eps)
}

/// `Δ²L0²σ²/(256γ²ε⁴) + Δ²L1²σ²/(256γ²ε² ln²(1 + ΔL1²/L0))`.
pub fn hinge_slow_bound_in_params(params: &ProblemParams, gamma: f64) -> f64 {
    let ProblemParams {
        delta,
        l0,
        l1,
        sigma,
        epsilon: e,
        ..
    } = *params;
    let lg = params.rho().ln_1p();
    let c = delta * delta * sigma * sigma / (256.0 * gamma * gamma);
    c * l0 * l0 / e.powi(4) + c * l1 * l1 / (e * e * lg * lg)
}

/// Lower bound on `t_eps` from the construction behind `instance`, if the
/// configuration falls in its regime.
pub fn closed_form_lower_bound(instance: &ProblemInstance, config: &OptimizerConfig, eps: f64) -> Option<f64> {
    let p = instance.params();
    if eps > p.epsilon {
        return None;
    }
    let det = instance.oracle().is_deterministic();
    match (instance.spec(), config) {
        (
            InstanceSpec::Hinge,
            OptimizerConfig::DecorrelatedAdaGradNorm { eta, gamma }
            | OptimizerConfig::DecorrelatedAdaGrad { eta, gamma },
        ) if det && eps == p.epsilon && 4.0 * eta * eps * eps <= p.delta * gamma => {
            Some(hinge_slow_bound(p.delta, *eta, eps))
        }
        (
            InstanceSpec::Drori { eta: e0, gamma: g0, steps, .. },
            OptimizerConfig::DecorrelatedAdaGradNorm { eta, gamma },
        ) if e0 == eta && g0 == gamma => Some(*steps as f64),
        (InstanceSpec::CoordwiseExp { terms }, OptimizerConfig::DecorrelatedAdaGrad { eta, gamma })
            if p.sigma > 0.0 && *eta >= coordinate_eta_threshold(p, *gamma) =>
        {
            Some(*terms as f64)
        }
        (InstanceSpec::CoordwiseExp { terms }, OptimizerConfig::AdaGrad { eta, gamma })
            if p.sigma > 0.0 && *gamma <= p.sigma && *eta >= adagrad_eta_threshold(p) =>
        {
            Some(*terms as f64)
        }
        (InstanceSpec::QuadBump { alpha: a0, steps, .. }, OptimizerConfig::SingleStep { alpha }) if a0 == alpha => {
            Some(*steps as f64)
        }
        _ => None,
    }
}

/// Runs `config` on `instance` (optionally with `oracle` swapped in) and
/// returns the first `t < t_cap` with `‖∇f(x_t)‖ < eps`.
///
/// A run that leaves the representable range counts as not reached and is
/// flagged as diverged.
pub fn measure_hitting_time(
    instance: &ProblemInstance,
    oracle: Option<&Oracle>,
    config: &OptimizerConfig,
    eps: f64,
    t_cap: u64,
    seed: u64,
) -> Result<HittingTimeResult> {
    if t_cap == 0 {
        return Err(Error::Domain("t_cap must be at least 1".into()));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("eps must be positive and finite, got {eps}")));
    }
    let swapped;
    let inst = match oracle {
        Some(o) => {
            swapped = instance.with_oracle(o.clone())?;
            &swapped
        }
        None => instance,
    };
    let mut runner = Runner::new(inst, config, seed)?;
    let mut t_eps = HittingTime::NotReached;
    let mut diverged = false;
    for t in 0..t_cap {
        let gn = match runner.grad_norm() {
            Ok(g) => g,
            Err(e) if is_numeric_divergence(&e) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        if !gn.is_finite() {
            diverged = true;
            break;
        }
        if gn < eps {
            t_eps = HittingTime::Reached(t);
            break;
        }
        if t + 1 == t_cap {
            break;
        }
        match runner.advance() {
            Ok(_) => {}
            Err(e) if is_numeric_divergence(&e) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(HittingTimeResult {
        t_eps,
        lower_bound: closed_form_lower_bound(inst, config, eps),
        diverged,
        lemma_tag: inst.lemma_tag().to_string(),
        params: *inst.params(),
        config: config.clone(),
        eps,
        t_cap,
        seed,
        fallback_draws: runner.fallback_draws(),
    })
}

/// Least-squares line through `(ln x, ln t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n: usize,
}

/// Fits `ln t_eps = slope·ln x + intercept` over at least four points.
pub fn fit_scaling_exponent(grid: &[(f64, HittingTime)]) -> Result<ScalingFit> {
    if grid.len() < 4 {
        return Err(Error::Precondition(format!(
            "a scaling fit needs at least 4 points, got {}",
            grid.len()
        )));
    }
    let mut pts = Vec::with_capacity(grid.len());
    for &(x, t) in grid {
        let HittingTime::Reached(t) = t else {
            return Err(Error::Precondition(format!(
                "point x = {x} did not reach eps; raise t_cap and rerun"
            )));
        };
        if !(x > 0.0 && x.is_finite() && t > 0) {
            return Err(Error::Domain(format!(
                "log-log fit needs positive values, got x = {x}, t = {t}"
            )));
        }
        pts.push((x.ln(), (t as f64).ln()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("all grid values coincide".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(ScalingFit {
        slope,
        intercept: my - slope * mx,
        r2,
        n: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::hinge_objective;

    fn hinge_params() -> ProblemParams {
        ProblemParams {
            delta: 2.0,
            epsilon: 0.1,
            sigma: 1.0,
            ..ProblemParams::default()
        }
    }

    #[test]
    fn hinge_respects_slow_bound() {
        let inst = hinge_objective(&hinge_params()).unwrap();
        let cfg = OptimizerConfig::DecorrelatedAdaGrad { eta: 0.1, gamma: 1.0 };
        let r = measure_hitting_time(&inst, None, &cfg, 0.1, 100_000, 7).unwrap();
        assert!((r.lower_bound.unwrap() - 625.0).abs() < 1e-9);
        let t = r.t_eps.steps().unwrap();
        assert!(t >= 625, "t = {t}");
        assert!(r.respects_bound());
    }

    #[test]
    fn large_eps_hits_at_zero() {
        let inst = hinge_objective(&hinge_params()).unwrap();
        let cfg = OptimizerConfig::DecorrelatedAdaGradNorm { eta: 0.1, gamma: 1.0 };
        let r = measure_hitting_time(&inst, None, &cfg, 1.0, 10, 0).unwrap();
        assert_eq!(r.t_eps, HittingTime::Reached(0));
    }

    #[test]
    fn exact_power_law() {
        let grid: Vec<_> = [0.1, 0.05, 0.025, 0.0125]
            .iter()
            .map(|&e: &f64| (e, HittingTime::Reached((3.0 / (e * e)).round() as u64)))
            .collect();
        let f = fit_scaling_exponent(&grid).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-3);
        assert!(f.r2 > 0.999_999);
    }

    #[test]
    fn fit_rejects_not_reached_and_short_grids() {
        let mut grid = vec![(1.0, HittingTime::Reached(1)); 3];
        assert!(matches!(fit_scaling_exponent(&grid), Err(Error::Precondition(_))));
        grid.push((2.0, HittingTime::NotReached));
        assert!(matches!(fit_scaling_exponent(&grid), Err(Error::Precondition(_))));
    }

    #[test]
    fn hitting_time_json() {
        let s = serde_json::to_string(&[HittingTime::Reached(4), HittingTime::NotReached]).unwrap();
        assert_eq!(s, "[4,\"NOT_REACHED\"]");
        let back: Vec<HittingTime> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, [HittingTime::Reached(4), HittingTime::NotReached]);
    }
}
