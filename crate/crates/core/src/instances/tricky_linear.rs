use std::sync::Arc;

use serde::Serialize;

use crate::error::{precondition, Error, Result};
use crate::numerics::linalg::{dot, norm};
use crate::numerics::{StreamCursor, Vector};
use crate::optimizers::StepSizeFn;
use crate::oracles::Oracle;

use super::psi::{psi, psi_d1, psi_inverse_slope};
use super::{
    uniform, Field, GapValue, InstanceSpec, NoiseClass, Objective, ProblemInstance, ProblemParams,
    SmoothnessForm,
};

/// Two collinear gradients written as `g1 = c1·ĝ`, `g2 = c2·ĝ` with `c2 > 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrickyGeometry {
    pub direction: Vector,
    pub c1: f64,
    pub c2: f64,
}

impl TrickyGeometry {
    pub fn from_pair(g1: &[f64], g2: &[f64]) -> Result<Self> {
        if g1.len() != g2.len() || g1.is_empty() {
            return Err(Error::Structure("g1 and g2 must be non-empty and equally long".into()));
        }
        let n2 = norm(g2);
        if !(n2 > 0.0 && n2.is_finite()) {
            return Err(Error::Structure("g2 must be a non-zero finite vector".into()));
        }
        let direction: Vector = g2.iter().map(|v| v / n2).collect();
        let c1 = dot(g1, &direction);
        let resid = g1
            .iter()
            .zip(&direction)
            .fold(0.0, |acc, (a, u)| acc + (a - c1 * u) * (a - c1 * u))
            .sqrt();
        if resid > 1e-12 * norm(g1).max(n2) {
            return Err(Error::Structure(format!(
                "g1 and g2 are not collinear (residual {resid:e})"
            )));
        }
        Ok(Self { direction, c1, c2: n2 })
    }
}

/// `G = ΔL1 / (1 + 4 ln(1 + ΔL1²/L0))`, the largest admissible mean slope.
pub fn slope_cap(params: &ProblemParams) -> f64 {
    params.delta * params.l1 / (1.0 + 4.0 * params.rho().ln_1p())
}

/// Magnitude conditions on `(c1, c2)`: opposite signs, both at least ε, the
/// window for `|c1|`, the two-branch lower bound and the upper bound for `|c2|`.
pub(crate) fn magnitude_conditions(
    c1: f64,
    c2: f64,
    p: f64,
    params: &ProblemParams,
) -> Vec<(&'static str, bool)> {
    let (eps, s1, s2) = (params.epsilon, params.sigma1, params.sigma2);
    let g = slope_cap(params);
    let (a, b) = (c1.abs(), c2.abs());
    let q = (1.0 - p) / p;
    let small = a <= q * s1 + (q * s2 - 1.0) * eps;
    let small_lower = (p * a + eps) / (1.0 - p);
    let large_lower = ((s2 + 1.0) * p * a - s1) / ((s2 + 1.0) * (1.0 - p) - 1.0);
    vec![
        ("opposite_signs", c1.signum() != c2.signum() && c1 != 0.0 && c2 != 0.0),
        ("magnitudes_at_least_eps", a >= eps && b >= eps),
        ("c1_window", a <= q * s1 + (q * s2 - 1.0) * g),
        // Only the branch selected by |c1| binds; the other passes vacuously.
        ("c2_lower_bound_small_c1", !small || b >= small_lower),
        ("c2_lower_bound_large_c1", small || b >= large_lower),
        ("c2_upper_bound", b <= (p * a + g) / (1.0 - p)),
    ]
}

pub(crate) fn check_p(p: f64, sigma2: f64) -> Result<()> {
    let hi = sigma2 / (sigma2 + 1.0);
    if !(p > 0.5 && p < hi) {
        return Err(Error::Domain(format!(
            "p must lie in (1/2, sigma2/(sigma2+1)) = (0.5, {hi}), got {p}"
        )));
    }
    Ok(())
}

#[derive(Debug)]
pub(crate) struct TrickyField {
    dir: Vector,
    slope: f64,
    a: f64,
    psi_a: f64,
    l0: f64,
    l1: f64,
    reach: f64,
}

impl TrickyField {
    fn profile(&self, s: f64) -> Result<(f64, f64)> {
        if s.abs() < self.a {
            Ok((psi(s, self.l0, self.l1)?, psi_d1(s, self.l0, self.l1)?))
        } else {
            Ok((self.slope * (s.abs() - self.a) + self.psi_a, self.slope * s.signum()))
        }
    }
}

impl Field for TrickyField {
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.profile(dot(x, &self.dir))?.0)
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.profile(dot(x, &self.dir))?.1;
        for (o, u) in out.iter_mut().zip(&self.dir) {
            *o = d * u;
        }
        Ok(())
    }

    fn side(&self, x: &[f64]) -> i8 {
        let s = dot(x, &self.dir);
        if s >= self.a {
            1
        } else if s <= -self.a {
            -1
        } else {
            0
        }
    }

    fn sample_point(&self, cur: &mut StreamCursor) -> Vector {
        let s = uniform(cur, -self.reach, self.reach);
        let mut x: Vector = self.dir.iter().map(|u| s * u).collect();
        // Components orthogonal to ĝ do not change f; perturb them anyway.
        let mut w: Vector = (0..x.len()).map(|_| uniform(cur, -1.0, 1.0)).collect();
        let along = dot(&w, &self.dir);
        for (wi, u) in w.iter_mut().zip(&self.dir) {
            *wi -= along * u;
        }
        for (xi, wi) in x.iter_mut().zip(&w) {
            *xi += wi;
        }
        x
    }

    fn fd_step(&self) -> f64 {
        1e-6 / self.l1
    }

    fn gap(&self, x0: &[f64]) -> Result<GapValue> {
        Ok(GapValue {
            value: self.value(x0)?,
            surrogate: false,
        })
    }
}

/// ψ valley of half-width `a` along `ĝ` with linear wings of slope
/// `ℓ = p·c1 + (1-p)·c2`, started at `(a + β(g2))·ĝ`.
///
/// Outside the valley the oracle returns `±g1` with probability `p` and `±g2`
/// otherwise, so the iterate follows a biased walk along `ĝ`.
pub fn tricky_linear_objective(
    g1: &[f64],
    g2: &[f64],
    p: f64,
    alpha: &StepSizeFn,
    params: &ProblemParams,
) -> Result<ProblemInstance> {
    params.validate()?;
    alpha.validate()?;
    check_p(p, params.sigma2)?;
    let geo = TrickyGeometry::from_pair(g1, g2)?;
    for (name, ok) in magnitude_conditions(geo.c1, geo.c2, p, params) {
        precondition(ok, || format!("pair fails condition {name} (c1={}, c2={})", geo.c1, geo.c2))?;
    }
    let (l0, l1, eps) = (params.l0, params.l1, params.epsilon);
    let slope = p * geo.c1 + (1.0 - p) * geo.c2;
    precondition(slope >= eps, || {
        format!("mean slope p c1 + (1-p) c2 = {slope} is below eps = {eps}")
    })?;
    let bound = params.sigma1 + params.sigma2 * slope;
    for (name, c) in [("g1", geo.c1), ("g2", geo.c2)] {
        precondition((c - slope).abs() <= bound, || {
            format!("deviation of {name} from the mean slope exceeds sigma1 + sigma2 * slope = {bound}")
        })?;
    }
    let beta2 = alpha.beta_at_norm(geo.c2)?;
    let m_delta = params.m_delta();
    precondition(beta2 > 0.0 && beta2 < 4.0 * m_delta, || {
        format!("needs 0 < beta(g2) < 4 m = {}, got {beta2}", 4.0 * m_delta)
    })?;
    let a = psi_inverse_slope(slope, l0, l1);
    let start = a + beta2;
    let x0: Vector = geo.direction.iter().map(|u| start * u).collect();
    Ok(ProblemInstance {
        spec: InstanceSpec::TrickyLinear {
            g1: g1.to_vec(),
            g2: g2.to_vec(),
            p,
            alpha: alpha.clone(),
        },
        params: *params,
        dim: g1.len(),
        x0,
        class: NoiseClass::AffineNoise {
            sigma1: params.sigma1,
            sigma2: params.sigma2,
        },
        oracle: Oracle::TwoPoint {
            p,
            g1: g1.to_vec(),
            g2: g2.to_vec(),
        },
        smoothness: SmoothnessForm::Relaxed { l0, l1 },
        objective: Objective::Tricky(Arc::new(TrickyField {
            dir: geo.direction,
            slope,
            a,
            psi_a: psi(a, l0, l1)?,
            l0,
            l1,
            reach: 2.0 * start + 1.0 / l1,
        })),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ProblemParams {
        ProblemParams {
            delta: 10.0,
            sigma1: 1.0,
            sigma2: 4.0,
            epsilon: 0.1,
            ..ProblemParams::default()
        }
    }

    #[test]
    fn geometry_orients_g2_positive() {
        let geo = TrickyGeometry::from_pair(&[0.0, 1.0], &[0.0, -4.0]).unwrap();
        assert_eq!(geo.direction, vec![0.0, -1.0]);
        assert_eq!((geo.c1, geo.c2), (-1.0, 4.0));
    }

    #[test]
    fn non_collinear_rejected() {
        assert!(matches!(
            TrickyGeometry::from_pair(&[1.0, 0.0], &[0.0, 1.0]),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn mean_slope_and_wings() {
        let p = params();
        let g = slope_cap(&p);
        let (c1, c2) = (-0.3 * g, 0.95 * g);
        let inst = tricky_linear_objective(
            &[c1],
            &[c2],
            2.0 / 3.0,
            &StepSizeFn::Normalized { c: 0.5 },
            &p,
        )
        .unwrap();
        let ell = (2.0 / 3.0) * c1 + c2 / 3.0;
        let far = inst.x0()[0] + 5.0;
        assert!((inst.gradient(&[far]).unwrap()[0] - ell).abs() < 1e-15);
        assert!((inst.gradient(&[-far]).unwrap()[0] + ell).abs() < 1e-15);
    }

    #[test]
    fn cancelling_slope_rejected() {
        let p = ProblemParams {
            delta: 1000.0,
            sigma1: 10.0,
            ..params()
        };
        let r = tricky_linear_objective(&[-1.0], &[2.0], 2.0 / 3.0, &StepSizeFn::Normalized { c: 0.5 }, &p);
        assert!(r.is_err());
    }
}
