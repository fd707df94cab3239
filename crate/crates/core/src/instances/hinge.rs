use std::sync::Arc;

use crate::error::{precondition, Result};
use crate::numerics::{StreamCursor, Vector};
use crate::oracles::Oracle;

use super::psi::{psi, psi_d1, psi_inverse_slope};
use super::{
    uniform, Field, GapValue, InstanceSpec, NoiseClass, Objective, ProblemInstance, ProblemParams,
    SmoothnessForm,
};

#[derive(Debug)]
pub(crate) struct HingeField {
    eps: f64,
    m: f64,
    psi_m: f64,
    l0: f64,
    l1: f64,
    reach: f64,
}

impl HingeField {
    fn eval(&self, x: f64) -> Result<(f64, f64)> {
        if x.abs() <= self.m {
            Ok((psi(x, self.l0, self.l1)?, psi_d1(x, self.l0, self.l1)?))
        } else {
            Ok((self.eps * (x.abs() - self.m) + self.psi_m, self.eps * x.signum()))
        }
    }
}

impl Field for HingeField {
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eval(x[0])?.0)
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = self.eval(x[0])?.1;
        Ok(())
    }

    fn sample_point(&self, cur: &mut StreamCursor) -> Vector {
        vec![uniform(cur, -self.reach, self.reach)]
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

/// ψ on `[-m, m]` with linear wings of slope ε, `ψ'(m) = ε`, started at
/// `m + Δ/(2ε)`. The initial gap is `Δ/2 + ψ(m) ≤ Δ`.
pub fn hinge_objective(params: &ProblemParams) -> Result<ProblemInstance> {
    params.validate()?;
    let (l0, l1, eps, delta) = (params.l0, params.l1, params.epsilon, params.delta);
    precondition(eps < delta * l1 / 2.0, || {
        format!("needs eps < Delta L1 / 2 = {}, got {eps}", delta * l1 / 2.0)
    })?;
    let m = psi_inverse_slope(eps, l0, l1);
    let x0 = m + delta / (2.0 * eps);
    Ok(ProblemInstance {
        spec: InstanceSpec::Hinge,
        params: *params,
        dim: 1,
        x0: vec![x0],
        class: NoiseClass::BoundedNoise {
            sigma: params.sigma,
        },
        oracle: Oracle::Deterministic,
        smoothness: SmoothnessForm::Relaxed { l0, l1 },
        objective: Objective::Hinge(Arc::new(HingeField {
            eps,
            m,
            psi_m: psi(m, l0, l1)?,
            l0,
            l1,
            reach: 2.0 * x0,
        })),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ProblemParams {
        ProblemParams {
            delta: 2.0,
            epsilon: 0.1,
            ..ProblemParams::default()
        }
    }

    #[test]
    fn wings_have_slope_eps() {
        let inst = hinge_objective(&params()).unwrap();
        let x0 = inst.x0()[0];
        assert_eq!(inst.gradient(&[x0]).unwrap()[0], 0.1);
        assert_eq!(inst.gradient(&[-x0]).unwrap()[0], -0.1);
    }

    #[test]
    fn gap_is_half_delta_plus_psi_m() {
        let inst = hinge_objective(&params()).unwrap();
        let m = (1.1f64).ln();
        let expect = 1.0 + 0.1 - m;
        let gap = inst.gap().unwrap().value;
        assert!((gap - expect).abs() < 1e-12);
        assert!(gap <= 2.0);
    }

    #[test]
    fn start_moves_in_as_eps_grows() {
        let x0 = |e: f64| {
            hinge_objective(&ProblemParams {
                epsilon: e,
                ..params()
            })
            .unwrap()
            .x0()[0]
        };
        assert!(x0(0.05) > x0(0.1) && x0(0.1) > x0(0.5));
    }
}
