use std::sync::Arc;

use crate::error::{precondition, Error, Result};
use crate::numerics::{StreamCursor, Vector};
use crate::oracles::{Oracle, ZeroSelector};

use super::psi::{psi, psi_d1, psi_inverse_slope};
use super::{
    uniform, Field, GapValue, InstanceSpec, NoiseClass, Objective, ProblemInstance, ProblemParams,
    SmoothnessForm,
};

#[derive(Debug)]
pub(crate) struct CoordwiseField {
    l0: f64,
    l1: f64,
    terms: usize,
    reach: f64,
}

impl Field for CoordwiseField {
    fn value(&self, x: &[f64]) -> Result<f64> {
        x[..self.terms]
            .iter()
            .try_fold(0.0, |acc, &v| Ok(acc + psi(v, self.l0, self.l1)?))
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        for i in 0..self.terms {
            out[i] = psi_d1(x[i], self.l0, self.l1)?;
        }
        Ok(())
    }

    fn sample_point(&self, cur: &mut StreamCursor) -> Vector {
        let dim = self.terms.max(1);
        let mut x = vec![0.0; dim];
        // Sparse points like the iterates, with a few dense ones mixed in.
        let dense = cur.next_f64() < 0.1;
        for v in x.iter_mut() {
            if dense || cur.next_f64() < 0.05 {
                *v = uniform(cur, -self.reach, self.reach);
            }
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

/// `f(x) = Σ_{i=1}^{T} ψ(x_i)` started at `m·e1` with `ψ'(m) = ε`.
///
/// Rademacher noise lands on the first zero coordinate among the `T` terms;
/// once none is left the draw is noise-free and flagged. The dimension equals
/// the number of terms.
pub fn coordwise_exp_objective(params: &ProblemParams, terms: usize) -> Result<ProblemInstance> {
    params.validate()?;
    if terms == 0 {
        return Err(Error::Structure("need at least one term".into()));
    }
    let dim = terms;
    let (l0, l1, eps) = (params.l0, params.l1, params.epsilon);
    precondition(eps < params.delta * l1, || {
        format!("needs eps < Delta L1 = {}, got {eps}", params.delta * l1)
    })?;
    // Round up so that ψ'(x0) ≥ ε holds in floating point too.
    let mut m = psi_inverse_slope(eps, l0, l1);
    while psi_d1(m, l0, l1)? < eps {
        m = m.next_up();
    }
    let mut x0 = vec![0.0; dim];
    x0[0] = m;
    Ok(ProblemInstance {
        spec: InstanceSpec::CoordwiseExp { terms },
        params: *params,
        dim,
        x0,
        class: NoiseClass::BoundedNoise {
            sigma: params.sigma,
        },
        oracle: Oracle::CoordinateRademacher {
            sigma: params.sigma,
            selector: ZeroSelector {
                first: 0,
                last: terms,
                fallback: None,
            },
        },
        smoothness: SmoothnessForm::Relaxed { l0, l1 },
        objective: Objective::Coordwise(Arc::new(CoordwiseField {
            l0,
            l1,
            terms,
            reach: (3.0 * params.m_delta()).min(600.0 / l1),
        })),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::linalg::norm;

    fn params() -> ProblemParams {
        ProblemParams {
            sigma: 1.0,
            epsilon: 0.1,
            ..ProblemParams::default()
        }
    }

    #[test]
    fn gradient_norm_at_start_is_eps() {
        let inst = coordwise_exp_objective(&params(), 5).unwrap();
        let g = norm(&inst.gradient(inst.x0()).unwrap());
        assert!(g >= 0.1 && g - 0.1 < 1e-15);
    }

    #[test]
    fn gap_matches_closed_form() {
        let inst = coordwise_exp_objective(&params(), 5).unwrap();
        let expect = 0.1 - (1.1f64).ln();
        assert!((inst.gap().unwrap().value - expect).abs() < 1e-12);
    }

    #[test]
    fn zero_point_has_zero_gradient() {
        let inst = coordwise_exp_objective(&params(), 3).unwrap();
        assert_eq!(inst.gradient(&[0.0; 3]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn eps_out_of_range_rejected() {
        let p = ProblemParams {
            epsilon: 1.0,
            ..params()
        };
        assert!(matches!(coordwise_exp_objective(&p, 3), Err(Error::Precondition(_))));
    }
}
