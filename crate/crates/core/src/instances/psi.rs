use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{StreamCursor, Vector};
use crate::oracles::Oracle;

use super::{
    uniform, Field, GapValue, InstanceSpec, NoiseClass, Objective, ProblemInstance, ProblemParams,
    SmoothnessForm,
};

/// `ψ(x)`, `ψ'(x)` and `ψ''(x)` at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsiValue {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Largest `L1·|x|` accepted before `e^{L1|x|}` leaves `f64` range.
pub const PSI_EXP_LIMIT: f64 = 700.0;

/// `expm1(u) - u` without cancellation for small `u ≥ 0`.
pub(crate) fn expm1_minus_id(u: f64) -> f64 {
    if u.abs() >= 0.5 {
        return u.exp_m1() - u;
    }
    // u²/2! + u³/3! + ...
    let mut term = u * u / 2.0;
    let mut sum = term;
    let mut k = 2.0;
    while term.abs() > 1e-17 * sum.abs() {
        k += 1.0;
        term *= u / k;
        sum += term;
    }
    sum
}

fn check_params(l0: f64, l1: f64) -> Result<()> {
    if !(l0 > 0.0 && l0.is_finite() && l1 > 0.0 && l1.is_finite()) {
        return Err(Error::Domain(format!(
            "L0 and L1 must be positive and finite, got L0={l0}, L1={l1}"
        )));
    }
    Ok(())
}

fn check_range(x: f64, l1: f64) -> Result<f64> {
    let u = l1 * x.abs();
    if !(u <= PSI_EXP_LIMIT) {
        return Err(Error::Range(format!(
            "|x| = {} exceeds {PSI_EXP_LIMIT}/L1",
            x.abs()
        )));
    }
    Ok(u)
}

/// `ψ(x) = (L0/L1²)(e^{L1|x|} - L1|x| - 1)` with its first two derivatives.
pub fn psi_eval(x: f64, l0: f64, l1: f64) -> Result<PsiValue> {
    check_params(l0, l1)?;
    let u = check_range(x, l1)?;
    let c = l0 / l1;
    Ok(PsiValue {
        value: c / l1 * expm1_minus_id(u),
        d1: x.signum() * c * u.exp_m1(),
        d2: l0 * u.exp(),
    })
}

pub(crate) fn psi(x: f64, l0: f64, l1: f64) -> Result<f64> {
    let u = check_range(x, l1)?;
    Ok(l0 / (l1 * l1) * expm1_minus_id(u))
}

pub(crate) fn psi_d1(x: f64, l0: f64, l1: f64) -> Result<f64> {
    let u = check_range(x, l1)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(x.signum() * (l0 / l1) * u.exp_m1())
}

/// `m` with `ψ'(m) = g`, i.e. `(1/L1)·ln(1 + L1·g/L0)`.
pub fn psi_inverse_slope(g: f64, l0: f64, l1: f64) -> f64 {
    (l1 * g / l0).ln_1p() / l1
}

/// Derivative of `y ↦ ψ(y - m)` where `ψ'(m) = g`.
///
/// Left of the minimum it is written as `-(g·e^{-L1 y} + (L0/L1)·expm1(-L1 y))`,
/// which returns exactly `-g` at `y = 0`. Iterates that land on a knot then see
/// the slope the schedule was built from, bit for bit.
pub(crate) fn anchored_slope(y: f64, m: f64, g: f64, l0: f64, l1: f64) -> Result<f64> {
    if y > m {
        return psi_d1(y - m, l0, l1);
    }
    check_range(y - m, l1)?;
    let e = (-l1 * y).exp();
    let em1 = (-l1 * y).exp_m1();
    Ok(-(g * e + (l0 / l1) * em1))
}

#[derive(Debug)]
pub(crate) struct PsiField {
    l0: f64,
    l1: f64,
    reach: f64,
}

impl Field for PsiField {
    fn value(&self, x: &[f64]) -> Result<f64> {
        psi(x[0], self.l0, self.l1)
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = psi_d1(x[0], self.l0, self.l1)?;
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

/// `f = ψ` on the real line, started at `m` with `ψ'(m) = ΔL1`.
pub fn psi_objective(params: &ProblemParams) -> Result<ProblemInstance> {
    params.validate()?;
    let m = params.m_delta();
    Ok(ProblemInstance {
        spec: InstanceSpec::Psi,
        params: *params,
        dim: 1,
        x0: vec![m],
        class: NoiseClass::BoundedNoise {
            sigma: params.sigma,
        },
        oracle: Oracle::Deterministic,
        smoothness: SmoothnessForm::Relaxed {
            l0: params.l0,
            l1: params.l1,
        },
        objective: Objective::Psi(Arc::new(PsiField {
            l0: params.l0,
            l1: params.l1,
            reach: (3.0 * m + 1.0 / params.l1).min(600.0 / params.l1),
        })),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_at_one() {
        let v = psi_eval(1.0, 1.0, 1.0).unwrap();
        let e = std::f64::consts::E;
        assert!((v.value - (e - 2.0)).abs() < 1e-15);
        assert!((v.d1 - (e - 1.0)).abs() < 1e-15);
        assert!((v.d2 - e).abs() < 1e-15);
    }

    #[test]
    fn slope_one_at_log_two() {
        let v = psi_eval(2f64.ln(), 1.0, 1.0).unwrap();
        assert!((v.d1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn psi_at_zero_is_flat() {
        let v = psi_eval(0.0, 2.0, 3.0).unwrap();
        assert_eq!(v.value, 0.0);
        assert_eq!(v.d1, 0.0);
        assert_eq!(v.d2, 2.0);
    }

    #[test]
    fn series_matches_direct_formula() {
        for u in [0.1f64, 0.3, 0.49, 0.5, 2.0] {
            let direct = u.exp_m1() - u;
            let s = expm1_minus_id(u);
            assert!((s - direct).abs() <= 1e-13 * direct, "u={u}");
        }
        // Direct evaluation loses everything at 1e-10.
        let v = expm1_minus_id(1e-10);
        let exact = 5e-21 * (1.0 + 1e-10 / 3.0);
        assert!((v - exact).abs() <= 1e-14 * exact);
    }

    #[test]
    fn hessian_bound_holds_with_equality() {
        for x in [-3.0, -0.2, 0.0, 0.7, 5.0] {
            let v = psi_eval(x, 1.5, 0.8).unwrap();
            let bound = 1.5 + 0.8 * v.d1.abs();
            assert!((v.d2 - bound).abs() <= 1e-12 * bound);
        }
    }

    #[test]
    fn out_of_range_is_range_error() {
        assert!(matches!(psi_eval(800.0, 1.0, 1.0), Err(Error::Range(_))));
        assert!(matches!(psi_eval(1.0, 0.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn anchored_slope_is_exact_at_zero() {
        let (l0, l1) = (1.0, 1.0);
        for g in [0.1, 1.0, 37.5, 1e30] {
            let m = psi_inverse_slope(g, l0, l1);
            assert_eq!(anchored_slope(0.0, m, g, l0, l1).unwrap(), -g);
            let y = 0.3 * m;
            let plain = psi_d1(y - m, l0, l1).unwrap();
            let anch = anchored_slope(y, m, g, l0, l1).unwrap();
            assert!((plain - anch).abs() <= 1e-9 * g, "g={g}");
        }
    }
}
