use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::instances::tricky_linear::{check_p, magnitude_conditions};
use crate::instances::{slope_cap, ProblemParams, TrickyGeometry};
use crate::optimizers::StepSizeFn;

use super::walk::{lambda0, Lambda0Method};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionOutcome {
    pub name: String,
    pub passed: bool,
}

/// Per-condition verdict on a candidate pair `(g1, g2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrickyPairReport {
    pub p: f64,
    pub delta: f64,
    /// Signed coordinates along the unit direction of `g2`.
    pub c1: f64,
    pub c2: f64,
    pub slope_cap: f64,
    pub conditions: Vec<ConditionOutcome>,
    /// `β(g1)/β(g2)`.
    pub lambda_ratio: f64,
    /// `λ₀(p, δ)`; an upper bound when `δ > 0`, so a pass is conclusive.
    pub lambda0_ref: f64,
    pub tricky: bool,
}

/// Evaluates every condition of a `(p, δ)`-tricky pair for `alpha`.
///
/// Errors: `p` outside `(1/2, σ2/(σ2+1))` is a domain error, a non-collinear
/// pair a structure error.
pub fn check_tricky_pair(
    alpha: &StepSizeFn,
    g1: &[f64],
    g2: &[f64],
    p: f64,
    delta: f64,
    params: &ProblemParams,
) -> Result<TrickyPairReport> {
    params.validate()?;
    alpha.validate()?;
    check_p(p, params.sigma2)?;
    let geo = TrickyGeometry::from_pair(g1, g2)?;
    let lam = lambda0(p, delta, Lambda0Method::AnalyticUpper, 1e-10, 0)?.value;
    let ratio = alpha.beta_at_norm(geo.c1.abs())? / alpha.beta_at_norm(geo.c2.abs())?;
    let mut conditions: Vec<ConditionOutcome> = magnitude_conditions(geo.c1, geo.c2, p, params)
        .into_iter()
        .map(|(name, passed)| ConditionOutcome {
            name: name.to_string(),
            passed,
        })
        .collect();
    conditions.push(ConditionOutcome {
        name: "step_ratio".into(),
        passed: ratio >= lam,
    });
    let tricky = conditions.iter().all(|c| c.passed);
    Ok(TrickyPairReport {
        p,
        delta,
        c1: geo.c1,
        c2: geo.c2,
        slope_cap: slope_cap(params),
        conditions,
        lambda_ratio: ratio,
        lambda0_ref: lam,
        tricky,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn params() -> ProblemParams {
        ProblemParams {
            delta: 10.0,
            sigma1: 1.0,
            sigma2: 4.0,
            epsilon: 0.1,
            ..ProblemParams::default()
        }
    }

    fn outcome(r: &TrickyPairReport, name: &str) -> bool {
        r.conditions.iter().find(|c| c.name == name).unwrap().passed
    }

    #[test]
    fn seven_conditions_and_same_sign_fails() {
        let a = StepSizeFn::Normalized { c: 0.5 };
        let r = check_tricky_pair(&a, &[1.0, 0.0], &[2.0, 0.0], 2.0 / 3.0, 0.0, &params()).unwrap();
        assert_eq!(r.conditions.len(), 7);
        assert!(!outcome(&r, "opposite_signs"));
        assert!(!r.tricky);
    }

    #[test]
    fn normalized_rule_passes_ratio() {
        let a = StepSizeFn::Normalized { c: 0.5 };
        let g = slope_cap(&params());
        let r = check_tricky_pair(&a, &[-0.3 * g], &[0.95 * g], 2.0 / 3.0, 0.0, &params()).unwrap();
        assert!((r.lambda_ratio - 1.0).abs() < 1e-15);
        assert_eq!(r.lambda0_ref, 0.5);
        assert!(outcome(&r, "step_ratio"));
        assert!(r.tricky, "{r:?}");
    }

    #[test]
    fn constant_rule_ratio_is_norm_ratio() {
        let a = StepSizeFn::Clip { eta: 0.01, c: 100.0 };
        let r = check_tricky_pair(&a, &[-0.5], &[0.8], 2.0 / 3.0, 0.0, &params()).unwrap();
        assert!((r.lambda_ratio - 0.625).abs() < 1e-15);
        assert!(outcome(&r, "step_ratio"));
    }

    #[test]
    fn non_collinear_is_structure_error() {
        let a = StepSizeFn::Normalized { c: 0.5 };
        assert!(matches!(
            check_tricky_pair(&a, &[1.0, 0.0], &[0.0, 1.0], 2.0 / 3.0, 0.0, &params()),
            Err(Error::Structure(_))
        ));
    }
}
