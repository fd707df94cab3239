use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::linalg::norm;

/// Step-size rule `α(g)` for single-step SGD, a function of `‖g‖` only.
///
/// `β(g) = α(g)·‖g‖` is the length of the resulting move.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepSizeFn {
    /// `α(g) = eta`.
    Constant { eta: f64 },
    /// Clipped SGD: `α(g) = min(eta, c/‖g‖)`.
    Clip { eta: f64, c: f64 },
    /// Normalized SGD: `α(g) = c/‖g‖`.
    Normalized { c: f64 },
    /// `α(g) = -c`, a rule that moves uphill.
    Negative { c: f64 },
    /// Piecewise-linear interpolation of `α` over strictly increasing norms.
    /// Queries outside `[norms[0], norms[last]]` are range errors.
    Table { norms: Vec<f64>, alphas: Vec<f64> },
}

impl StepSizeFn {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match self {
            StepSizeFn::Constant { eta } => {
                if eta.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Domain(format!("eta must be finite, got {eta}")))
                }
            }
            StepSizeFn::Clip { eta, c } => pos("eta", *eta).and(pos("c", *c)),
            StepSizeFn::Normalized { c } | StepSizeFn::Negative { c } => pos("c", *c),
            StepSizeFn::Table { norms, alphas } => {
                if norms.len() != alphas.len() || norms.is_empty() {
                    return Err(Error::Structure(format!(
                        "table needs equal, non-zero lengths (got {} norms, {} alphas)",
                        norms.len(),
                        alphas.len()
                    )));
                }
                if norms.iter().chain(alphas).any(|v| !v.is_finite()) {
                    return Err(Error::Domain("table entries must be finite".into()));
                }
                if norms.windows(2).any(|w| w[0] >= w[1]) || norms[0] < 0.0 {
                    return Err(Error::Domain(
                        "table norms must be non-negative and strictly increasing".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// `α(g)`.
    pub fn alpha(&self, g: &[f64]) -> Result<f64> {
        self.alpha_at_norm(norm(g))
    }

    /// `α` for a gradient of norm `n`.
    pub fn alpha_at_norm(&self, n: f64) -> Result<f64> {
        if !(n >= 0.0 && n.is_finite()) {
            return Err(Error::Domain(format!("gradient norm must be finite, got {n}")));
        }
        match self {
            StepSizeFn::Constant { eta } => Ok(*eta),
            StepSizeFn::Clip { eta, c } => Ok(if n > 0.0 { eta.min(c / n) } else { *eta }),
            StepSizeFn::Normalized { c } => {
                if n == 0.0 {
                    Err(Error::Domain("normalized step at a zero gradient".into()))
                } else {
                    Ok(c / n)
                }
            }
            StepSizeFn::Negative { c } => Ok(-c),
            StepSizeFn::Table { norms, alphas } => {
                let last = norms.len() - 1;
                if n < norms[0] || n > norms[last] {
                    return Err(Error::Range(format!(
                        "norm {n} outside table range [{}, {}]",
                        norms[0], norms[last]
                    )));
                }
                let k = norms.partition_point(|&v| v <= n);
                if k == 0 {
                    return Ok(alphas[0]);
                }
                if k > last {
                    return Ok(alphas[last]);
                }
                let (n0, n1) = (norms[k - 1], norms[k]);
                let w = (n - n0) / (n1 - n0);
                Ok(alphas[k - 1] + w * (alphas[k] - alphas[k - 1]))
            }
        }
    }

    /// `β = α·‖g‖` for a gradient of norm `n`.
    pub fn beta_at_norm(&self, n: f64) -> Result<f64> {
        Ok(self.alpha_at_norm(n)? * n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_switches_at_c_over_eta() {
        let r = StepSizeFn::Clip { eta: 0.5, c: 0.5 };
        assert_eq!(r.alpha_at_norm(0.5).unwrap(), 0.5);
        assert_eq!(r.alpha_at_norm(2.0).unwrap(), 0.25);
        assert_eq!(r.beta_at_norm(4.0).unwrap(), 0.5);
    }

    #[test]
    fn normalized_beta_is_constant() {
        let r = StepSizeFn::Normalized { c: 0.3 };
        for n in [0.1, 1.0, 7.0] {
            assert!((r.beta_at_norm(n).unwrap() - 0.3).abs() < 1e-15);
        }
        assert!(r.alpha_at_norm(0.0).is_err());
    }

    #[test]
    fn table_interpolates_and_rejects_outside() {
        let r = StepSizeFn::Table {
            norms: vec![1.0, 2.0, 4.0],
            alphas: vec![1.0, 0.5, 0.5],
        };
        r.validate().unwrap();
        assert_eq!(r.alpha_at_norm(1.5).unwrap(), 0.75);
        assert_eq!(r.alpha_at_norm(4.0).unwrap(), 0.5);
        assert!(matches!(r.alpha_at_norm(5.0), Err(Error::Range(_))));
    }

    #[test]
    fn table_must_increase() {
        let r = StepSizeFn::Table {
            norms: vec![1.0, 1.0],
            alphas: vec![1.0, 1.0],
        };
        assert!(r.validate().is_err());
    }
}
