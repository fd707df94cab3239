use std::sync::Arc;

use crate::error::{precondition, Error, Result};
use crate::numerics::linalg::{dot, norm};
use crate::numerics::{StreamCursor, Vector};
use crate::oracles::Oracle;

use super::psi::{anchored_slope, psi, psi_d1, psi_inverse_slope};
use super::{
    uniform, Field, GapValue, InstanceSpec, NoiseClass, Objective, ProblemInstance, ProblemParams,
    SmoothnessForm,
};

/// Smallest number `≥ 4m` whose significand fits in 40 bits.
///
/// Multiples `k·m'` for `k < 2^13` are then exact, so a lattice of iterates
/// `x_t = -k m' ĝ` carries no rounding.
pub fn dyadic_period(m: f64) -> f64 {
    let target = 4.0 * m;
    let q = 2f64.powi(39 - target.log2().floor() as i32);
    (target * q).ceil() / q
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Mode {
    /// Periodic profile with period `m'` along `s = -⟨x, ĝ⟩`.
    Periodic { period: f64 },
    /// Hinge along `⟨x, ĝ⟩` for rules that step uphill.
    Uphill,
}

/// Objective for single-step SGD whose step `α(g)` is either large
/// (`α‖g‖ ≥ 4m`) or non-positive. Every iterate sees gradient `‖g̃‖·ĝ`.
#[derive(Debug)]
pub struct PeriodicObjective {
    dir: Vector,
    /// `‖g̃‖ = min(‖g‖, ΔL1)`.
    slope: f64,
    m: f64,
    psi_m: f64,
    l0: f64,
    l1: f64,
    mode: Mode,
}

impl PeriodicObjective {
    /// Period `m' = α(g)‖g‖`, or `None` for the uphill variant.
    pub fn period(&self) -> Option<f64> {
        match self.mode {
            Mode::Periodic { period } => Some(period),
            Mode::Uphill => None,
        }
    }

    /// `‖g̃‖`.
    pub fn slope(&self) -> f64 {
        self.slope
    }

    /// One period `φ` on `[0, m']` and its derivative.
    fn phi(&self, y: f64, period: f64) -> Result<(f64, f64)> {
        let (m, g, l0, l1) = (self.m, self.slope, self.l0, self.l1);
        if y < 2.0 * m {
            Ok((psi(y - m, l0, l1)?, anchored_slope(y, m, g, l0, l1)?))
        } else if y <= period - 2.0 * m {
            Ok((g * (y - 2.0 * m) + self.psi_m, g))
        } else {
            let z = y - (period - m);
            let v = -psi(z, l0, l1)? + g * (period - 4.0 * m) + 2.0 * self.psi_m;
            Ok((v, -psi_d1(z, l0, l1)?))
        }
    }

    /// Profile along the coordinate and its derivative with respect to `⟨x, ĝ⟩`.
    fn eval(&self, x: &[f64]) -> Result<(f64, f64)> {
        let p = dot(x, &self.dir);
        if !p.is_finite() {
            return Err(Error::Range(format!("periodic objective evaluated at projection {p}")));
        }
        let (m, g) = (self.m, self.slope);
        match self.mode {
            Mode::Periodic { period } => {
                let s = -p;
                if s <= 0.0 {
                    return Ok((-g * s + self.psi_m, g));
                }
                let mut k = (s / period).floor();
                let mut y = s - k * period;
                if y < 0.0 {
                    k -= 1.0;
                    y += period;
                } else if y >= period {
                    k += 1.0;
                    y -= period;
                }
                let (v, dv) = self.phi(y, period)?;
                Ok((v + g * (period - 4.0 * m) * k, -dv))
            }
            Mode::Uphill => {
                if p.abs() < m {
                    Ok((psi(p, self.l0, self.l1)?, psi_d1(p, self.l0, self.l1)?))
                } else {
                    Ok((g * (p.abs() - m) + self.psi_m, g * p.signum()))
                }
            }
        }
    }
}

impl Field for PeriodicObjective {
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eval(x)?.0)
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.eval(x)?.1;
        for (o, u) in out.iter_mut().zip(&self.dir) {
            *o = d * u;
        }
        Ok(())
    }

    fn sample_point(&self, cur: &mut StreamCursor) -> Vector {
        let (lo, hi) = match self.mode {
            Mode::Periodic { period } => (-3.0 * period, period),
            Mode::Uphill => (-3.0 * self.m - 1.0, 3.0 * self.m + 1.0),
        };
        let p = uniform(cur, lo, hi);
        let mut x: Vector = self.dir.iter().map(|u| p * u).collect();
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

/// Instance that defeats single-step SGD with `α(g)‖g‖ ≥ 4m` (periodic
/// profile, period `α(g)‖g‖`) or with `α(g) ≤ 0` (hinge walked uphill).
///
/// `m = (1/L1)ln(1 + L1‖g̃‖/L0)`, `g̃ = min(‖g‖, ΔL1)·ĝ`, and the oracle returns
/// `(‖g‖/‖g̃‖)·∇f` with probability `‖g̃‖/‖g‖`, zero otherwise.
pub fn periodic_exp_objective(g: &[f64], alpha_g: f64, params: &ProblemParams) -> Result<ProblemInstance> {
    params.validate()?;
    if g.is_empty() {
        return Err(Error::Structure("g must be non-empty".into()));
    }
    if !alpha_g.is_finite() {
        return Err(Error::Domain(format!("alpha(g) must be finite, got {alpha_g}")));
    }
    let (l0, l1, delta, eps) = (params.l0, params.l1, params.delta, params.epsilon);
    let gn = norm(g);
    let hi = params.sigma1 + (params.sigma2 + 1.0) * delta * l1;
    precondition(gn >= eps && gn <= hi, || {
        format!("needs eps <= |g| <= sigma1 + (sigma2+1) Delta L1 = {hi}, got |g| = {gn}")
    })?;
    let dir: Vector = g.iter().map(|v| v / gn).collect();
    let slope = gn.min(delta * l1);
    let scale = gn / slope;
    let bound = params.sigma1 + params.sigma2 * slope;
    precondition(slope <= bound && (scale - 1.0) * slope <= bound, || {
        format!(
            "dropout deviations {slope} and {} exceed sigma1 + sigma2 |g~| = {bound}",
            (scale - 1.0) * slope
        )
    })?;
    let m = psi_inverse_slope(slope, l0, l1);
    let (mode, x0) = if alpha_g <= 0.0 {
        (Mode::Uphill, dir.iter().map(|u| m * u).collect())
    } else {
        let period = alpha_g * gn;
        if period < 4.0 * m {
            return Err(Error::Precondition(format!(
                "period alpha(g)|g| = {period} is below 4m = {}",
                4.0 * m
            )));
        }
        (Mode::Periodic { period }, vec![0.0; g.len()])
    };
    Ok(ProblemInstance {
        spec: InstanceSpec::PeriodicExp {
            g: g.to_vec(),
            alpha_g,
        },
        params: *params,
        dim: g.len(),
        x0,
        class: NoiseClass::AffineNoise {
            sigma1: params.sigma1,
            sigma2: params.sigma2,
        },
        oracle: Oracle::ScalingDropout { scale },
        smoothness: SmoothnessForm::Relaxed { l0, l1 },
        objective: Objective::Periodic(Arc::new(PeriodicObjective {
            dir,
            slope,
            m,
            psi_m: psi(m, l0, l1)?,
            l0,
            l1,
            mode,
        })),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ProblemParams {
        ProblemParams {
            sigma1: 1.0,
            sigma2: 2.0,
            epsilon: 0.1,
            ..ProblemParams::default()
        }
    }

    #[test]
    fn dyadic_period_is_tight_and_short() {
        let m = 2f64.ln();
        let p = dyadic_period(m);
        assert!(p >= 4.0 * m && p - 4.0 * m < 1e-11);
        let bits = (p * 2f64.powi(39 - p.log2().floor() as i32)).fract();
        assert_eq!(bits, 0.0);
    }

    #[test]
    fn lattice_gradient_is_exact() {
        let m = 2f64.ln();
        let period = dyadic_period(m);
        let inst = periodic_exp_objective(&[2.0, 0.0], period / 2.0, &params()).unwrap();
        for k in 0..50 {
            let x = [-(k as f64) * period, 0.0];
            assert_eq!(inst.gradient(&x).unwrap(), vec![1.0, 0.0]);
        }
    }

    #[test]
    fn gap_is_psi_m() {
        let inst = periodic_exp_objective(&[0.5], 20.0, &params()).unwrap();
        let m = 1.5f64.ln();
        let expect = 0.5 - m;
        assert!((inst.gap().unwrap().value - expect).abs() < 1e-12);
    }

    #[test]
    fn no_rescaling_below_delta_l1() {
        let inst = periodic_exp_objective(&[0.5], 20.0, &params()).unwrap();
        assert!(inst.oracle().is_deterministic());
    }

    #[test]
    fn short_period_rejected() {
        assert!(matches!(
            periodic_exp_objective(&[0.5], 0.1, &params()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn uphill_variant_starts_on_the_wing() {
        let inst = periodic_exp_objective(&[2.0], -0.5, &params()).unwrap();
        let x0 = inst.x0()[0];
        assert_eq!(inst.gradient(&[x0]).unwrap()[0], 1.0);
        assert_eq!(inst.gradient(&[x0 + 3.0]).unwrap()[0], 1.0);
    }
}
