//! Hard instances: objectives with analytic gradients, prescribed initial
//! points, attached oracles and membership certificates.

mod catalog;
mod certify;
mod chain;
mod coordwise;
mod drori;
mod hinge;
mod periodic;
mod psi;
mod quad_bump;
pub(crate) mod tricky_linear;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::linalg::norm;
use crate::numerics::{StreamCursor, Vector};
use crate::optimizers::StepSizeFn;
use crate::oracles::{DrawInfo, Oracle};

pub use catalog::reference_instances;
pub use certify::{certify_membership, CertificateReport, CheckOutcome, GapCheck, GRADIENT_TOLERANCE, SMOOTHNESS_TOLERANCE};
pub use chain::{
    chain_objective, chain_schedule, chain_schedule_with_constant, max_admissible_gamma,
    ChainObjective, ChainSchedule, DEFAULT_CHAIN_CONSTANT,
};
pub use coordwise::coordwise_exp_objective;
pub use drori::{drori_lemma_horizon, drori_objective, DroriObjective};
pub use hinge::hinge_objective;
pub use periodic::{dyadic_period, periodic_exp_objective, PeriodicObjective};
pub use psi::{psi_eval, psi_inverse_slope, psi_objective, PsiValue, PSI_EXP_LIMIT};
pub use quad_bump::{quad_bump_objective, QuadBumpObjective};
pub use tricky_linear::{slope_cap, tricky_linear_objective, TrickyGeometry};

/// Problem-class constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemParams {
    /// Bound on the initial optimality gap.
    #[serde(rename = "Delta")]
    pub delta: f64,
    #[serde(rename = "L0")]
    pub l0: f64,
    #[serde(rename = "L1")]
    pub l1: f64,
    /// Bounded-noise level.
    #[serde(default)]
    pub sigma: f64,
    /// Affine-noise constants.
    #[serde(default)]
    pub sigma1: f64,
    #[serde(default)]
    pub sigma2: f64,
    /// Target stationarity.
    pub epsilon: f64,
}

impl Default for ProblemParams {
    fn default() -> Self {
        Self {
            delta: 1.0,
            l0: 1.0,
            l1: 1.0,
            sigma: 0.0,
            sigma1: 0.0,
            sigma2: 0.0,
            epsilon: 0.1,
        }
    }
}

impl ProblemParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("Delta", self.delta),
            ("L0", self.l0),
            ("L1", self.l1),
            ("epsilon", self.epsilon),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        for (name, v) in [
            ("sigma", self.sigma),
            ("sigma1", self.sigma1),
            ("sigma2", self.sigma2),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be non-negative and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// `ΔL1²/L0`.
    pub fn rho(&self) -> f64 {
        self.delta * self.l1 * self.l1 / self.l0
    }

    /// `(1/L1)·ln(1 + ΔL1²/L0)`, the half-width at which `ψ' = ΔL1`.
    pub fn m_delta(&self) -> f64 {
        self.rho().ln_1p() / self.l1
    }
}

/// Noise assumption an oracle satisfies almost surely.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum NoiseClass {
    /// `‖F - ∇f‖ ≤ σ`.
    BoundedNoise { sigma: f64 },
    /// `‖F - ∇f‖ ≤ σ1 + σ2‖∇f‖`.
    AffineNoise { sigma1: f64, sigma2: f64 },
}

impl NoiseClass {
    /// Largest deviation allowed at a point with gradient norm `grad_norm`.
    pub fn bound(&self, grad_norm: f64) -> f64 {
        match *self {
            NoiseClass::BoundedNoise { sigma } => sigma,
            NoiseClass::AffineNoise { sigma1, sigma2 } => sigma1 + sigma2 * grad_norm,
        }
    }
}

impl fmt::Display for NoiseClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseClass::BoundedNoise { sigma } => write!(f, "bounded-noise(sigma={sigma})"),
            NoiseClass::AffineNoise { sigma1, sigma2 } => {
                write!(f, "affine-noise(sigma1={sigma1}, sigma2={sigma2})")
            }
        }
    }
}

/// Smoothness bound a certificate checks against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum SmoothnessForm {
    /// `‖∇²f(x)‖ ≤ L0 + L1‖∇f(x)‖`.
    Relaxed { l0: f64, l1: f64 },
    /// `‖∇²f(x)‖ ≤ l`.
    Lipschitz { l: f64 },
}

/// Serializable recipe for an instance; [`InstanceSpec::build`] turns it into
/// a [`ProblemInstance`] given the class constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "lemma_tag", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSpec {
    /// `f = ψ`, one-dimensional, deterministic.
    Psi,
    /// Super-exponential chain on which decorrelated AdaGrad-Norm diverges.
    Chain {
        eta: f64,
        gamma: f64,
        t_max: usize,
        #[serde(default = "default_chain_constant")]
        constant: f64,
    },
    /// Linear term plus bumps; noise lands on a fresh coordinate each step.
    Drori {
        eta: f64,
        gamma: f64,
        steps: usize,
        dim: usize,
    },
    /// `Σ ψ(x_i)` with coordinate-wise Rademacher noise.
    CoordwiseExp { terms: usize },
    /// ψ core with linear wings of slope ε, deterministic.
    Hinge,
    /// ψ valley with linear wings and a two-point oracle.
    TrickyLinear {
        g1: Vector,
        g2: Vector,
        p: f64,
        alpha: StepSizeFn,
    },
    /// Periodic ψ profile along a direction, with a scaling-dropout oracle.
    PeriodicExp { g: Vector, alpha_g: f64 },
    /// Linear term plus asymmetric bumps tuned to a step-size rule.
    QuadBump {
        alpha: StepSizeFn,
        steps: usize,
        dim: usize,
    },
}

fn default_chain_constant() -> f64 {
    DEFAULT_CHAIN_CONSTANT
}

impl InstanceSpec {
    pub fn build(&self, params: &ProblemParams) -> Result<ProblemInstance> {
        match self {
            InstanceSpec::Psi => psi_objective(params),
            InstanceSpec::Chain {
                eta,
                gamma,
                t_max,
                constant,
            } => {
                let s = chain_schedule_with_constant(params, *eta, *gamma, *t_max, *constant)?;
                chain_objective(&s, params)
            }
            InstanceSpec::Drori {
                eta,
                gamma,
                steps,
                dim,
            } => drori_objective(params, *eta, *gamma, *steps, *dim),
            InstanceSpec::CoordwiseExp { terms } => coordwise_exp_objective(params, *terms),
            InstanceSpec::Hinge => hinge_objective(params),
            InstanceSpec::TrickyLinear { g1, g2, p, alpha } => {
                tricky_linear_objective(g1, g2, *p, alpha, params)
            }
            InstanceSpec::PeriodicExp { g, alpha_g } => periodic_exp_objective(g, *alpha_g, params),
            InstanceSpec::QuadBump { alpha, steps, dim } => {
                quad_bump_objective(alpha, params, *steps, *dim)
            }
        }
    }

    pub fn lemma_tag(&self) -> &'static str {
        match self {
            InstanceSpec::Psi => "psi",
            InstanceSpec::Chain { .. } => "chain",
            InstanceSpec::Drori { .. } => "drori",
            InstanceSpec::CoordwiseExp { .. } => "coordwise_exp",
            InstanceSpec::Hinge => "hinge",
            InstanceSpec::TrickyLinear { .. } => "tricky_linear",
            InstanceSpec::PeriodicExp { .. } => "periodic_exp",
            InstanceSpec::QuadBump { .. } => "quad_bump",
        }
    }
}

/// On-disk description of an instance: recipe, constants, and the resulting
/// dimension and initial point (checked on rebuild).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceManifest {
    pub dim: usize,
    pub x0: Vector,
    pub instance: InstanceSpec,
    pub params: ProblemParams,
}

impl InstanceManifest {
    pub fn build(&self) -> Result<ProblemInstance> {
        let inst = self.instance.build(&self.params)?;
        if inst.dim() != self.dim {
            return Err(Error::Structure(format!(
                "manifest dim {} but instance has dim {}",
                self.dim,
                inst.dim()
            )));
        }
        if inst.x0() != self.x0.as_slice() {
            return Err(Error::Structure("manifest x0 differs from the constructed x0".into()));
        }
        Ok(inst)
    }
}

/// `f(x0) - inf f`, or the bound used in its place.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapValue {
    pub value: f64,
    /// True when `value` bounds a surrogate rather than the exact gap.
    pub surrogate: bool,
}

/// Per-family objective behaviour.
pub(crate) trait Field: Send + Sync + fmt::Debug {
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient_into(&self, x: &[f64], out: &mut [f64]) -> Result<()>;
    /// Region label handed to two-point oracles.
    fn side(&self, _x: &[f64]) -> i8 {
        0
    }
    /// `f(x) - f(anchor)`. Overridden where the plain difference cancels.
    fn increment(&self, x: &[f64], anchor: &[f64]) -> Result<f64> {
        Ok(self.value(x)? - self.value(anchor)?)
    }
    fn sample_point(&self, cur: &mut StreamCursor) -> Vector;
    /// Finite-difference step suited to the objective's length scales.
    fn fd_step(&self) -> f64;
    fn gap(&self, x0: &[f64]) -> Result<GapValue>;
}

#[derive(Clone, Debug)]
enum Objective {
    Psi(Arc<psi::PsiField>),
    Chain(Arc<ChainObjective>),
    Drori(Arc<DroriObjective>),
    Coordwise(Arc<coordwise::CoordwiseField>),
    Hinge(Arc<hinge::HingeField>),
    Tricky(Arc<tricky_linear::TrickyField>),
    Periodic(Arc<PeriodicObjective>),
    QuadBump(Arc<QuadBumpObjective>),
}

impl Objective {
    fn field(&self) -> &dyn Field {
        match self {
            Objective::Psi(f) => f.as_ref(),
            Objective::Chain(f) => f.as_ref(),
            Objective::Drori(f) => f.as_ref(),
            Objective::Coordwise(f) => f.as_ref(),
            Objective::Hinge(f) => f.as_ref(),
            Objective::Tricky(f) => f.as_ref(),
            Objective::Periodic(f) => f.as_ref(),
            Objective::QuadBump(f) => f.as_ref(),
        }
    }
}

/// Objective, initial point, noise class and oracle. Immutable and cheap to clone.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    spec: InstanceSpec,
    params: ProblemParams,
    dim: usize,
    x0: Vector,
    class: NoiseClass,
    oracle: Oracle,
    smoothness: SmoothnessForm,
    objective: Objective,
}

impl ProblemInstance {
    pub fn spec(&self) -> &InstanceSpec {
        &self.spec
    }

    pub fn lemma_tag(&self) -> &'static str {
        self.spec.lemma_tag()
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn class(&self) -> NoiseClass {
        self.class
    }

    pub fn oracle(&self) -> &Oracle {
        &self.oracle
    }

    /// Same objective with a different oracle. The noise class is kept, so a
    /// certificate run will flag an oracle that breaks it.
    pub fn with_oracle(&self, oracle: Oracle) -> Result<Self> {
        match &oracle {
            Oracle::TwoPoint { g1, g2, .. } if g1.len() != self.dim || g2.len() != self.dim => {
                return Err(Error::Structure("two-point vectors must match the instance dimension".into()));
            }
            Oracle::CoordinateRademacher { selector, .. } if selector.last > self.dim => {
                return Err(Error::Structure("selector range exceeds the instance dimension".into()));
            }
            _ => {}
        }
        Ok(Self {
            oracle,
            ..self.clone()
        })
    }

    pub fn smoothness_form(&self) -> SmoothnessForm {
        self.smoothness
    }

    pub fn manifest(&self) -> InstanceManifest {
        InstanceManifest {
            dim: self.dim,
            x0: self.x0.clone(),
            instance: self.spec.clone(),
            params: self.params,
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        self.objective.field().value(x)
    }

    /// `f(x) - f(anchor)`, computed without cancelling large common offsets.
    pub fn value_increment(&self, x: &[f64], anchor: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        self.check_dim(anchor)?;
        self.objective.field().increment(x, anchor)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vector> {
        let mut out = vec![0.0; self.dim];
        self.gradient_into(x, &mut out)?;
        Ok(out)
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_dim(x)?;
        self.check_dim(out)?;
        self.objective.field().gradient_into(x, out)
    }

    /// One oracle draw at `x` given the exact gradient there and a uniform `u`.
    pub fn draw_into(&self, x: &[f64], grad: &[f64], u: f64, out: &mut [f64]) -> Result<DrawInfo> {
        let side = self.objective.field().side(x);
        self.oracle.draw_into(x, grad, side, u, out)
    }

    pub fn draw(&self, x: &[f64], u: f64) -> Result<(Vector, DrawInfo)> {
        let grad = self.gradient(x)?;
        let mut out = vec![0.0; self.dim];
        let info = self.draw_into(x, &grad, u, &mut out)?;
        Ok((out, info))
    }

    /// Initial gap from the closed form (or the surrogate bound where the
    /// objective is unbounded below).
    pub fn gap(&self) -> Result<GapValue> {
        self.objective.field().gap(&self.x0)
    }

    pub fn sample_point(&self, cur: &mut StreamCursor) -> Vector {
        self.objective.field().sample_point(cur)
    }

    pub fn fd_step(&self) -> f64 {
        self.objective.field().fd_step()
    }

    /// Allowed deviation of a draw at a point with gradient norm `grad_norm`.
    pub fn noise_bound(&self, grad_norm: f64) -> f64 {
        self.class.bound(grad_norm)
    }

    pub fn grad_norm(&self, x: &[f64]) -> Result<f64> {
        Ok(norm(&self.gradient(x)?))
    }

    pub fn chain(&self) -> Option<&ChainObjective> {
        match &self.objective {
            Objective::Chain(c) => Some(c),
            _ => None,
        }
    }

    pub fn drori(&self) -> Option<&DroriObjective> {
        match &self.objective {
            Objective::Drori(c) => Some(c),
            _ => None,
        }
    }

    pub fn quad_bump(&self) -> Option<&QuadBumpObjective> {
        match &self.objective {
            Objective::QuadBump(c) => Some(c),
            _ => None,
        }
    }

    pub fn periodic(&self) -> Option<&PeriodicObjective> {
        match &self.objective {
            Objective::Periodic(c) => Some(c),
            _ => None,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.dim {
            Ok(())
        } else {
            Err(Error::Structure(format!(
                "{} instance has dim {}, got a vector of length {}",
                self.lemma_tag(),
                self.dim,
                x.len()
            )))
        }
    }
}

/// Uniform draw in `[lo, hi)`.
pub(crate) fn uniform(cur: &mut StreamCursor, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * cur.next_f64()
}
