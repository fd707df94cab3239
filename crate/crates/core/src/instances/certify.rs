use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::linalg::{dist_scaled, dot, norm, norm_scaled, Vector};
use crate::numerics::{directional_derivative, finite_diff_gradient, RandomStream, StreamCursor};

use super::{uniform, ProblemInstance, SmoothnessForm};

/// Allowed excess of the smoothness ratio over 1.
pub const SMOOTHNESS_TOLERANCE: f64 = 1e-6;
/// Largest accepted relative error of the analytic gradient.
pub const GRADIENT_TOLERANCE: f64 = 1e-5;
/// Relative slack on the noise bound, for rounding in `‖F - ∇f‖`.
const NOISE_SLACK: f64 = 1e-12;
/// Dimensions up to this get a full coordinate-wise finite-difference check.
const FULL_FD_DIM: usize = 8;
/// Evaluation errors kept verbatim in the report.
const MAX_ERRORS_KEPT: usize = 8;

/// Worst value of one check over all samples.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub max: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Point attaining `max`.
    pub witness: Option<Vector>,
}

impl CheckOutcome {
    fn new(tolerance: f64) -> Self {
        Self {
            max: 0.0,
            tolerance,
            passed: true,
            witness: None,
        }
    }

    fn record(&mut self, v: f64, x: &[f64]) {
        if v > self.max || (v.is_nan() && !self.max.is_nan()) {
            self.max = v;
            self.witness = Some(x.to_vec());
        }
    }

    fn merge(mut self, other: Self) -> Self {
        if other.max > self.max || (other.max.is_nan() && !self.max.is_nan()) {
            self.max = other.max;
            self.witness = other.witness;
        }
        self
    }

    fn finish(&mut self) {
        self.passed = self.max <= self.tolerance;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapCheck {
    pub value: f64,
    pub delta: f64,
    /// The value bounds a surrogate rather than `f(x0) - inf f`.
    pub surrogate: bool,
    pub passed: bool,
}

/// Result of [`certify_membership`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateReport {
    pub lemma_tag: String,
    pub n_samples: usize,
    pub smoothness_form: SmoothnessForm,
    /// Ratio of gradient change to the smoothness bound, maximised over pairs.
    pub smoothness: CheckOutcome,
    /// `‖∇f(x)-∇f(y)‖ / ((L0 + L1‖∇f(x)‖)‖x-y‖)`; reported, not checked.
    pub literal_smoothness_ratio: f64,
    /// Finite-difference error relative to `‖∇f(x)‖`.
    pub gradient: CheckOutcome,
    pub gap: GapCheck,
    /// `‖F - ∇f‖` over the allowed deviation.
    pub noise: CheckOutcome,
    /// Draws where the zero-coordinate selector had to fall back.
    pub fallback_draws: u64,
    pub evaluation_failures: usize,
    pub errors: Vec<String>,
    pub passed: bool,
}

impl CertificateReport {
    /// One line per check.
    pub fn summary(&self) -> String {
        let flag = |ok: bool| if ok { "PASS" } else { "FAIL" };
        let mut s = format!(
            "certificates for {} ({} samples): {}\n",
            self.lemma_tag,
            self.n_samples,
            flag(self.passed)
        );
        s += &format!(
            "  smoothness ratio max = {:.9} (<= {}) {}\n",
            self.smoothness.max,
            self.smoothness.tolerance,
            flag(self.smoothness.passed)
        );
        s += &format!(
            "  gradient fd rel err max = {:.3e} (<= {:e}) {}\n",
            self.gradient.max,
            self.gradient.tolerance,
            flag(self.gradient.passed)
        );
        s += &format!(
            "  gap = {:.9} (<= Delta = {}){} {}\n",
            self.gap.value,
            self.gap.delta,
            if self.gap.surrogate { " [surrogate]" } else { "" },
            flag(self.gap.passed)
        );
        s += &format!(
            "  noise ratio max = {:.9} (<= {}) {}\n",
            self.noise.max,
            self.noise.tolerance,
            flag(self.noise.passed)
        );
        s += &format!("  fallback draws = {}", self.fallback_draws);
        if self.evaluation_failures > 0 {
            s += &format!("\n  evaluation failures = {}", self.evaluation_failures);
            for e in &self.errors {
                s += &format!("\n    {e}");
            }
        }
        s
    }
}

#[derive(Clone, Debug)]
struct Partial {
    smooth: CheckOutcome,
    literal: f64,
    grad: CheckOutcome,
    noise: CheckOutcome,
    fallback: u64,
    failures: usize,
    errors: Vec<String>,
}

impl Partial {
    fn empty() -> Self {
        Self {
            smooth: CheckOutcome::new(1.0 + SMOOTHNESS_TOLERANCE),
            literal: 0.0,
            grad: CheckOutcome::new(GRADIENT_TOLERANCE),
            noise: CheckOutcome::new(1.0 + NOISE_SLACK),
            fallback: 0,
            failures: 0,
            errors: Vec::new(),
        }
    }

    fn merge(self, o: Self) -> Self {
        let mut errors = self.errors;
        errors.extend(o.errors);
        errors.truncate(MAX_ERRORS_KEPT);
        Self {
            smooth: self.smooth.merge(o.smooth),
            literal: self.literal.max(o.literal),
            grad: self.grad.merge(o.grad),
            noise: self.noise.merge(o.noise),
            fallback: self.fallback + o.fallback,
            failures: self.failures + o.failures,
            errors,
        }
    }
}

/// Random direction: a coordinate axis half the time, a dense unit vector otherwise.
fn direction(cur: &mut StreamCursor, dim: usize) -> Vector {
    if dim == 1 || cur.next_f64() < 0.5 {
        let mut u = vec![0.0; dim];
        u[(cur.next_u64() % dim as u64) as usize] = if cur.next_f64() < 0.5 { 1.0 } else { -1.0 };
        return u;
    }
    loop {
        let u: Vector = (0..dim).map(|_| uniform(cur, -1.0, 1.0)).collect();
        let n = norm(&u);
        if n > 1e-3 {
            return u.into_iter().map(|v| v / n).collect();
        }
    }
}

fn one_sample(inst: &ProblemInstance, stream: RandomStream, acc: &mut Partial) -> Result<()> {
    let mut cur = stream.cursor();
    let dim = inst.dim();
    let x = inst.sample_point(&mut cur);
    let gx = inst.gradient(&x)?;
    let nx = norm_scaled(&gx);

    // Smoothness along a random segment of length at most 1/L1.
    let l1 = inst.params().l1;
    let r = (1e-4f64).powf(1.0 - cur.next_f64()) / l1;
    let u = direction(&mut cur, dim);
    let y: Vector = x.iter().zip(&u).map(|(a, b)| a + r * b).collect();
    let gy = inst.gradient(&y)?;
    let ny = norm_scaled(&gy);
    let diff = dist_scaled(&gx, &gy);
    let r = dist_scaled(&x, &y);
    if r > 0.0 {
        match inst.smoothness_form() {
            SmoothnessForm::Relaxed { l0, l1 } => {
                let growth = (l1 * r).exp_m1() / l1;
                for (base, p) in [(nx, &x), (ny, &y)] {
                    let scale = l0 + l1 * base;
                    acc.smooth.record(ratio(ratio(diff, scale), growth), p);
                    acc.literal = acc.literal.max(ratio(ratio(diff, scale), r));
                }
            }
            SmoothnessForm::Lipschitz { l } => {
                acc.smooth.record(ratio(diff, l * r), &x);
                acc.literal = acc.literal.max(ratio(diff, l * r));
            }
        }
    }

    // Analytic gradient against central differences of f(.) - f(x).
    let h = inst.fd_step();
    let f = |z: &[f64]| inst.value_increment(z, &x);
    let err = if dim <= FULL_FD_DIM {
        let fd = finite_diff_gradient(f, &x, Some(h))?;
        fd.iter().zip(&gx).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    } else {
        let w = direction(&mut cur, dim);
        (directional_derivative(f, &x, &w, h)? - dot(&gx, &w)).abs()
    };
    acc.grad.record(ratio(err, nx), &x);

    // Noise: one random draw plus both ends of the uniform range.
    let mut draw = vec![0.0; dim];
    let bound = inst.noise_bound(nx);
    for uu in [cur.next_f64(), 0.0, 1.0 - f64::EPSILON / 2.0] {
        let info = inst.draw_into(&x, &gx, uu, &mut draw)?;
        if info.fallback {
            acc.fallback += 1;
        }
        let dev = dist_scaled(&draw, &gx);
        acc.noise.record(ratio(dev, bound), &x);
    }
    Ok(())
}

/// `a / b` with `0/0 = 0`.
fn ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a / b
    }
}

/// Checks smoothness, gradient correctness, the initial gap and the noise
/// bound of `instance` on `n_samples` random points.
///
/// Sample `i` reads only from `stream.split(i)`, so the report does not
/// depend on thread scheduling.
pub fn certify_membership(
    instance: &ProblemInstance,
    n_samples: usize,
    stream: RandomStream,
) -> Result<CertificateReport> {
    if n_samples == 0 {
        return Err(Error::Domain("n_samples must be positive".into()));
    }
    let mut part = (0..n_samples)
        .into_par_iter()
        .fold(Partial::empty, |mut acc, i| {
            if let Err(e) = one_sample(instance, stream.split(i as u64), &mut acc) {
                acc.failures += 1;
                if acc.errors.len() < MAX_ERRORS_KEPT {
                    acc.errors.push(format!("sample {i}: {e}"));
                }
            }
            acc
        })
        .reduce(Partial::empty, Partial::merge);
    part.smooth.finish();
    part.grad.finish();
    part.noise.finish();

    let delta = instance.params().delta;
    let gap = match instance.gap() {
        Ok(g) => GapCheck {
            value: g.value,
            delta,
            surrogate: g.surrogate,
            passed: g.value <= delta * (1.0 + 1e-12),
        },
        Err(e) => {
            part.failures += 1;
            part.errors.push(format!("gap: {e}"));
            GapCheck {
                value: f64::NAN,
                delta,
                surrogate: false,
                passed: false,
            }
        }
    };
    let passed = part.smooth.passed
        && part.grad.passed
        && part.noise.passed
        && gap.passed
        && part.failures == 0;
    Ok(CertificateReport {
        lemma_tag: instance.lemma_tag().to_string(),
        n_samples,
        smoothness_form: instance.smoothness_form(),
        smoothness: part.smooth,
        literal_smoothness_ratio: part.literal,
        gradient: part.grad,
        gap,
        noise: part.noise,
        fallback_draws: part.fallback,
        evaluation_failures: part.failures,
        errors: part.errors,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{hinge_objective, psi_objective, ProblemParams};

    #[test]
    fn psi_passes_and_literal_form_exceeds_one() {
        let inst = psi_objective(&ProblemParams::default()).unwrap();
        let rep = certify_membership(&inst, 2000, RandomStream::new(1)).unwrap();
        assert!(rep.passed, "{}", rep.summary());
        assert!(rep.literal_smoothness_ratio > 1.0);
        assert!(rep.literal_smoothness_ratio < std::f64::consts::E - 1.0 + 1e-9);
    }

    #[test]
    fn report_is_schedule_independent() {
        let p = ProblemParams {
            delta: 2.0,
            ..ProblemParams::default()
        };
        let inst = hinge_objective(&p).unwrap();
        let a = certify_membership(&inst, 500, RandomStream::new(9)).unwrap();
        let b = certify_membership(&inst, 500, RandomStream::new(9)).unwrap();
        assert_eq!(a, b);
    }
}
