use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::instances::{slope_cap, ProblemParams};
use crate::optimizers::StepSizeFn;

use super::walk::{lambda0, Lambda0Method};

/// Largest count cross-checked by iterating the recurrence.
pub const ITERATION_CHECK_LIMIT: u64 = 1_000_000;
/// Relative slack for deciding `a_k ≤ A` when the closed form is a near tie.
const TIE_SLACK: f64 = 1e-12;

fn check_seq(a0: f64, r: f64, b: f64, big_a: f64) -> Result<()> {
    if !(a0 > 0.0 && a0.is_finite()) {
        return Err(Error::Domain(format!("a0 must be positive and finite, got {a0}")));
    }
    if !(r > 1.0 && r.is_finite()) {
        return Err(Error::Domain(format!("r must exceed 1, got {r}")));
    }
    if !(b.is_finite() && big_a.is_finite() && big_a >= a0) {
        return Err(Error::Domain(format!("need finite b and A >= a0, got b={b}, A={big_a}")));
    }
    if !(a0 * (r - 1.0) + b > 0.0) {
        return Err(Error::Domain(format!(
            "need a0(r-1) + b > 0, got {}",
            a0 * (r - 1.0) + b
        )));
    }
    Ok(())
}

/// `a_i` of `a_{i+1} = r·a_i + b` in closed form.
fn term(a0: f64, r: f64, b: f64, i: u64) -> f64 {
    let c = b / (r - 1.0);
    (i as f64 * r.ln()).exp() * (a0 + c) - c
}

/// `max{i ≥ 0 : a_i ≤ A}` for `a_{i+1} = r·a_i + b`, from the closed form
/// `⌊ln((A(r-1)+b)/(a0(r-1)+b)) / ln r⌋`.
///
/// When the quotient lands within rounding of an integer the two candidate
/// terms are evaluated and compared to `A` directly.
pub fn exp_seq_count(a0: f64, r: f64, b: f64, big_a: f64) -> Result<u64> {
    check_seq(a0, r, b, big_a)?;
    let q = ((big_a * (r - 1.0) + b) / (a0 * (r - 1.0) + b)).ln() / r.ln();
    if !(q.is_finite() && q < 9e15) {
        return Err(Error::Range(format!("count {q} not representable")));
    }
    let mut k = q.max(0.0).floor() as u64;
    let near = q.round();
    if (q - near).abs() <= 1e-9 * near.max(1.0) {
        let n = near as u64;
        k = if term(a0, r, b, n) <= big_a * (1.0 + TIE_SLACK) { n } else { n.saturating_sub(1) };
    }
    Ok(k)
}

/// The same count by running the recurrence, or `None` past `limit` terms.
pub fn exp_seq_count_iterated(a0: f64, r: f64, b: f64, big_a: f64, limit: u64) -> Result<Option<u64>> {
    check_seq(a0, r, b, big_a)?;
    let mut a = a0;
    let mut k = 0;
    loop {
        let next = r * a + b;
        if next > big_a * (1.0 + TIE_SLACK) {
            return Ok(Some(k));
        }
        if k == limit {
            return Ok(None);
        }
        a = next;
        k += 1;
    }
}

/// Closed-form count, cross-checked by iteration when it is at most
/// [`ITERATION_CHECK_LIMIT`].
pub fn exp_seq_count_checked(a0: f64, r: f64, b: f64, big_a: f64) -> Result<u64> {
    let k = exp_seq_count(a0, r, b, big_a)?;
    if k <= ITERATION_CHECK_LIMIT {
        if let Some(it) = exp_seq_count_iterated(a0, r, b, big_a, ITERATION_CHECK_LIMIT)? {
            if it != k {
                return Err(Error::Structure(format!(
                    "closed form gives {k} terms but iteration gives {it}"
                )));
            }
        }
    }
    Ok(k)
}

/// Parameters `(a0, r, b, A)` of one escalation sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeqParams {
    pub a0: f64,
    pub r: f64,
    pub b: f64,
    pub limit: f64,
}

/// Output of [`escalation_sequences`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Escalation {
    pub p0: f64,
    pub p1: f64,
    pub delta: f64,
    pub slope_cap: f64,
    pub x_seq: SeqParams,
    pub y_seq: SeqParams,
    /// `‖x_0‖..‖x_{k0}‖`.
    pub x_norms: Vec<f64>,
    /// `‖y_0‖..‖y_{k1}‖`.
    pub y_norms: Vec<f64>,
    /// `β = α·‖·‖` along each sequence, `None` where `α` is undefined.
    pub x_beta: Vec<Option<f64>>,
    pub y_beta: Vec<Option<f64>>,
    pub k0: u64,
    pub k1: u64,
    pub lambda0_p0: f64,
    pub lambda0_p1: f64,
    pub b0: f64,
    pub b1: f64,
    pub phi0: f64,
    pub phi1: f64,
    /// `4m·λ₀(p0,δ)⁻¹·λ₀(p1,δ)⁻¹·b0^{-φ0}·b1^{-φ1}` with `m = m_Δ`.
    pub alpha0_bound: f64,
}

fn build(s: &SeqParams, k: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(k as usize + 1);
    let mut a = s.a0;
    out.push(a);
    for _ in 0..k {
        a = s.r * a + s.b;
        out.push(a);
    }
    out
}

/// The two sequences of norms along which `β` must shrink when no tricky
/// pair exists, their lengths, and the resulting bound on `β` at norm ε.
///
/// `λ₀(p, δ)` is taken from the analytic upper bound (exact at `δ = 0`).
pub fn escalation_sequences(
    alpha: &StepSizeFn,
    p0: f64,
    p1: f64,
    delta: f64,
    params: &ProblemParams,
) -> Result<Escalation> {
    params.validate()?;
    alpha.validate()?;
    let (eps, s1, s2) = (params.epsilon, params.sigma1, params.sigma2);
    if !(s2 > 1.0) {
        return Err(Error::Domain(format!(
            "sigma2 must exceed 1 (no bound is known below), got {s2}"
        )));
    }
    let hi = s2 / (s2 + 1.0);
    for (name, p) in [("p0", p0), ("p1", p1)] {
        if !(p > 0.5 && p < hi) {
            return Err(Error::Domain(format!(
                "{name} must lie in (1/2, sigma2/(sigma2+1)) = (0.5, {hi}), got {p}"
            )));
        }
    }
    let g = slope_cap(params);
    precondition(g >= s1, || format!("needs G >= sigma1, got G = {g}, sigma1 = {s1}"))?;
    let eps_max = s1
        .min(g / 2.0)
        .min((g - s1) / (s2 - 1.0))
        .min((params.delta * params.l0).sqrt() / 2f64.sqrt());
    precondition(eps <= eps_max, || {
        format!("needs eps <= min(sigma1, G/2, (G-sigma1)/(sigma2-1), sqrt(Delta L0 / 2)) = {eps_max}, got {eps}")
    })?;

    let q0 = (1.0 - p0) / p0;
    let x_seq = SeqParams {
        a0: eps,
        r: p0 / (1.0 - p0),
        b: eps / (1.0 - p0),
        limit: q0 * s1 + (q0 * s2 - 1.0) * eps,
    };
    let q1 = (1.0 - p1) / p1;
    let den = (s2 + 1.0) * (1.0 - p1) - 1.0;
    let y_seq = SeqParams {
        a0: s1 + (s2 - 1.0) * eps,
        r: (s2 + 1.0) * p1 / den,
        b: -s1 / den,
        limit: q1 * s1 + (q1 * s2 - 1.0) * g,
    };
    let count = |s: &SeqParams| -> Result<u64> {
        if s.limit < s.a0 {
            return Err(Error::Precondition(format!(
                "sequence starts at {} above its limit {}",
                s.a0, s.limit
            )));
        }
        exp_seq_count_checked(s.a0, s.r, s.b, s.limit)
    };
    let k0 = count(&x_seq)?;
    let k1 = count(&y_seq)?;
    let x_norms = build(&x_seq, k0);
    let y_norms = build(&y_seq, k1);
    let betas = |v: &[f64]| v.iter().map(|&n| alpha.beta_at_norm(n).ok()).collect::<Vec<_>>();

    let lam = |p: f64| -> Result<f64> {
        Ok(lambda0(p, delta, Lambda0Method::AnalyticUpper, 1e-10, 0)?.value)
    };
    let (l0p0, l0p1) = (lam(p0)?, lam(p1)?);
    let b0 = (2.0 * p0 - 1.0) * (1.0 - p0) / (2.0 * p0 * p0 * eps) * (s1 + s2 * eps) + q0;
    let c = (s2 + 1.0) * (2.0 * p1 - 1.0) + 1.0;
    let b1 = (q1 * (s1 + (s2 - p1 / (1.0 - p1)) * g) * c - s1) / ((s1 + (s2 - 1.0) * eps) * c - s1);
    let phi0 = (1.0 / l0p0).ln() / x_seq.r.ln();
    let phi1 = (1.0 / l0p1).ln() / y_seq.r.ln();
    let alpha0_bound =
        4.0 * params.m_delta() / l0p0 / l0p1 * b0.powf(-phi0) * b1.powf(-phi1);
    Ok(Escalation {
        p0,
        p1,
        delta,
        slope_cap: g,
        x_seq,
        y_seq,
        x_beta: betas(&x_norms),
        y_beta: betas(&y_norms),
        x_norms,
        y_norms,
        k0,
        k1,
        lambda0_p0: l0p0,
        lambda0_p1: l0p1,
        b0,
        b1,
        phi0,
        phi1,
        alpha0_bound,
    })
}
