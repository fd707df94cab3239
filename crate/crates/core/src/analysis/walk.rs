use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RandomStream;

/// Default number of steps before a walk is declared alive.
pub const DEFAULT_HORIZON: u64 = 100_000;
/// Default level at which a walk is declared escaped.
pub const DEFAULT_BARRIER: f64 = 1e3;
/// Normal quantile of the 95% interval.
const Z95: f64 = 1.959_963_984_540_054;
const CHUNK: u64 = 4096;

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("p must lie in (0, 1), got {p}")));
    }
    Ok(())
}

/// `(1-p)/p`, the largest up-step for which the walk hits 0 almost surely.
pub fn critical_lambda(p: f64) -> f64 {
    1.0 / p - 1.0
}

/// `h_λ(x) = p·x^{λ+1} - x + (1-p)`, written in `z = 1 - x` so that it stays
/// accurate next to the trivial root at 1.
pub fn h_lambda(p: f64, lambda: f64, x: f64) -> f64 {
    let z = 1.0 - x;
    p * ((lambda + 1.0) * (-z).ln_1p()).exp_m1() + z
}

/// `h_λ'(x) = p(λ+1)x^λ - 1`.
pub fn h_lambda_slope(p: f64, lambda: f64, x: f64) -> f64 {
    p * (lambda + 1.0) * x.powf(lambda) - 1.0
}

/// The root `r(λ) ∈ (0, 1)` of `h_λ`, to absolute tolerance `tol`.
pub fn h_lambda_root(p: f64, lambda: f64, tol: f64) -> Result<f64> {
    check_p(p)?;
    let crit = critical_lambda(p);
    if !(lambda > crit && lambda.is_finite()) {
        return Err(Error::Domain(format!(
            "h_lambda has no root in (0, 1) unless lambda > (1-p)/p = {crit}, got {lambda}"
        )));
    }
    if !(tol > 0.0 && tol <= 0.1) {
        return Err(Error::Domain(format!("tol must lie in (0, 0.1], got {tol}")));
    }
    let h = |z: f64| h_lambda(p, lambda, 1.0 - z);
    // h > 0 at z = 1; walk z towards 0 until h turns negative.
    let mut lo = 0.5;
    while h(lo) >= 0.0 {
        lo *= 0.5;
        if lo < tol / 4.0 {
            // Root sits within tol of 1.
            return Ok(1.0 - lo);
        }
    }
    let mut hi = 1.0;
    for _ in 0..200 {
        if hi - lo <= tol / 4.0 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(1.0 - 0.5 * (lo + hi))
}

/// Roots for one `p`, checked to decrease strictly in `λ` across queries.
#[derive(Clone, Debug)]
pub struct RootHistory {
    p: f64,
    tol: f64,
    seen: Vec<(f64, f64)>,
}

impl RootHistory {
    pub fn new(p: f64, tol: f64) -> Self {
        Self {
            p,
            tol,
            seen: Vec::new(),
        }
    }

    pub fn root(&mut self, lambda: f64) -> Result<f64> {
        let r = h_lambda_root(self.p, lambda, self.tol)?;
        for &(l, q) in &self.seen {
            let bad = (lambda > l && r > q + 2.0 * self.tol) || (lambda < l && r < q - 2.0 * self.tol);
            if bad {
                return Err(Error::Structure(format!(
                    "r(lambda) not decreasing: r({l}) = {q}, r({lambda}) = {r}"
                )));
            }
        }
        self.seen.push((lambda, r));
        Ok(r)
    }

    pub fn queries(&self) -> &[(f64, f64)] {
        &self.seen
    }
}

/// Monte Carlo estimate of the probability that the `(p, λ)` walk from 1
/// ever reaches 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkEstimate {
    pub p: f64,
    pub lambda: f64,
    pub z_hat: f64,
    /// Half-width covering the Wilson 95% interval around `z_hat`.
    pub ci_halfwidth: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub horizon: u64,
    pub barrier: f64,
    pub n_mc: u64,
    pub seed: u64,
    pub hits: u64,
    pub escaped: u64,
    /// Walks still between 0 and the barrier at the horizon.
    pub alive: u64,
    /// Upper bound on the hits lost to truncation, as a probability.
    pub bias_bound: f64,
    /// `r(λ)` when `λ > (1-p)/p`.
    pub root: Option<f64>,
}

impl WalkEstimate {
    /// `z_hat` does not exceed `r(λ)` beyond sampling error and truncation.
    pub fn within_root_bound(&self) -> Option<bool> {
        self.root
            .map(|r| self.z_hat <= r + self.ci_halfwidth + self.bias_bound)
    }
}

#[derive(Clone, Copy, Default)]
struct Tally {
    hits: u64,
    escaped: u64,
    alive: u64,
    /// Σ r^{X} over truncated walks.
    lost: f64,
}

impl Tally {
    fn merge(self, o: Self) -> Self {
        Self {
            hits: self.hits + o.hits,
            escaped: self.escaped + o.escaped,
            alive: self.alive + o.alive,
            lost: self.lost + o.lost,
        }
    }
}

fn wilson(hits: u64, n: u64) -> (f64, f64) {
    let n = n as f64;
    let ph = hits as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (ph + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (ph * (1.0 - ph) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Fraction of `n_mc` walks from `X_0 = 1` (up `λ` w.p. `p`, down 1
/// otherwise) that reach `X ≤ 0` before `X ≥ barrier` or `horizon` steps.
///
/// Truncation can only lose hits; a walk stopped at `X` would still hit with
/// probability at most `r(λ)^X`, which bounds the bias.
pub fn walk_hit_probability(
    p: f64,
    lambda: f64,
    horizon: u64,
    barrier: f64,
    n_mc: u64,
    seed: u64,
) -> Result<WalkEstimate> {
    check_p(p)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if horizon == 0 || n_mc == 0 {
        return Err(Error::Domain("horizon and n_mc must be at least 1".into()));
    }
    if !(barrier > 1.0) {
        return Err(Error::Domain(format!("barrier must exceed the start 1, got {barrier}")));
    }
    let root = if lambda > critical_lambda(p) {
        Some(h_lambda_root(p, lambda, 1e-12)?)
    } else {
        None
    };
    let stream = RandomStream::new(seed);
    let one = |acc: &mut Tally, i: u64| {
        let mut cur = stream.split(i).cursor();
        let mut x = 1.0_f64;
        let mut steps = 0;
        loop {
            if x <= 0.0 {
                acc.hits += 1;
                return;
            }
            if x >= barrier || steps == horizon {
                if x >= barrier {
                    acc.escaped += 1;
                } else {
                    acc.alive += 1;
                }
                acc.lost += root.map_or(1.0, |r| r.powf(x));
                return;
            }
            x += if cur.next_f64() < p { lambda } else { -1.0 };
            steps += 1;
        }
    };
    // Fixed chunks, summed in order, keep the float total schedule-free.
    let chunks: Vec<Tally> = (0..n_mc.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = Tally::default();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n_mc) {
                one(&mut acc, i);
            }
            acc
        })
        .collect();
    let t = chunks.into_iter().fold(Tally::default(), Tally::merge);
    let z_hat = t.hits as f64 / n_mc as f64;
    let (lo, hi) = wilson(t.hits, n_mc);
    Ok(WalkEstimate {
        p,
        lambda,
        z_hat,
        ci_halfwidth: (z_hat - lo).max(hi - z_hat),
        ci_low: lo,
        ci_high: hi,
        horizon,
        barrier,
        n_mc,
        seed,
        hits: t.hits,
        escaped: t.escaped,
        alive: t.alive,
        bias_bound: t.lost / n_mc as f64,
        root,
    })
}

/// How [`lambda0`] locates `λ₀(p, δ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum Lambda0Method {
    /// Smallest `λ` with `r(λ) ≤ 1-δ`. Since `z ≤ r`, an upper bound.
    AnalyticUpper,
    /// Bisection on the Monte Carlo hit probability, with common random
    /// numbers across `λ`.
    McBisect { n_mc: u64, horizon: u64, barrier: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lambda0Estimate {
    pub p: f64,
    pub delta: f64,
    pub method: Lambda0Method,
    /// Point estimate; for `AnalyticUpper` the certified upper end.
    pub value: f64,
    pub low: f64,
    pub high: f64,
    pub seed: u64,
}

/// Stopping width suggested for `McBisect`: `0.01·(1-p)/p`.
pub fn mc_bisect_tolerance(p: f64) -> f64 {
    0.01 * critical_lambda(p)
}

/// `λ₀(p, δ) = inf{λ ≥ 0 : z_{p,λ} ≤ 1-δ}`, bisected until the bracket is
/// at most `tol` wide.
pub fn lambda0(p: f64, delta: f64, method: Lambda0Method, tol: f64, seed: u64) -> Result<Lambda0Estimate> {
    check_p(p)?;
    if !(delta >= 0.0 && delta < p) {
        return Err(Error::Domain(format!("delta must lie in [0, p) = [0, {p}), got {delta}")));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Domain(format!("tol must be positive, got {tol}")));
    }
    let crit = critical_lambda(p);
    let done = |value: f64, low: f64, high: f64| Lambda0Estimate {
        p,
        delta,
        method,
        value,
        low,
        high,
        seed,
    };
    if delta == 0.0 {
        return Ok(done(crit, crit, crit));
    }
    let target = 1.0 - delta;
    let root_tol = (tol * 1e-3).clamp(1e-14, 1e-6);
    let mut roots = RootHistory::new(p, root_tol);
    // Upper bracket: r(λ) ≤ 1-δ.
    let mut hi = 2.0 * crit + 1.0;
    while roots.root(hi)? > target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Range("no lambda brings r(lambda) below 1 - delta".into()));
        }
    }
    let mut lo = crit;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if roots.root(mid)? <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let Lambda0Method::McBisect {
        n_mc,
        horizon,
        barrier,
    } = method
    else {
        return Ok(done(hi, lo, hi));
    };

    // λ₀ lies between the critical value and the analytic upper bound.
    let (mut lo, mut hi) = (crit, hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let est = walk_hit_probability(p, mid, horizon, barrier, n_mc, seed)?;
        if est.z_hat <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(done(0.5 * (lo + hi), lo, hi))
}

/// `ζ = max(0, λ₀ - (1-p)/p)`.
pub fn zeta(estimate: &Lambda0Estimate) -> f64 {
    (estimate.value - critical_lambda(estimate.p)).max(0.0)
}

/// Exponents entering the single-step lower bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum GammaConstants {
    /// `σ2 ≥ 3`, walks at `p = 2/3`.
    HighNoise { p: f64, gamma1: f64, gamma2: f64, gamma3: f64 },
    /// `σ2 ∈ (1, 3)`, walks at `p = (σ2+5)/12`.
    NearOne { p: f64, gamma4: f64, gamma5: f64, gamma6: f64 },
}

/// Walk bias used for a given `σ2`.
pub fn gamma_walk_p(sigma2: f64) -> Result<f64> {
    if !(sigma2 > 1.0 && sigma2.is_finite()) {
        return Err(Error::Domain(format!(
            "sigma2 must exceed 1 (no bound is known below), got {sigma2}"
        )));
    }
    Ok(if sigma2 >= 3.0 { 2.0 / 3.0 } else { (sigma2 + 5.0) / 12.0 })
}

/// `γ1..γ3` or `γ4..γ6` from `σ2` and `ζ` at [`gamma_walk_p`].
pub fn gamma_constants(sigma2: f64, zeta_value: f64) -> Result<GammaConstants> {
    let p = gamma_walk_p(sigma2)?;
    if !(zeta_value >= 0.0 && zeta_value.is_finite()) {
        return Err(Error::Domain(format!("zeta must be finite and >= 0, got {zeta_value}")));
    }
    let lz = (2.0 * zeta_value).ln_1p();
    if sigma2 >= 3.0 {
        let base = (2.0 + 6.0 / (sigma2 - 2.0)).ln();
        Ok(GammaConstants::HighNoise {
            p,
            gamma1: lz / 2f64.ln(),
            gamma2: 1.0 - 2f64.ln() / base,
            gamma3: lz / base,
        })
    } else {
        let inner = (12.0 / (7.0 - sigma2) - 1.0).ln();
        let outer = (18.0 / (sigma2 - 1.0) - 1.0).ln();
        Ok(GammaConstants::NearOne {
            p,
            gamma4: lz / inner,
            gamma5: 1.0 - inner / outer,
            gamma6: lz / outer,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_at_two_thirds_two() {
        let r = h_lambda_root(2.0 / 3.0, 2.0, 1e-12).unwrap();
        assert!((r - (3f64.sqrt() - 1.0) / 2.0).abs() < 1e-11);
    }

    #[test]
    fn root_limits() {
        let p = 0.7;
        let near = h_lambda_root(p, critical_lambda(p) * (1.0 + 1e-6), 1e-12).unwrap();
        assert!(near > 0.999);
        let far = h_lambda_root(p, 1e6, 1e-12).unwrap();
        assert!((far - (1.0 - p)).abs() < 1e-4);
    }

    #[test]
    fn root_rejects_critical_lambda() {
        assert!(matches!(h_lambda_root(2.0 / 3.0, 0.5, 1e-9), Err(Error::Domain(_))));
    }

    #[test]
    fn history_accepts_monotone_queries() {
        let mut h = RootHistory::new(0.6, 1e-12);
        let a = h.root(1.0).unwrap();
        let b = h.root(3.0).unwrap();
        let c = h.root(2.0).unwrap();
        assert!(a > c && c > b);
    }

    #[test]
    fn zero_up_step_always_hits() {
        let e = walk_hit_probability(2.0 / 3.0, 0.0, 10_000, 1e3, 2000, 1).unwrap();
        assert_eq!(e.z_hat, 1.0);
    }

    #[test]
    fn walk_is_reproducible() {
        let a = walk_hit_probability(0.6, 1.5, 1000, 50.0, 500, 4).unwrap();
        let b = walk_hit_probability(0.6, 1.5, 1000, 50.0, 500, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lambda0_at_zero_delta_is_exact() {
        let e = lambda0(2.0 / 3.0, 0.0, Lambda0Method::AnalyticUpper, 1e-9, 0).unwrap();
        assert_eq!(e.value, 0.5);
        assert!(matches!(
            lambda0(0.6, 0.6, Lambda0Method::AnalyticUpper, 1e-9, 0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn analytic_upper_brackets_the_target() {
        let (p, d) = (2.0 / 3.0, 0.1);
        let e = lambda0(p, d, Lambda0Method::AnalyticUpper, 1e-10, 0).unwrap();
        assert!(h_lambda_root(p, e.high, 1e-13).unwrap() <= 1.0 - d + 1e-12);
        assert!(h_lambda_root(p, e.low, 1e-13).unwrap() >= 1.0 - d - 1e-12);
        assert!(e.value >= critical_lambda(p));
    }

    #[test]
    fn analytic_upper_tends_to_critical() {
        for p in [0.55, 2.0 / 3.0, 0.9] {
            let e = lambda0(p, 1e-7, Lambda0Method::AnalyticUpper, 1e-9, 0).unwrap();
            assert!((e.value - critical_lambda(p)).abs() < 1e-5, "p={p}");
        }
    }

    #[test]
    fn gamma_values() {
        let GammaConstants::HighNoise { gamma1, gamma2, gamma3, .. } = gamma_constants(8.0, 0.0).unwrap() else {
            panic!("wrong regime")
        };
        assert_eq!((gamma1, gamma3), (0.0, 0.0));
        assert!((gamma2 - (1.0 - 2f64.ln() / 3f64.ln())).abs() < 1e-15);
        let GammaConstants::NearOne { gamma5, .. } = gamma_constants(1.0 + 1e-9, 0.2).unwrap() else {
            panic!("wrong regime")
        };
        assert!(gamma5 > 0.95);
        assert!(matches!(gamma_constants(1.0, 0.0), Err(Error::Domain(_))));
    }
}
