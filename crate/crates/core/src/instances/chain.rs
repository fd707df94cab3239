use std::sync::Arc;

use serde::Serialize;

use crate::error::{precondition, Error, Result};
use crate::numerics::{ExtendedScalar, StreamCursor, Vector};
use crate::oracles::Oracle;

use super::psi::{anchored_slope, psi, psi_d1};
use super::{
    uniform, Field, GapValue, InstanceSpec, NoiseClass, Objective, ProblemInstance, ProblemParams,
    SmoothnessForm,
};

/// Multiplier in the growth rate of `g_t`. Sufficient for feasibility; smaller
/// values are accepted but carry no guarantee.
pub const DEFAULT_CHAIN_CONSTANT: f64 = 576.0;

/// Log-domain sequences of the chain construction.
///
/// `g` and `m` run over `t = 0..=t_max+1`, `ell` over `t = 0..=t_max`, `d`
/// over `t = 0..=t_max+1`.
#[derive(Clone, Debug, Serialize)]
pub struct ChainSchedule {
    pub params: ProblemParams,
    pub eta: f64,
    pub gamma: f64,
    pub constant: f64,
    /// Gradient magnitude at knot `t`.
    pub g: Vec<ExtendedScalar>,
    /// Half-width of the valley ending at knot `t`, `ψ'(m_t) = g_t`.
    pub m: Vec<ExtendedScalar>,
    /// Jump length `ℓ_t = η g_t / √(γ² + Σ_{i<t} g_i²)`.
    pub ell: Vec<ExtendedScalar>,
    /// Knot positions `d_t = Σ_{i<t} ℓ_i`.
    pub d: Vec<ExtendedScalar>,
}

impl ChainSchedule {
    pub fn t_max(&self) -> usize {
        self.ell.len() - 1
    }

    /// `(d_t, f'(d_t) = -g_t)` at any knot of the schedule.
    pub fn knot(&self, t: usize) -> Option<(ExtendedScalar, ExtendedScalar)> {
        Some((*self.d.get(t)?, self.g.get(t)?.neg()))
    }
}

/// Largest `γ` the construction admits: `ηΔL1² / (8 ln(1 + 48ΔL1²/L0))`.
pub fn max_admissible_gamma(params: &ProblemParams, eta: f64) -> f64 {
    eta * params.delta * params.l1 * params.l1 / (8.0 * (48.0 * params.rho()).ln_1p())
}

pub fn chain_schedule(
    params: &ProblemParams,
    eta: f64,
    gamma: f64,
    t_max: usize,
) -> Result<ChainSchedule> {
    chain_schedule_with_constant(params, eta, gamma, t_max, DEFAULT_CHAIN_CONSTANT)
}

/// ln(1 + e^v) without overflow.
fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

pub fn chain_schedule_with_constant(
    params: &ProblemParams,
    eta: f64,
    gamma: f64,
    t_max: usize,
    constant: f64,
) -> Result<ChainSchedule> {
    params.validate()?;
    let (l0, l1) = (params.l0, params.l1);
    let rho = params.rho();
    precondition(rho >= 1.0, || {
        format!("chain needs Delta*L1^2 >= L0, got Delta*L1^2/L0 = {rho}")
    })?;
    precondition(eta.is_finite() && eta >= 1.0 / l1, || {
        format!("chain needs eta >= 1/L1 = {}, got eta = {eta}", 1.0 / l1)
    })?;
    let gmax = max_admissible_gamma(params, eta);
    precondition(gamma > 0.0 && gamma <= gmax, || {
        format!(
            "chain needs 0 < gamma <= eta*Delta*L1^2/(8 ln(1+48 Delta*L1^2/L0)) = {gmax}, got gamma = {gamma}"
        )
    })?;
    precondition(constant > 0.0 && constant.is_finite(), || {
        format!("growth constant must be positive, got {constant}")
    })?;

    let ln_base = (params.delta * l1).ln();
    let ln_g = |t: usize| -> f64 {
        if t == 0 {
            return ln_base;
        }
        let tp1 = (t + 1) as f64;
        t as f64 * (constant * tp1 * (rho * tp1).ln_1p()).ln() + ln_base
    };
    let n = t_max + 2;
    let mut g = Vec::with_capacity(n);
    let mut m = Vec::with_capacity(n);
    for t in 0..n {
        let lg = ln_g(t);
        g.push(ExtendedScalar::from_log(1, lg)?);
        m.push(ExtendedScalar::from_f64(softplus((l1 / l0).ln() + lg) / l1)?);
    }

    let eta_x = ExtendedScalar::from_f64(eta)?;
    let four = ExtendedScalar::from_f64(4.0)?;
    let mut sum_sq = ExtendedScalar::from_f64(gamma * gamma)?;
    let mut ell = Vec::with_capacity(t_max + 1);
    let mut d = Vec::with_capacity(n);
    d.push(ExtendedScalar::ZERO);
    for t in 0..=t_max {
        let l = eta_x.mul(g[t]).div(sum_sq.sqrt()?)?;
        if l < four.mul(m[t + 1]) {
            return Err(Error::Precondition(format!(
                "jump length falls short at t = {t}: ell_t = {l} < 4 m_(t+1) = {}",
                four.mul(m[t + 1])
            )));
        }
        ell.push(l);
        d.push(d[t].add_same_sign(l)?);
        sum_sq = sum_sq.add_same_sign(g[t].mul(g[t]))?;
    }
    Ok(ChainSchedule {
        params: *params,
        eta,
        gamma,
        constant,
        g,
        m,
        ell,
        d,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PlainKnot {
    pub d: f64,
    pub g: f64,
    pub m: f64,
    /// `ψ(m)`.
    pub psi_m: f64,
    /// Jump to the next knot (0 for the last one).
    pub ell: f64,
    /// Value offset accumulated over earlier pieces.
    pub offset: f64,
}

/// The chain objective on the prefix of knots representable in `f64`.
///
/// Knots are rebuilt with exactly the floating-point operations the
/// decorrelated AdaGrad-Norm update performs, so the optimizer lands on them
/// bit for bit. Past the last knot the objective continues as the ψ bowl of
/// that knot.
#[derive(Debug)]
pub struct ChainObjective {
    schedule: ChainSchedule,
    knots: Vec<PlainKnot>,
}

impl ChainObjective {
    pub fn schedule(&self) -> &ChainSchedule {
        &self.schedule
    }

    /// Knots `d_0..d_K` available in plain reals.
    pub fn plain_knots(&self) -> &[PlainKnot] {
        &self.knots
    }

    fn locate(&self, x: f64) -> usize {
        self.knots.partition_point(|k| k.d <= x).saturating_sub(1)
    }

    fn params(&self) -> (f64, f64) {
        (self.schedule.params.l0, self.schedule.params.l1)
    }

    fn eval(&self, x: f64) -> Result<(f64, f64)> {
        if !x.is_finite() {
            return Err(Error::Range(format!("chain evaluated at {x}")));
        }
        let (l0, l1) = self.params();
        let j = self.locate(x);
        let k = &self.knots[j];
        let y = x - k.d;
        let Some(next) = self.knots.get(j + 1) else {
            // Terminal bowl.
            let v = psi(y - k.m, l0, l1)? + k.offset;
            return Ok((v, anchored_slope(y, k.m, k.g, l0, l1)?));
        };
        let (g1, m1, pm1) = (next.g, next.m, next.psi_m);
        if y <= k.m + m1 {
            let v = psi(y - k.m, l0, l1)?;
            Ok((v + k.offset, anchored_slope(y, k.m, k.g, l0, l1)?))
        } else if y < k.ell - 2.0 * m1 {
            Ok((g1 * (y - k.m - m1) + pm1 + k.offset, g1))
        } else {
            let z = y - k.ell + m1;
            let v = -psi(z, l0, l1)? + 2.0 * pm1 + g1 * (k.ell - 3.0 * m1 - k.m);
            Ok((v + k.offset, -psi_d1(z, l0, l1)?))
        }
    }
}

impl ChainObjective {
    /// Segment index `3j + r`: knot `j`, region `r` (bowl, ramp, cap).
    fn segment(&self, x: f64) -> usize {
        let j = self.locate(x);
        let k = &self.knots[j];
        let Some(next) = self.knots.get(j + 1) else {
            return 3 * j;
        };
        let y = x - k.d;
        if y <= k.m + next.m {
            3 * j
        } else if y < k.ell - 2.0 * next.m {
            3 * j + 1
        } else {
            3 * j + 2
        }
    }

    /// Left end of segment `s`.
    fn segment_start(&self, s: usize) -> f64 {
        let (j, r) = (s / 3, s % 3);
        let k = &self.knots[j];
        match r {
            0 => k.d,
            1 => k.d + (k.m + self.knots[j + 1].m),
            _ => k.d + (k.ell - 2.0 * self.knots[j + 1].m),
        }
    }

    /// The segment formula without its constant, valid up to an additive
    /// constant on segment `s`.
    fn local(&self, s: usize, x: f64) -> Result<f64> {
        let (l0, l1) = self.params();
        let (j, r) = (s / 3, s % 3);
        let k = &self.knots[j];
        let y = x - k.d;
        match r {
            0 => psi(y - k.m, l0, l1),
            1 => {
                let n = &self.knots[j + 1];
                Ok(n.g * (y - k.m - n.m))
            }
            _ => {
                let n = &self.knots[j + 1];
                Ok(-psi(y - k.ell + n.m, l0, l1)?)
            }
        }
    }

    /// `f(x) - f(a)` summed segment by segment through the boundaries between.
    fn increment_1d(&self, x: f64, a: f64) -> Result<f64> {
        if !(x.is_finite() && a.is_finite()) {
            return Err(Error::Range(format!("chain evaluated at {x}, {a}")));
        }
        let (lo, hi, sign) = if x >= a { (a, x, 1.0) } else { (x, a, -1.0) };
        let (s_lo, s_hi) = (self.segment(lo), self.segment(hi));
        let mut total = 0.0;
        let mut from = lo;
        for s in s_lo..s_hi {
            let b = self.segment_start(s + 1);
            total += self.local(s, b)? - self.local(s, from)?;
            from = b;
        }
        total += self.local(s_hi, hi)? - self.local(s_hi, from)?;
        Ok(sign * total)
    }
}

impl Field for ChainObjective {
    fn increment(&self, x: &[f64], anchor: &[f64]) -> Result<f64> {
        self.increment_1d(x[0], anchor[0])
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eval(x[0])?.0)
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = self.eval(x[0])?.1;
        Ok(())
    }

    fn sample_point(&self, cur: &mut StreamCursor) -> Vector {
        let j = (cur.next_u64() % self.knots.len() as u64) as usize;
        let k = &self.knots[j];
        let span = if k.ell > 0.0 { k.ell } else { 2.0 * k.m };
        let lo = if j == 0 { -k.m } else { 0.0 };
        vec![k.d + uniform(cur, lo, span)]
    }

    fn fd_step(&self) -> f64 {
        1e-4 / self.schedule.params.l1
    }

    fn gap(&self, x0: &[f64]) -> Result<GapValue> {
        Ok(GapValue {
            value: self.value(x0)?,
            surrogate: false,
        })
    }
}

/// One-dimensional chain objective built from `schedule`, started at 0.
///
/// Value continuity across knots needs the offsets
/// `Σ_{i<j} g_{i+1}(ℓ_i - 3m_{i+1} - m_i)`, each non-negative, so `inf f = 0`.
pub fn chain_objective(schedule: &ChainSchedule, params: &ProblemParams) -> Result<ProblemInstance> {
    if schedule.params != *params {
        return Err(Error::Structure(
            "schedule was built for different problem constants".into(),
        ));
    }
    let (l0, l1) = (params.l0, params.l1);
    let (eta, gamma) = (schedule.eta, schedule.gamma);
    let plain = |t: usize| -> Option<(f64, f64)> {
        let g = schedule.g.get(t)?.to_finite_f64()?;
        let m = schedule.m.get(t)?.to_finite_f64()?;
        Some((g, m))
    };

    let (g0, m0) = plain(0).ok_or_else(|| Error::Range("g_0 is not representable".into()))?;
    let mut knots = vec![PlainKnot {
        d: 0.0,
        g: g0,
        m: m0,
        psi_m: psi(m0, l0, l1)?,
        ell: 0.0,
        offset: 0.0,
    }];
    let mut sum_sq = 0.0_f64;
    for t in 0..=schedule.t_max() {
        let cur = knots[t];
        // Same expression as the optimizer's step size.
        let step = eta / (gamma * gamma + sum_sq).sqrt();
        let ell = step * cur.g;
        let Some((g1, m1)) = plain(t + 1) else { break };
        let d1 = cur.d + ell;
        if !(ell > 0.0 && ell.is_finite() && d1.is_finite()) {
            break;
        }
        let Ok(psi_m1) = psi(m1, l0, l1) else { break };
        let offset = cur.offset + g1 * (ell - 3.0 * m1 - cur.m);
        if !offset.is_finite() {
            break;
        }
        knots[t].ell = ell;
        knots.push(PlainKnot {
            d: d1,
            g: g1,
            m: m1,
            psi_m: psi_m1,
            ell: 0.0,
            offset,
        });
        sum_sq += cur.g * cur.g;
    }

    Ok(ProblemInstance {
        spec: InstanceSpec::Chain {
            eta,
            gamma,
            t_max: schedule.t_max(),
            constant: schedule.constant,
        },
        params: *params,
        dim: 1,
        x0: vec![0.0],
        class: NoiseClass::BoundedNoise {
            sigma: params.sigma,
        },
        oracle: Oracle::Deterministic,
        smoothness: SmoothnessForm::Relaxed { l0, l1 },
        objective: Objective::Chain(Arc::new(ChainObjective {
            schedule: schedule.clone(),
            knots,
        })),
    })
}
