//! Executes a [`RunManifest`].

use std::fmt::Write as _;

use rsmooth_core::analysis::{
    check_tricky_pair, critical_lambda, gamma_constants, gamma_walk_p, hinge_sweep, lambda0,
    mc_bisect_tolerance, walk_hit_probability, zeta, GammaConstants, HittingTime, Lambda0Method,
};
use rsmooth_core::instances::{certify_membership, chain_schedule_with_constant};
use rsmooth_core::optimizers::{run_trajectory, RunStatus, CSV_COORDS};
use rsmooth_core::RandomStream;

use crate::error::CliError;
use crate::manifest::{Command, Format, RunManifest, WalkRun};
use crate::plot::{emit_plot_data, Axes};

/// Result of one run, before the header is attached.
#[derive(Debug, Default)]
pub struct Outcome {
    pub body: String,
    /// Summary lines, written as `#` comments after the body.
    pub footer: Vec<String>,
    /// Two-column series for plotting, when the command produces one.
    pub plot: Option<String>,
    /// Set when the run completed but a check it performs failed.
    pub failure: Option<String>,
}

fn json_line<T: serde::Serialize>(s: &mut String, v: &T) -> Result<(), CliError> {
    *s += &serde_json::to_string(v).map_err(|e| CliError::Internal(e.to_string()))?;
    s.push('\n');
    Ok(())
}

/// Format used when the manifest leaves it open.
pub fn resolved_format(m: &RunManifest) -> Result<Format, CliError> {
    if let Some(f) = m.format {
        return Ok(f);
    }
    Ok(match &m.run {
        Command::Simulate { instance, .. } => {
            let dim = match instance.dim {
                Some(d) => d,
                None => instance.build()?.dim(),
            };
            if dim > CSV_COORDS {
                Format::Jsonl
            } else {
                Format::Csv
            }
        }
        _ => Format::Csv,
    })
}

pub fn execute(m: &RunManifest, workers: Option<usize>) -> Result<Outcome, CliError> {
    let format = resolved_format(m)?;
    match &m.run {
        Command::Simulate {
            steps,
            eps,
            instance,
            optimizer,
            oracle,
        } => {
            let mut inst = instance.build()?;
            if let Some(o) = oracle {
                inst = inst.with_oracle(o.clone())?;
            }
            let log = run_trajectory(&inst, optimizer, *steps, m.seed)?;
            let eps = eps.unwrap_or(inst.params().epsilon);
            let t_eps = log
                .records
                .iter()
                .find(|r| r.grad_norm < eps)
                .map_or(HittingTime::NotReached, |r| HittingTime::Reached(r.t));
            let mut out = Outcome::default();
            match format {
                Format::Csv => out.body = log.to_csv(),
                Format::Jsonl => {
                    for r in &log.records {
                        json_line(&mut out.body, r)?;
                    }
                }
            }
            out.footer.push(format!("eps={eps}"));
            out.footer.push(format!("t_eps={t_eps}"));
            out.footer.push(match log.status {
                RunStatus::Completed => "status=completed".into(),
                RunStatus::DivergedNumeric { last_finite_step } => {
                    format!("status=diverged_numeric last_finite_step={last_finite_step}")
                }
            });
            if let Some(r) = log.records.last() {
                out.footer.push(format!("last_grad_norm={:e}", r.grad_norm));
            }
            out.footer.push(format!("fallback_draws={}", log.fallback_draws));
            Ok(out)
        }
        Command::Sweep { sweep } => {
            let mut s = sweep.clone();
            s.seed = m.seed;
            let res = hinge_sweep(&s, workers)?;
            let mut out = Outcome::default();
            match format {
                Format::Csv => {
                    out.body += "eps,eta,t_eps,lower_bound,respects_bound\n";
                    for r in &res.rows {
                        let lb = r.lower_bound.map(|b| format!("{b}")).unwrap_or_default();
                        let _ = writeln!(out.body, "{},{},{},{},{}", r.eps, r.eta, r.t_eps, lb, r.respects_bound);
                    }
                }
                Format::Jsonl => {
                    for r in &res.rows {
                        json_line(&mut out.body, r)?;
                    }
                }
            }
            match (&res.fit, &res.fit_error) {
                (Some(f), _) => out.footer.push(format!(
                    "slope={:.4} intercept={:.4} r2={:.6} n={}",
                    f.slope, f.intercept, f.r2, f.n
                )),
                (None, Some(e)) => out.footer.push(format!("no fit: {e}")),
                (None, None) => {}
            }
            let pts: Vec<_> = res.rows.iter().map(|r| (r.eps, r.t_eps)).collect();
            out.plot = Some(emit_plot_data(&pts, Axes { x: "eps", y: "t_eps" })?);
            if let Some(r) = res.rows.iter().find(|r| !r.respects_bound) {
                out.failure = Some(format!(
                    "hitting time {} at eps = {} is below the closed-form bound {:?}",
                    r.t_eps, r.eps, r.lower_bound
                ));
            }
            Ok(out)
        }
        Command::Certify { n_samples, instance } => {
            let inst = instance.build()?;
            let rep = certify_membership(&inst, *n_samples, RandomStream::new(m.seed))?;
            let mut out = Outcome::default();
            match format {
                Format::Csv => {
                    out.body += "check,max,tolerance,passed\n";
                    for (name, c) in [
                        ("smoothness", &rep.smoothness),
                        ("gradient", &rep.gradient),
                        ("noise", &rep.noise),
                    ] {
                        let _ = writeln!(out.body, "{name},{:e},{:e},{}", c.max, c.tolerance, c.passed);
                    }
                    let _ = writeln!(out.body, "gap,{:e},{:e},{}", rep.gap.value, rep.gap.delta, rep.gap.passed);
                }
                Format::Jsonl => json_line(&mut out.body, &rep)?,
            }
            out.footer.push(format!("lemma_tag={}", rep.lemma_tag));
            out.footer.push(format!("literal_smoothness_ratio={:e}", rep.literal_smoothness_ratio));
            out.footer.push(format!("gap_surrogate={}", rep.gap.surrogate));
            out.footer.push(format!("fallback_draws={}", rep.fallback_draws));
            out.footer.push(format!("evaluation_failures={}", rep.evaluation_failures));
            out.footer.push(format!("passed={}", rep.passed));
            if !rep.passed {
                let mut failed: Vec<&str> = [
                    ("smoothness", rep.smoothness.passed),
                    ("gradient", rep.gradient.passed),
                    ("gap", rep.gap.passed),
                    ("noise", rep.noise.passed),
                ]
                .iter()
                .filter(|(_, ok)| !ok)
                .map(|(n, _)| *n)
                .collect();
                if rep.evaluation_failures > 0 {
                    failed.push("evaluation");
                }
                out.failure = Some(format!(
                    "{} is not certified; failing checks: {}",
                    rep.lemma_tag,
                    failed.join(", ")
                ));
            }
            Ok(out)
        }
        Command::Walk(w) => walk(w, m.seed, format),
        Command::Tricky {
            g1,
            g2,
            p,
            delta,
            alpha,
            params,
        } => {
            let rep = check_tricky_pair(alpha, g1, g2, *p, *delta, params)?;
            let mut out = Outcome::default();
            match format {
                Format::Csv => {
                    out.body += "condition,passed\n";
                    for c in &rep.conditions {
                        let _ = writeln!(out.body, "{},{}", c.name, c.passed);
                    }
                }
                Format::Jsonl => json_line(&mut out.body, &rep)?,
            }
            out.footer.push(format!("c1={} c2={} slope_cap={}", rep.c1, rep.c2, rep.slope_cap));
            out.footer.push(format!("lambda_ratio={}", rep.lambda_ratio));
            out.footer.push(format!("lambda0={}", rep.lambda0_ref));
            out.footer.push(format!("tricky={}", rep.tricky));
            Ok(out)
        }
        Command::Schedule {
            eta,
            gamma,
            t_max,
            constant,
            params,
        } => {
            let s = chain_schedule_with_constant(params, *eta, *gamma, *t_max, *constant)?;
            let mut out = Outcome::default();
            let cell = |v: Option<&rsmooth_core::ExtendedScalar>| v.map(|x| format!("{}", x.logmag())).unwrap_or_default();
            match format {
                Format::Csv => {
                    out.body += "t,ln_g,ln_m,ln_ell,ln_d\n";
                    for t in 0..s.g.len() {
                        let _ = writeln!(
                            out.body,
                            "{t},{},{},{},{}",
                            cell(s.g.get(t)),
                            cell(s.m.get(t)),
                            cell(s.ell.get(t)),
                            cell(s.d.get(t))
                        );
                    }
                }
                Format::Jsonl => {
                    for t in 0..s.g.len() {
                        let row = serde_json::json!({
                            "t": t,
                            "ln_g": s.g.get(t).map(|x| x.logmag()),
                            "ln_m": s.m.get(t).map(|x| x.logmag()),
                            "ln_ell": s.ell.get(t).map(|x| x.logmag()),
                            "ln_d": s.d.get(t).filter(|x| !x.is_zero()).map(|x| x.logmag()),
                        });
                        json_line(&mut out.body, &row)?;
                    }
                }
            }
            let plain = s.d.iter().take_while(|d| d.to_finite_f64().is_some()).count();
            out.footer.push(format!("knots_representable_in_f64={plain}"));
            Ok(out)
        }
    }
}

fn walk(w: &WalkRun, seed: u64, format: Format) -> Result<Outcome, CliError> {
    let method = w.method;
    let tol = w.tol.unwrap_or(match method {
        Lambda0Method::AnalyticUpper => 1e-10,
        Lambda0Method::McBisect { .. } => mc_bisect_tolerance(w.p),
    });
    let est = lambda0(w.p, w.delta, method, tol, seed)?;
    let mut rows: Vec<(String, f64, Option<(f64, f64)>)> = vec![
        ("lambda0".into(), est.value, Some((est.low, est.high))),
        ("critical_lambda".into(), critical_lambda(w.p), None),
        ("zeta".into(), zeta(&est), None),
    ];
    let mut footer = vec![format!("lambda0 = {}", est.value)];
    if let Some(lambda) = w.lambda {
        let e = walk_hit_probability(w.p, lambda, w.horizon, w.barrier, w.n_mc, seed)?;
        if let Some(r) = e.root {
            rows.push(("root".into(), r, None));
        }
        rows.push(("z_hat".into(), e.z_hat, Some((e.ci_low, e.ci_high))));
        rows.push(("bias_bound".into(), e.bias_bound, None));
        footer.push(format!(
            "z_hat = {} (hits={} escaped={} alive={} n_mc={})",
            e.z_hat, e.hits, e.escaped, e.alive, e.n_mc
        ));
    }
    if let Some(s2) = w.sigma2 {
        let pg = gamma_walk_p(s2)?;
        let lam = lambda0(pg, w.delta, Lambda0Method::AnalyticUpper, 1e-10, seed)?;
        rows.push(("gamma_walk_p".into(), pg, None));
        match gamma_constants(s2, zeta(&lam))? {
            GammaConstants::HighNoise { gamma1, gamma2, gamma3, .. } => {
                rows.push(("gamma1".into(), gamma1, None));
                rows.push(("gamma2".into(), gamma2, None));
                rows.push(("gamma3".into(), gamma3, None));
            }
            GammaConstants::NearOne { gamma4, gamma5, gamma6, .. } => {
                rows.push(("gamma4".into(), gamma4, None));
                rows.push(("gamma5".into(), gamma5, None));
                rows.push(("gamma6".into(), gamma6, None));
            }
        }
    }
    let mut out = Outcome {
        footer,
        ..Outcome::default()
    };
    match format {
        Format::Csv => {
            out.body += "quantity,value,low,high\n";
            for (name, v, b) in &rows {
                let (lo, hi) = b.map(|(l, h)| (l.to_string(), h.to_string())).unwrap_or_default();
                let _ = writeln!(out.body, "{name},{v},{lo},{hi}");
            }
        }
        Format::Jsonl => {
            for (name, v, b) in &rows {
                let row = serde_json::json!({
                    "quantity": name,
                    "value": v,
                    "low": b.map(|x| x.0),
                    "high": b.map(|x| x.1),
                });
                json_line(&mut out.body, &row)?;
            }
        }
    }
    Ok(out)
}
