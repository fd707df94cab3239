//! `rsmooth`: build instances, run optimizers and sweeps, and print
//! certificates, random-walk tables and chain schedules.
//!
//! Every run is described by a TOML manifest. Subcommand flags build one;
//! `rsmooth run FILE` replays a manifest file or the header of an earlier
//! output.

mod error;
mod manifest;
mod plot;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};

use rsmooth_core::analysis::{EtaRule, HingeSweep, Lambda0Method, DEFAULT_BARRIER, DEFAULT_HORIZON};
use rsmooth_core::instances::{slope_cap, DEFAULT_CHAIN_CONSTANT};
use rsmooth_core::{InstanceSpec, OptimizerConfig, ProblemParams, StepSizeFn};

use error::CliError;
use manifest::{Command, Format, InstanceEntry, RunManifest, WalkRun};

const SEED_ENV: &str = "RSMOOTH_SEED";

#[derive(Parser, Debug)]
#[command(name = "rsmooth", version, about = "Adaptive optimizers on hard (L0,L1)-smooth instances")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run one optimizer trajectory and report its hitting time.
    Simulate(SimulateArgs),
    /// Hitting times of decorrelated AdaGrad on the hinge over a grid of ε.
    Sweep(SweepArgs),
    /// Membership certificate for an instance.
    Certify(CertifyArgs),
    /// λ₀, hit probabilities and γ constants of the biased random walk.
    Walk(WalkArgs),
    /// Check whether a gradient pair is tricky for a step-size rule.
    Tricky(TrickyArgs),
    /// Dump the chain schedule in log-domain.
    Schedule(ScheduleArgs),
    /// Replay a manifest, or the manifest embedded in an earlier output.
    Run(RunArgs),
}

#[derive(Args, Debug)]
struct OutputArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Defaults to csv, or jsonl for simulate runs in more than 8 dimensions.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Print the manifest instead of running it.
    #[arg(long)]
    print_manifest: bool,
}

#[derive(Args, Debug)]
struct ParamArgs {
    #[arg(id = "Delta", long = "Delta", default_value_t = 1.0)]
    delta: f64,
    #[arg(long = "L0", default_value_t = 1.0)]
    l0: f64,
    #[arg(long = "L1", default_value_t = 1.0)]
    l1: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma1: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma2: f64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
}

impl ParamArgs {
    fn params(&self) -> ProblemParams {
        ProblemParams {
            delta: self.delta,
            l0: self.l0,
            l1: self.l1,
            sigma: self.sigma,
            sigma1: self.sigma1,
            sigma2: self.sigma2,
            epsilon: self.eps,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum InstanceKind {
    Psi,
    Chain,
    Drori,
    CoordwiseExp,
    Hinge,
    QuadBump,
}

#[derive(Args, Debug)]
struct InstanceArgs {
    /// Two-point and periodic instances need vectors; use a manifest for those.
    #[arg(long, value_enum)]
    instance: InstanceKind,
    /// Terms of coordwise-exp, steps of drori and quad-bump.
    #[arg(long, default_value_t = 1000)]
    terms: usize,
    /// Dimension of drori and quad-bump; defaults to terms + 1.
    #[arg(long)]
    dim: Option<usize>,
    /// Last knot of the chain.
    #[arg(long, default_value_t = 64)]
    t_max: usize,
    #[arg(long, default_value_t = DEFAULT_CHAIN_CONSTANT)]
    chain_constant: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OptimizerKind {
    /// Decorrelated AdaGrad-Norm.
    DadagradNorm,
    AdagradNorm,
    Adagrad,
    /// Decorrelated AdaGrad.
    Dadagrad,
    /// SGD with constant step `eta`.
    Constant,
    /// SGD with step `min(eta, c/‖g‖)`.
    Clip,
    /// SGD with step `c/‖g‖`.
    Normalized,
    /// SGD with step `-c`.
    Negative,
}

#[derive(Args, Debug)]
struct OptimizerArgs {
    #[arg(long, value_enum, default_value = "dadagrad-norm")]
    optimizer: OptimizerKind,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = 1e-8)]
    gamma: f64,
    /// Clip radius or normalized step length.
    #[arg(long)]
    c: Option<f64>,
}

fn need_c(c: Option<f64>, rule: &str) -> Result<f64, CliError> {
    c.ok_or_else(|| CliError::User(format!("the {rule} rule needs --c")))
}

fn step_rule(kind: OptimizerKind, eta: f64, c: Option<f64>) -> Result<Option<StepSizeFn>, CliError> {
    Ok(Some(match kind {
        OptimizerKind::Constant => StepSizeFn::Constant { eta },
        OptimizerKind::Clip => StepSizeFn::Clip {
            eta,
            c: need_c(c, "clip")?,
        },
        OptimizerKind::Normalized => StepSizeFn::Normalized {
            c: need_c(c, "normalized")?,
        },
        OptimizerKind::Negative => StepSizeFn::Negative {
            c: need_c(c, "negative")?,
        },
        _ => return Ok(None),
    }))
}

impl OptimizerArgs {
    fn config(&self) -> Result<OptimizerConfig, CliError> {
        let (eta, gamma) = (self.eta, self.gamma);
        Ok(match self.optimizer {
            OptimizerKind::DadagradNorm => OptimizerConfig::DecorrelatedAdaGradNorm { eta, gamma },
            OptimizerKind::AdagradNorm => OptimizerConfig::AdaGradNorm { eta, gamma },
            OptimizerKind::Adagrad => OptimizerConfig::AdaGrad { eta, gamma },
            OptimizerKind::Dadagrad => OptimizerConfig::DecorrelatedAdaGrad { eta, gamma },
            k => OptimizerConfig::SingleStep {
                alpha: step_rule(k, eta, self.c)?.expect("single-step kinds have a rule"),
            },
        })
    }
}

fn instance_entry(a: &InstanceArgs, opt: &OptimizerArgs, params: ProblemParams) -> Result<InstanceEntry, CliError> {
    let dim = a.dim.unwrap_or(a.terms + 1);
    let spec = match a.instance {
        InstanceKind::Psi => InstanceSpec::Psi,
        InstanceKind::Hinge => InstanceSpec::Hinge,
        InstanceKind::Chain => InstanceSpec::Chain {
            eta: opt.eta,
            gamma: opt.gamma,
            t_max: a.t_max,
            constant: a.chain_constant,
        },
        InstanceKind::Drori => InstanceSpec::Drori {
            eta: opt.eta,
            gamma: opt.gamma,
            steps: a.terms,
            dim,
        },
        InstanceKind::CoordwiseExp => InstanceSpec::CoordwiseExp { terms: a.terms },
        InstanceKind::QuadBump => InstanceSpec::QuadBump {
            alpha: step_rule(opt.optimizer, opt.eta, opt.c)?.ok_or_else(|| {
                CliError::User("quad-bump is tuned to a single-step rule; pass --optimizer constant|clip|normalized|negative".into())
            })?,
            steps: a.terms,
            dim,
        },
    };
    let inst = spec.build(&params)?;
    Ok(InstanceEntry {
        spec,
        params,
        dim: Some(inst.dim()),
        x0: None,
    })
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    output: OutputArgs,
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    optimizer: OptimizerArgs,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    output: OutputArgs,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 1e-8)]
    gamma: f64,
    /// Fixed step parameter.
    #[arg(long, conflicts_with = "eta_factor")]
    eta: Option<f64>,
    /// Step parameter as a multiple of the coordinate-wise threshold at each ε.
    #[arg(long)]
    eta_factor: Option<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    eps_grid: Vec<f64>,
    #[arg(long, default_value_t = 10_000_000)]
    t_cap: u64,
    /// Use decorrelated AdaGrad-Norm instead of decorrelated AdaGrad.
    #[arg(long)]
    norm_variant: bool,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
    /// Also write a two-column plot series here.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    #[command(flatten)]
    output: OutputArgs,
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    optimizer: OptimizerArgs,
    #[arg(long, default_value_t = 10_000)]
    n_samples: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum WalkMethod {
    Analytic,
    Mc,
}

#[derive(Args, Debug)]
struct WalkArgs {
    #[command(flatten)]
    output: OutputArgs,
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, value_enum, default_value = "analytic")]
    method: WalkMethod,
    /// Bracket width for λ₀.
    #[arg(long)]
    tol: Option<f64>,
    /// Also estimate the hit probability at this up-step.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    n_mc: u64,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    horizon: u64,
    #[arg(long, default_value_t = DEFAULT_BARRIER)]
    barrier: f64,
    /// Also print the γ constants for this σ2.
    #[arg(long)]
    sigma2: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RuleKind {
    Constant,
    Clip,
    Normalized,
    Negative,
}

#[derive(Args, Debug)]
struct TrickyArgs {
    #[command(flatten)]
    output: OutputArgs,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_enum)]
    rule: RuleKind,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    g1: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    g2: Vec<f64>,
    /// Read g1 and g2 in units of the slope cap G.
    #[arg(long)]
    relative: bool,
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
}

#[derive(Args, Debug)]
struct ScheduleArgs {
    #[command(flatten)]
    output: OutputArgs,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = 1e-8)]
    gamma: f64,
    #[arg(long, default_value_t = 64)]
    t_max: usize,
    #[arg(long, default_value_t = DEFAULT_CHAIN_CONSTANT)]
    constant: f64,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Manifest TOML, or an output file whose header embeds one.
    manifest: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    plot: Option<PathBuf>,
    #[arg(long)]
    print_manifest: bool,
}

/// What to do with a manifest once it is built.
struct Plan {
    manifest: RunManifest,
    out: Option<PathBuf>,
    plot: Option<PathBuf>,
    workers: Option<usize>,
    print_manifest: bool,
}

fn plan_from(output: OutputArgs, run: Command) -> Plan {
    Plan {
        manifest: RunManifest {
            seed: output.seed,
            format: output.format,
            run,
        },
        out: output.out,
        plot: None,
        workers: None,
        print_manifest: output.print_manifest,
    }
}

fn plan(cmd: Cmd) -> Result<Plan, CliError> {
    Ok(match cmd {
        Cmd::Simulate(a) => {
            let params = a.params.params();
            let run = Command::Simulate {
                steps: a.steps,
                eps: None,
                instance: instance_entry(&a.instance, &a.optimizer, params)?,
                optimizer: a.optimizer.config()?,
                oracle: None,
            };
            plan_from(a.output, run)
        }
        Cmd::Sweep(a) => {
            let eta = match (a.eta, a.eta_factor) {
                (Some(eta), _) => EtaRule::Fixed { eta },
                (None, Some(factor)) => EtaRule::Threshold { factor },
                (None, None) => return Err(CliError::User("sweep needs --eta or --eta-factor".into())),
            };
            let sweep = HingeSweep {
                params: a.params.params(),
                gamma: a.gamma,
                eta,
                eps_grid: a.eps_grid,
                t_cap: a.t_cap,
                norm_variant: a.norm_variant,
                seed: a.output.seed,
            };
            let mut p = plan_from(a.output, Command::Sweep { sweep });
            p.workers = a.workers;
            p.plot = a.plot;
            p
        }
        Cmd::Certify(a) => {
            let run = Command::Certify {
                n_samples: a.n_samples,
                instance: instance_entry(&a.instance, &a.optimizer, a.params.params())?,
            };
            plan_from(a.output, run)
        }
        Cmd::Walk(a) => {
            let method = match a.method {
                WalkMethod::Analytic => Lambda0Method::AnalyticUpper,
                WalkMethod::Mc => Lambda0Method::McBisect {
                    n_mc: a.n_mc,
                    horizon: a.horizon,
                    barrier: a.barrier,
                },
            };
            let run = Command::Walk(WalkRun {
                p: a.p,
                delta: a.delta,
                method,
                tol: a.tol,
                lambda: a.lambda,
                n_mc: a.n_mc,
                horizon: a.horizon,
                barrier: a.barrier,
                sigma2: a.sigma2,
            });
            plan_from(a.output, run)
        }
        Cmd::Tricky(a) => {
            let params = a.params.params();
            let kind = match a.rule {
                RuleKind::Constant => OptimizerKind::Constant,
                RuleKind::Clip => OptimizerKind::Clip,
                RuleKind::Normalized => OptimizerKind::Normalized,
                RuleKind::Negative => OptimizerKind::Negative,
            };
            let alpha = step_rule(kind, a.eta, a.c)?.expect("rule kinds map to single-step rules");
            let scale = if a.relative { slope_cap(&params) } else { 1.0 };
            let run = Command::Tricky {
                g1: a.g1.iter().map(|v| v * scale).collect(),
                g2: a.g2.iter().map(|v| v * scale).collect(),
                p: a.p,
                delta: a.delta,
                alpha,
                params,
            };
            plan_from(a.output, run)
        }
        Cmd::Schedule(a) => {
            let run = Command::Schedule {
                eta: a.eta,
                gamma: a.gamma,
                t_max: a.t_max,
                constant: a.constant,
                params: a.params.params(),
            };
            plan_from(a.output, run)
        }
        Cmd::Run(a) => {
            let text = std::fs::read_to_string(&a.manifest)
                .map_err(|e| CliError::User(format!("cannot read {}: {e}", a.manifest.display())))?;
            Plan {
                manifest: RunManifest::from_file_text(&text)?,
                out: a.out,
                plot: a.plot,
                workers: a.workers,
                print_manifest: a.print_manifest,
            }
        }
    })
}

fn seed_override() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|e| CliError::User(format!("{SEED_ENV}={s:?} is not a u64 seed: {e}"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::User(format!("{SEED_ENV}: {e}"))),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

fn execute(mut plan: Plan) -> Result<(), CliError> {
    if let Some(seed) = seed_override()? {
        plan.manifest.seed = seed;
        if let Command::Sweep { sweep } = &mut plan.manifest.run {
            sweep.seed = seed;
        }
    }
    if plan.print_manifest {
        let text = plan.manifest.to_toml()?;
        return match &plan.out {
            Some(p) => write_file(p, &text),
            None => {
                print!("{text}");
                Ok(())
            }
        };
    }
    let outcome = run::execute(&plan.manifest, plan.workers)?;
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let header = plan.manifest.header(stamp)?;
    let mut text = header.clone();
    text += &outcome.body;
    for line in &outcome.footer {
        text += &format!("# {line}\n");
    }
    match &plan.out {
        Some(p) => {
            write_file(p, &text)?;
            for line in &outcome.footer {
                println!("{line}");
            }
        }
        None => print!("{text}"),
    }
    if let (Some(path), Some(series)) = (&plan.plot, &outcome.plot) {
        write_file(path, &(header + series))?;
    }
    match outcome.failure {
        Some(f) => Err(CliError::User(f)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match plan(cli.cmd).and_then(execute) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    #[test]
    fn grammar_is_consistent() {
        super::Cli::command().debug_assert();
    }
}
