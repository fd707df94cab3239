//! Run manifests: the TOML description of one CLI run, and the header that
//! embeds it in every output file.

use serde::{Deserialize, Serialize};

use rsmooth_core::analysis::{HingeSweep, Lambda0Method};
use rsmooth_core::{InstanceSpec, OptimizerConfig, Oracle, ProblemInstance, ProblemParams, StepSizeFn};

use crate::error::CliError;

/// Output encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    /// One JSON object per line. Comment lines start with `#`.
    Jsonl,
}

/// Recipe plus constants. `dim` and `x0`, when present, are checked against
/// the built instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceEntry {
    pub spec: InstanceSpec,
    pub params: ProblemParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

impl InstanceEntry {
    pub fn build(&self) -> Result<ProblemInstance, CliError> {
        let inst = self.spec.build(&self.params)?;
        if let Some(d) = self.dim {
            if d != inst.dim() {
                return Err(CliError::User(format!(
                    "manifest dim {d} but the {} instance has dim {}",
                    inst.lemma_tag(),
                    inst.dim()
                )));
            }
        }
        if let Some(x0) = &self.x0 {
            if x0.as_slice() != inst.x0() {
                return Err(CliError::User("manifest x0 differs from the constructed x0".into()));
            }
        }
        Ok(inst)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkRun {
    pub p: f64,
    pub delta: f64,
    pub method: Lambda0Method,
    /// Bracket width for λ₀; defaults by method.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Also estimate `z_{p,λ}` at this λ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub n_mc: u64,
    pub horizon: u64,
    pub barrier: f64,
    /// Also report the γ constants for this σ2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    Simulate {
        steps: usize,
        /// Stationarity level for the reported hitting time; defaults to
        /// `params.epsilon`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eps: Option<f64>,
        instance: InstanceEntry,
        optimizer: OptimizerConfig,
        /// Replaces the instance's own oracle.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        oracle: Option<Oracle>,
    },
    Sweep {
        sweep: HingeSweep,
    },
    Certify {
        n_samples: usize,
        instance: InstanceEntry,
    },
    Walk(WalkRun),
    Tricky {
        g1: Vec<f64>,
        g2: Vec<f64>,
        p: f64,
        delta: f64,
        alpha: StepSizeFn,
        params: ProblemParams,
    },
    Schedule {
        eta: f64,
        gamma: f64,
        t_max: usize,
        constant: f64,
        params: ProblemParams,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Sweep { .. } => "sweep",
            Command::Certify { .. } => "certify",
            Command::Walk(_) => "walk",
            Command::Tricky { .. } => "tricky",
            Command::Schedule { .. } => "schedule",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    pub run: Command,
}

const MANIFEST_BEGIN: &str = "# manifest:";
const MANIFEST_END: &str = "# end manifest";
const MANIFEST_LINE: &str = "# |";
/// Prefix of the only header line that varies between identical runs.
pub const TIMESTAMP_PREFIX: &str = "# generated_unix=";

impl RunManifest {
    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Internal(format!("cannot serialize manifest: {e}")))
    }

    pub fn from_toml(s: &str) -> Result<Self, CliError> {
        toml::from_str(s).map_err(|e| CliError::User(format!("bad manifest: {e}")))
    }

    /// Accepts a manifest file or an output file with an embedded manifest.
    pub fn from_file_text(s: &str) -> Result<Self, CliError> {
        if s.lines().any(|l| l == MANIFEST_BEGIN) {
            Self::from_toml(&extract_embedded(s)?)
        } else {
            Self::from_toml(s)
        }
    }

    /// Comment block written at the top of every output.
    pub fn header(&self, timestamp: u64) -> Result<String, CliError> {
        let mut h = format!("# rsmooth {} {}\n", env!("CARGO_PKG_VERSION"), self.run.name());
        h += &format!("{TIMESTAMP_PREFIX}{timestamp}\n");
        h += &format!("# seed={}\n", self.seed);
        h += MANIFEST_BEGIN;
        h.push('\n');
        for line in self.to_toml()?.lines() {
            if line.is_empty() {
                h += MANIFEST_LINE;
            } else {
                h += &format!("{MANIFEST_LINE} {line}");
            }
            h.push('\n');
        }
        h += MANIFEST_END;
        h.push('\n');
        Ok(h)
    }
}

fn extract_embedded(s: &str) -> Result<String, CliError> {
    let mut out = String::new();
    let mut inside = false;
    for line in s.lines() {
        if line == MANIFEST_BEGIN {
            inside = true;
        } else if line == MANIFEST_END {
            return Ok(out);
        } else if inside {
            let body = line
                .strip_prefix(MANIFEST_LINE)
                .ok_or_else(|| CliError::User(format!("malformed manifest line {line:?}")))?;
            out += body.strip_prefix(' ').unwrap_or(body);
            out.push('\n');
        }
    }
    Err(CliError::User("embedded manifest is not terminated".into()))
}
