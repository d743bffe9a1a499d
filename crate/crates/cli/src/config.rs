//! Run configuration: command-line flags layered over an optional TOML file
//! layered over per-command defaults.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use serde::Deserialize;

use ponder_core::Beta;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config file {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("{0}")]
    Value(String),
}

/// Output encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// A coupling given either as one number or as a list.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum KappaSpec {
    One(f64),
    Many(Vec<f64>),
}

impl KappaSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Self::One(k) => vec![*k],
            Self::Many(ks) => ks.clone(),
        }
    }
}

impl FromStr for KappaSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let values = s
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad coupling `{t}`: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(match values.as_slice() {
            [k] => Self::One(*k),
            _ => Self::Many(values),
        })
    }
}

/// Temperature as a positive number or the string "inf".
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum BetaSpec {
    Number(f64),
    Token(String),
}

impl BetaSpec {
    fn resolve(&self) -> Result<Beta, ConfigError> {
        let parsed = match self {
            Self::Number(b) => Beta::new(*b).map_err(|e| e.to_string()),
            Self::Token(s) => s.parse::<Beta>().map_err(|e| e.to_string()),
        };
        parsed.map_err(ConfigError::Value)
    }
}

impl FromStr for BetaSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<Beta>().map_err(|e| e.to_string())?;
        Ok(Self::Token(s.to_string()))
    }
}

/// Keys accepted in a TOML config file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub r: Option<f64>,
    pub pairs: Option<usize>,
    pub kappa: Option<KappaSpec>,
    pub beta: Option<BetaSpec>,
    pub epsilon: Option<f64>,
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub x_step: Option<f64>,
    pub tail_tol: Option<f64>,
    pub series_tol: Option<f64>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub gamma: Option<f64>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub meter_cut: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Flags shared by every computing command.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML file with any of the flag names (underscores) as keys
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Squeezing parameter
    #[arg(long)]
    pub r: Option<f64>,
    /// Number of entangled pairs
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Coupling constant, a single value or a comma-separated list
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<KappaSpec>,
    /// Inverse meter temperature, or "inf"
    #[arg(long)]
    pub beta: Option<BetaSpec>,
    /// Acceptance threshold on the entanglement ratio
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x_max: Option<f64>,
    /// Outcome resolution: quadrature panel width, or lattice spacing for gamma-surface
    #[arg(long)]
    pub x_step: Option<f64>,
    /// Allowed prior mass above the photon-number cutoff
    #[arg(long)]
    pub tail_tol: Option<f64>,
    /// Truncation tolerance of the thermal Hermite series
    #[arg(long)]
    pub series_tol: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write to this file instead of standard output
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Dynamics-only flags.
#[derive(Debug, Clone, Default, Args)]
pub struct DynamicsArgs {
    /// Damping rate in units of the meter frequency
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_final: Option<f64>,
    /// Highest meter Fock level kept
    #[arg(long)]
    pub meter_cut: Option<usize>,
}

/// Per-command fallback values.
#[derive(Debug, Clone)]
pub struct Defaults {
    pub r: f64,
    pub kappa: KappaSpec,
    pub beta: Beta,
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub x_step: Option<f64>,
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub r: f64,
    pub pairs: usize,
    pub kappa: Vec<f64>,
    pub beta: Beta,
    pub epsilon: f64,
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub x_step: Option<f64>,
    pub tail_tol: f64,
    pub series_tol: f64,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub gamma: Option<f64>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub meter_cut: Option<usize>,
}

impl RunConfig {
    pub fn resolve(
        common: &CommonArgs,
        dynamics: Option<&DynamicsArgs>,
        defaults: Defaults,
    ) -> Result<Self, ConfigError> {
        let file = match &common.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let dyn_args = dynamics.cloned().unwrap_or_default();
        let beta = match common.beta.as_ref().or(file.beta.as_ref()) {
            Some(spec) => spec.resolve()?,
            None => defaults.beta,
        };
        let kappa = common.kappa.clone().or(file.kappa).unwrap_or(defaults.kappa).values();
        let policy = ponder_core::TruncationPolicy::default();
        let cfg = Self {
            r: common.r.or(file.r).unwrap_or(defaults.r),
            pairs: common.pairs.or(file.pairs).unwrap_or(2),
            kappa,
            beta,
            epsilon: common.epsilon.or(file.epsilon).unwrap_or(1.0),
            x_min: common.x_min.or(file.x_min).or(defaults.x_min),
            x_max: common.x_max.or(file.x_max).or(defaults.x_max),
            x_step: common.x_step.or(file.x_step).or(defaults.x_step),
            tail_tol: common.tail_tol.or(file.tail_tol).unwrap_or(policy.tail_tol),
            series_tol: common.series_tol.or(file.series_tol).unwrap_or(policy.series_tol),
            output: common.output.clone().or(file.output),
            format: common.format.or(file.format).unwrap_or(Format::Csv),
            gamma: dyn_args.gamma.or(file.gamma),
            dt: dyn_args.dt.or(file.dt),
            t_final: dyn_args.t_final.or(file.t_final),
            meter_cut: dyn_args.meter_cut.or(file.meter_cut),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Value(msg));
        if self.kappa.is_empty() {
            return fail("kappa list is empty".into());
        }
        if let Some(k) = self.kappa.iter().find(|k| !(**k >= 0.0) || !k.is_finite()) {
            return fail(format!("kappa must be finite and >= 0, got {k}"));
        }
        if !(self.epsilon >= 1.0) || !self.epsilon.is_finite() {
            return fail(format!("epsilon must be finite and >= 1, got {}", self.epsilon));
        }
        if let (Some(lo), Some(hi)) = (self.x_min, self.x_max) {
            if !(lo < hi) {
                return fail(format!("x_min must be below x_max, got [{lo}, {hi}]"));
            }
        }
        if let Some(s) = self.x_step {
            if !(s > 0.0) || !s.is_finite() {
                return fail(format!("x_step must be > 0, got {s}"));
            }
        }
        if !(self.series_tol > 0.0) {
            return fail(format!("series_tol must be > 0, got {}", self.series_tol));
        }
        Ok(())
    }

    pub fn policy(&self) -> ponder_core::TruncationPolicy {
        ponder_core::TruncationPolicy {
            tail_tol: self.tail_tol,
            series_tol: self.series_tol,
            n_max: None,
            meter_cut: self.meter_cut,
        }
    }

    pub fn grid_spec(&self) -> ponder_core::meter::GridSpec {
        ponder_core::meter::GridSpec {
            x_min: self.x_min,
            x_max: self.x_max,
            panel_width: self.x_step,
        }
    }

    /// The single coupling of commands that take one.
    pub fn single_kappa(&self) -> Result<f64, ConfigError> {
        match self.kappa.as_slice() {
            [k] => Ok(*k),
            _ => Err(ConfigError::Value(format!(
                "this command takes a single kappa, got {} values",
                self.kappa.len()
            ))),
        }
    }
}
