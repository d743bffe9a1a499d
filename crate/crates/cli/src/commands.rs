//! The computing subcommands.

use std::f64::consts::SQRT_2;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};

use ponder_core::dynamics::{steady_state_report, SectorCheck, DEFAULT_SECTORS};
use ponder_core::meter::DensityPath;
use ponder_core::protocol::sweep_kappa;
use ponder_core::{
    Beta, DynamicsParams, DynamicsSettings, MeterModel, OutcomeDistribution, Purification, SqueezedEnsemble,
};

use crate::config::{ConfigError, RunConfig};
use crate::table::{format_sig, Cell, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Numerical(ponder_core::Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    CheckFailed(String),
}

impl From<ponder_core::Error> for CliError {
    fn from(e: ponder_core::Error) -> Self {
        match e {
            ponder_core::Error::InvalidParameter { .. } => Self::Config(ConfigError::Value(e.to_string())),
            other => Self::Numerical(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical(_) | Self::Io(_) | Self::CheckFailed(_) => 3,
        }
    }
}

fn emit(table: &Table, cfg: &RunConfig) -> Result<(), CliError> {
    match &cfg.output {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            table.write(cfg.format, &mut w)?;
            w.flush()?;
        }
        None => match table.write(cfg.format, std::io::stdout().lock()) {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
            other => other?,
        },
    }
    Ok(())
}

fn ensemble(cfg: &RunConfig) -> Result<SqueezedEnsemble, CliError> {
    Ok(SqueezedEnsemble::new(cfg.r, cfg.pairs)?)
}

/// `x,P` at the quadrature nodes of the outcome grid.
pub fn distribution(cfg: &RunConfig) -> Result<(), CliError> {
    let model = MeterModel::new(cfg.single_kappa()?, cfg.beta)?;
    let path = DensityPath::HermiteSeries { tol: cfg.series_tol };
    let dist = OutcomeDistribution::new(&ensemble(cfg)?, &model, &cfg.policy(), path)?;
    let grid = dist.grid(&cfg.grid_spec())?;
    let mut table = Table::new(&["x", "P"]);
    for &x in grid.nodes() {
        let p = dist.density(x);
        if !p.is_finite() {
            return Err(ponder_core::Error::DegenerateOutcome { x }.into());
        }
        table.push(&[Cell::Num(x), Cell::Num(p)]);
    }
    emit(&table, cfg)
}

/// `n + 1` evenly spaced points from `lo` to `hi` with spacing at most `step`.
/// Points are interpolated from the ends so that round values such as 0 are hit exactly.
pub fn lattice(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let ratio = (hi - lo) / step;
    let n = if (ratio - ratio.round()).abs() < 1e-9 {
        ratio.round()
    } else {
        ratio.ceil()
    } as usize;
    let n = n.max(1);
    (0..=n)
        .map(|i| {
            let t = i as f64 / n as f64;
            lo * (1.0 - t) + hi * t
        })
        .collect()
}

/// `x,kappa,Gamma` on a uniform outcome lattice for every coupling.
pub fn gamma_surface(cfg: &RunConfig) -> Result<(), CliError> {
    let e = ensemble(cfg)?;
    let policy = cfg.policy();
    let xs = lattice(
        cfg.x_min.unwrap_or(-15.0),
        cfg.x_max.unwrap_or(5.0),
        cfg.x_step.unwrap_or(0.1),
    );
    let mut table = Table::new(&["x", "kappa", "Gamma"]);
    for &kappa in &cfg.kappa {
        let p = Purification::new(&e, &MeterModel::new(kappa, cfg.beta)?, &policy)?;
        for &x in &xs {
            table.push(&[Cell::Num(x), Cell::Num(kappa), Cell::Num(p.gamma(x)?)]);
        }
    }
    emit(&table, cfg)
}

/// `kappa,P_S,Upsilon,Xi,defined` for every coupling.
pub fn sweep(cfg: &RunConfig) -> Result<(), CliError> {
    let rows = sweep_kappa(
        &ensemble(cfg)?,
        cfg.beta,
        cfg.epsilon,
        &cfg.kappa,
        &cfg.policy(),
        &cfg.grid_spec(),
    )?;
    let mut table = Table::new(&["kappa", "P_S", "Upsilon", "Xi", "defined"]);
    let opt = |v: Option<f64>| v.map_or(Cell::Missing, Cell::Num);
    let mut failures = Vec::new();
    for row in &rows {
        if let Some(err) = &row.error {
            failures.push(format!("kappa = {}: {err}", row.kappa));
        }
        table.push(&[
            Cell::Num(row.kappa),
            Cell::Num(row.success_prob),
            opt(row.upsilon),
            opt(row.xi),
            Cell::Flag(row.defined()),
        ]);
    }
    emit(&table, cfg)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::CheckFailed(failures.join("\n")))
    }
}

/// Integrate the meter master equation and compare against the displaced
/// thermal steady state. Prints a text report; writes trajectories to `--output`.
pub fn dynamics_check(cfg: &RunConfig) -> Result<(), CliError> {
    let beta = match cfg.beta {
        Beta::Infinite => {
            return Err(ConfigError::Value("dynamics-check needs a finite beta".into()).into());
        }
        b => b,
    };
    let params = DynamicsParams::from_kappa(cfg.single_kappa()?, cfg.gamma.unwrap_or(0.2), beta)?;
    let mut settings = DynamicsSettings::for_params(&params, 2);
    if let Some(dt) = cfg.dt {
        settings.dt = dt;
    }
    if let Some(t) = cfg.t_final {
        settings.t_final = t;
    }
    settings.meter_cut = cfg.meter_cut;
    let report = steady_state_report(&params, &DEFAULT_SECTORS, &settings)?;

    let mut text = String::new();
    let _ = writeln!(
        text,
        "kappa = {}, gamma = {}, beta = {}, meter cut = {}, dt = {:e}, t = {}",
        params.kappa(),
        params.gamma,
        params.beta,
        report.meter_cut,
        settings.dt,
        settings.t_final
    );
    for s in &report.sectors {
        let status = if s.passed { "PASS" } else { "FAIL" };
        let detail = match s.check {
            SectorCheck::Diagonal {
                residual,
                final_fidelity,
                max_trace_deviation,
                max_hermiticity_deviation,
                ..
            } => format!(
                "residual {residual:.2e}, fidelity {final_fidelity:.10}, trace drift {max_trace_deviation:.2e}, \
                 hermiticity {max_hermiticity_deviation:.2e}, target mean {}",
                format_sig(-SQRT_2 * params.kappa() * s.n as f64)
            ),
            SectorCheck::Coherence {
                initial_trace_norm,
                final_trace_norm,
            } => format!(
                "trace norm {initial_trace_norm:.4e} -> {final_trace_norm:.4e} (ratio {:.2e})",
                final_trace_norm / initial_trace_norm
            ),
        };
        let _ = writeln!(
            text,
            "{status} sector ({}, {}): {detail}, local error {:.1e}",
            s.n, s.m, s.local_error_estimate
        );
    }
    print!("{text}");

    if cfg.output.is_some() {
        let mut table = Table::new(&["n", "m", "t", "trace_re", "trace_im", "trace_norm", "fidelity"]);
        for s in &report.sectors {
            for sample in &s.samples {
                table.push(&[
                    Cell::Num(s.n as f64),
                    Cell::Num(s.m as f64),
                    Cell::Num(sample.t),
                    Cell::Num(sample.trace.re),
                    Cell::Num(sample.trace.im),
                    Cell::Num(sample.trace_norm),
                    sample.fidelity.map_or(Cell::Missing, Cell::Num),
                ]);
            }
        }
        emit(&table, cfg)?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::CheckFailed("steady-state check failed".into()))
    }
}
