//! `ponder`: outcome distributions, entanglement ratio surfaces, coupling
//! sweeps and master-equation checks for the ponderomotive purification
//! protocol.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod selftest;
mod table;

use config::{CommonArgs, Defaults, DynamicsArgs, KappaSpec, RunConfig};
use ponder_core::Beta;

#[derive(Parser)]
#[command(
    name = "ponder",
    version,
    about = "Entanglement purification with a ponderomotive meter"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Outcome density P(x) on the quadrature grid (columns x,P)
    Distribution(CommonArgs),
    /// Entanglement ratio over an outcome lattice and a list of couplings (columns x,kappa,Gamma)
    GammaSurface(CommonArgs),
    /// Success probability and efficiency per coupling (columns kappa,P_S,Upsilon,Xi,defined)
    Sweep(CommonArgs),
    /// Integrate the meter master equation and check its steady state
    DynamicsCheck {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        dynamics: DynamicsArgs,
    },
    /// Run the built-in invariant suite
    Selftest {
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

fn default_kappa_list() -> KappaSpec {
    KappaSpec::Many((1..=20).map(|k| 0.25 * k as f64).collect())
}

fn run(command: Command) -> Result<(), commands::CliError> {
    match command {
        Command::Distribution(common) => {
            let defaults = Defaults {
                r: 0.4,
                kappa: KappaSpec::One(3.0),
                beta: Beta::Infinite,
                x_min: None,
                x_max: None,
                x_step: None,
            };
            commands::distribution(&RunConfig::resolve(&common, None, defaults)?)
        }
        Command::GammaSurface(common) => {
            let defaults = Defaults {
                r: 0.3,
                kappa: KappaSpec::Many(vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]),
                beta: Beta::Infinite,
                x_min: Some(-15.0),
                x_max: Some(5.0),
                x_step: Some(0.1),
            };
            commands::gamma_surface(&RunConfig::resolve(&common, None, defaults)?)
        }
        Command::Sweep(common) => {
            let defaults = Defaults {
                r: 0.3,
                kappa: default_kappa_list(),
                beta: Beta::Infinite,
                x_min: None,
                x_max: None,
                x_step: None,
            };
            commands::sweep(&RunConfig::resolve(&common, None, defaults)?)
        }
        Command::DynamicsCheck { common, dynamics } => {
            let defaults = Defaults {
                r: 0.3,
                kappa: KappaSpec::One(0.5),
                beta: Beta::Finite(1.0),
                x_min: None,
                x_max: None,
                x_step: None,
            };
            commands::dynamics_check(&RunConfig::resolve(&common, Some(&dynamics), defaults)?)
        }
        Command::Selftest { .. } => unreachable!("handled in main"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Selftest { inject_fault } = cli.command {
        return if selftest::run(inject_fault) {
            ExitCode::SUCCESS
        } else {
            ExitCode::from(1)
        };
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
