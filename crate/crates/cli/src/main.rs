//! `tribody`: integrate three-body orbits in any chart of the atlas, map
//! trajectories between charts, emit potential grids and run the
//! verification suites.
//!
//! Exit codes: 0 success, 1 invariant or run failure, 2 configuration error.

mod check;
mod config;
mod failure;
mod integrate;
mod potential;
mod records;
mod transform;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{Overrides, RunConfig};
use crate::failure::{Classify, Failure};

#[derive(Parser, Debug)]
#[command(name = "tribody", version, about = "Planar three-body problem across coordinate charts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate a chart's flow; writes the trajectory and an invariant report.
    Integrate {
        /// JSON configuration file; flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Map a trajectory from one chart to another.
    Transform(transform::TransformArgs),
    /// Emit a shape-potential (or covering) grid as CSV.
    Potential(potential::PotentialArgs),
    /// Run verification suites.
    Check(check::CheckArgs),
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Integrate { config, overrides } => {
            let cfg = RunConfig::resolve(config.as_deref(), &overrides).config()?;
            integrate::run(&cfg)
        }
        Command::Transform(args) => transform::run(&args),
        Command::Potential(args) => potential::run(&args),
        Command::Check(args) => check::run(&args),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("tribody: {f}");
            f.exit_code()
        }
    }
}
