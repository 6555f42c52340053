//! `tribody check`: run verification suites.

use std::path::PathBuf;

use anyhow::anyhow;
use serde::Serialize;
use tribody::suites::{Measurement, Suite};

use crate::config;
use crate::failure::{Classify, Failure};

/// Arguments of the `check` command.
#[derive(Clone, Debug, clap::Args)]
pub struct CheckArgs {
    /// Suite to run: gradients, conservation, charts, transit, blowup,
    /// geometry, covering, landscape, kepler or all.
    pub suite: String,
    /// Masses for the mass-dependent suites.
    #[arg(long, value_parser = config::parse_masses_arg, default_value = "1,2,3")]
    pub masses: [f64; 3],
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct CheckReport<'a> {
    suite: &'a str,
    masses: [f64; 3],
    seed: u64,
    passed: bool,
    measurements: Vec<Measurement>,
}

/// Suites selected by a name.
pub fn select(name: &str) -> Option<Vec<Suite>> {
    match name {
        "all" => Some(Suite::ALL.to_vec()),
        _ => Suite::parse(name).map(|s| vec![s]),
    }
}

/// Run the `check` command.
pub fn run(args: &CheckArgs) -> Result<(), Failure> {
    let suites = select(&args.suite).ok_or_else(|| Failure::Config(anyhow!("unknown suite `{}`", args.suite)))?;
    let m = config::masses(args.masses).config()?;
    let measurements: Vec<Measurement> = suites.iter().flat_map(|s| s.run(&m, args.seed)).collect();
    let failed: Vec<&Measurement> = measurements.iter().filter(|x| !x.passed).collect();
    for x in &measurements {
        eprintln!(
            "{} {:<44} {:>12.3e}  (threshold {:e}) {}",
            if x.passed { "ok  " } else { "FAIL" },
            x.name,
            x.value,
            x.threshold,
            x.detail
        );
    }
    eprintln!("{}/{} checks passed", measurements.len() - failed.len(), measurements.len());
    let report = CheckReport {
        suite: &args.suite,
        masses: args.masses,
        seed: args.seed,
        passed: failed.is_empty(),
        measurements: measurements.clone(),
    };
    let json = serde_json::to_string_pretty(&report).run()?;
    match &args.out {
        Some(p) => std::fs::write(p, json + "\n").run()?,
        None => println!("{json}"),
    }
    if failed.is_empty() {
        Ok(())
    } else {
        let names: Vec<&str> = failed.iter().map(|x| x.name.as_str()).collect();
        Err(Failure::Invariant(format!("failed checks: {}", names.join(", "))))
    }
}
