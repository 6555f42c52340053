//! Command outcomes and their exit codes.

use std::fmt;
use std::process::ExitCode;

/// Why a command did not succeed.
#[derive(Debug)]
pub enum Failure {
    /// Malformed or inconsistent configuration (exit 2).
    Config(anyhow::Error),
    /// A run completed but an invariant residual or check exceeded its
    /// threshold (exit 1).
    Invariant(String),
    /// The computation itself failed, e.g. the integrator gave up (exit 1).
    Run(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Config(_) => ExitCode::from(2),
            Failure::Invariant(_) | Failure::Run(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "configuration error: {e:#}"),
            Failure::Invariant(msg) => write!(f, "invariant failure: {msg}"),
            Failure::Run(e) => write!(f, "run failed: {e:#}"),
        }
    }
}

/// Attach a failure class to fallible results.
pub trait Classify<T> {
    fn config(self) -> Result<T, Failure>;
    fn run(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Config(e.into()))
    }
    fn run(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Run(e.into()))
    }
}
