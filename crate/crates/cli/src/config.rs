//! Run configuration: JSON file plus command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use tribody::blowup::TimeScale;
use tribody::integrate::{IntegratorOptions, Output};
use tribody::Masses;

/// Output format of trajectories.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Jsonl,
    Csv,
}

/// Where the initial state comes from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Initial {
    /// Named initial condition (`lagrange_homothetic`, `collision_transit`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Chart in which `state` is given (defaults to the run chart).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<String>,
    /// Field → value map of the state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<BTreeMap<String, f64>>,
}

/// Integrator settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
    pub max_steps: usize,
    /// Number of evenly spaced output samples; every accepted step when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        let d = IntegratorOptions::default();
        Self { rel_tol: d.rel_tol, abs_tol: d.abs_tol, max_step: None, max_steps: d.max_steps, samples: None }
    }
}

fn default_timescale() -> String {
    "f1".into()
}

fn default_threshold() -> f64 {
    1e-8
}

/// A complete `integrate` configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub masses: [f64; 3],
    pub chart: String,
    #[serde(default = "default_timescale")]
    pub timescale: String,
    /// Angular momentum of reduced charts; derived from the initial state
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Energy level; derived from the initial state when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    pub initial: Initial,
    pub span: f64,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub seed: u64,
    /// Largest admissible invariant residual.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

/// Command-line overrides of a [`RunConfig`].
#[derive(Clone, Debug, Default, clap::Args)]
pub struct Overrides {
    /// Masses as `m1,m2,m3`.
    #[arg(long, value_parser = parse_masses_arg)]
    pub masses: Option<[f64; 3]>,
    /// Chart name (prefix `blown_` for the blown-up version).
    #[arg(long)]
    pub chart: Option<String>,
    /// Angular momentum of reduced charts.
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    /// Energy level `h`.
    #[arg(long, allow_hyphen_values = true)]
    pub energy: Option<f64>,
    /// Blow-up time scale.
    #[arg(long, value_parser = ["f1", "f2"])]
    pub timescale: Option<String>,
    /// Integrator tolerance (relative and absolute).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Integration span in the chart's independent variable.
    #[arg(long, allow_hyphen_values = true)]
    pub span: Option<f64>,
    /// Trajectory output path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report output path.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Seed recorded in the report.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trajectory format.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Named initial condition.
    #[arg(long)]
    pub preset: Option<String>,
    /// Invariant residual threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
}

/// Parse `a,b,c` into three reals.
pub fn parse_masses_arg(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated masses, got `{s}`"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.parse().map_err(|_| format!("`{p}` is not a number"))?;
    }
    Ok(out)
}

/// Validated masses.
pub fn masses(m: [f64; 3]) -> Result<Masses> {
    Masses::new(m[0], m[1], m[2]).map_err(|e| anyhow!("{e}"))
}

/// Parse a time-scale name.
pub fn timescale(name: &str) -> Result<TimeScale> {
    TimeScale::parse(name).ok_or_else(|| anyhow!("unknown time scale `{name}` (expected f1 or f2)"))
}

impl RunConfig {
    /// Read a JSON configuration file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Parse a JSON configuration; errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| anyhow!("invalid configuration: {e}"))
    }

    /// Build a configuration from an optional file and command-line overrides.
    pub fn resolve(file: Option<&Path>, o: &Overrides) -> Result<Self> {
        let mut cfg = match file {
            Some(p) => Self::from_file(p)?,
            None => Self {
                masses: o.masses.ok_or_else(|| anyhow!("--masses is required without --config"))?,
                chart: o.chart.clone().ok_or_else(|| anyhow!("--chart is required without --config"))?,
                timescale: default_timescale(),
                mu: None,
                h: None,
                initial: Initial::default(),
                span: o.span.ok_or_else(|| anyhow!("--span is required without --config"))?,
                integrator: IntegratorConfig::default(),
                out: None,
                report: None,
                format: Format::default(),
                seed: 0,
                threshold: default_threshold(),
            },
        };
        if let Some(m) = o.masses {
            cfg.masses = m;
        }
        if let Some(c) = &o.chart {
            cfg.chart = c.clone();
        }
        if let Some(ts) = &o.timescale {
            cfg.timescale = ts.clone();
        }
        if o.mu.is_some() {
            cfg.mu = o.mu;
        }
        if o.energy.is_some() {
            cfg.h = o.energy;
        }
        if let Some(t) = o.tol {
            cfg.integrator.rel_tol = t;
            cfg.integrator.abs_tol = t;
        }
        if let Some(s) = o.span {
            cfg.span = s;
        }
        if o.out.is_some() {
            cfg.out = o.out.clone();
        }
        if o.report.is_some() {
            cfg.report = o.report.clone();
        }
        if let Some(s) = o.seed {
            cfg.seed = s;
        }
        if let Some(f) = o.format {
            cfg.format = f;
        }
        if let Some(p) = &o.preset {
            cfg.initial = Initial { preset: Some(p.clone()), ..Initial::default() };
        }
        if let Some(t) = o.threshold {
            cfg.threshold = t;
        }
        cfg.check()?;
        Ok(cfg)
    }

    /// Field-level sanity checks that do not need the chart.
    pub fn check(&self) -> Result<()> {
        masses(self.masses)?;
        timescale(&self.timescale)?;
        if !self.span.is_finite() || self.span == 0.0 {
            bail!("field `span` must be finite and nonzero, got {}", self.span);
        }
        if !(self.threshold > 0.0) {
            bail!("field `threshold` must be positive");
        }
        match (&self.initial.preset, &self.initial.state) {
            (Some(_), Some(_)) => bail!("field `initial`: give either `preset` or `state`, not both"),
            (None, None) => bail!("field `initial`: a `preset` or a `state` is required"),
            _ => {}
        }
        if self.initial.preset.is_some() && self.initial.chart.is_some() {
            bail!("field `initial.chart` applies only to an explicit `state`");
        }
        if matches!(self.integrator.samples, Some(n) if n < 2) {
            bail!("field `integrator.samples` must be at least 2");
        }
        Ok(())
    }

    /// Integrator options for this run.
    pub fn options(&self) -> IntegratorOptions {
        let i = &self.integrator;
        let output = match i.samples {
            Some(n) => Output::Times((1..n).map(|k| self.span * k as f64 / (n - 1) as f64).collect()),
            None => Output::Steps,
        };
        IntegratorOptions {
            rel_tol: i.rel_tol,
            abs_tol: i.abs_tol,
            max_step: i.max_step.unwrap_or(f64::INFINITY),
            max_steps: i.max_steps,
            output,
            ..IntegratorOptions::default()
        }
    }
}
