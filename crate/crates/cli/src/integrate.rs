//! `tribody integrate`: run a chart's flow and report its invariants.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use anyhow::anyhow;
use serde::Serialize;
use tribody::atlas::{Chart, ChartKind, ChartSpec, HubSample, Preset};
use tribody::integrate::{integrate, InvariantSummary, Stats, Termination, Trajectory};
use tribody::Masses;

use crate::config::{self, RunConfig};
use crate::failure::{Classify, Failure};
use crate::records::{write_records, Record};

/// Tolerance of the initial-state validity check.
const VALIDITY_TOL: f64 = 1e-8;

#[derive(Serialize)]
struct EventEntry {
    label: String,
    s: f64,
    t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho12: Option<f64>,
}

#[derive(Serialize)]
struct FinalSample {
    s: f64,
    t: f64,
    state: BTreeMap<String, f64>,
}

/// Summary report of one run.
#[derive(Serialize)]
struct Report {
    chart: String,
    masses: [f64; 3],
    mu: f64,
    h: f64,
    timescale: String,
    seed: u64,
    span: f64,
    termination: Termination,
    stats: Stats,
    samples: usize,
    #[serde(rename = "final")]
    final_sample: FinalSample,
    #[serde(skip_serializing_if = "Option::is_none")]
    v_final: Option<f64>,
    invariants: Vec<InvariantSummary>,
    threshold: f64,
    violations: Vec<String>,
    passed: bool,
    events: Vec<EventEntry>,
}

/// Build the chart and its initial state from the configuration.
pub fn prepare(cfg: &RunConfig) -> Result<(Chart, Vec<f64>), Failure> {
    let m = config::masses(cfg.masses).config()?;
    let ts = config::timescale(&cfg.timescale).config()?;
    let mut spec = ChartSpec::parse_name(&cfg.chart, m, ts).config()?;
    let needs_level = spec.kind.is_regularized() || spec.blowup.is_some();

    let hub = match (&cfg.initial.preset, &cfg.initial.state) {
        (Some(name), _) => {
            let preset = Preset::parse(name).ok_or_else(|| Failure::Config(anyhow!("unknown preset `{name}`")))?;
            Some(preset.state(&m, cfg.h.unwrap_or(-1.0)).config()?)
        }
        (None, Some(state)) => match &cfg.initial.chart {
            Some(src) if src != &cfg.chart => Some(source_hub(cfg, &m, src, state)?),
            _ => None,
        },
        (None, None) => return Err(Failure::Config(anyhow!("field `initial`: a `preset` or a `state` is required"))),
    };

    let y0 = match &hub {
        Some(hub) => {
            spec.mu = cfg.mu.unwrap_or_else(|| hub.angular_momentum());
            spec.h = match cfg.h {
                Some(h) => h,
                None => hub.energy(&m).config()?,
            };
            let chart = Chart::new(spec).config()?;
            let y = chart.from_hub(hub, None).config()?;
            return finish(chart, y);
        }
        None => cfg.initial.state.as_ref().expect("checked above"),
    };
    spec.mu = cfg.mu.unwrap_or(0.0);
    spec.h = match (cfg.h, needs_level) {
        (Some(h), _) => h,
        (None, false) => 0.0,
        (None, true) => {
            return Err(Failure::Config(anyhow!("field `h` is required for chart `{}`", cfg.chart)));
        }
    };
    let chart = Chart::new(spec).config()?;
    let y = chart.state_from_map(y0).config()?;
    finish(chart, y)
}

fn finish(chart: Chart, y: Vec<f64>) -> Result<(Chart, Vec<f64>), Failure> {
    chart
        .validate(&y, VALIDITY_TOL)
        .map_err(|e| Failure::Config(anyhow!("initial state is not valid in chart `{}`: {e}", chart.spec.name())))?;
    Ok((chart, y))
}

/// Physical state of an initial condition given in another chart.
fn source_hub(cfg: &RunConfig, m: &Masses, src: &str, state: &BTreeMap<String, f64>) -> Result<HubSample, Failure> {
    let ts = config::timescale(&cfg.timescale).config()?;
    let mut spec = ChartSpec::parse_name(src, *m, ts).config()?;
    if spec.kind.is_reduced() && cfg.mu.is_none() {
        return Err(Failure::Config(anyhow!("field `mu` is required for a state given in reduced chart `{src}`")));
    }
    spec.mu = cfg.mu.unwrap_or(0.0);
    spec.h = cfg.h.unwrap_or(0.0);
    let chart = Chart::new(spec).config()?;
    let y = chart.state_from_map(state).config()?;
    chart.to_hub(0.0, &y).config()
}

/// Trajectory samples as records.
pub fn records(chart: &Chart, traj: &Trajectory) -> Vec<Record> {
    let names: Vec<&str> = traj.invariant_names();
    let rescaled = chart.spec.kind != ChartKind::Relative;
    traj.times
        .iter()
        .zip(&traj.states)
        .zip(&traj.residuals)
        .map(|((&s, y), res)| Record {
            t: chart.physical_time(s, y),
            s: rescaled.then_some(s),
            state: chart.state_to_map(y),
            res: names.iter().map(|n| n.to_string()).zip(res.iter().copied()).collect(),
            error: None,
        })
        .collect()
}

fn open_output(path: Option<&PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).map_err(|e| Failure::Run(anyhow!("creating {}: {e}", p.display())))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

/// Run the `integrate` command.
pub fn run(cfg: &RunConfig) -> Result<(), Failure> {
    let (chart, y0) = prepare(cfg)?;
    let events: Vec<_> = chart.rho12_minimum_event().into_iter().collect();
    let traj = integrate(chart.system(), 0.0, &y0, cfg.span, &cfg.options(), &events).run()?;

    let recs = records(&chart, &traj);
    let residual_names: Vec<String> = traj.invariant_names().iter().map(|s| s.to_string()).collect();
    let mut out = open_output(cfg.out.as_ref())?;
    write_records(&mut *out, cfg.format, chart.field_names(), &residual_names, &recs).run()?;
    out.flush().run()?;

    let violations: Vec<String> = traj.report.violations(cfg.threshold).iter().map(|e| e.name.clone()).collect();
    let (s_final, y_final) = (traj.final_time(), traj.final_state());
    let report = Report {
        chart: chart.spec.name(),
        masses: cfg.masses,
        mu: chart.spec.mu,
        h: chart.spec.h,
        timescale: cfg.timescale.clone(),
        seed: cfg.seed,
        span: cfg.span,
        termination: traj.termination.clone(),
        stats: traj.stats,
        samples: traj.len(),
        final_sample: FinalSample {
            s: s_final,
            t: chart.physical_time(s_final, y_final),
            state: chart.state_to_map(y_final),
        },
        v_final: chart.spec.blowup.map(|_| y_final[1]),
        invariants: traj.report.entries.clone(),
        threshold: cfg.threshold,
        passed: violations.is_empty(),
        violations: violations.clone(),
        events: traj
            .events
            .iter()
            .map(|e| EventEntry {
                label: e.label.clone(),
                s: e.t,
                t: chart.physical_time(e.t, &e.state),
                rho12: chart.collision_distances(&e.state).map(|d| d[0]),
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&report).run()?;
    let report_path = cfg.report.clone().or_else(|| cfg.out.as_ref().map(|p| p.with_extension("report.json")));
    match &report_path {
        Some(p) => std::fs::write(p, json + "\n").map_err(|e| Failure::Run(anyhow!("writing {}: {e}", p.display())))?,
        None => eprintln!("{json}"),
    }

    eprintln!(
        "{}: {} samples, s = {s_final}, t = {}, {} events, worst residual {:.3e}",
        report.chart,
        report.samples,
        report.final_sample.t,
        report.events.len(),
        traj.report.worst()
    );
    if let Some(v) = report.v_final {
        eprintln!("v_final = {v}");
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Invariant(format!("residuals above {:e}: {}", cfg.threshold, violations.join(", "))))
    }
}
