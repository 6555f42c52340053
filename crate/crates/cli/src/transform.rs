//! `tribody transform`: map a trajectory between charts.

use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::anyhow;
use tribody::atlas::{Chart, ChartSpec, HubSample};
use tribody::Config3;

use crate::config::{self, Format};
use crate::failure::{Classify, Failure};
use crate::records::{read_records, write_records, Record};

/// Arguments of the `transform` command.
#[derive(Clone, Debug, clap::Args)]
pub struct TransformArgs {
    /// Input trajectory (JSON lines, as written by `integrate`).
    #[arg(long)]
    pub input: PathBuf,
    /// Chart of the input trajectory.
    #[arg(long)]
    pub from: String,
    /// Target chart.
    #[arg(long)]
    pub to: String,
    /// Masses as `m1,m2,m3`.
    #[arg(long, value_parser = config::parse_masses_arg)]
    pub masses: [f64; 3],
    /// Angular momentum (required when the source chart is reduced; derived
    /// from the first sample otherwise).
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    /// Energy level (derived from the first sample when absent).
    #[arg(long, allow_hyphen_values = true)]
    pub energy: Option<f64>,
    /// Blow-up time scale of blown charts.
    #[arg(long, value_parser = ["f1", "f2"], default_value = "f1")]
    pub timescale: String,
    /// Output path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Jsonl)]
    pub format: Format,
}

/// Map `records` from chart `src` to `dst`.  Samples that cannot be mapped
/// (for example blown-down states on the collision manifold) become error
/// records; the physical time column is carried through the hub.
pub fn map_records(src: &Chart, dst: &Chart, records: &[Record]) -> Vec<Record> {
    let mut prev: Option<Config3> = None;
    records
        .iter()
        .map(|rec| {
            if rec.error.is_some() {
                return rec.clone();
            }
            let mapped = src
                .state_from_map(&rec.state)
                .and_then(|y| src.to_hub(rec.t, &y))
                .and_then(|hub| dst.from_hub(&hub, prev.as_ref()).map(|y| (hub.t, y)));
            match mapped {
                Ok((t, y)) => {
                    prev = dst.cone_point(&y).or(prev);
                    let res: BTreeMap<String, f64> =
                        dst.system().invariants(0.0, &y).into_iter().map(|i| (i.name.to_string(), i.value)).collect();
                    Record { t, s: None, state: dst.state_to_map(&y), res, error: None }
                }
                Err(e) => Record { t: rec.t, error: Some(e.to_string()), ..Record::default() },
            }
        })
        .collect()
}

fn first_hub(src: &Chart, records: &[Record]) -> Option<HubSample> {
    records
        .iter()
        .filter(|r| r.error.is_none())
        .find_map(|r| src.state_from_map(&r.state).and_then(|y| src.to_hub(r.t, &y)).ok())
}

/// Run the `transform` command.
pub fn run(args: &TransformArgs) -> Result<(), Failure> {
    let m = config::masses(args.masses).config()?;
    let ts = config::timescale(&args.timescale).config()?;
    let mut src_spec = ChartSpec::parse_name(&args.from, m, ts).config()?;
    let mut dst_spec = ChartSpec::parse_name(&args.to, m, ts).config()?;
    if src_spec.kind.is_reduced() && args.mu.is_none() {
        return Err(Failure::Config(anyhow!("--mu is required for the reduced source chart `{}`", args.from)));
    }
    if src_spec.kind.is_reduced() && !dst_spec.kind.is_reduced() {
        return Err(Failure::Config(anyhow!(
            "no map from reduced chart `{}` back to unreduced chart `{}` (the rotation angle is lost)",
            args.from,
            args.to
        )));
    }
    src_spec.mu = args.mu.unwrap_or(0.0);
    src_spec.h = args.energy.unwrap_or(0.0);
    let file =
        std::fs::File::open(&args.input).map_err(|e| Failure::Config(anyhow!("{}: {e}", args.input.display())))?;
    let records = read_records(BufReader::new(file)).config()?;

    let src = Chart::new(src_spec).config()?;
    let hub = first_hub(&src, &records);
    dst_spec.mu = args.mu.or(hub.map(|h| h.angular_momentum())).unwrap_or(0.0);
    dst_spec.h = match (args.energy, hub) {
        (Some(h), _) => h,
        (None, Some(hub)) => hub.energy(&m).unwrap_or(0.0),
        (None, None) => 0.0,
    };
    let dst = Chart::new(dst_spec).config()?;

    let mapped = map_records(&src, &dst, &records);
    let failed = mapped.iter().filter(|r| r.error.is_some()).count();
    let res_names: Vec<String> =
        mapped.iter().find(|r| r.error.is_none()).map_or(Vec::new(), |r| r.res.keys().cloned().collect());
    let mut out: Box<dyn std::io::Write> = match &args.out {
        Some(p) => Box::new(std::fs::File::create(p).run()?),
        None => Box::new(std::io::stdout().lock()),
    };
    write_records(&mut *out, args.format, dst.field_names(), &res_names, &mapped).run()?;
    eprintln!("{} → {}: {} samples, {failed} could not be mapped", src.spec.name(), dst.spec.name(), mapped.len());
    Ok(())
}
