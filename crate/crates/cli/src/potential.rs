//! `tribody potential`: shape-potential and covering grids as CSV.

use std::io::Write;
use std::path::PathBuf;

use anyhow::anyhow;
use tribody::reduced::{potential_grid, sample_grid, GridChart};
use tribody::regularize::lemaitre::covering_grid;
use tribody::regularize::{lc_lift, reg_potential};

use crate::config;
use crate::failure::{Classify, Failure};

/// Largest accepted grid resolution.
pub const MAX_RESOLUTION: usize = 4096;

/// Which grid to emit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum PotentialChart {
    /// Longitude/latitude on the round shape sphere.
    Round,
    /// Equilateral affine coordinate on `[−2, 2]²`.
    Affine,
    /// Preimage counts of the regularizing map on the round grid.
    Lemaitre,
}

/// Arguments of the `potential` command.
#[derive(Clone, Debug, clap::Args)]
pub struct PotentialArgs {
    #[arg(long, value_enum, default_value_t = PotentialChart::Round)]
    pub chart: PotentialChart,
    /// Grid points per axis, in [2, 4096].
    #[arg(long, default_value_t = 128)]
    pub resolution: usize,
    /// Masses as `m1,m2,m3`.
    #[arg(long, value_parser = config::parse_masses_arg, default_value = "1,1,1")]
    pub masses: [f64; 3],
    /// Also emit the regularized potential `W` as a fourth column.
    #[arg(long)]
    pub with_w: bool,
    /// Output path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Run the `potential` command.
pub fn run(args: &PotentialArgs) -> Result<(), Failure> {
    if !(2..=MAX_RESOLUTION).contains(&args.resolution) {
        return Err(Failure::Config(anyhow!("resolution must lie in [2, {MAX_RESOLUTION}], got {}", args.resolution)));
    }
    let m = config::masses(args.masses).config()?;
    let out: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(std::fs::File::create(p).run()?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(out);
    let grid_chart = match args.chart {
        PotentialChart::Lemaitre => {
            w.write_record(["shape_u", "shape_v", "n_preimages"]).run()?;
            for s in covering_grid(args.resolution, &m).run()? {
                w.write_record([s.shape_u.to_string(), s.shape_v.to_string(), s.n_preimages.to_string()]).run()?;
            }
            w.flush().run()?;
            return Ok(());
        }
        PotentialChart::Round => GridChart::Round,
        PotentialChart::Affine => GridChart::Affine,
    };
    let v = potential_grid(grid_chart, args.resolution, &m).run()?;
    if args.with_w {
        let wgrid = sample_grid(grid_chart, args.resolution, &m, |x| {
            lc_lift(x, [false; 3]).ok().map(|z| reg_potential(&z, &m))
        })
        .run()?;
        w.write_record(["u", "v", "V", "W"]).run()?;
        for (a, b) in v.iter().zip(&wgrid) {
            w.write_record([a.u.to_string(), a.v.to_string(), a.value.to_string(), b.value.to_string()]).run()?;
        }
    } else {
        w.write_record(["u", "v", "V"]).run()?;
        for a in &v {
            w.write_record([a.u.to_string(), a.v.to_string(), a.value.to_string()]).run()?;
        }
    }
    w.flush().run()?;
    Ok(())
}
