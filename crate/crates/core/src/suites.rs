//! Verification batteries built on the oracles: each suite runs a set of
//! end-to-end checks and reports one [`Measurement`] per check.
//!
//! The measured values are independent of the thresholds attached to them,
//! so callers can judge them against their own tolerances.

use std::time::Instant;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{dual_vector, force_function, fs_metric, kinetic, Masses, Triple, C64};
use crate::atlas::{Chart, ChartKind, ChartSpec, HubSample, Physical, Preset};
use crate::blowup::TimeScale;
use crate::error::{Error, Result};
use crate::form::RadialSystem;
use crate::integrate::{integrate, Direction, EventAction, EventSpec, IntegratorOptions, Output, Trajectory};
use crate::oracle::{covering_degree_estimate, cross_chart_compare, fd_gradient_check, max_abs_distance, Hamiltonian};
use crate::reduced::{canonical_shape, critical_points, reduced_system, AffineForm, CriticalKind, RoundForm};
use crate::regularize::forms::{
    cone_reduced_system, cone_sph_system, quad_reduced_system, quad_sph_system, reg_affine_system, reg_round_system,
};
use crate::regularize::kepler::KeplerLc;
use crate::regularize::{c_map, lambda_conformal, lc_project, quad_param, rho, rho_of_c, so3_frame, tau};
use crate::relative::{reduce_translations, restore_bodies, BodyState, RelState, RelativeSystem};
use crate::spherical::spherical_system;

/// Default thresholds of the checks.
pub mod thresholds {
    /// Relative error of the vector field against finite differences.
    pub const GRADIENT: f64 = 1e-6;
    /// Drift of first integrals and of the zero level.
    pub const DRIFT: f64 = 1e-9;
    /// Cross-chart distance for charts sharing the physical clock.
    pub const CHART: f64 = 1e-7;
    /// Cross-chart distance when physical time is reconstructed.
    pub const CHART_TIME: f64 = 1e-6;
    /// Off-collision agreement of a regularized transit with the direct flow.
    pub const TRANSIT: f64 = 1e-6;
    /// Bound on the vector field along a regularized collision transit.
    pub const TRANSIT_DERIVATIVE: f64 = 1e3;
    /// Final radial velocity of the homothetic collapse.
    pub const HOMOTHETIC_V: f64 = 1e-4;
    /// Wall-clock budget of the escape run, seconds.
    pub const ESCAPE_SECONDS: f64 = 300.0;
    /// Conformal pullback identity (relative).
    pub const PULLBACK: f64 = 1e-10;
    /// Identities of the `c`-sphere and its frame.
    pub const FRAME: f64 = 1e-12;
    /// Critical values of the shape potential.
    pub const CRITICAL_VALUE: f64 = 1e-6;
    /// Kepler period.
    pub const KEPLER_PERIOD: f64 = 1e-6;
    /// Kepler energy after back-transformation.
    pub const KEPLER_ENERGY: f64 = 1e-9;
}

/// Integrator tolerance used by the dynamical suites.
pub const SUITE_TOL: f64 = 1e-12;

/// The outcome of one check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub name: String,
    /// Measured error (or `0`/`1` for pass/fail checks).
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    pub detail: String,
}

impl Measurement {
    /// A check that passes when `value < threshold`.
    pub fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value < threshold, detail: String::new() }
    }

    /// A pass/fail check.
    pub fn flag(name: impl Into<String>, ok: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), value: if ok { 0.0 } else { 1.0 }, threshold: 0.5, passed: ok, detail: detail.into() }
    }

    /// A check that failed to run at all.
    pub fn error(name: impl Into<String>, err: &Error) -> Self {
        Self::flag(name, false, err.to_string())
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

/// Named suites, in the order they run for `All`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Gradients,
    Conservation,
    Charts,
    Transit,
    Blowup,
    Geometry,
    Covering,
    Landscape,
    Kepler,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Gradients,
        Suite::Conservation,
        Suite::Charts,
        Suite::Transit,
        Suite::Blowup,
        Suite::Geometry,
        Suite::Covering,
        Suite::Landscape,
        Suite::Kepler,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Gradients => "gradients",
            Suite::Conservation => "conservation",
            Suite::Charts => "charts",
            Suite::Transit => "transit",
            Suite::Blowup => "blowup",
            Suite::Geometry => "geometry",
            Suite::Covering => "covering",
            Suite::Landscape => "landscape",
            Suite::Kepler => "kepler",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Run the suite with its default parameters.
    pub fn run(self, masses: &Masses, seed: u64) -> Vec<Measurement> {
        match self {
            Suite::Gradients => gradients(masses, 100, seed),
            Suite::Conservation => conservation(),
            Suite::Charts => charts(),
            Suite::Transit => transit(masses),
            Suite::Blowup => blowup(masses, 1e3),
            Suite::Geometry => geometry(masses, 100, seed),
            Suite::Covering => covering(masses, 1000, seed),
            Suite::Landscape => landscape(),
            Suite::Kepler => kepler(),
        }
    }
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

fn random_complex(rng: &mut impl Rng, a: f64) -> C64 {
    C64::new(rng.gen_range(-a..a), rng.gen_range(-a..a))
}

/// A random relative state with all mutual distances at least a quarter of
/// the configuration size.
pub fn random_physical(rng: &mut impl Rng) -> HubSample {
    loop {
        let mut q = Triple([random_complex(rng, 1.0), random_complex(rng, 1.0), C64::default()]);
        q.0[2] = -q.0[0] - q.0[1];
        let size = q.norm();
        if q.0.iter().any(|z| z.norm() < 0.25 * size) {
            continue;
        }
        let p = Triple([random_complex(rng, 0.8), random_complex(rng, 0.8), random_complex(rng, 0.8)]);
        return HubSample { t: 0.0, state: Physical::Relative(RelState { q, p }) };
    }
}

/// Draw a state of `chart` by mapping random physical states into it.
fn sample_chart(chart: &Chart, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        if let Ok(y) = chart.from_hub(&random_physical(rng), None) {
            return y;
        }
    }
}

/// A point of the cone `Σ z_k² = 0` from the quadratic parametrization.
pub fn random_cone(rng: &mut impl Rng) -> Triple {
    quad_param([random_complex(rng, 1.0), random_complex(rng, 1.0)])
}

/// The equal-mass figure-eight choreography, a collision-free orbit with zero
/// angular momentum.
pub fn figure_eight() -> HubSample {
    let x1 = C64::new(0.970_004_36, -0.243_087_53);
    let v3 = C64::new(-0.932_407_37, -0.864_731_46);
    let bodies = BodyState { q: Triple::new(x1, -x1, C64::default()), p: Triple::new(-v3 / 2.0, -v3 / 2.0, v3) };
    let rel = reduce_translations(&bodies, &Masses::equal()).expect("figure eight has zero total momentum");
    HubSample { t: 0.0, state: Physical::Relative(rel) }
}

/// A perturbed Lagrange orbit for masses (1, 2, 3): an equilateral
/// configuration of unit side rotating slightly slower than the relative
/// equilibrium, with an asymmetric velocity kick.  It carries nonzero
/// angular momentum and stays well separated from collisions for several
/// time units.
pub fn generic_orbit() -> (Masses, HubSample) {
    let m = Masses::new(1.0, 2.0, 3.0).expect("positive masses");
    let w = crate::relative::omega();
    let verts = [C64::new(1.0, 0.0), w, w.conj()].map(|z| z / 3f64.sqrt());
    let mass = m.as_array();
    let com = (0..3).map(|k| verts[k] * mass[k]).sum::<C64>() / m.total();
    let q = verts.map(|z| z - com);
    let spin = (m.total()).sqrt();
    let kick = [C64::new(0.05, -0.02), C64::new(-0.03, 0.04), C64::new(0.01, 0.0)];
    let mut p: [C64; 3] = std::array::from_fn(|k| (q[k] * C64::new(0.0, 0.9 * spin) + kick[k]) * mass[k]);
    let total = p.iter().sum::<C64>();
    for k in 0..3 {
        p[k] -= total * mass[k] / m.total();
    }
    let bodies = BodyState { q: Triple(q), p: Triple(p) };
    let rel = reduce_translations(&bodies, &m).expect("zero total momentum");
    (m, HubSample { t: 0.0, state: Physical::Relative(rel) })
}

/// Spec of a named chart carrying the angular momentum and energy of `hub`.
pub fn chart_for(name: &str, masses: &Masses, ts: TimeScale, hub: &HubSample) -> Result<Chart> {
    let mut spec = ChartSpec::parse_name(name, *masses, ts)?;
    spec.mu = hub.angular_momentum();
    spec.h = hub.energy(masses)?;
    Chart::new(spec)
}

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

fn hamiltonian_system(kind: ChartKind, m: Masses, mu: f64, h: f64) -> Box<dyn Hamiltonian> {
    match kind {
        ChartKind::Relative => Box::new(RelativeSystem::new(m)),
        ChartKind::Spherical => Box::new(spherical_system(m)),
        ChartKind::Reduced => Box::new(reduced_system(m, mu)),
        ChartKind::Affine => Box::new(RadialSystem::new(AffineForm::jacobi(m), mu)),
        ChartKind::Equilateral => Box::new(RadialSystem::new(AffineForm::equilateral(m), mu)),
        ChartKind::Round => Box::new(RadialSystem::new(RoundForm::equilateral(m), mu)),
        ChartKind::ConeSph => Box::new(cone_sph_system(m, h)),
        ChartKind::QuadSph => Box::new(quad_sph_system(m, h)),
        ChartKind::ConeReduced => Box::new(cone_reduced_system(m, mu, h)),
        ChartKind::QuadReduced => Box::new(quad_reduced_system(m, mu, h)),
        ChartKind::RegAffine => Box::new(reg_affine_system(m, mu, h)),
        ChartKind::RegRound => Box::new(reg_round_system(m, mu, h)),
    }
}

/// Finite-difference check of every chart's Hamiltonian vector field on
/// `n` random admissible states.
pub fn gradients(masses: &Masses, n: usize, seed: u64) -> Vec<Measurement> {
    let (mu, h) = (0.4, -1.0);
    ChartKind::ALL
        .into_iter()
        .enumerate()
        .map(|(k, kind)| {
            let name = format!("gradient/{}", kind.name());
            let chart = match Chart::new(ChartSpec { kind, masses: *masses, mu, h, blowup: None }) {
                Ok(c) => c,
                Err(e) => return Measurement::error(name, &e),
            };
            let system = hamiltonian_system(kind, *masses, mu, h);
            let report = fd_gradient_check(kind.name(), &*system, n, seed.wrapping_add(k as u64), |rng| {
                sample_chart(&chart, rng)
            });
            Measurement::below(name, report.max_rel_err, thresholds::GRADIENT)
                .with_detail(format!("worst component {}", report.worst_component))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Conservation
// ---------------------------------------------------------------------------

/// Drift of the first integrals and of the zero level along the figure-eight
/// orbit over span 10.
pub fn conservation() -> Vec<Measurement> {
    let m = Masses::equal();
    let hub = figure_eight();
    let opts = IntegratorOptions::with_tol(SUITE_TOL);
    let mut out = Vec::new();
    for kind in ChartKind::ALL {
        let quantities: &[&str] = match kind {
            ChartKind::Relative | ChartKind::Spherical => &["energy", "angular_momentum"],
            k if k.is_regularized() => &["zero_level"],
            _ => continue,
        };
        let run = chart_for(kind.name(), &m, TimeScale::McGeheeF1, &hub).and_then(|chart| {
            let y0 = chart.from_hub(&hub, None)?;
            integrate(chart.system(), 0.0, &y0, 10.0, &opts, &[])
        });
        for q in quantities {
            let name = format!("conservation/{}/{q}", kind.name());
            out.push(match &run {
                Ok(traj) => Measurement::below(name, traj.report.max_residual(q), thresholds::DRIFT),
                Err(e) => Measurement::error(name, e),
            });
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Cross-chart comparison
// ---------------------------------------------------------------------------

/// Largest integration-time span allowed when running to a physical time.
const MAX_RESCALED_SPAN: f64 = 1e4;

/// Integrate `chart` from `y0` until physical time `t_end`, keeping dense output.
pub fn run_to_physical_time(chart: &Chart, y0: &[f64], t_end: f64, tol: f64) -> Result<Trajectory> {
    let opts = IntegratorOptions { keep_dense: true, ..IntegratorOptions::with_tol(tol) };
    if chart.spec.kind == ChartKind::Relative && chart.spec.blowup.is_none() {
        return integrate(chart.system(), 0.0, y0, t_end, &opts, &[]);
    }
    let last = y0.len() - 1;
    let stop = EventSpec::new("t_end", Direction::Up, EventAction::Halt, move |_s, y: &[f64]| y[last] - t_end);
    integrate(chart.system(), 0.0, y0, MAX_RESCALED_SPAN, &opts, &[stop])
}

/// State of a dense trajectory at physical time `t`, inverting the clock
/// by bisection where the chart integrates a rescaled time.
pub fn state_at_physical_time(chart: &Chart, traj: &Trajectory, t: f64) -> Option<Vec<f64>> {
    let dense = traj.dense.as_ref()?;
    if chart.spec.kind == ChartKind::Relative {
        return dense.eval(t);
    }
    let clock = |k: usize| chart.physical_time(traj.times[k], &traj.states[k]);
    let k = (1..traj.len()).find(|&k| clock(k) >= t)?;
    if clock(k - 1) > t {
        return None;
    }
    let (mut lo, mut hi) = (traj.times[k - 1], traj.times[k]);
    let last = traj.states[0].len() - 1;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if dense.eval(mid)?[last] < t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (ylo, yhi) = (dense.eval(lo)?, dense.eval(hi)?);
    Some(if (yhi[last] - t).abs() < (ylo[last] - t).abs() { yhi } else { ylo })
}

/// How two charts' states are compared.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    /// Body positions and momenta (unreduced charts).
    Bodies,
    /// `(r, p_r)` with the canonically normalized shape and its momentum.
    Shape,
}

/// Comparison coordinates of a chart state.
pub fn represent(chart: &Chart, s: f64, y: &[f64], rep: Representation) -> Option<Vec<f64>> {
    let m = &chart.spec.masses;
    let hub = chart.to_hub(s, y).ok()?;
    let mut out = Vec::with_capacity(14);
    match rep {
        Representation::Bodies => {
            let b = restore_bodies(&hub.relative(m).ok()?, m).ok()?;
            out.extend(RelState { q: b.q, p: b.p }.to_reals());
        }
        Representation::Shape => {
            let red = hub.reduced(m).ok()?;
            let (x, z) = canonical_shape(&red.x, &red.z, m).ok()?;
            out.extend([red.r, red.p_r]);
            out.extend(RelState { q: x, p: z }.to_reals());
        }
    }
    Some(out)
}

/// Sup-distance between two charts' trajectories from the same physical
/// initial state, compared at equal physical times up to `t_end`.
pub fn compare_charts(a: &Chart, b: &Chart, hub: &HubSample, t_end: f64, rep: Representation) -> Result<f64> {
    let ya = a.from_hub(hub, None)?;
    let yb = b.from_hub(hub, None)?;
    let ta = run_to_physical_time(a, &ya, t_end, SUITE_TOL)?;
    let tb = run_to_physical_time(b, &yb, t_end, SUITE_TOL)?;
    let samples = ta.times.iter().zip(&ta.states).map(|(&s, y)| {
        let t = a.physical_time(s, y);
        represent(a, s, y, rep).map(|v| (t, v))
    });
    let report = cross_chart_compare(
        samples,
        |t| {
            let y = state_at_physical_time(b, &tb, t)?;
            // The reference state's own integration time is irrelevant to
            // the hub map except for the relative chart, whose clock is `s`.
            represent(b, t, &y, rep)
        },
        max_abs_distance,
    );
    if report.compared < 2 {
        return Err(Error::InvalidState(format!("only {} samples could be compared", report.compared)));
    }
    Ok(report.max_distance)
}

/// Adjacent chart pairs: `(a, b, time scale of blown charts, representation,
/// whether physical time is reconstructed)`.
pub const CHART_PAIRS: [(&str, &str, TimeScale, Representation, bool); 13] = [
    ("relative", "spherical", TimeScale::McGeheeF1, Representation::Bodies, false),
    ("spherical", "reduced", TimeScale::McGeheeF1, Representation::Shape, false),
    ("reduced", "affine", TimeScale::McGeheeF1, Representation::Shape, false),
    ("reduced", "equilateral", TimeScale::McGeheeF1, Representation::Shape, false),
    ("reduced", "round", TimeScale::McGeheeF1, Representation::Shape, false),
    ("spherical", "cone_sph", TimeScale::McGeheeF1, Representation::Bodies, true),
    ("cone_sph", "quad_sph", TimeScale::McGeheeF1, Representation::Bodies, true),
    ("reduced", "cone_reduced", TimeScale::McGeheeF1, Representation::Shape, true),
    ("cone_reduced", "quad_reduced", TimeScale::McGeheeF1, Representation::Shape, true),
    ("quad_reduced", "reg_affine", TimeScale::McGeheeF1, Representation::Shape, true),
    ("cone_reduced", "reg_round", TimeScale::McGeheeF1, Representation::Shape, true),
    ("reduced", "blown_reduced", TimeScale::BoundedF2, Representation::Shape, true),
    ("reg_round", "blown_reg_round", TimeScale::McGeheeF1, Representation::Shape, true),
];

/// Cross-chart comparison of every adjacent pair over physical span 5
/// along the generic orbit.
pub fn charts() -> Vec<Measurement> {
    let (m, hub) = generic_orbit();
    CHART_PAIRS
        .iter()
        .map(|&(a, b, ts, rep, rescaled)| {
            let name = format!("charts/{a}~{b}");
            let tol = if rescaled { thresholds::CHART_TIME } else { thresholds::CHART };
            let result = chart_for(a, &m, ts, &hub)
                .and_then(|ca| chart_for(b, &m, ts, &hub).map(|cb| (ca, cb)))
                .and_then(|(ca, cb)| compare_charts(&ca, &cb, &hub, 5.0, rep));
            match result {
                Ok(d) => Measurement::below(name, d, tol),
                Err(e) => Measurement::error(name, &e),
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Collision transit
// ---------------------------------------------------------------------------

/// Regularized transit of an exact 1–2 collision at zero angular momentum.
pub fn transit(masses: &Masses) -> Vec<Measurement> {
    match transit_inner(masses) {
        Ok(v) => v,
        Err(e) => vec![Measurement::error("transit", &e)],
    }
}

fn transit_inner(m: &Masses) -> Result<Vec<Measurement>> {
    let h = -1.0;
    let hub = Preset::CollisionTransit.state(m, h)?;
    let reg = Chart::new(ChartSpec { kind: ChartKind::RegAffine, masses: *m, mu: 0.0, h, blowup: None })?;
    let y0 = reg.from_hub(&hub, None)?;
    let opts = IntegratorOptions { keep_dense: true, ..IntegratorOptions::with_tol(SUITE_TOL) };
    // The affine coordinate of the 1–2 collision is z = 0; record its crossing.
    let crossing = EventSpec::new("rho12_zero", Direction::Down, EventAction::Record, |_s, y: &[f64]| y[1]);
    let traj = integrate(reg.system(), 0.0, &y0, 5.0, &opts, &[crossing])?;
    let mut out = Vec::new();

    let event = traj.events.iter().find(|e| e.label == "rho12_zero");
    let rho12 = event.and_then(|e| reg.collision_distances(&e.state)).map_or(f64::INFINITY, |d| d[0]);
    out.push(Measurement::below("transit/rho12_at_crossing", rho12, 1e-12));

    let mut dy = vec![0.0; y0.len()];
    let mut max_rate = 0.0f64;
    for y in traj.states.iter().chain(event.map(|e| &e.state)) {
        reg.system().rhs(0.0, y, &mut dy);
        let rate = dy.iter().fold(0.0f64, |a, v| if v.is_finite() { a.max(v.abs()) } else { f64::INFINITY });
        max_rate = max_rate.max(rate);
    }
    out.push(Measurement::below("transit/max_derivative", max_rate, thresholds::TRANSIT_DERIVATIVE));

    // Agreement with the direct relative flow away from the collision: the
    // approach up to 90% of the collision time, and the past of the initial
    // state back to where the 2–3 pair (z = 1) starts to close in.
    let Some(event) = event else { return Ok(out) };
    let t_c = event.state[event.state.len() - 1];
    let rel = Chart::new(ChartSpec::new(ChartKind::Relative, *m))?;
    let yr = rel.from_hub(&hub, None)?;
    let off = 0.9 * t_c;
    let stop = EventSpec::new("z_limit", Direction::Up, EventAction::Halt, |_s, y: &[f64]| y[1] - 0.7);
    let past = integrate(reg.system(), 0.0, &y0, -5.0, &opts, &[stop])?;
    let t_past = reg.physical_time(past.final_time(), past.final_state());
    let direct = integrate(rel.system(), 0.0, &yr, off, &opts, &[])?;
    let direct_past = integrate(rel.system(), 0.0, &yr, t_past, &opts, &[])?;
    let forward = traj.times.iter().zip(&traj.states);
    let backward = past.times.iter().zip(&past.states);
    let samples = forward.chain(backward).filter_map(|(&s, y)| {
        let t = reg.physical_time(s, y);
        (t <= off).then(|| represent(&reg, s, y, Representation::Shape).map(|v| (t, v)))
    });
    let report = cross_chart_compare(
        samples,
        |t| {
            let d = if t >= 0.0 { &direct } else { &direct_past };
            represent(&rel, t, &d.dense.as_ref()?.eval(t)?, Representation::Shape)
        },
        max_abs_distance,
    );
    out.push(
        Measurement::below("transit/off_collision_match", report.max_distance, thresholds::TRANSIT)
            .with_detail(format!("{} samples over t in [{t_past:.4}, {off:.4}]", report.compared)),
    );

    let through = integrate(rel.system(), 0.0, &yr, 2.0 * t_c, &IntegratorOptions::with_tol(SUITE_TOL), &[]);
    let underflow = matches!(through, Err(Error::StepUnderflow { .. }));
    let detail = match &through {
        Ok(t) => format!("completed at t = {}", t.final_time()),
        Err(e) => e.to_string(),
    };
    out.push(Measurement::flag("transit/direct_step_underflow", underflow, detail));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Blow-up
// ---------------------------------------------------------------------------

/// Homothetic collapse onto the Lagrange rest point and a bounded-time-scale
/// escape orbit over `escape_span`.
pub fn blowup(masses: &Masses, escape_span: f64) -> Vec<Measurement> {
    let mut out = match homothetic() {
        Ok(v) => v,
        Err(e) => vec![Measurement::error("blowup/homothetic", &e)],
    };
    out.extend(match escape(masses, escape_span) {
        Ok(v) => v,
        Err(e) => vec![Measurement::error("blowup/escape", &e)],
    });
    out
}

fn homothetic() -> Result<Vec<Measurement>> {
    let m = Masses::equal();
    let hub = Preset::LagrangeHomothetic.state(&m, -1.0)?;
    let spec = ChartSpec { kind: ChartKind::RegRound, masses: m, mu: 0.0, h: -1.0, blowup: Some(TimeScale::McGeheeF1) };
    let chart = Chart::new(spec)?;
    let y0 = chart.from_hub(&hub, None)?;
    let grid = (1..=500).map(|k| 0.1 * k as f64).collect();
    let opts = IntegratorOptions { output: Output::Times(grid), ..IntegratorOptions::with_tol(SUITE_TOL) };
    let traj = integrate(chart.system(), 0.0, &y0, 50.0, &opts, &[])?;
    let v_final = traj.final_state()[1];
    let rest = -(6.0f64).sqrt();
    let monotone = traj.states.windows(2).all(|w| w[1][0] < w[0][0] && w[1][0] > 0.0);
    Ok(vec![
        Measurement::below("blowup/homothetic_v_final", (v_final - rest).abs(), thresholds::HOMOTHETIC_V)
            .with_detail(format!("v_final = {v_final}")),
        Measurement::flag(
            "blowup/homothetic_r_decreasing",
            monotone,
            format!("r_final = {:e} over {} samples", traj.final_state()[0], traj.len()),
        ),
    ])
}

/// Outgoing state of energy `h > 0` used for the escape run: the generic
/// orbit with an added radial push, rescaled in momentum onto the level.
pub fn escape_state(masses: &Masses, h: f64) -> Result<HubSample> {
    let (_, hub) = generic_orbit();
    let s = hub.relative(masses)?;
    let dir = s.p + dual_vector(&s.q, masses);
    let k = kinetic(&dir, masses);
    let u = force_function(&s.q, masses)?;
    // k λ² − U = h.
    let lambda = ((h + u) / k).sqrt();
    Ok(HubSample { t: 0.0, state: Physical::Relative(RelState { q: s.q, p: dir * C64::new(lambda, 0.0) }) })
}

fn escape(masses: &Masses, span: f64) -> Result<Vec<Measurement>> {
    let hub = escape_state(masses, 1.0)?;
    let chart = chart_for("blown_reg_round", masses, TimeScale::BoundedF2, &hub)?;
    if chart.spec.h <= 0.0 {
        return Err(Error::InvalidState(format!("escape state has energy {}", chart.spec.h)));
    }
    let y0 = chart.from_hub(&hub, None)?;
    let opts = IntegratorOptions { output: Output::Endpoints, ..IntegratorOptions::with_tol(SUITE_TOL) };
    let start = Instant::now();
    let traj = integrate(chart.system(), 0.0, &y0, span, &opts, &[]);
    let seconds = start.elapsed().as_secs_f64();
    let traj = traj?;
    let y = traj.final_state();
    let finite = y.iter().all(|v| v.is_finite()) && traj.final_time() >= span;
    Ok(vec![
        Measurement::flag(
            "blowup/escape_finite",
            finite && y[0] > y0[0],
            format!("s = {}, r = {:e}, t = {:e}", traj.final_time(), y[0], y[y.len() - 1]),
        ),
        Measurement::below("blowup/escape_seconds", seconds, thresholds::ESCAPE_SECONDS),
        Measurement::below(
            "blowup/escape_energy_relation",
            traj.report.max_residual("energy_relation"),
            thresholds::DRIFT,
        ),
    ])
}

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Identities of the regularizing map and the shape sphere on `n` random
/// points of the cone.
pub fn geometry(masses: &Masses, n: usize, seed: u64) -> Vec<Measurement> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut pullback, mut rho_err, mut orth, mut det, mut tau_out) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..n {
        let z = random_cone(&mut rng);
        // Pullback of the Fubini–Study metric on a tangent to the cone.
        let v = Triple([random_complex(&mut rng, 1.0), random_complex(&mut rng, 1.0), random_complex(&mut rng, 1.0)]);
        let nrm = z.conj();
        let v = v - nrm * (nrm.dot(&v.conj()).conj() / nrm.norm_sq());
        let dx = z.zip(&v, |a, b| a * b * 2.0);
        let fs_w = fs_metric(&lc_project(&z), &dx, masses);
        let t = z.cross(&z.conj());
        let fs_c = t.conj().dot(&v).norm_sqr() / z.norm_sq().powi(3);
        let expected = lambda_conformal(&z, masses) * fs_c;
        pullback = pullback.max((fs_w - expected).abs() / expected.abs());

        let c = c_map(&z);
        let (rc, r) = (rho_of_c(&c), rho(&z));
        for k in 0..3 {
            rho_err = rho_err.max((rc[k] / c.norm() - r[k]).abs() / z.norm_sq());
        }
        if let Ok(a) = so3_frame(&z) {
            orth = orth.max((a.transpose() * a - Matrix3::identity()).norm());
            det = det.max((a.determinant() - 1.0).abs());
        }
        let tz = tau(&z);
        if !(0.0..=1.0 / 27.0).contains(&tz) {
            tau_out = tau_out.max(tz.max(-tz));
        }
    }
    let eq_tau = (tau(&Triple::real(1.0, 1.0, 1.0)) - 1.0 / 27.0).abs();
    let form = RoundForm::equilateral(Masses::equal());
    let kappa = (0..n)
        .map(|_| {
            let w = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            (form.kappa(&w.normalize()) - 1.0).abs()
        })
        .fold(0.0, f64::max);
    vec![
        Measurement::below("geometry/lambda_pullback", pullback, thresholds::PULLBACK),
        Measurement::below("geometry/rho_of_c", rho_err, thresholds::FRAME),
        Measurement::below("geometry/frame_orthogonality", orth, thresholds::FRAME),
        Measurement::below("geometry/frame_determinant", det, thresholds::FRAME),
        Measurement::flag("geometry/tau_range", tau_out == 0.0, format!("largest violation {tau_out:e}")),
        Measurement::below("geometry/tau_equilateral", eq_tau, thresholds::FRAME),
        Measurement::below("geometry/kappa_equal_masses", kappa, thresholds::FRAME),
    ]
}

// ---------------------------------------------------------------------------
// Covering and landscape
// ---------------------------------------------------------------------------

/// Preimage counts of the regularizing map over random shapes and at the
/// binary collisions.
pub fn covering(masses: &Masses, n: usize, seed: u64) -> Vec<Measurement> {
    let report = covering_degree_estimate(masses, n, seed);
    let generic = report.histogram == vec![(4, n)];
    vec![
        Measurement::flag("covering/generic_degree_4", generic, format!("histogram {:?}", report.histogram)),
        Measurement::flag(
            "covering/collision_degree_2",
            report.collision_counts == [2, 2, 2],
            format!("counts {:?}", report.collision_counts),
        ),
    ]
}

/// Critical points of the shape potential for equal masses and for (1, 2, 10).
pub fn landscape() -> Vec<Measurement> {
    let mut out = Vec::new();
    let eq = Masses::equal();
    let crit = critical_points(&eq, 24);
    let count =
        |kind: CriticalKind, pts: &[crate::reduced::CriticalPoint]| pts.iter().filter(|c| c.kind == kind).count();
    let (mins, saddles) = (count(CriticalKind::Minimum, &crit), count(CriticalKind::Saddle, &crit));
    out.push(Measurement::flag(
        "landscape/equal_counts",
        crit.len() == 5 && mins == 2 && saddles == 3,
        format!("{} critical points: {mins} minima, {saddles} saddles", crit.len()),
    ));
    let value_err = |kind: CriticalKind, target: f64| {
        crit.iter().filter(|c| c.kind == kind).map(|c| (c.value - target).abs()).fold(0.0, f64::max)
    };
    out.push(Measurement::below(
        "landscape/equal_minimum_value",
        value_err(CriticalKind::Minimum, 3.0),
        thresholds::CRITICAL_VALUE,
    ));
    out.push(Measurement::below(
        "landscape/equal_saddle_value",
        value_err(CriticalKind::Saddle, 5.0 / 2f64.sqrt()),
        thresholds::CRITICAL_VALUE,
    ));

    let m = Masses::new(1.0, 2.0, 10.0).expect("positive masses");
    let crit = critical_points(&m, 24);
    let (mins, saddles) = (count(CriticalKind::Minimum, &crit), count(CriticalKind::Saddle, &crit));
    out.push(Measurement::flag(
        "landscape/unequal_counts",
        crit.len() == 5 && mins == 2 && saddles == 3,
        format!("{} critical points: {mins} minima, {saddles} saddles", crit.len()),
    ));
    // The potential blows up at exactly the three binary-collision shapes.
    let form = RoundForm::equilateral(m);
    let singular = crate::reduced::collision_points()
        .iter()
        .filter(|w| {
            let w = Vector3::from(**w);
            let off = (w + Vector3::new(0.0, 0.0, 1e-8)).normalize();
            form.potential(&off) > 1e6
        })
        .count();
    out.push(Measurement::flag(
        "landscape/unequal_collisions",
        singular == 3,
        format!("{singular} singular collision shapes"),
    ));
    out
}

// ---------------------------------------------------------------------------
// Kepler self-test
// ---------------------------------------------------------------------------

/// Period and back-transformed energy of the regularized Kepler oscillator
/// at `h = −1`.
pub fn kepler() -> Vec<Measurement> {
    let k = KeplerLc::new(-1.0, 1.25);
    let y0 = k.periapsis_state();
    let opts = IntegratorOptions { keep_dense: true, ..IntegratorOptions::with_tol(SUITE_TOL) };
    let traj = match integrate(&k, 0.0, &y0, 3.0 * std::f64::consts::TAU, &opts, &[]) {
        Ok(t) => t,
        Err(e) => return vec![Measurement::error("kepler", &e)],
    };
    // Periapsis passages are the upward crossings of Im z through zero.
    let spec = EventSpec::new("periapsis", Direction::Up, EventAction::Record, |_s, y: &[f64]| y[1]);
    let period = crate::integrate::detect_events(&traj, &spec).into_iter().find(|&s| s > 1.0).unwrap_or(f64::NAN);
    let energy = traj
        .states
        .iter()
        .map(|y| {
            let (q, p) = k.to_kepler(y);
            (k.kepler_energy(q, p) - k.h).abs()
        })
        .fold(0.0, f64::max);
    vec![
        Measurement::below("kepler/period", (period - std::f64::consts::TAU).abs(), thresholds::KEPLER_PERIOD)
            .with_detail(format!("period {period}")),
        Measurement::below("kepler/energy", energy, thresholds::KEPLER_ENERGY),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(Suite::parse(s.name()), Some(s));
        }
        assert_eq!(Suite::parse("nonsense"), None);
    }

    #[test]
    fn random_physical_states_are_admissible() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let hub = random_physical(&mut rng);
            let d = hub.distances_sq(&m).unwrap();
            let size: f64 = d.iter().sum();
            assert!(d.iter().all(|&x| x >= 0.0625 * size - 1e-12));
            assert!(hub.energy(&m).unwrap().is_finite());
        }
    }

    #[test]
    fn figure_eight_has_zero_angular_momentum() {
        assert!(figure_eight().angular_momentum().abs() < 1e-7);
        let (_, hub) = generic_orbit();
        assert!(hub.angular_momentum().abs() > 0.1);
    }

    #[test]
    fn measurement_verdicts() {
        assert!(Measurement::below("x", 0.5, 1.0).passed);
        assert!(!Measurement::below("x", 2.0, 1.0).passed);
        assert!(!Measurement::below("x", f64::NAN, 1.0).passed);
    }
}
