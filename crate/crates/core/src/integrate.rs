//! Chart-generic adaptive integration.
//!
//! The stepper is the explicit Runge–Kutta pair of Dormand and Prince of
//! order 8 with embedded 5th- and 3rd-order error estimators and a 7th-order
//! continuous extension (the DOP853 scheme), driven by a proportional–integral
//! step-size controller.  On top of the stepper the driver provides dense
//! output at requested times, event location by bisection on the interpolant,
//! gauge renormalization after accepted steps and an invariant log.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A first-order system `y' = f(t, y)` together with chart services.
pub trait OdeSystem {
    /// Number of real state components.
    fn dim(&self) -> usize;

    /// Evaluate the vector field.  Non-finite output marks the point as
    /// inadmissible; the integrator then rejects the step and shrinks it.
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);

    /// Apply an exact symmetry of the system that restores the chart's
    /// normalization gauge.  Returns whether `y` was modified.
    fn renormalize(&self, _y: &mut [f64]) -> bool {
        false
    }

    /// Quantities monitored along the flow.
    fn invariants(&self, _t: f64, _y: &[f64]) -> Vec<Invariant> {
        Vec::new()
    }
}

impl<S: OdeSystem + ?Sized> OdeSystem for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (**self).rhs(t, y, dy)
    }
    fn renormalize(&self, y: &mut [f64]) -> bool {
        (**self).renormalize(y)
    }
    fn invariants(&self, t: f64, y: &[f64]) -> Vec<Invariant> {
        (**self).invariants(t, y)
    }
}

/// How a monitored quantity is judged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvariantKind {
    /// First integral: the residual is the drift from the initial value.
    Conserved,
    /// Constraint function: the residual is the absolute value itself.
    Constraint,
}

/// One monitored quantity evaluated at one state.
#[derive(Clone, Debug, PartialEq)]
pub struct Invariant {
    pub name: &'static str,
    pub kind: InvariantKind,
    pub value: f64,
}

impl Invariant {
    pub fn conserved(name: &'static str, value: f64) -> Self {
        Self { name, kind: InvariantKind::Conserved, value }
    }
    pub fn constraint(name: &'static str, value: f64) -> Self {
        Self { name, kind: InvariantKind::Constraint, value }
    }
}

/// Summary of one monitored quantity over a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantSummary {
    pub name: String,
    pub kind: InvariantKind,
    pub initial: f64,
    pub max_residual: f64,
    pub final_residual: f64,
}

/// Machine-readable invariant report.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub entries: Vec<InvariantSummary>,
}

impl InvariantReport {
    fn start(values: &[Invariant]) -> Self {
        let entries = values
            .iter()
            .map(|v| {
                let r = residual(v, v.value);
                InvariantSummary {
                    name: v.name.to_string(),
                    kind: v.kind,
                    initial: v.value,
                    max_residual: r,
                    final_residual: r,
                }
            })
            .collect();
        Self { entries }
    }

    fn update(&mut self, values: &[Invariant]) {
        for (e, v) in self.entries.iter_mut().zip(values) {
            let r = residual(v, e.initial);
            e.final_residual = r;
            if !(r <= e.max_residual) {
                e.max_residual = if r.is_nan() { f64::INFINITY } else { r.max(e.max_residual) };
            }
        }
    }

    /// Residuals of one state relative to this report's initial values.
    pub fn residuals_of(&self, values: &[Invariant]) -> Vec<f64> {
        self.entries.iter().zip(values).map(|(e, v)| residual(v, e.initial)).collect()
    }

    pub fn get(&self, name: &str) -> Option<&InvariantSummary> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Maximum residual of the named quantity (`NaN` if absent).
    pub fn max_residual(&self, name: &str) -> f64 {
        self.get(name).map_or(f64::NAN, |e| e.max_residual)
    }

    /// Largest residual over all entries.
    pub fn worst(&self) -> f64 {
        self.entries.iter().map(|e| e.max_residual).fold(0.0, f64::max)
    }

    /// Entries whose maximum residual exceeds `threshold`.
    pub fn violations(&self, threshold: f64) -> Vec<&InvariantSummary> {
        self.entries.iter().filter(|e| !(e.max_residual <= threshold)).collect()
    }
}

fn residual(v: &Invariant, initial: f64) -> f64 {
    match v.kind {
        InvariantKind::Conserved => (v.value - initial).abs(),
        InvariantKind::Constraint => v.value.abs(),
    }
}

/// Which sign changes of an event function count as events.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Any,
    /// From negative to non-negative.
    Up,
    /// From positive to non-positive.
    Down,
}

impl Direction {
    fn matches(self, before: f64, after: f64) -> bool {
        let up = before < 0.0 && after >= 0.0;
        let down = before > 0.0 && after <= 0.0;
        match self {
            Direction::Any => up || down,
            Direction::Up => up,
            Direction::Down => down,
        }
    }
}

/// What to do when an event is located.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventAction {
    Record,
    Halt,
}

/// Scalar event function of `(t, y)`.
pub type EventFn<'a> = Box<dyn Fn(f64, &[f64]) -> f64 + 'a>;

/// An event function with its direction filter and action.
pub struct EventSpec<'a> {
    pub label: String,
    pub function: EventFn<'a>,
    pub direction: Direction,
    pub action: EventAction,
}

impl<'a> EventSpec<'a> {
    pub fn new(
        label: impl Into<String>,
        direction: Direction,
        action: EventAction,
        function: impl Fn(f64, &[f64]) -> f64 + 'a,
    ) -> Self {
        Self { label: label.into(), function: Box::new(function), direction, action }
    }
}

/// A located event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub label: String,
    pub t: f64,
    pub state: Vec<f64>,
}

/// Which samples are stored in the trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    /// The initial state and every accepted step.
    Steps,
    /// The initial state, the given times (via dense output) and the final state.
    Times(Vec<f64>),
    /// The initial and final state only.
    Endpoints,
}

/// Integrator configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub initial_step: Option<f64>,
    pub max_steps: usize,
    /// Renormalize the gauge every this many accepted steps (0 disables).
    pub gauge_every: usize,
    pub output: Output,
    /// Keep the continuous extension of every step for later evaluation.
    pub keep_dense: bool,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            initial_step: None,
            max_steps: 5_000_000,
            gauge_every: 1,
            output: Output::Steps,
            keep_dense: false,
        }
    }
}

impl IntegratorOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { rel_tol: tol, abs_tol: tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x > 0.0 && x < 1e-3;
        if !ok(self.rel_tol) || !ok(self.abs_tol) {
            return Err(Error::InvalidOptions(format!(
                "tolerances must lie in (0, 1e-3), got rel {:e}, abs {:e}",
                self.rel_tol, self.abs_tol
            )));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidOptions("max_step must be positive".into()));
        }
        if let Some(h) = self.initial_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidOptions("initial_step must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Continuous extension of one accepted step.
#[derive(Clone, Debug, PartialEq)]
struct Segment {
    t0: f64,
    h: f64,
    cont: Vec<f64>,
}

impl Segment {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let n = out.len();
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let c = |j: usize, i: usize| self.cont[j * n + i];
        for (i, o) in out.iter_mut().enumerate() {
            let conpar = c(4, i) + (c(5, i) + (c(6, i) + c(7, i) * s) * s1) * s;
            *o = c(0, i) + (c(1, i) + (c(2, i) + (c(3, i) + conpar * s1) * s) * s1) * s;
        }
    }

    fn contains(&self, t: f64) -> bool {
        let (a, b) = (self.t0, self.t0 + self.h);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        t >= lo && t <= hi
    }
}

/// Piecewise 7th-order interpolant covering an integration run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DenseOutput {
    dim: usize,
    segments: Vec<Segment>,
}

impl DenseOutput {
    /// Time interval covered, in integration order.
    pub fn span(&self) -> Option<(f64, f64)> {
        let first = self.segments.first()?;
        let last = self.segments.last()?;
        Some((first.t0, last.t0 + last.h))
    }

    /// Interpolated state at `t`, or `None` outside the covered interval.
    pub fn eval(&self, t: f64) -> Option<Vec<f64>> {
        let backward = self.segments.first()?.h < 0.0;
        let key = |s: &Segment| if backward { -(s.t0 + s.h) } else { s.t0 };
        let target = if backward { -t } else { t };
        let idx = self.segments.partition_point(|s| key(s) <= target);
        let candidates = [idx.saturating_sub(1), idx.min(self.segments.len() - 1)];
        for &i in &candidates {
            let seg = &self.segments[i];
            if seg.contains(t) {
                let mut out = vec![0.0; self.dim];
                seg.eval(t, &mut out);
                return Some(out);
            }
        }
        None
    }

    /// All times where `g(t, y(t))` changes sign in the given direction,
    /// located by bisection on the interpolant to `tol` in time.
    pub fn find_roots(&self, g: &dyn Fn(f64, &[f64]) -> f64, direction: Direction, tol: f64) -> Vec<f64> {
        let mut roots = Vec::new();
        let mut buf = vec![0.0; self.dim];
        for seg in &self.segments {
            seg.eval(seg.t0, &mut buf);
            let ga = g(seg.t0, &buf);
            let tb = seg.t0 + seg.h;
            seg.eval(tb, &mut buf);
            let gb = g(tb, &buf);
            if direction.matches(ga, gb) {
                roots.push(bisect(&|t, y| g(t, y), seg, ga, tol, &mut buf));
            }
        }
        roots
    }
}

fn bisect(g: &dyn Fn(f64, &[f64]) -> f64, seg: &Segment, ga: f64, tol: f64, buf: &mut [f64]) -> f64 {
    let (mut a, mut b) = (seg.t0, seg.t0 + seg.h);
    let mut fa = ga;
    for _ in 0..200 {
        if (b - a).abs() <= tol * a.abs().max(1.0) {
            break;
        }
        let m = 0.5 * (a + b);
        seg.eval(m, buf);
        let fm = g(m, buf);
        if (fa < 0.0) == (fm < 0.0) && fm != 0.0 {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    b
}

/// Counters of the integration run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// How the run ended.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Halted { label: String },
}

/// Time-stamped states, invariant residuals and events of one run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Residuals per stored sample, in the order of `report.entries`.
    pub residuals: Vec<Vec<f64>>,
    pub events: Vec<EventRecord>,
    pub report: InvariantReport,
    pub stats: Stats,
    pub termination: Termination,
    pub dense: Option<DenseOutput>,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory always holds the initial sample")
    }
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory always holds the initial sample")
    }
    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
    /// Names of the monitored quantities.
    pub fn invariant_names(&self) -> Vec<&str> {
        self.report.entries.iter().map(|e| e.name.as_str()).collect()
    }
}

/// Recompute an invariant report from the stored samples of a trajectory.
pub fn monitor_invariants<S: OdeSystem + ?Sized>(system: &S, traj: &Trajectory) -> InvariantReport {
    let mut iter = traj.times.iter().zip(&traj.states);
    let Some((&t0, y0)) = iter.next() else { return InvariantReport::default() };
    let mut report = InvariantReport::start(&system.invariants(t0, y0));
    for (&t, y) in iter {
        report.update(&system.invariants(t, y));
    }
    report
}

/// Refined times where the event function changes sign along a trajectory
/// integrated with `keep_dense`.  Without dense output, sign changes between
/// stored samples are refined by bisection on linear interpolation.
pub fn detect_events(traj: &Trajectory, spec: &EventSpec<'_>) -> Vec<f64> {
    const TOL: f64 = 1e-12;
    if let Some(dense) = &traj.dense {
        return dense.find_roots(&*spec.function, spec.direction, TOL);
    }
    let g = &spec.function;
    let mut roots = Vec::new();
    for k in 1..traj.times.len() {
        let (ta, tb) = (traj.times[k - 1], traj.times[k]);
        let (ga, gb) = (g(ta, &traj.states[k - 1]), g(tb, &traj.states[k]));
        if spec.direction.matches(ga, gb) {
            roots.push(ta + (tb - ta) * ga / (ga - gb));
        }
    }
    roots
}

/// Integrate `system` from `(t0, y0)` over `span` (negative spans integrate
/// backward in time).  The initial state is first brought into the chart's
/// gauge when gauge renormalization is enabled.
pub fn integrate<S: OdeSystem + ?Sized>(
    system: &S,
    t0: f64,
    y0: &[f64],
    span: f64,
    opts: &IntegratorOptions,
    events: &[EventSpec<'_>],
) -> Result<Trajectory> {
    opts.validate()?;
    let n = system.dim();
    if y0.len() != n {
        return Err(Error::InvalidState(format!("expected {n} components, got {}", y0.len())));
    }
    if !span.is_finite() {
        return Err(Error::InvalidOptions("span must be finite".into()));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidState("initial state is not finite".into()));
    }
    Driver::new(system, n, opts, events).run(t0, y0, span)
}

struct Driver<'s, 'e, S: OdeSystem + ?Sized> {
    sys: &'s S,
    n: usize,
    opts: &'s IntegratorOptions,
    events: &'s [EventSpec<'e>],
    stats: Stats,
    k: Vec<Vec<f64>>,
    ytmp: Vec<f64>,
}

impl<'s, 'e, S: OdeSystem + ?Sized> Driver<'s, 'e, S> {
    fn new(sys: &'s S, n: usize, opts: &'s IntegratorOptions, events: &'s [EventSpec<'e>]) -> Self {
        Self { sys, n, opts, events, stats: Stats::default(), k: vec![vec![0.0; n]; 16], ytmp: vec![0.0; n] }
    }

    fn f(&mut self, t: f64, y: &[f64], out_stage: usize) {
        let mut dy = std::mem::take(&mut self.k[out_stage]);
        self.sys.rhs(t, y, &mut dy);
        self.k[out_stage] = dy;
        self.stats.evaluations += 1;
    }

    /// `ytmp = y + h Σ a_j k_j` followed by an evaluation into stage `out`.
    fn stage(&mut self, t: f64, y: &[f64], h: f64, terms: &[(f64, usize)], out: usize) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for &(a, j) in terms {
                acc += a * self.k[j][i];
            }
            self.ytmp[i] = y[i] + h * acc;
        }
        let ytmp = std::mem::take(&mut self.ytmp);
        self.f(t, &ytmp, out);
        self.ytmp = ytmp;
    }

    fn initial_step(&mut self, t: f64, y: &[f64], dir: f64) -> f64 {
        let (rtol, atol) = (self.opts.rel_tol, self.opts.abs_tol);
        let mut dnf = 0.0;
        let mut dny = 0.0;
        for i in 0..self.n {
            let sk = atol + rtol * y[i].abs();
            dnf += (self.k[0][i] / sk).powi(2);
            dny += (y[i] / sk).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { (dny / dnf).sqrt() * 0.01 };
        h = h.min(self.opts.max_step);
        let y1: Vec<f64> = (0..self.n).map(|i| y[i] + dir * h * self.k[0][i]).collect();
        self.f(t + dir * h, &y1, 1);
        let mut der2 = 0.0;
        for i in 0..self.n {
            let sk = atol + rtol * y[i].abs();
            der2 += ((self.k[1][i] - self.k[0][i]) / sk).powi(2);
        }
        let der2 = der2.sqrt() / h;
        let der12 = der2.abs().max(dnf.sqrt());
        let h1 = if !(der12 > 1e-15) { (h * 1e-3).max(1e-6) } else { (0.01 / der12).powf(1.0 / 8.0) };
        let h = (100.0 * h).min(h1).min(self.opts.max_step);
        if h.is_finite() && h > 0.0 {
            h
        } else {
            1e-6
        }
    }

    /// Attempt one step of size `h`.  On return stages 0..13 hold the
    /// derivatives (stage 12 is `f(t+h, y_new)`) and `ynew` the solution.
    fn try_step(&mut self, t: f64, y: &[f64], h: f64, ynew: &mut [f64]) -> f64 {
        use tableau::*;
        self.stage(t + C2 * h, y, h, &[(A21, 0)], 1);
        self.stage(t + C3 * h, y, h, &[(A31, 0), (A32, 1)], 2);
        self.stage(t + C4 * h, y, h, &[(A41, 0), (A43, 2)], 3);
        self.stage(t + C5 * h, y, h, &[(A51, 0), (A53, 2), (A54, 3)], 4);
        self.stage(t + C6 * h, y, h, &[(A61, 0), (A64, 3), (A65, 4)], 5);
        self.stage(t + C7 * h, y, h, &[(A71, 0), (A74, 3), (A75, 4), (A76, 5)], 6);
        self.stage(t + C8 * h, y, h, &[(A81, 0), (A84, 3), (A85, 4), (A86, 5), (A87, 6)], 7);
        self.stage(t + C9 * h, y, h, &[(A91, 0), (A94, 3), (A95, 4), (A96, 5), (A97, 6), (A98, 7)], 8);
        self.stage(
            t + C10 * h,
            y,
            h,
            &[(A101, 0), (A104, 3), (A105, 4), (A106, 5), (A107, 6), (A108, 7), (A109, 8)],
            9,
        );
        self.stage(
            t + C11 * h,
            y,
            h,
            &[(A111, 0), (A114, 3), (A115, 4), (A116, 5), (A117, 6), (A118, 7), (A119, 8), (A1110, 9)],
            10,
        );
        self.stage(
            t + h,
            y,
            h,
            &[(A121, 0), (A124, 3), (A125, 4), (A126, 5), (A127, 6), (A128, 7), (A129, 8), (A1210, 9), (A1211, 10)],
            11,
        );
        let k = &self.k;
        let (rtol, atol) = (self.opts.rel_tol, self.opts.abs_tol);
        let mut err = 0.0;
        let mut err2 = 0.0;
        let mut finite = true;
        for i in 0..self.n {
            let incr = B1 * k[0][i]
                + B6 * k[5][i]
                + B7 * k[6][i]
                + B8 * k[7][i]
                + B9 * k[8][i]
                + B10 * k[9][i]
                + B11 * k[10][i]
                + B12 * k[11][i];
            ynew[i] = y[i] + h * incr;
            let sk = atol + rtol * y[i].abs().max(ynew[i].abs());
            let e2 = incr - BHH1 * k[0][i] - BHH2 * k[8][i] - BHH3 * k[11][i];
            err2 += (e2 / sk).powi(2);
            let e = ER1 * k[0][i]
                + ER6 * k[5][i]
                + ER7 * k[6][i]
                + ER8 * k[7][i]
                + ER9 * k[8][i]
                + ER10 * k[9][i]
                + ER11 * k[10][i]
                + ER12 * k[11][i];
            err += (e / sk).powi(2);
            finite &= ynew[i].is_finite();
        }
        if !finite || !err.is_finite() || !err2.is_finite() {
            return f64::INFINITY;
        }
        let mut deno = err + 0.01 * err2;
        if deno <= 0.0 {
            deno = 1.0;
        }
        let err = h.abs() * err * (1.0 / (deno * self.n as f64)).sqrt();
        // Derivative at the new point; it is the first stage of the next step.
        let ynew_owned = ynew.to_vec();
        self.f(t + h, &ynew_owned, 12);
        if self.k[12].iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        err
    }

    /// Coefficients of the continuous extension of the last accepted step.
    fn dense_segment(&mut self, t: f64, y: &[f64], ynew: &[f64], h: f64) -> Segment {
        use tableau::*;
        let n = self.n;
        let mut cont = vec![0.0; 8 * n];
        {
            let k = &self.k;
            for i in 0..n {
                let ydiff = ynew[i] - y[i];
                let bspl = h * k[0][i] - ydiff;
                cont[i] = y[i];
                cont[n + i] = ydiff;
                cont[2 * n + i] = bspl;
                cont[3 * n + i] = ydiff - h * k[12][i] - bspl;
                let row = |d: [f64; 8]| {
                    d[0] * k[0][i]
                        + d[1] * k[5][i]
                        + d[2] * k[6][i]
                        + d[3] * k[7][i]
                        + d[4] * k[8][i]
                        + d[5] * k[9][i]
                        + d[6] * k[10][i]
                        + d[7] * k[11][i]
                };
                cont[4 * n + i] = row([D41, D46, D47, D48, D49, D410, D411, D412]);
                cont[5 * n + i] = row([D51, D56, D57, D58, D59, D510, D511, D512]);
                cont[6 * n + i] = row([D61, D66, D67, D68, D69, D610, D611, D612]);
                cont[7 * n + i] = row([D71, D76, D77, D78, D79, D710, D711, D712]);
            }
        }
        self.stage(
            t + C14 * h,
            y,
            h,
            &[(A141, 0), (A147, 6), (A148, 7), (A149, 8), (A1410, 9), (A1411, 10), (A1412, 11), (A1413, 12)],
            13,
        );
        self.stage(
            t + C15 * h,
            y,
            h,
            &[(A151, 0), (A156, 5), (A157, 6), (A158, 7), (A1511, 10), (A1512, 11), (A1513, 12), (A1514, 13)],
            14,
        );
        self.stage(
            t + C16 * h,
            y,
            h,
            &[(A161, 0), (A166, 5), (A167, 6), (A168, 7), (A169, 8), (A1613, 12), (A1614, 13), (A1615, 14)],
            15,
        );
        let k = &self.k;
        let tail =
            [[D413, D414, D415, D416], [D513, D514, D515, D516], [D613, D614, D615, D616], [D713, D714, D715, D716]];
        for (j, d) in tail.iter().enumerate() {
            for i in 0..n {
                let c = &mut cont[(4 + j) * n + i];
                *c = h * (*c + d[0] * k[12][i] + d[1] * k[13][i] + d[2] * k[14][i] + d[3] * k[15][i]);
            }
        }
        Segment { t0: t, h, cont }
    }

    fn run(mut self, t0: f64, y0: &[f64], span: f64) -> Result<Trajectory> {
        const BETA: f64 = 0.04;
        const SAFE: f64 = 0.9;
        const FACC1: f64 = 1.0 / 0.333;
        const FACC2: f64 = 1.0 / 6.0;
        let expo1 = 1.0 / 8.0 - BETA * 0.2;

        let n = self.n;
        let dir = if span < 0.0 { -1.0 } else { 1.0 };
        let t_end = t0 + span;
        let mut t = t0;
        let mut y = y0.to_vec();
        // Start in the chart's gauge so that gauge-dependent monitored
        // quantities are measured from their normalized values.
        if self.opts.gauge_every > 0 {
            self.sys.renormalize(&mut y);
        }
        let mut ynew = vec![0.0; n];

        let inv0 = self.sys.invariants(t, &y);
        let mut report = InvariantReport::start(&inv0);
        let mut traj = Trajectory {
            times: vec![t],
            states: vec![y.clone()],
            residuals: vec![report.residuals_of(&inv0)],
            events: Vec::new(),
            report: InvariantReport::default(),
            stats: Stats::default(),
            termination: Termination::Completed,
            dense: self.opts.keep_dense.then(|| DenseOutput { dim: n, segments: Vec::new() }),
        };
        let mut sample_times: Vec<f64> = match &self.opts.output {
            Output::Times(ts) => {
                let mut v: Vec<f64> =
                    ts.iter().copied().filter(|&s| (s - t0) * dir > 0.0 && (t_end - s) * dir >= 0.0).collect();
                v.sort_by(|a, b| (dir * a).total_cmp(&(dir * b)));
                v.dedup();
                v
            }
            _ => Vec::new(),
        };
        sample_times.reverse(); // pop from the back in integration order

        if span == 0.0 {
            traj.report = report;
            return Ok(traj);
        }

        self.f(t, &y, 0);
        if self.k[0].iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidState("vector field is not finite at the initial state".into()));
        }
        let mut h = match self.opts.initial_step {
            Some(h) => h.min(self.opts.max_step),
            None => self.initial_step(t, &y, dir),
        } * dir;
        let mut facold: f64 = 1e-4;
        let mut last_rejected = false;
        let mut g_old: Vec<f64> = self.events.iter().map(|e| (e.function)(t, &y)).collect();

        loop {
            if (t_end - t) * dir <= 0.0 {
                break;
            }
            if self.stats.accepted + self.stats.rejected >= self.opts.max_steps {
                return Err(Error::MaxSteps(self.opts.max_steps));
            }
            if h.abs() < 10.0 * f64::EPSILON * t.abs().max(1.0) {
                return Err(Error::StepUnderflow { t, h });
            }
            let mut last = false;
            if (t + 1.01 * h - t_end) * dir >= 0.0 {
                h = t_end - t;
                last = true;
            }
            let err = self.try_step(t, &y, h, &mut ynew);
            let fac11 = if err.is_finite() { err.powf(expo1) } else { f64::INFINITY };
            if err <= 1.0 {
                // Accepted step.
                let fac = FACC2.max(FACC1.min(fac11 / facold.powf(BETA) / SAFE));
                let mut hnew = h / fac;
                facold = err.max(1e-4);
                self.stats.accepted += 1;
                let t_new = if last { t_end } else { t + h };

                let g_new: Vec<f64> = self.events.iter().map(|e| (e.function)(t_new, &ynew)).collect();
                let crossing: Vec<usize> =
                    (0..self.events.len()).filter(|&i| self.events[i].direction.matches(g_old[i], g_new[i])).collect();
                let needs_samples = sample_times.last().is_some_and(|&s| (t_new - s) * dir >= 0.0);
                let segment = if self.opts.keep_dense || needs_samples || !crossing.is_empty() {
                    let mut seg = self.dense_segment(t, &y, &ynew, h);
                    seg.h = t_new - t;
                    Some(seg)
                } else {
                    None
                };

                // Locate events inside the step, earliest first.
                let mut halt_at: Option<(f64, String)> = None;
                if let Some(seg) = &segment {
                    let mut found: Vec<(f64, usize)> = Vec::new();
                    let mut buf = vec![0.0; n];
                    for &i in &crossing {
                        let ev = &self.events[i];
                        let te = bisect(&*ev.function, seg, g_old[i], 1e-13, &mut buf);
                        found.push((te, i));
                    }
                    found.sort_by(|a, b| (dir * a.0).total_cmp(&(dir * b.0)));
                    for (te, i) in found {
                        let mut state = vec![0.0; n];
                        seg.eval(te, &mut state);
                        let ev = &self.events[i];
                        traj.events.push(EventRecord { label: ev.label.clone(), t: te, state: state.clone() });
                        if ev.action == EventAction::Halt {
                            halt_at = Some((te, ev.label.clone()));
                            break;
                        }
                    }
                }

                let limit = halt_at.as_ref().map_or(t_new, |(te, _)| *te);
                if let Some(seg) = &segment {
                    while let Some(&s) = sample_times.last() {
                        if (limit - s) * dir < 0.0 {
                            break;
                        }
                        sample_times.pop();
                        let mut state = vec![0.0; n];
                        if s == t_new {
                            state.copy_from_slice(&ynew);
                        } else {
                            seg.eval(s, &mut state);
                        }
                        let inv = self.sys.invariants(s, &state);
                        report.update(&inv);
                        traj.residuals.push(report.residuals_of(&inv));
                        traj.times.push(s);
                        traj.states.push(state);
                    }
                }
                if let (Some(d), Some(seg)) = (traj.dense.as_mut(), segment.as_ref()) {
                    d.segments.push(seg.clone());
                }

                if let Some((te, label)) = halt_at {
                    let seg = segment.as_ref().expect("events imply a dense segment");
                    let mut state = vec![0.0; n];
                    seg.eval(te, &mut state);
                    if traj.times.last() != Some(&te) {
                        let inv = self.sys.invariants(te, &state);
                        report.update(&inv);
                        traj.residuals.push(report.residuals_of(&inv));
                        traj.times.push(te);
                        traj.states.push(state);
                    }
                    traj.termination = Termination::Halted { label };
                    break;
                }

                t = t_new;
                y.copy_from_slice(&ynew);
                let inv = self.sys.invariants(t, &y);
                report.update(&inv);
                if matches!(self.opts.output, Output::Steps) || (last && traj.times.last() != Some(&t)) {
                    traj.residuals.push(report.residuals_of(&inv));
                    traj.times.push(t);
                    traj.states.push(y.clone());
                }

                let gauge = self.opts.gauge_every > 0 && self.stats.accepted % self.opts.gauge_every == 0;
                if gauge && self.sys.renormalize(&mut y) {
                    self.f(t, &y, 0);
                } else {
                    let fsal = std::mem::take(&mut self.k[12]);
                    self.k[0].copy_from_slice(&fsal);
                    self.k[12] = fsal;
                }
                g_old = self.events.iter().map(|e| (e.function)(t, &y)).collect();

                if hnew.abs() > self.opts.max_step {
                    hnew = dir * self.opts.max_step;
                }
                if last_rejected {
                    hnew = dir * hnew.abs().min(h.abs());
                }
                last_rejected = false;
                h = hnew;
            } else {
                let shrink = if fac11.is_finite() { FACC1.min(fac11 / SAFE) } else { 10.0 };
                h /= shrink;
                last_rejected = true;
                if self.stats.accepted >= 1 {
                    self.stats.rejected += 1;
                }
            }
        }
        traj.report = report;
        traj.stats = self.stats;
        Ok(traj)
    }
}

/// Butcher tableau, error estimators and dense-output coefficients of the
/// 8(5,3) Dormand–Prince pair.
#[allow(clippy::excessive_precision, clippy::unreadable_literal)]
mod tableau {
    pub const C2: f64 = 0.526001519587677318785587544488E-01;
    pub const C3: f64 = 0.789002279381515978178381316732E-01;
    pub const C4: f64 = 0.118350341907227396726757197510E+00;
    pub const C5: f64 = 0.281649658092772603273242802490E+00;
    pub const C6: f64 = 0.333333333333333333333333333333E+00;
    pub const C7: f64 = 0.25E+00;
    pub const C8: f64 = 0.307692307692307692307692307692E+00;
    pub const C9: f64 = 0.651282051282051282051282051282E+00;
    pub const C10: f64 = 0.6E+00;
    pub const C11: f64 = 0.857142857142857142857142857142E+00;
    pub const C14: f64 = 0.1E+00;
    pub const C15: f64 = 0.2E+00;
    pub const C16: f64 = 0.777777777777777777777777777778E+00;

    pub const A21: f64 = 5.26001519587677318785587544488E-2;
    pub const A31: f64 = 1.97250569845378994544595329183E-2;
    pub const A32: f64 = 5.91751709536136983633785987549E-2;
    pub const A41: f64 = 2.95875854768068491816892993775E-2;
    pub const A43: f64 = 8.87627564304205475450678981324E-2;
    pub const A51: f64 = 2.41365134159266685502369798665E-1;
    pub const A53: f64 = -8.84549479328286085344864962717E-1;
    pub const A54: f64 = 9.24834003261792003115737966543E-1;
    pub const A61: f64 = 3.7037037037037037037037037037E-2;
    pub const A64: f64 = 1.70828608729473871279604482173E-1;
    pub const A65: f64 = 1.25467687566822425016691814123E-1;
    pub const A71: f64 = 3.7109375E-2;
    pub const A74: f64 = 1.70252211019544039314978060272E-1;
    pub const A75: f64 = 6.02165389804559606850219397283E-2;
    pub const A76: f64 = -1.7578125E-2;
    pub const A81: f64 = 3.70920001185047927108779319836E-2;
    pub const A84: f64 = 1.70383925712239993810214054705E-1;
    pub const A85: f64 = 1.07262030446373284651809199168E-1;
    pub const A86: f64 = -1.53194377486244017527936158236E-2;
    pub const A87: f64 = 8.27378916381402288758473766002E-3;
    pub const A91: f64 = 6.24110958716075717114429577812E-1;
    pub const A94: f64 = -3.36089262944694129406857109825E0;
    pub const A95: f64 = -8.68219346841726006818189891453E-1;
    pub const A96: f64 = 2.75920996994467083049415600797E1;
    pub const A97: f64 = 2.01540675504778934086186788979E1;
    pub const A98: f64 = -4.34898841810699588477366255144E1;
    pub const A101: f64 = 4.77662536438264365890433908527E-1;
    pub const A104: f64 = -2.48811461997166764192642586468E0;
    pub const A105: f64 = -5.90290826836842996371446475743E-1;
    pub const A106: f64 = 2.12300514481811942347288949897E1;
    pub const A107: f64 = 1.52792336328824235832596922938E1;
    pub const A108: f64 = -3.32882109689848629194453265587E1;
    pub const A109: f64 = -2.03312017085086261358222928593E-2;
    pub const A111: f64 = -9.3714243008598732571704021658E-1;
    pub const A114: f64 = 5.18637242884406370830023853209E0;
    pub const A115: f64 = 1.09143734899672957818500254654E0;
    pub const A116: f64 = -8.14978701074692612513997267357E0;
    pub const A117: f64 = -1.85200656599969598641566180701E1;
    pub const A118: f64 = 2.27394870993505042818970056734E1;
    pub const A119: f64 = 2.49360555267965238987089396762E0;
    pub const A1110: f64 = -3.0467644718982195003823669022E0;
    pub const A121: f64 = 2.27331014751653820792359768449E0;
    pub const A124: f64 = -1.05344954667372501984066689879E1;
    pub const A125: f64 = -2.00087205822486249909675718444E0;
    pub const A126: f64 = -1.79589318631187989172765950534E1;
    pub const A127: f64 = 2.79488845294199600508499808837E1;
    pub const A128: f64 = -2.85899827713502369474065508674E0;
    pub const A129: f64 = -8.87285693353062954433549289258E0;
    pub const A1210: f64 = 1.23605671757943030647266201528E1;
    pub const A1211: f64 = 6.43392746015763530355970484046E-1;
    pub const A141: f64 = 5.61675022830479523392909219681E-2;
    pub const A147: f64 = 2.53500210216624811088794765333E-1;
    pub const A148: f64 = -2.46239037470802489917441475441E-1;
    pub const A149: f64 = -1.24191423263816360469010140626E-1;
    pub const A1410: f64 = 1.5329179827876569731206322685E-1;
    pub const A1411: f64 = 8.20105229563468988491666602057E-3;
    pub const A1412: f64 = 7.56789766054569976138603589584E-3;
    pub const A1413: f64 = -8.298E-3;
    pub const A151: f64 = 3.18346481635021405060768473261E-2;
    pub const A156: f64 = 2.83009096723667755288322961402E-2;
    pub const A157: f64 = 5.35419883074385676223797384372E-2;
    pub const A158: f64 = -5.49237485713909884646569340306E-2;
    pub const A1511: f64 = -1.08347328697249322858509316994E-4;
    pub const A1512: f64 = 3.82571090835658412954920192323E-4;
    pub const A1513: f64 = -3.40465008687404560802977114492E-4;
    pub const A1514: f64 = 1.41312443674632500278074618366E-1;
    pub const A161: f64 = -4.28896301583791923408573538692E-1;
    pub const A166: f64 = -4.69762141536116384314449447206E0;
    pub const A167: f64 = 7.68342119606259904184240953878E0;
    pub const A168: f64 = 4.06898981839711007970213554331E0;
    pub const A169: f64 = 3.56727187455281109270669543021E-1;
    pub const A1613: f64 = -1.39902416515901462129418009734E-3;
    pub const A1614: f64 = 2.9475147891527723389556272149E0;
    pub const A1615: f64 = -9.15095847217987001081870187138E0;

    pub const B1: f64 = 5.42937341165687622380535766363E-2;
    pub const B6: f64 = 4.45031289275240888144113950566E0;
    pub const B7: f64 = 1.89151789931450038304281599044E0;
    pub const B8: f64 = -5.8012039600105847814672114227E0;
    pub const B9: f64 = 3.1116436695781989440891606237E-1;
    pub const B10: f64 = -1.52160949662516078556178806805E-1;
    pub const B11: f64 = 2.01365400804030348374776537501E-1;
    pub const B12: f64 = 4.47106157277725905176885569043E-2;

    pub const BHH1: f64 = 0.244094488188976377952755905512E+00;
    pub const BHH2: f64 = 0.733846688281611857341361741547E+00;
    pub const BHH3: f64 = 0.220588235294117647058823529412E-01;

    pub const ER1: f64 = 0.1312004499419488073250102996E-01;
    pub const ER6: f64 = -0.1225156446376204440720569753E+01;
    pub const ER7: f64 = -0.4957589496572501915214079952E+00;
    pub const ER8: f64 = 0.1664377182454986536961530415E+01;
    pub const ER9: f64 = -0.3503288487499736816886487290E+00;
    pub const ER10: f64 = 0.3341791187130174790297318841E+00;
    pub const ER11: f64 = 0.8192320648511571246570742613E-01;
    pub const ER12: f64 = -0.2235530786388629525884427845E-01;

    pub const D41: f64 = -0.84289382761090128651353491142E+01;
    pub const D46: f64 = 0.56671495351937776962531783590E+00;
    pub const D47: f64 = -0.30689499459498916912797304727E+01;
    pub const D48: f64 = 0.23846676565120698287728149680E+01;
    pub const D49: f64 = 0.21170345824450282767155149946E+01;
    pub const D410: f64 = -0.87139158377797299206789907490E+00;
    pub const D411: f64 = 0.22404374302607882758541771650E+01;
    pub const D412: f64 = 0.63157877876946881815570249290E+00;
    pub const D413: f64 = -0.88990336451333310820698117400E-01;
    pub const D414: f64 = 0.18148505520854727256656404962E+02;
    pub const D415: f64 = -0.91946323924783554000451984436E+01;
    pub const D416: f64 = -0.44360363875948939664310572000E+01;
    pub const D51: f64 = 0.10427508642579134603413151009E+02;
    pub const D56: f64 = 0.24228349177525818288430175319E+03;
    pub const D57: f64 = 0.16520045171727028198505394887E+03;
    pub const D58: f64 = -0.37454675472269020279518312152E+03;
    pub const D59: f64 = -0.22113666853125306036270938578E+02;
    pub const D510: f64 = 0.77334326684722638389603898808E+01;
    pub const D511: f64 = -0.30674084731089398182061213626E+02;
    pub const D512: f64 = -0.93321305264302278729567221706E+01;
    pub const D513: f64 = 0.15697238121770843886131091075E+02;
    pub const D514: f64 = -0.31139403219565177677282850411E+02;
    pub const D515: f64 = -0.93529243588444783865713862664E+01;
    pub const D516: f64 = 0.35816841486394083752465898540E+02;
    pub const D61: f64 = 0.19985053242002433820987653617E+02;
    pub const D66: f64 = -0.38703730874935176555105901742E+03;
    pub const D67: f64 = -0.18917813819516756882830838328E+03;
    pub const D68: f64 = 0.52780815920542364900561016686E+03;
    pub const D69: f64 = -0.11573902539959630126141871134E+02;
    pub const D610: f64 = 0.68812326946963000169666922661E+01;
    pub const D611: f64 = -0.10006050966910838403183860980E+01;
    pub const D612: f64 = 0.77771377980534432092869265740E+00;
    pub const D613: f64 = -0.27782057523535084065932004339E+01;
    pub const D614: f64 = -0.60196695231264120758267380846E+02;
    pub const D615: f64 = 0.84320405506677161018159903784E+02;
    pub const D616: f64 = 0.11992291136182789328035130030E+02;
    pub const D71: f64 = -0.25693933462703749003312586129E+02;
    pub const D76: f64 = -0.15418974869023643374053993627E+03;
    pub const D77: f64 = -0.23152937917604549567536039109E+03;
    pub const D78: f64 = 0.35763911791061412378285349910E+03;
    pub const D79: f64 = 0.93405324183624310003907691704E+02;
    pub const D710: f64 = -0.37458323136451633156875139351E+02;
    pub const D711: f64 = 0.10409964950896230045147246184E+03;
    pub const D712: f64 = 0.29840293426660503123344363579E+02;
    pub const D713: f64 = -0.43533456590011143754432175058E+02;
    pub const D714: f64 = 0.96324553959188282948394950600E+02;
    pub const D715: f64 = -0.39177261675615439165231486172E+02;
    pub const D716: f64 = -0.14972683625798562581422125276E+03;
}
