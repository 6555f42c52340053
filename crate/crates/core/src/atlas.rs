//! Chart registry: named charts, their state layouts, construction of the
//! corresponding vector fields and the maps between charts.
//!
//! Every chart state can be pushed to a physical *hub* representation
//! (relative, spherical or reduced homogeneous coordinates together with the
//! physical time) and pulled back from it, which gives a map between any two
//! charts that share the same symmetry reduction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::algebra::{mass_norm, Config3, Masses, Triple, C64};
use crate::blowup::{BlownSystem, TimeScale};
use crate::error::{Error, Result};
use crate::form::{RadialSystem, ShapeForm};
use crate::integrate::{Direction, EventAction, EventSpec, InvariantKind, OdeSystem};
use crate::reduced::{
    from_reduced, reduced_system, to_reduced, AffineForm, AffineRedState, RedState, RoundForm, RoundRedState,
};
use crate::regularize::forms::{
    cone_reduced_system, cone_sph_system, quad_reduced_system, quad_sph_system, reg_affine_system, reg_round_system,
};
use crate::regularize::{
    cone_to_homogeneous, lc_lift, lc_lift_continuous, ConeState, QuadState, RegAffineState, RegRoundState,
};
use crate::relative::{omega, RelState, RelativeSystem};
use crate::spherical::{from_spherical, shape_potential, spherical_system, to_spherical, SphState};

/// The charts of the atlas.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    /// Relative coordinates `(Q, P)`.
    Relative,
    /// Spherical-homogeneous `(r, X, p_r, Y)`.
    Spherical,
    /// Rotation-reduced homogeneous `(r, X, p_r, Z)`.
    Reduced,
    /// Reduced affine chart on the Jacobi basis.
    Affine,
    /// Reduced affine chart on the equilateral basis.
    Equilateral,
    /// Reduced round shape-sphere chart (equilateral basis).
    Round,
    /// Regularized unreduced, cone coordinates `(z, η)`.
    ConeSph,
    /// Regularized unreduced, quadratic coordinates `(x, y)`.
    QuadSph,
    /// Regularized reduced, cone coordinates.
    ConeReduced,
    /// Regularized reduced, quadratic coordinates.
    QuadReduced,
    /// Regularized reduced affine chart.
    RegAffine,
    /// Regularized reduced `c`-sphere.
    RegRound,
}

impl ChartKind {
    pub const ALL: [ChartKind; 12] = [
        ChartKind::Relative,
        ChartKind::Spherical,
        ChartKind::Reduced,
        ChartKind::Affine,
        ChartKind::Equilateral,
        ChartKind::Round,
        ChartKind::ConeSph,
        ChartKind::QuadSph,
        ChartKind::ConeReduced,
        ChartKind::QuadReduced,
        ChartKind::RegAffine,
        ChartKind::RegRound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ChartKind::Relative => "relative",
            ChartKind::Spherical => "spherical",
            ChartKind::Reduced => "reduced",
            ChartKind::Affine => "affine",
            ChartKind::Equilateral => "equilateral",
            ChartKind::Round => "round",
            ChartKind::ConeSph => "cone_sph",
            ChartKind::QuadSph => "quad_sph",
            ChartKind::ConeReduced => "cone_reduced",
            ChartKind::QuadReduced => "quad_reduced",
            ChartKind::RegAffine => "reg_affine",
            ChartKind::RegRound => "reg_round",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Whether the chart is reduced by rotations (angular momentum is a parameter).
    pub fn is_reduced(self) -> bool {
        !matches!(self, ChartKind::Relative | ChartKind::Spherical | ChartKind::ConeSph | ChartKind::QuadSph)
    }

    /// Whether binary collisions are regularized (physical motion on the zero level).
    pub fn is_regularized(self) -> bool {
        matches!(
            self,
            ChartKind::ConeSph
                | ChartKind::QuadSph
                | ChartKind::ConeReduced
                | ChartKind::QuadReduced
                | ChartKind::RegAffine
                | ChartKind::RegRound
        )
    }

    /// Names of the shape coordinates and their conjugate momenta.
    fn shape_fields(self) -> (Vec<String>, Vec<String>) {
        let triple = |p: &str| -> Vec<String> {
            ["12", "31", "23"].iter().flat_map(|k| [format!("{p}{k}_re"), format!("{p}{k}_im")]).collect()
        };
        let list = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        match self {
            ChartKind::Relative => (triple("Q"), triple("P")),
            ChartKind::Spherical => (triple("X"), triple("Y")),
            ChartKind::Reduced => (triple("X"), triple("Z")),
            ChartKind::Affine | ChartKind::Equilateral | ChartKind::RegAffine => {
                (list(&["z_re", "z_im"]), list(&["zeta_re", "zeta_im"]))
            }
            ChartKind::Round => (list(&["w1", "w2", "w3"]), list(&["a1", "a2", "a3"])),
            ChartKind::ConeSph | ChartKind::ConeReduced => (triple("z"), triple("eta")),
            ChartKind::QuadSph | ChartKind::QuadReduced => {
                (list(&["x1_re", "x1_im", "x2_re", "x2_im"]), list(&["y1_re", "y1_im", "y2_re", "y2_im"]))
            }
            ChartKind::RegRound => (list(&["c1", "c2", "c3"]), list(&["gamma1", "gamma2", "gamma3"])),
        }
    }
}

/// A chart together with its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub kind: ChartKind,
    pub masses: Masses,
    /// Angular momentum of the reduced charts.
    pub mu: f64,
    /// Energy level of the regularized charts (and of blown-up unregularized charts).
    pub h: f64,
    /// Blow-up time scale, if the chart is blown up at triple collision.
    pub blowup: Option<TimeScale>,
}

impl ChartSpec {
    pub fn new(kind: ChartKind, masses: Masses) -> Self {
        Self { kind, masses, mu: 0.0, h: 0.0, blowup: None }
    }

    /// Parse a chart name such as `reg_round` or `blown_reg_round`.
    pub fn parse_name(name: &str, masses: Masses, ts: TimeScale) -> Result<Self> {
        let (base, blowup) = match name.strip_prefix("blown_") {
            Some(rest) => (rest, Some(ts)),
            None => (name, None),
        };
        let kind = ChartKind::parse(base).ok_or_else(|| Error::InvalidState(format!("unknown chart `{name}`")))?;
        if blowup.is_some() && kind == ChartKind::Relative {
            return Err(Error::InvalidState("the relative chart has no radial variable to blow up".into()));
        }
        Ok(Self { kind, masses, mu: 0.0, h: 0.0, blowup })
    }

    /// Full chart name (with the `blown_` prefix when blown up).
    pub fn name(&self) -> String {
        match self.blowup {
            Some(_) => format!("blown_{}", self.kind.name()),
            None => self.kind.name().to_string(),
        }
    }
}

/// Physical representation of a chart state used to move between charts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Physical {
    Relative(RelState),
    Spherical(SphState),
    Reduced(RedState),
}

/// A physical state at a physical time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HubSample {
    pub t: f64,
    pub state: Physical,
}

impl HubSample {
    /// The state in relative coordinates.
    pub fn relative(&self, masses: &Masses) -> Result<RelState> {
        match self.state {
            Physical::Relative(s) => Ok(s),
            Physical::Spherical(s) => from_spherical(&s, masses),
            Physical::Reduced(s) => from_spherical(&from_reduced(&s, masses)?, masses),
        }
    }
    /// The state in spherical-homogeneous coordinates.
    pub fn spherical(&self, masses: &Masses) -> Result<SphState> {
        match self.state {
            Physical::Relative(s) => to_spherical(&s, masses),
            Physical::Spherical(s) => Ok(s),
            Physical::Reduced(s) => from_reduced(&s, masses),
        }
    }
    /// The state in rotation-reduced homogeneous coordinates.
    pub fn reduced(&self, masses: &Masses) -> Result<RedState> {
        match self.state {
            Physical::Reduced(s) => Ok(s),
            _ => to_reduced(&self.spherical(masses)?, masses),
        }
    }

    /// Angular momentum of the state.
    pub fn angular_momentum(&self) -> f64 {
        match self.state {
            Physical::Relative(s) => s.angular_momentum(),
            Physical::Spherical(s) => s.angular_momentum(),
            Physical::Reduced(s) => s.mu,
        }
    }

    /// Physical energy `H` of the state.
    pub fn energy(&self, masses: &Masses) -> Result<f64> {
        let s = self.relative(masses)?;
        crate::relative::h_rel(&s, masses)
    }

    /// Squared mutual distances `|Q_ij|²`.
    pub fn distances_sq(&self, masses: &Masses) -> Result<[f64; 3]> {
        let q = self.relative(masses)?.q;
        Ok(std::array::from_fn(|k| q[k].norm_sqr()))
    }
}

/// A constructed chart: its vector field, state layout and maps.
pub struct Chart {
    pub spec: ChartSpec,
    system: Box<dyn OdeSystem + Send + Sync>,
    names: Vec<String>,
    shape_dim: usize,
}

impl std::fmt::Debug for Chart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Chart").field("spec", &self.spec).field("fields", &self.names).finish()
    }
}

fn boxed<F>(sys: RadialSystem<F>, spec: &ChartSpec) -> Box<dyn OdeSystem + Send + Sync>
where
    F: ShapeForm + Send + Sync + 'static,
{
    match spec.blowup {
        Some(ts) => Box::new(BlownSystem::of(sys, ts, spec.h)),
        None => Box::new(sys),
    }
}

impl Chart {
    pub fn new(spec: ChartSpec) -> Result<Self> {
        let (m, mu, h) = (spec.masses, spec.mu, spec.h);
        let system: Box<dyn OdeSystem + Send + Sync> = match spec.kind {
            ChartKind::Relative => Box::new(RelativeSystem::new(m)),
            ChartKind::Spherical => boxed(spherical_system(m), &spec),
            ChartKind::Reduced => boxed(reduced_system(m, mu), &spec),
            ChartKind::Affine => boxed(RadialSystem::new(AffineForm::jacobi(m), mu), &spec),
            ChartKind::Equilateral => boxed(RadialSystem::new(AffineForm::equilateral(m), mu), &spec),
            ChartKind::Round => boxed(RadialSystem::new(RoundForm::equilateral(m), mu), &spec),
            ChartKind::ConeSph => boxed(cone_sph_system(m, h), &spec),
            ChartKind::QuadSph => boxed(quad_sph_system(m, h), &spec),
            ChartKind::ConeReduced => boxed(cone_reduced_system(m, mu, h), &spec),
            ChartKind::QuadReduced => boxed(quad_reduced_system(m, mu, h), &spec),
            ChartKind::RegAffine => boxed(reg_affine_system(m, mu, h), &spec),
            ChartKind::RegRound => boxed(reg_round_system(m, mu, h), &spec),
        };
        let (shape, mom) = spec.kind.shape_fields();
        let shape_dim = shape.len();
        let names: Vec<String> = match (spec.kind, spec.blowup) {
            (ChartKind::Relative, _) => shape.into_iter().chain(mom).collect(),
            (_, None) => std::iter::once("r".to_string())
                .chain(shape)
                .chain(std::iter::once("p_r".to_string()))
                .chain(mom)
                .chain(std::iter::once("t".to_string()))
                .collect(),
            (_, Some(_)) => ["r", "v", "mu_tilde"]
                .iter()
                .map(|s| s.to_string())
                .chain(shape)
                .chain(mom.into_iter().map(|n| format!("alpha_{n}")))
                .chain(std::iter::once("t".to_string()))
                .collect(),
        };
        debug_assert_eq!(names.len(), system.dim());
        Ok(Self { spec, system, names, shape_dim })
    }

    /// The vector field of the chart.
    pub fn system(&self) -> &(dyn OdeSystem + Send + Sync) {
        &*self.system
    }

    /// Names of the state components, in state-vector order.
    pub fn field_names(&self) -> &[String] {
        &self.names
    }

    /// Physical time of a state reached at integration time `s`.
    pub fn physical_time(&self, s: f64, y: &[f64]) -> f64 {
        match self.spec.kind {
            ChartKind::Relative => s,
            _ => y[y.len() - 1],
        }
    }

    /// State as a name → value map.
    pub fn state_to_map(&self, y: &[f64]) -> BTreeMap<String, f64> {
        self.names.iter().cloned().zip(y.iter().copied()).collect()
    }

    /// State vector from a name → value map; `t` defaults to zero.
    pub fn state_from_map(&self, map: &BTreeMap<String, f64>) -> Result<Vec<f64>> {
        if let Some(extra) = map.keys().find(|k| !self.names.contains(k)) {
            return Err(Error::InvalidState(format!("unknown field `{extra}` for chart {}", self.spec.name())));
        }
        self.names
            .iter()
            .map(|n| match map.get(n) {
                Some(v) => Ok(*v),
                None if n == "t" => Ok(0.0),
                None => Err(Error::InvalidState(format!("missing field `{n}` for chart {}", self.spec.name()))),
            })
            .collect()
    }

    /// Validity check of an initial state: finite components, admissible
    /// radius and chart constraints (including the zero level of the
    /// regularized charts and the blown-up energy relation) within `tol`.
    pub fn validate(&self, y: &[f64], tol: f64) -> Result<()> {
        if y.len() != self.system.dim() {
            return Err(Error::InvalidState(format!("expected {} components, got {}", self.system.dim(), y.len())));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidState(format!("component `{}` is not finite", self.names[i])));
        }
        if self.spec.kind != ChartKind::Relative {
            let r = y[0];
            let ok = if self.spec.blowup.is_some() { r >= 0.0 } else { r > 0.0 };
            if !ok {
                return Err(Error::InvalidState(format!("radius r = {r} is not admissible")));
            }
        }
        for inv in self.system.invariants(0.0, y) {
            if inv.kind == InvariantKind::Constraint && !(inv.value.abs() <= tol) {
                return Err(Error::Constraint { name: inv.name, residual: inv.value.abs() });
            }
            if inv.kind == InvariantKind::Conserved && !inv.value.is_finite() {
                return Err(Error::InvalidState(format!("{} is not finite", inv.name)));
            }
        }
        Ok(())
    }

    /// Undo the blow-up, returning the radial-chart state.
    fn unblown(&self, y: &[f64]) -> Result<Vec<f64>> {
        let Some(ts) = self.spec.blowup else { return Ok(y.to_vec()) };
        let n = self.shape_dim;
        let (r, v) = (y[0], y[1]);
        if !(r > 0.0) {
            return Err(Error::CollisionManifold);
        }
        let f = ts.f(r);
        let mut out = Vec::with_capacity(2 * n + 3);
        out.push(r);
        out.extend_from_slice(&y[3..3 + n]);
        out.push(v * r / f);
        out.extend(y[3 + n..3 + 2 * n].iter().map(|a| a * r * r / f));
        out.push(y[3 + 2 * n]);
        Ok(out)
    }

    /// Blow up a radial-chart state.
    fn blown(&self, y: Vec<f64>) -> Vec<f64> {
        let Some(ts) = self.spec.blowup else { return y };
        let n = self.shape_dim;
        let r = y[0];
        let f = ts.f(r);
        let mut out = Vec::with_capacity(2 * n + 4);
        let mu = if self.spec.kind.is_reduced() { self.spec.mu } else { 0.0 };
        out.extend([r, f * y[1 + n] / r, f * mu / (r * r)]);
        out.extend_from_slice(&y[1..1 + n]);
        out.extend(y[2 + n..2 + 2 * n].iter().map(|z| f * z / (r * r)));
        out.push(y[2 + 2 * n]);
        out
    }

    /// Push a chart state reached at integration time `s` to the hub.
    pub fn to_hub(&self, s: f64, y: &[f64]) -> Result<HubSample> {
        let m = &self.spec.masses;
        let (mu, h) = (self.spec.mu, self.spec.h);
        if self.spec.kind == ChartKind::Relative {
            return Ok(HubSample { t: s, state: Physical::Relative(RelState::from_reals(y)) });
        }
        let y = self.unblown(y)?;
        let t = y[y.len() - 1];
        let cone_hub = |c: ConeState, reduced: bool| -> Result<Physical> {
            let (x, yy) = cone_to_homogeneous(&c.z, &c.eta)?;
            Ok(if reduced {
                Physical::Reduced(RedState { r: c.r, p_r: c.p_r, x, z: yy, mu })
            } else {
                Physical::Spherical(SphState { r: c.r, p_r: c.p_r, x, y: yy })
            })
        };
        let state = match self.spec.kind {
            ChartKind::Relative => unreachable!(),
            ChartKind::Spherical => Physical::Spherical(SphState::from_reals(&y)),
            ChartKind::Reduced => Physical::Reduced(RedState::from_reals(&y, mu)),
            ChartKind::Affine => {
                Physical::Reduced(AffineForm::jacobi(*m).to_reduced(&AffineRedState::from_reals(&y, mu)))
            }
            ChartKind::Equilateral => {
                Physical::Reduced(AffineForm::equilateral(*m).to_reduced(&AffineRedState::from_reals(&y, mu)))
            }
            ChartKind::Round => {
                Physical::Reduced(RoundForm::equilateral(*m).to_reduced(&RoundRedState::from_reals(&y, mu))?)
            }
            ChartKind::ConeSph => cone_hub(ConeState::from_reals(&y, 0.0, h), false)?,
            ChartKind::QuadSph => cone_hub(QuadState::from_reals(&y, 0.0, h).to_cone(), false)?,
            ChartKind::ConeReduced => cone_hub(ConeState::from_reals(&y, mu, h), true)?,
            ChartKind::QuadReduced => cone_hub(QuadState::from_reals(&y, mu, h).to_cone(), true)?,
            ChartKind::RegAffine => cone_hub(RegAffineState::from_reals(&y, mu, h).to_quad().to_cone(), true)?,
            ChartKind::RegRound => cone_hub(RegRoundState::from_reals(&y, mu, h).to_cone()?, true)?,
        };
        Ok(HubSample { t, state })
    }

    /// Pull a hub sample into this chart, normalized to the chart's gauge.
    /// `prev` is the previous cone point of a trajectory, used to choose the
    /// square-root branch continuously.
    pub fn from_hub(&self, sample: &HubSample, prev: Option<&Config3>) -> Result<Vec<f64>> {
        let m = &self.spec.masses;
        let (mu, h, t) = (self.spec.mu, self.spec.h, sample.t);
        if self.spec.kind == ChartKind::Relative {
            return Ok(sample.relative(m)?.to_reals());
        }
        let cone = |x: &Config3, yy: &Config3, r: f64, p_r: f64, mu: f64| -> Result<ConeState> {
            let z = match prev {
                Some(p) => lc_lift_continuous(x, p)?,
                None => lc_lift(x, [false; 3])?,
            };
            let eta = z.zip(yy, |zk, yk| zk.conj() * yk * 2.0);
            Ok(ConeState { r, p_r, z, eta, mu, h })
        };
        let sph_cone = || -> Result<ConeState> {
            let s = sample.spherical(m)?;
            cone(&s.x, &s.y, s.r, s.p_r, 0.0)
        };
        let red_cone = || -> Result<ConeState> {
            let s = sample.reduced(m)?;
            cone(&s.x, &s.z, s.r, s.p_r, mu)
        };
        let y = match self.spec.kind {
            ChartKind::Relative => unreachable!(),
            ChartKind::Spherical => sample.spherical(m)?.to_reals(t),
            ChartKind::Reduced => sample.reduced(m)?.to_reals(t),
            ChartKind::Affine => AffineForm::jacobi(*m).from_reduced(&sample.reduced(m)?)?.to_reals(t),
            ChartKind::Equilateral => AffineForm::equilateral(*m).from_reduced(&sample.reduced(m)?)?.to_reals(t),
            ChartKind::Round => RoundForm::equilateral(*m).from_reduced(&sample.reduced(m)?).to_reals(t),
            ChartKind::ConeSph => sph_cone()?.to_reals(t),
            ChartKind::QuadSph => QuadState::from_cone(&sph_cone()?)?.to_reals(t),
            ChartKind::ConeReduced => red_cone()?.to_reals(t),
            ChartKind::QuadReduced => QuadState::from_cone(&red_cone()?)?.to_reals(t),
            ChartKind::RegAffine => RegAffineState::from_quad(&QuadState::from_cone(&red_cone()?)?)?.to_reals(t),
            ChartKind::RegRound => RegRoundState::from_cone(&red_cone()?).to_reals(t),
        };
        // Land in the chart's normalization gauge (e.g. `|X| = 1` for the
        // homogeneous charts), as the flow keeps it.
        let mut y = self.blown(y);
        self.system.renormalize(&mut y);
        Ok(y)
    }

    /// Cone point of a regularized chart state (for branch continuity).
    pub fn cone_point(&self, y: &[f64]) -> Option<Config3> {
        let y = self.unblown(y).ok()?;
        let (mu, h) = (self.spec.mu, self.spec.h);
        match self.spec.kind {
            ChartKind::ConeSph | ChartKind::ConeReduced => Some(ConeState::from_reals(&y, mu, h).z),
            ChartKind::QuadSph | ChartKind::QuadReduced => Some(QuadState::from_reals(&y, mu, h).to_cone().z),
            ChartKind::RegAffine => Some(RegAffineState::from_reals(&y, mu, h).to_quad().to_cone().z),
            ChartKind::RegRound => RegRoundState::from_reals(&y, mu, h).to_cone().ok().map(|c| c.z),
            _ => None,
        }
    }

    /// Squared homogeneous mutual distances `ρ_ij` of a regularized chart
    /// state (normalized by `‖z‖²`), which stay smooth through collisions.
    pub fn collision_distances(&self, y: &[f64]) -> Option<[f64; 3]> {
        let z = self.cone_point(y)?;
        let n = z.norm_sq();
        Some(std::array::from_fn(|k| z[k].norm_sqr() / n))
    }
}

impl Chart {
    /// Event at local minima of the homogeneous distance `ρ12` of a
    /// regularized chart (sign change of its rate from negative to positive).
    pub fn rho12_minimum_event(&self) -> Option<EventSpec<'_>> {
        self.cone_point(&vec![1.0; self.system.dim()])?;
        let rate = move |_t: f64, y: &[f64]| -> f64 {
            let mut dy = vec![0.0; y.len()];
            self.system.rhs(0.0, y, &mut dy);
            let eps = 1e-7;
            let at = |s: f64| {
                let yy: Vec<f64> = y.iter().zip(&dy).map(|(a, b)| a + s * b).collect();
                self.collision_distances(&yy).map_or(f64::NAN, |d| d[0])
            };
            (at(eps) - at(-eps)) / (2.0 * eps)
        };
        Some(EventSpec::new("rho12_min", Direction::Up, EventAction::Record, rate))
    }
}

/// Unit-mass-norm equilateral (Lagrange) configuration.
pub fn lagrange_configuration(masses: &Masses) -> Config3 {
    let w = omega();
    let q = [C64::new(1.0, 0.0), w, w.conj()];
    let x = Triple::new(q[0] - q[1], q[2] - q[0], q[1] - q[2]);
    x * (1.0 / mass_norm(&x, masses))
}

/// Named initial conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Lagrange homothetic collapse at `μ = 0` starting from `r = 0.01` with
    /// inward radial momentum at energy `h`.
    LagrangeHomothetic,
    /// A collinear zero-angular-momentum orbit heading into the 1–2 binary
    /// collision.
    CollisionTransit,
}

impl Preset {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "lagrange_homothetic" => Some(Preset::LagrangeHomothetic),
            "collision_transit" => Some(Preset::CollisionTransit),
            _ => None,
        }
    }

    /// The physical initial state of the preset at energy `h`.
    pub fn state(self, masses: &Masses, h: f64) -> Result<HubSample> {
        match self {
            Preset::LagrangeHomothetic => {
                let r = 0.01;
                let x = lagrange_configuration(masses);
                let v = shape_potential(&x, masses)?;
                let k = h + v / r;
                if k < 0.0 {
                    return Err(Error::InvalidState(format!("energy {h} is below the potential at r = {r}")));
                }
                let p_r = -(2.0 * k).sqrt();
                Ok(HubSample { t: 0.0, state: Physical::Reduced(RedState { r, p_r, x, z: Triple::ZERO, mu: 0.0 }) })
            }
            Preset::CollisionTransit => {
                // Real affine coordinates are collinear configurations; with
                // real momenta the motion stays collinear and the 1–2 pair
                // meets head-on as z passes through 0.
                let state =
                    RegAffineState { r: 1.0, p_r: 0.0, z: C64::new(0.2, 0.0), zeta: C64::new(-1.0, 0.0), mu: 0.0, h };
                let spec = ChartSpec { kind: ChartKind::RegAffine, masses: *masses, mu: 0.0, h, blowup: None };
                let chart = Chart::new(spec)?;
                let mut y = state.to_reals(0.0);
                solve_zero_level_p_r(&chart, &mut y, -1.0)?;
                chart.to_hub(0.0, &y)
            }
        }
    }
}

/// Set `p_r` (sign given by `sign`) so that a regularized radial state lies
/// on the zero level.
pub fn solve_zero_level_p_r(chart: &Chart, y: &mut [f64], sign: f64) -> Result<()> {
    let n = chart.shape_dim;
    let p_idx = 1 + n;
    // H̃ is quadratic in p_r: H̃(p) = ½A p² + H̃(0).
    y[p_idx] = 0.0;
    let e0 = zero_level_residual(chart, y)?;
    y[p_idx] = 1.0;
    let e1 = zero_level_residual(chart, y)?;
    let half_a = e1 - e0;
    let p2 = -e0 / half_a;
    if !(p2 >= 0.0) {
        return Err(Error::InvalidState("no real radial momentum reaches the energy level".into()));
    }
    y[p_idx] = sign.signum() * p2.sqrt();
    Ok(())
}

fn zero_level_residual(chart: &Chart, y: &[f64]) -> Result<f64> {
    chart
        .system()
        .invariants(0.0, y)
        .into_iter()
        .find(|i| i.name == "energy")
        .map(|i| i.value)
        .ok_or_else(|| Error::InvalidState("chart has no energy".into()))
}
