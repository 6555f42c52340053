//! McGehee blow-up of triple collision.
//!
//! For a radial Hamiltonian `H = ½A(p_r² + μ²/r²) + kin/r² − V/r − C` (see
//! [`crate::form`]) the momenta are rescaled by `v = f p_r/r`, `α = f Z/r²`,
//! `μ̃ = f μ/r²` and time by `d/dτ' = f(r) d/ds`.  With `ν = f²/r³` and
//! `φ = −½(1 − r(ln ν)_r)` the flow becomes
//!
//! ```text
//! r' = A v r
//! v' = φ A v² + 2K̃ − νV,        2K̃ = A(v² + μ̃²) + 2 kin(X, α)
//! μ̃' = φ A v μ̃
//! X' = ∇_α kin
//! α' = φ A v α − ∇_X K̃ + ν∇V + rν∇C + μ̃ curv(X, α)
//! ```
//!
//! which extends analytically to the collision manifold `r = 0`.  The state
//! vector is `[r, v, μ̃, X…, α…, t]` with physical time `t' = f(r)A`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::form::{RadialSystem, ShapeForm};
use crate::integrate::{Invariant, InvariantKind, OdeSystem};

/// Choice of time rescaling factor `f(r)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScale {
    /// `f₁ = r^{3/2}`: `ν ≡ 1`, `φ ≡ −½`.
    McGeheeF1,
    /// `f₂ = (r/(1+r))^{3/2}`: `ν = (1+r)⁻³`, bounded for large `r`.
    BoundedF2,
}

impl TimeScale {
    /// The rescaling factor `f(r)`.
    pub fn f(self, r: f64) -> f64 {
        match self {
            TimeScale::McGeheeF1 => r.powf(1.5),
            TimeScale::BoundedF2 => (r / (1.0 + r)).powf(1.5),
        }
    }

    /// `ν(r) = f²/r³`, in closed form (smooth at `r = 0`).
    pub fn nu(self, r: f64) -> f64 {
        match self {
            TimeScale::McGeheeF1 => 1.0,
            TimeScale::BoundedF2 => (1.0 + r).powi(-3),
        }
    }

    /// `(ln ν)_r`, in closed form.
    pub fn dlog_nu(self, r: f64) -> f64 {
        match self {
            TimeScale::McGeheeF1 => 0.0,
            TimeScale::BoundedF2 => -3.0 / (1.0 + r),
        }
    }

    /// `φ(r) = −½(1 − r(ln ν)_r)`.
    pub fn phi(self, r: f64) -> f64 {
        -0.5 * (1.0 - r * self.dlog_nu(r))
    }

    /// Parse `f1` / `f2`.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "f1" | "mcgehee_f1" => Some(TimeScale::McGeheeF1),
            "f2" | "bounded_f2" => Some(TimeScale::BoundedF2),
            _ => None,
        }
    }
}

/// A blown-up state of a radial chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlownState {
    pub r: f64,
    pub v: f64,
    pub mu_tilde: f64,
    pub shape: Vec<f64>,
    pub alpha: Vec<f64>,
    pub t: f64,
}

impl BlownState {
    pub fn to_reals(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(2 * self.shape.len() + 4);
        y.extend([self.r, self.v, self.mu_tilde]);
        y.extend_from_slice(&self.shape);
        y.extend_from_slice(&self.alpha);
        y.push(self.t);
        y
    }

    pub fn from_reals(y: &[f64]) -> Self {
        let n = (y.len() - 4) / 2;
        Self {
            r: y[0],
            v: y[1],
            mu_tilde: y[2],
            shape: y[3..3 + n].to_vec(),
            alpha: y[3 + n..3 + 2 * n].to_vec(),
            t: y[3 + 2 * n],
        }
    }
}

/// Blow up a radial-chart state `[r, X…, p_r, Z…, t]` at angular momentum `mu`.
pub fn blow_up<F: ShapeForm>(sys: &RadialSystem<F>, y: &[f64], ts: TimeScale) -> BlownState {
    let (r, x, p_r, z, t) = sys.split(y);
    let f = ts.f(r);
    let r2 = r * r;
    BlownState {
        r,
        v: f * p_r / r,
        mu_tilde: f * sys.mu / r2,
        shape: x.to_vec(),
        alpha: z.iter().map(|zi| f * zi / r2).collect(),
        t,
    }
}

/// Blow down to the radial chart.  Returns the state and the angular
/// momentum `μ = r²μ̃/f`.  The collision manifold `r = 0` has no physical
/// preimage and is rejected.
pub fn blow_down(b: &BlownState, ts: TimeScale) -> Result<(Vec<f64>, f64)> {
    if !(b.r > 0.0) || !b.r.is_finite() {
        return Err(Error::CollisionManifold);
    }
    let f = ts.f(b.r);
    let r2 = b.r * b.r;
    let mut y = Vec::with_capacity(2 * b.shape.len() + 3);
    y.push(b.r);
    y.extend_from_slice(&b.shape);
    y.push(b.v * b.r / f);
    y.extend(b.alpha.iter().map(|a| a * r2 / f));
    y.push(b.t);
    Ok((y, b.mu_tilde * r2 / f))
}

/// The blown-up flow of a [`ShapeForm`].
#[derive(Clone, Debug, PartialEq)]
pub struct BlownSystem<F> {
    pub form: F,
    pub ts: TimeScale,
    /// Angular momentum constant entering the `μ̃` constraint.
    pub mu: f64,
    /// Energy level `h` for unregularized forms; regularized forms carry the
    /// level in `C = hτ` and sit on the zero level.
    pub level: f64,
}

impl<F: ShapeForm> BlownSystem<F> {
    pub fn new(form: F, ts: TimeScale, mu: f64, level: f64) -> Self {
        Self { form, ts, mu, level }
    }

    /// The blown-up system of a radial system at energy `h` (ignored for
    /// regularized forms).
    pub fn of(sys: RadialSystem<F>, ts: TimeScale, h: f64) -> Self {
        let level = if sys.form.regularized() { 0.0 } else { h };
        Self { mu: sys.mu, form: sys.form, ts, level }
    }

    pub fn n(&self) -> usize {
        self.form.shape_dim()
    }

    fn split<'a>(&self, y: &'a [f64]) -> (f64, f64, f64, &'a [f64], &'a [f64]) {
        let n = self.n();
        (y[0], y[1], y[2], &y[3..3 + n], &y[3 + n..3 + 2 * n])
    }

    /// Left side minus right side of the blown-up energy relation
    /// `½A(v² + μ̃²) + kin − νV = rν(C + h)`.
    pub fn energy_residual(&self, y: &[f64]) -> f64 {
        let (r, v, mt, x, a) = self.split(y);
        let e = self.form.eval(x, a);
        let nu = self.ts.nu(r);
        0.5 * e.a * (v * v + mt * mt) + e.kin - nu * e.v - r * nu * (e.c + self.level)
    }

    /// Residual of `√r μ̃ = √ν μ`.
    pub fn mu_constraint(&self, y: &[f64]) -> f64 {
        let (r, _, mt, _, _) = self.split(y);
        r.max(0.0).sqrt() * mt - self.ts.nu(r).sqrt() * self.mu
    }

    /// The primary `v'` expression `φAv² + 2K̃ − νV` and the alternative
    /// `(φ+1)Av² + 2kin + Aμ̃² − νV`, for identity checks.
    pub fn v_prime_forms(&self, y: &[f64]) -> (f64, f64) {
        let (r, v, mt, x, a) = self.split(y);
        let e = self.form.eval(x, a);
        let (phi, nu) = (self.ts.phi(r), self.ts.nu(r));
        let two_k = e.a * (v * v + mt * mt) + 2.0 * e.kin;
        (phi * e.a * v * v + two_k - nu * e.v, (phi + 1.0) * e.a * v * v + 2.0 * e.kin + e.a * mt * mt - nu * e.v)
    }
}

impl<F: ShapeForm> OdeSystem for BlownSystem<F> {
    fn dim(&self) -> usize {
        2 * self.n() + 4
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.n();
        let (r, v, mt, x, a) = self.split(y);
        let e = self.form.eval(x, a);
        let (phi, nu) = (self.ts.phi(r), self.ts.nu(r));
        let sq = v * v + mt * mt;
        dy[0] = e.a * v * r;
        dy[1] = phi * e.a * v * v + e.a * sq + 2.0 * e.kin - nu * e.v;
        dy[2] = phi * e.a * v * mt;
        let mut curv = vec![0.0; n];
        if mt != 0.0 {
            self.form.curvature(x, a, &mut curv);
        }
        for i in 0..n {
            dy[3 + i] = e.grad_kin_z[i];
            dy[3 + n + i] = phi * e.a * v * a[i] - 0.5 * e.grad_a[i] * sq - e.grad_kin_x[i]
                + nu * e.grad_v[i]
                + r * nu * e.grad_c[i]
                + mt * curv[i];
        }
        dy[3 + 2 * n] = self.ts.f(r) * e.a;
    }

    fn renormalize(&self, y: &mut [f64]) -> bool {
        let n = self.n();
        let (head, tail) = y.split_at_mut(3 + n);
        self.form.normalize(&mut head[3..], &mut tail[..n])
    }

    fn invariants(&self, _t: f64, y: &[f64]) -> Vec<Invariant> {
        let (_, _, _, x, a) = self.split(y);
        let mut out = vec![
            Invariant::constraint("energy_relation", self.energy_residual(y).abs()),
            Invariant::constraint("mu_constraint", self.mu_constraint(y).abs()),
        ];
        // First integrals of the unblown chart that involve the momenta are
        // rescaled by the blow-up; only the shape-only ones stay conserved.
        out.extend(
            self.form
                .constraints(x, a)
                .into_iter()
                .filter(|c| c.kind == InvariantKind::Constraint || c.name.ends_with("norm")),
        );
        out
    }
}

/// Rest point `v = −sqrt(2V/A)` on the collision manifold at a critical shape
/// with `α = 0`, `μ̃ = 0` (the collapsing branch).
pub fn collapse_rest_velocity<F: ShapeForm>(form: &F, x: &[f64]) -> f64 {
    let zero = vec![0.0; x.len()];
    let e = form.eval(x, &zero);
    -(2.0 * e.v / e.a).sqrt()
}
