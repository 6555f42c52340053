//! The general radial Hamiltonian shared by every chart that separates size
//! from shape:
//!
//! `H = ½A(X)(p_r² + μ²/r²) + kin(X, Z)/r² − V(X)/r − C(X)`
//!
//! where `kin` is quadratic in the shape momentum `Z`.  Unregularized charts
//! have `A = 1`, `C = 0`; the regularized charts have `A = τ`, `C = hτ` and
//! their physical trajectories live on the zero level.  Rotation-reduced
//! charts add a curvature force `(μ/r²)·curv(X, Z)` to `Ż`.
//!
//! A [`ShapeForm`] provides the shape-dependent pieces; [`RadialSystem`]
//! assembles the vector field with state `[r, X…, p_r, Z…, t]`, where the last
//! component is physical time (`dt/ds = A`).

use crate::integrate::{Invariant, OdeSystem};
use crate::oracle::Hamiltonian;

/// Values and real gradients of the shape functions at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct FormEval {
    pub a: f64,
    pub kin: f64,
    pub v: f64,
    pub c: f64,
    pub grad_a: Vec<f64>,
    pub grad_kin_x: Vec<f64>,
    pub grad_kin_z: Vec<f64>,
    pub grad_v: Vec<f64>,
    pub grad_c: Vec<f64>,
}

impl FormEval {
    /// An evaluation for an unregularized form (`A = 1`, `C = 0`).
    pub fn unregularized(n: usize) -> Self {
        Self {
            a: 1.0,
            kin: 0.0,
            v: 0.0,
            c: 0.0,
            grad_a: vec![0.0; n],
            grad_kin_x: vec![0.0; n],
            grad_kin_z: vec![0.0; n],
            grad_v: vec![0.0; n],
            grad_c: vec![0.0; n],
        }
    }

    /// Set `A = τ`, `C = hτ` from `τ` and its gradient.
    pub fn set_time_factor(&mut self, tau: f64, grad_tau: &[f64], h: f64) {
        self.a = tau;
        self.c = h * tau;
        self.grad_a.copy_from_slice(grad_tau);
        for (c, g) in self.grad_c.iter_mut().zip(grad_tau) {
            *c = h * g;
        }
    }
}

/// Shape-dependent ingredients of the general radial Hamiltonian.
pub trait ShapeForm {
    /// Chart name used in reports.
    fn label(&self) -> &'static str;
    /// Number of real shape coordinates (equal to the number of shape momenta).
    fn shape_dim(&self) -> usize;
    /// Evaluate `A, kin, V, C` and their gradients.
    fn eval(&self, x: &[f64], z: &[f64]) -> FormEval;
    /// Curvature force per unit `μ/r²` (zero for unreduced charts).
    fn curvature(&self, _x: &[f64], _z: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    /// Restore the representative normalization using the exact scaling
    /// symmetry of the chart.  Returns whether anything changed.
    fn normalize(&self, _x: &mut [f64], _z: &mut [f64]) -> bool {
        false
    }
    /// Chart constraints and extra first integrals.
    fn constraints(&self, _x: &[f64], _z: &[f64]) -> Vec<Invariant> {
        Vec::new()
    }
    /// Whether this is a regularized form (physical motion on the zero level).
    fn regularized(&self) -> bool {
        false
    }
}

impl<F: ShapeForm + ?Sized> ShapeForm for Box<F> {
    fn label(&self) -> &'static str {
        (**self).label()
    }
    fn shape_dim(&self) -> usize {
        (**self).shape_dim()
    }
    fn eval(&self, x: &[f64], z: &[f64]) -> FormEval {
        (**self).eval(x, z)
    }
    fn curvature(&self, x: &[f64], z: &[f64], out: &mut [f64]) {
        (**self).curvature(x, z, out)
    }
    fn normalize(&self, x: &mut [f64], z: &mut [f64]) -> bool {
        (**self).normalize(x, z)
    }
    fn constraints(&self, x: &[f64], z: &[f64]) -> Vec<Invariant> {
        (**self).constraints(x, z)
    }
    fn regularized(&self) -> bool {
        (**self).regularized()
    }
}

/// Positive-real gauge `(X, Z) ↦ (X/s, s·Z)` with `s` the given norm of `X`,
/// applied when it deviates from one by more than `1e-6`.
pub fn rescale_gauge(x: &mut [f64], z: &mut [f64], norm: f64) -> bool {
    if (norm - 1.0).abs() <= 1e-6 || !(norm > 0.0) || !norm.is_finite() {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= norm);
    z.iter_mut().for_each(|v| *v *= norm);
    true
}

/// The radial flow of a [`ShapeForm`] at fixed angular momentum `mu`, with
/// state `[r, X…, p_r, Z…, t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialSystem<F> {
    pub form: F,
    pub mu: f64,
}

impl<F: ShapeForm> RadialSystem<F> {
    pub fn new(form: F, mu: f64) -> Self {
        Self { form, mu }
    }

    /// Number of shape coordinates.
    pub fn n(&self) -> usize {
        self.form.shape_dim()
    }

    /// Assemble a state vector (physical time last).
    pub fn join(&self, r: f64, x: &[f64], p_r: f64, z: &[f64], t: f64) -> Vec<f64> {
        let mut y = Vec::with_capacity(2 * x.len() + 3);
        y.push(r);
        y.extend_from_slice(x);
        y.push(p_r);
        y.extend_from_slice(z);
        y.push(t);
        y
    }

    /// Split a state into `(r, X, p_r, Z, t)`.
    pub fn split<'a>(&self, y: &'a [f64]) -> (f64, &'a [f64], f64, &'a [f64], f64) {
        let n = self.n();
        (y[0], &y[1..1 + n], y[1 + n], &y[2 + n..2 + 2 * n], y[2 + 2 * n])
    }

    /// Hamiltonian value.
    pub fn hamiltonian(&self, y: &[f64]) -> f64 {
        let (r, x, p_r, z, _) = self.split(y);
        let e = self.form.eval(x, z);
        0.5 * e.a * (p_r * p_r + self.mu * self.mu / (r * r)) + e.kin / (r * r) - e.v / r - e.c
    }
}

impl<F: ShapeForm> OdeSystem for RadialSystem<F> {
    fn dim(&self) -> usize {
        2 * self.n() + 3
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.n();
        let (r, x, p_r, z, _) = self.split(y);
        let e = self.form.eval(x, z);
        let (r2, r3) = (r * r, r * r * r);
        let mu2 = self.mu * self.mu;
        let radial = p_r * p_r + mu2 / r2;
        dy[0] = e.a * p_r;
        dy[1 + n] = e.a * mu2 / r3 + 2.0 * e.kin / r3 - e.v / r2;
        let mut curv = vec![0.0; n];
        if self.mu != 0.0 {
            self.form.curvature(x, z, &mut curv);
        }
        let twist = self.mu / r2;
        for i in 0..n {
            dy[1 + i] = e.grad_kin_z[i] / r2;
            dy[2 + n + i] =
                -(0.5 * e.grad_a[i] * radial + e.grad_kin_x[i] / r2 - e.grad_v[i] / r - e.grad_c[i]) + twist * curv[i];
        }
        dy[2 + 2 * n] = e.a;
    }

    fn renormalize(&self, y: &mut [f64]) -> bool {
        let n = self.n();
        let (head, tail) = y.split_at_mut(1 + n);
        self.form.normalize(&mut head[1..], &mut tail[1..1 + n])
    }

    fn invariants(&self, _t: f64, y: &[f64]) -> Vec<Invariant> {
        let (_, x, _, z, _) = self.split(y);
        let h = self.hamiltonian(y);
        let mut out = vec![Invariant::conserved("energy", h)];
        if self.form.regularized() {
            out.push(Invariant::constraint("zero_level", h.abs()));
        }
        out.extend(self.form.constraints(x, z));
        out
    }
}

impl<F: ShapeForm> Hamiltonian for RadialSystem<F> {
    fn n_q(&self) -> usize {
        self.n() + 1
    }
    fn energy(&self, y: &[f64]) -> f64 {
        self.hamiltonian(y)
    }
    fn curvature(&self, y: &[f64], out: &mut [f64]) {
        let (r, x, _, z, _) = self.split(y);
        out[0] = 0.0;
        self.form.curvature(x, z, &mut out[1..]);
        let twist = self.mu / (r * r);
        out[1..].iter_mut().for_each(|v| *v *= twist);
    }
}
