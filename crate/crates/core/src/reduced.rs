//! Rotation reduction at fixed angular momentum `μ`.
//!
//! The spherical momentum is shifted, `Y = Z + μΓ(X)` with `Γ = iX*/|X|²`,
//! giving the reduced Hamiltonian
//!
//! `H_μ = ½(p_r² + μ²/r²) + (|X|²/r²) K(Z) − V(X)/r`
//!
//! on `⟨Z, X⟩ = 0`, with the curvature force `−(2μ/r²) iZ`.  Besides this
//! homogeneous chart the module provides affine charts of the shape sphere
//! (any basis of `𝒲`, including the equilateral one), the round chart on
//! `S² ⊂ ℝ³` through the Hopf map, potential grids and critical points of
//! the shape potential.

use nalgebra::{Matrix2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::algebra::{
    alpha_form, dual_vector, force_function, force_function_gradient, kinetic, kinetic_gradient, mass_norm,
    mass_norm_sq, normalize_momentum, pairing, CoConfig3, Config3, Masses, C64, I, MEMBERSHIP_TOL,
};
use crate::error::{Error, Result};
use crate::form::{rescale_gauge, FormEval, RadialSystem, ShapeForm};
use crate::integrate::Invariant;
use crate::relative::{make_basis, BasisKind, ChartBasis};
use crate::spherical::{shape_potential, shape_potential_gradient, HomogeneousForm, SphState};

/// A point of the reduced phase space in homogeneous coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RedState {
    pub r: f64,
    pub p_r: f64,
    pub x: Config3,
    pub z: CoConfig3,
    pub mu: f64,
}

impl RedState {
    /// State vector `[r, X, p_r, Z, t]` for [`ReducedSystem`].
    pub fn to_reals(&self, t: f64) -> Vec<f64> {
        SphState { r: self.r, p_r: self.p_r, x: self.x, y: self.z }.to_reals(t)
    }

    pub fn from_reals(v: &[f64], mu: f64) -> Self {
        let s = SphState::from_reals(v);
        Self { r: s.r, p_r: s.p_r, x: s.x, z: s.y, mu }
    }
}

/// `Γ(X) = iX*/|X|²`.
pub fn gamma(x: &Config3, masses: &Masses) -> Result<CoConfig3> {
    let xx = mass_norm_sq(x, masses);
    if xx == 0.0 {
        return Err(Error::ZeroConfiguration);
    }
    Ok(dual_vector(x, masses) * (I / xx))
}

/// Momentum shift `Y = Z + μΓ(X)`.
pub fn momentum_shift(x: &Config3, z: &CoConfig3, mu: f64, masses: &Masses) -> Result<CoConfig3> {
    Ok(*z + gamma(x, masses)? * mu)
}

/// Reduce a spherical state: `μ = −Im⟨Y, X⟩`, `Z = Y − μΓ(X)`.
pub fn to_reduced(s: &SphState, masses: &Masses) -> Result<RedState> {
    let mu = s.angular_momentum();
    let z = s.y - gamma(&s.x, masses)? * mu;
    Ok(RedState { r: s.r, p_r: s.p_r, x: s.x, z, mu })
}

/// Undo the momentum shift.
pub fn from_reduced(s: &RedState, masses: &Masses) -> Result<SphState> {
    Ok(SphState { r: s.r, p_r: s.p_r, x: s.x, y: momentum_shift(&s.x, &s.z, s.mu, masses)? })
}

fn require_reduced_constraints(s: &RedState) -> Result<()> {
    let scale = s.x.norm().max(f64::MIN_POSITIVE);
    let w = s.x.sum().norm() / scale;
    if w > MEMBERSHIP_TOL {
        return Err(Error::NotTranslationReduced { residual: w });
    }
    let p = pairing(&s.z, &s.x).norm() / (scale * s.z.norm().max(1.0));
    if p > MEMBERSHIP_TOL {
        return Err(Error::Constraint { name: "pairing", residual: p });
    }
    Ok(())
}

/// `H_μ` in homogeneous coordinates.
pub fn h_mu(s: &RedState, masses: &Masses) -> Result<f64> {
    require_reduced_constraints(s)?;
    let r2 = s.r * s.r;
    Ok(0.5 * (s.p_r * s.p_r + s.mu * s.mu / r2) + mass_norm_sq(&s.x, masses) * kinetic(&s.z, masses) / r2
        - shape_potential(&s.x, masses)? / s.r)
}

/// `H_μ` with the shape kinetic energy written through the Fubini–Study
/// cometric, `‖Z‖²_FS/2 = m|α(Z)|²/(2 m1 m2 m3)`.
pub fn h_mu_fs(s: &RedState, masses: &Masses) -> Result<f64> {
    require_reduced_constraints(s)?;
    let r2 = s.r * s.r;
    let a = alpha_form(&s.x, &s.z, masses)?;
    let shape = masses.total() * a.norm_sqr() / (2.0 * masses.product());
    Ok(0.5 * (s.p_r * s.p_r + s.mu * s.mu / r2) + shape / r2 - shape_potential(&s.x, masses)? / s.r)
}

/// Hamilton's equations of `H_μ` including the curvature force.
pub fn rhs_mu(s: &RedState, masses: &Masses) -> Result<RedState> {
    let (r2, r3) = (s.r * s.r, s.r * s.r * s.r);
    let xx = mass_norm_sq(&s.x, masses);
    let k = kinetic(&s.z, masses);
    let v = shape_potential(&s.x, masses)?;
    Ok(RedState {
        r: s.p_r,
        p_r: (s.mu * s.mu + 2.0 * xx * k) / r3 - v / r2,
        x: kinetic_gradient(&s.z, masses) * (xx / r2),
        z: shape_potential_gradient(&s.x, masses)? * (1.0 / s.r)
            - dual_vector(&s.x, masses) * (2.0 * k / r2)
            - s.z * (I * (2.0 * s.mu / r2)),
        mu: 0.0,
    })
}

/// The reduced flow in homogeneous coordinates, state `[r, X, p_r, Z, t]`.
pub type ReducedSystem = RadialSystem<HomogeneousForm>;

pub fn reduced_system(masses: Masses, mu: f64) -> ReducedSystem {
    RadialSystem::new(HomogeneousForm { masses, reduced: true }, mu)
}

/// Canonical representative of a reduced shape class `[X, Z]` used to compare
/// trajectories: `|X| = 1`, `X12` real and positive, `Z` scaled accordingly
/// and projected to the canonical translation class.
pub fn canonical_shape(x: &Config3, z: &CoConfig3, masses: &Masses) -> Result<(Config3, CoConfig3)> {
    let nx = mass_norm(x, masses);
    let a = x[0].norm();
    if nx == 0.0 || a <= 1e-12 * nx {
        return Err(Error::OutOfChart { chart: "canonical" });
    }
    let k = x[0].conj() / (a * nx);
    Ok((*x * k, normalize_momentum(&(*z * (C64::new(1.0, 0.0) / k.conj())), masses)))
}

// ---------------------------------------------------------------------------
// Affine charts
// ---------------------------------------------------------------------------

/// Affine chart `ξ = (ρ, z)` of the shape sphere for a basis of `𝒲` with
/// fixed representative constant `ρ`:
///
/// `kin = |ξ|⁴|ζ|²/(2g|ρ|²)`, `V(z) = |ξ| U(ρe1 + ze2)`, curvature `−2iζ`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineForm {
    pub basis: ChartBasis,
    pub rep: C64,
    pub masses: Masses,
}

/// Affine shape state `(z, ζ)` with the radial pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineRedState {
    pub r: f64,
    pub p_r: f64,
    pub z: C64,
    pub zeta: C64,
    pub mu: f64,
}

impl AffineRedState {
    pub fn to_reals(&self, t: f64) -> Vec<f64> {
        vec![self.r, self.z.re, self.z.im, self.p_r, self.zeta.re, self.zeta.im, t]
    }
    pub fn from_reals(v: &[f64], mu: f64) -> Self {
        Self { r: v[0], z: C64::new(v[1], v[2]), p_r: v[3], zeta: C64::new(v[4], v[5]), mu }
    }
}

impl AffineForm {
    /// Affine chart with the given basis and representative constant.
    pub fn new(basis: ChartBasis, rep: C64, masses: Masses) -> Result<Self> {
        if rep.norm() == 0.0 {
            return Err(Error::InvalidState("affine representative must be nonzero".into()));
        }
        Ok(Self { basis, rep, masses })
    }

    /// Jacobi chart with `ρ = sqrt(μ2/μ1)`, so that `|ξ|² = μ2(1 + |z|²)`.
    pub fn jacobi(masses: Masses) -> Self {
        let basis = make_basis(&BasisKind::Jacobi, &masses).expect("Jacobi basis is valid");
        let rep = (basis.gram[(1, 1)].re / basis.gram[(0, 0)].re).sqrt();
        Self { basis, rep: C64::new(rep, 0.0), masses }
    }

    /// Equilateral chart: `X = z e1 + e2` with `e1 = (1, ω, ω̄)`, `e2 = −ē1`,
    /// so binary collisions sit at `z = 1, ω, ω̄` and the Lagrange shapes at
    /// `z = 0` and `z = ∞`.
    pub fn equilateral(masses: Masses) -> Self {
        let basis = make_basis(&BasisKind::Equilateral, &masses).expect("equilateral basis is valid");
        let swapped = basis.swapped(&masses).expect("swapped basis is valid");
        Self { basis: swapped, rep: C64::new(1.0, 0.0), masses }
    }

    /// Homogeneous coordinates `ξ = (ρ, z)`.
    pub fn xi(&self, z: C64) -> [C64; 2] {
        [self.rep, z]
    }

    /// Configuration `X = ρ e1 + z e2`.
    pub fn embed(&self, z: C64) -> Config3 {
        self.basis.embed(self.xi(z))
    }

    /// Affine shape potential.
    pub fn potential(&self, z: C64) -> Result<f64> {
        shape_potential(&self.embed(z), &self.masses)
    }

    /// Lift an affine state to the homogeneous reduced chart.
    pub fn to_reduced(&self, s: &AffineRedState) -> RedState {
        let xi = self.xi(s.z);
        let eta = [-(s.z.conj() * s.zeta) / self.rep.conj(), s.zeta];
        RedState {
            r: s.r,
            p_r: s.p_r,
            x: self.basis.embed(xi),
            z: self.basis.momentum_lift(eta, &self.masses),
            mu: s.mu,
        }
    }

    /// Express a homogeneous reduced state in this affine chart.
    pub fn from_reduced(&self, s: &RedState) -> Result<AffineRedState> {
        let xi = self.basis.coords(&s.x, &self.masses);
        let size = (xi[0].norm_sqr() + xi[1].norm_sqr()).sqrt();
        if xi[0].norm() <= 1e-12 * size {
            return Err(Error::OutOfChart { chart: "affine" });
        }
        let k = self.rep / xi[0];
        let eta = self.basis.momentum_coords(&s.z);
        Ok(AffineRedState { r: s.r, p_r: s.p_r, z: k * xi[1], zeta: eta[1] / k.conj(), mu: s.mu })
    }
}

fn c_from(v: &[f64]) -> C64 {
    C64::new(v[0], v[1])
}

impl ShapeForm for AffineForm {
    fn label(&self) -> &'static str {
        "affine"
    }
    fn shape_dim(&self) -> usize {
        2
    }
    fn eval(&self, x: &[f64], z: &[f64]) -> FormEval {
        let (zc, zeta) = (c_from(x), c_from(z));
        let xi = self.xi(zc);
        let g = &self.basis.gram;
        let nsq = self.basis.norm_sq(xi);
        let grad_nsq = (g[(1, 0)] * xi[0] + g[(1, 1)] * xi[1]) * 2.0;
        let denom = self.basis.det_g * self.rep.norm_sqr();
        let zz = zeta.norm_sqr();
        let mut e = FormEval::unregularized(2);
        e.kin = nsq * nsq * zz / (2.0 * denom);
        let gkx = grad_nsq * (nsq * zz / denom);
        let gkz = zeta * (nsq * nsq / denom);
        e.grad_kin_x.copy_from_slice(&[gkx.re, gkx.im]);
        e.grad_kin_z.copy_from_slice(&[gkz.re, gkz.im]);
        let q = self.basis.embed(xi);
        match force_function(&q, &self.masses) {
            Ok(u) => {
                let n = nsq.sqrt();
                e.v = n * u;
                let gu = force_function_gradient(&q, &self.masses);
                let pull: C64 = (0..3).map(|k| gu[k] * self.basis.e2[k].conj()).sum();
                let gv = grad_nsq * (u / (2.0 * n)) + pull * n;
                e.grad_v.copy_from_slice(&[gv.re, gv.im]);
            }
            Err(_) => {
                e.v = f64::NAN;
                e.grad_v.fill(f64::NAN);
            }
        }
        e
    }
    fn curvature(&self, _x: &[f64], z: &[f64], out: &mut [f64]) {
        out[0] = 2.0 * z[1];
        out[1] = -2.0 * z[0];
    }
}

/// Affine reduced system with state `[r, Re z, Im z, p_r, Re ζ, Im ζ, t]`.
pub type AffineSystem = RadialSystem<AffineForm>;

/// Build an affine chart system.
pub fn affine_chart(basis: ChartBasis, rep: C64, masses: Masses, mu: f64) -> Result<AffineSystem> {
    Ok(RadialSystem::new(AffineForm::new(basis, rep, masses)?, mu))
}

/// The equilateral affine chart system.
pub fn equilateral_chart(masses: Masses, mu: f64) -> AffineSystem {
    RadialSystem::new(AffineForm::equilateral(masses), mu)
}

/// Lagrange shapes in the affine Jacobi coordinate `ξ2/ξ1`:
/// `(m1 − m2)/(2(m1 + m2)) ± (√3/2) i`.
pub fn jacobi_lagrange_points(masses: &Masses) -> [C64; 2] {
    let re = (masses.m1() - masses.m2()) / (2.0 * (masses.m1() + masses.m2()));
    let im = 3f64.sqrt() / 2.0;
    [C64::new(re, im), C64::new(re, -im)]
}

// ---------------------------------------------------------------------------
// Round chart
// ---------------------------------------------------------------------------

/// Hopf map `w = (2Re ξ̄1ξ2, 2Im ξ̄1ξ2, |ξ1|² − |ξ2|²)`.
pub fn hopf_map(xi: [C64; 2]) -> Vector3<f64> {
    let p = xi[0].conj() * xi[1] * 2.0;
    Vector3::new(p.re, p.im, xi[0].norm_sqr() - xi[1].norm_sqr())
}

/// A preimage of `w` under the Hopf map, choosing the better-conditioned of
/// the two standard sections.
pub fn hopf_section(w: &Vector3<f64>) -> Result<[C64; 2]> {
    let nw = w.norm();
    if nw == 0.0 {
        return Err(Error::ZeroConfiguration);
    }
    let p = C64::new(w[0], w[1]);
    if w[2] >= 0.0 {
        let x1 = ((nw + w[2]) / 2.0).sqrt();
        Ok([C64::new(x1, 0.0), p / (2.0 * x1)])
    } else {
        let x2 = ((nw - w[2]) / 2.0).sqrt();
        Ok([p.conj() / (2.0 * x2), C64::new(x2, 0.0)])
    }
}

/// Real Jacobian of the Hopf map with respect to `(Re ξ1, Im ξ1, Re ξ2, Im ξ2)`.
pub fn hopf_jacobian(xi: [C64; 2]) -> nalgebra::Matrix3x4<f64> {
    let (a1, b1, a2, b2) = (xi[0].re, xi[0].im, xi[1].re, xi[1].im);
    nalgebra::Matrix3x4::new(
        2.0 * a2,
        2.0 * b2,
        2.0 * a1,
        2.0 * b1, //
        2.0 * b2,
        -2.0 * a2,
        -2.0 * b1,
        2.0 * a1, //
        2.0 * a1,
        2.0 * b1,
        -2.0 * a2,
        -2.0 * b2,
    )
}

/// Round shape state `(w, α)` with the radial pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRedState {
    pub r: f64,
    pub p_r: f64,
    pub w: [f64; 3],
    pub alpha: [f64; 3],
    pub mu: f64,
}

impl RoundRedState {
    pub fn to_reals(&self, t: f64) -> Vec<f64> {
        let [w1, w2, w3] = self.w;
        let [a1, a2, a3] = self.alpha;
        vec![self.r, w1, w2, w3, self.p_r, a1, a2, a3, t]
    }
    pub fn from_reals(v: &[f64], mu: f64) -> Self {
        Self { r: v[0], w: [v[1], v[2], v[3]], p_r: v[4], alpha: [v[5], v[6], v[7]], mu }
    }
}

/// Round chart of the shape sphere for a basis `(a, b)` of `𝒲`:
///
/// `ρ_ij² = ½(|a|²+|b|²)|w| + ½(|a|²−|b|²)w3 + Re(āb)w1 − Im(āb)w2`,
/// `kin = 2|w|²|α|²/κ = 2N²|α|²/g` with `N = |ξ|²` the mass norm and
/// `κ = g|w|²/N²`, `V = √N Σ m_im_j/ρ_ij`, curvature `(2/|w|) α × w`.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundForm {
    pub basis: ChartBasis,
    pub masses: Masses,
    /// Per pair: coefficients of `(|w|, w1, w2, w3)` in `ρ²`.
    coeff: [[f64; 4]; 3],
}

impl RoundForm {
    pub fn new(basis: ChartBasis, masses: Masses) -> Self {
        let coeff = [0, 1, 2].map(|k| {
            let (a, b) = (basis.e1[k], basis.e2[k]);
            let ab = a.conj() * b;
            [0.5 * (a.norm_sqr() + b.norm_sqr()), ab.re, -ab.im, 0.5 * (a.norm_sqr() - b.norm_sqr())]
        });
        Self { basis, masses, coeff }
    }

    /// Round chart on the equilateral basis (collisions at the cube roots of
    /// unity on the equator, Lagrange shapes at the poles).
    pub fn equilateral(masses: Masses) -> Self {
        Self::new(make_basis(&BasisKind::Equilateral, &masses).expect("equilateral basis is valid"), masses)
    }

    /// Squared homogeneous distances `ρ_ij²(w)` and their gradients.
    pub fn distances_sq(&self, w: &Vector3<f64>) -> ([f64; 3], [Vector3<f64>; 3]) {
        let nw = w.norm();
        let unit = if nw > 0.0 { w / nw } else { Vector3::zeros() };
        let mut d = [0.0; 3];
        let mut g = [Vector3::zeros(); 3];
        for k in 0..3 {
            let c = &self.coeff[k];
            d[k] = c[0] * nw + c[1] * w[0] + c[2] * w[1] + c[3] * w[2];
            g[k] = unit * c[0] + Vector3::new(c[1], c[2], c[3]);
        }
        (d, g)
    }

    /// Mass norm `N(w) = (1/m)Σ m_im_j ρ_ij²` and its gradient.
    pub fn mass_norm_sq(&self, w: &Vector3<f64>) -> (f64, Vector3<f64>) {
        let (d, g) = self.distances_sq(w);
        let wt = self.masses.pair_weights();
        let m = self.masses.total();
        let n = (0..3).map(|k| wt[k] * d[k]).sum::<f64>() / m;
        let gn = (0..3).fold(Vector3::zeros(), |acc, k| acc + g[k] * (wt[k] / m));
        (n, gn)
    }

    /// Conformal factor `κ = g|w|²/N²`.
    pub fn kappa(&self, w: &Vector3<f64>) -> f64 {
        let (n, _) = self.mass_norm_sq(w);
        self.basis.det_g * w.norm_squared() / (n * n)
    }

    /// Shape potential on the round sphere.
    pub fn potential(&self, w: &Vector3<f64>) -> f64 {
        let (d, _) = self.distances_sq(w);
        let wt = self.masses.pair_weights();
        let (n, _) = self.mass_norm_sq(w);
        n.sqrt() * (0..3).map(|k| wt[k] / d[k].max(0.0).sqrt()).sum::<f64>()
    }

    /// Gradient of [`RoundForm::potential`].
    pub fn potential_gradient(&self, w: &Vector3<f64>) -> Vector3<f64> {
        let (d, g) = self.distances_sq(w);
        let wt = self.masses.pair_weights();
        let (n, gn) = self.mass_norm_sq(w);
        let u: f64 = (0..3).map(|k| wt[k] / d[k].sqrt()).sum();
        let sn = n.sqrt();
        let gu = (0..3).fold(Vector3::zeros(), |acc, k| acc - g[k] * (0.5 * wt[k] * d[k].powf(-1.5)));
        gn * (u / (2.0 * sn)) + gu * sn
    }

    /// Map a homogeneous reduced state to the round chart.
    pub fn from_reduced(&self, s: &RedState) -> RoundRedState {
        let xi = self.basis.coords(&s.x, &self.masses);
        let eta = self.basis.momentum_coords(&s.z);
        let w = hopf_map(xi);
        let eta_r = nalgebra::Vector4::new(eta[0].re, eta[0].im, eta[1].re, eta[1].im);
        let alpha = hopf_jacobian(xi) * eta_r / (4.0 * w.norm());
        RoundRedState { r: s.r, p_r: s.p_r, w: w.into(), alpha: alpha.into(), mu: s.mu }
    }

    /// Lift a round state to the homogeneous reduced chart.
    pub fn to_reduced(&self, s: &RoundRedState) -> Result<RedState> {
        let w = Vector3::from(s.w);
        let xi = hopf_section(&w)?;
        let eta_r = hopf_jacobian(xi).transpose() * Vector3::from(s.alpha);
        let eta = [C64::new(eta_r[0], eta_r[1]), C64::new(eta_r[2], eta_r[3])];
        Ok(RedState {
            r: s.r,
            p_r: s.p_r,
            x: self.basis.embed(xi),
            z: self.basis.momentum_lift(eta, &self.masses),
            mu: s.mu,
        })
    }
}

impl ShapeForm for RoundForm {
    fn label(&self) -> &'static str {
        "round"
    }
    fn shape_dim(&self) -> usize {
        3
    }
    fn eval(&self, x: &[f64], z: &[f64]) -> FormEval {
        let w = Vector3::new(x[0], x[1], x[2]);
        let a = Vector3::new(z[0], z[1], z[2]);
        let g = self.basis.det_g;
        let (n, gn) = self.mass_norm_sq(&w);
        let aa = a.norm_squared();
        let mut e = FormEval::unregularized(3);
        e.kin = 2.0 * n * n * aa / g;
        e.grad_kin_x.copy_from_slice((gn * (4.0 * n * aa / g)).as_slice());
        e.grad_kin_z.copy_from_slice((a * (4.0 * n * n / g)).as_slice());
        let (d, _) = self.distances_sq(&w);
        if d.iter().all(|&v| v > 0.0) {
            e.v = self.potential(&w);
            e.grad_v.copy_from_slice(self.potential_gradient(&w).as_slice());
        } else {
            e.v = f64::NAN;
            e.grad_v.fill(f64::NAN);
        }
        e
    }
    fn curvature(&self, x: &[f64], z: &[f64], out: &mut [f64]) {
        let w = Vector3::new(x[0], x[1], x[2]);
        let a = Vector3::new(z[0], z[1], z[2]);
        out.copy_from_slice((a.cross(&w) * (2.0 / w.norm())).as_slice());
    }
    fn normalize(&self, x: &mut [f64], z: &mut [f64]) -> bool {
        let n = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        rescale_gauge(x, z, n)
    }
    fn constraints(&self, x: &[f64], z: &[f64]) -> Vec<Invariant> {
        let dot = x[0] * z[0] + x[1] * z[1] + x[2] * z[2];
        let n = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        vec![Invariant::constraint("orthogonality", dot.abs()), Invariant::conserved("sphere_norm", n)]
    }
}

/// Round reduced system with state `[r, w, p_r, α, t]`.
pub type RoundSystem = RadialSystem<RoundForm>;

pub fn round_chart(basis: ChartBasis, masses: Masses, mu: f64) -> RoundSystem {
    RadialSystem::new(RoundForm::new(basis, masses), mu)
}

// ---------------------------------------------------------------------------
// Potential landscape
// ---------------------------------------------------------------------------

/// Domain of a potential grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridChart {
    /// Equilateral affine coordinate `z` on the square `[−2, 2]²`.
    Affine,
    /// Longitude `u ∈ [−π, π]` and latitude `v ∈ [−π/2, π/2]` on the round
    /// equilateral sphere.
    Round,
}

/// One grid node; `value` is `+∞` at binary collisions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub u: f64,
    pub v: f64,
    pub value: f64,
}

/// Half-width of the affine grid domain.
pub const AFFINE_GRID_HALF_WIDTH: f64 = 2.0;

/// Longitude/latitude to a unit vector.
pub fn lon_lat_to_w(u: f64, v: f64) -> Vector3<f64> {
    Vector3::new(v.cos() * u.cos(), v.cos() * u.sin(), v.sin())
}

/// Unit vector to longitude/latitude.
pub fn w_to_lon_lat(w: &Vector3<f64>) -> (f64, f64) {
    let n = w.norm();
    (w[1].atan2(w[0]), (w[2] / n).clamp(-1.0, 1.0).asin())
}

/// Node coordinates of a uniform grid with `resolution` points per axis.
pub fn grid_nodes(chart: GridChart, resolution: usize) -> Result<Vec<(f64, f64)>> {
    if !(2..=4096).contains(&resolution) {
        return Err(Error::InvalidState(format!("grid resolution {resolution} outside [2, 4096]")));
    }
    let (u0, u1, v0, v1) = match chart {
        GridChart::Affine => {
            let a = AFFINE_GRID_HALF_WIDTH;
            (-a, a, -a, a)
        }
        GridChart::Round => {
            use std::f64::consts::{FRAC_PI_2, PI};
            (-PI, PI, -FRAC_PI_2, FRAC_PI_2)
        }
    };
    let step = |a: f64, b: f64, i: usize| a + (b - a) * i as f64 / (resolution - 1) as f64;
    let mut out = Vec::with_capacity(resolution * resolution);
    for j in 0..resolution {
        for i in 0..resolution {
            out.push((step(u0, u1, i), step(v0, v1, j)));
        }
    }
    Ok(out)
}

/// Sample a shape function on a uniform grid in the equilateral chart.
/// Non-finite values (binary collisions) are reported as `+∞`.
pub fn sample_grid(
    chart: GridChart,
    resolution: usize,
    masses: &Masses,
    f: impl Fn(&Config3) -> Option<f64>,
) -> Result<Vec<GridPoint>> {
    let affine = AffineForm::equilateral(*masses);
    let round = RoundForm::equilateral(*masses);
    let nodes = grid_nodes(chart, resolution)?;
    Ok(nodes
        .into_iter()
        .map(|(u, v)| {
            let x = match chart {
                GridChart::Affine => Some(affine.embed(C64::new(u, v))),
                GridChart::Round => hopf_section(&lon_lat_to_w(u, v)).ok().map(|xi| round.basis.embed(xi)),
            };
            let value = x.and_then(|x| f(&x)).filter(|v| v.is_finite()).unwrap_or(f64::INFINITY);
            GridPoint { u, v, value }
        })
        .collect())
}

/// Shape-potential grid.
pub fn potential_grid(chart: GridChart, resolution: usize, masses: &Masses) -> Result<Vec<GridPoint>> {
    sample_grid(chart, resolution, masses, |x| {
        let (d, scale) = (crate::algebra::pair_distances(x), x.norm());
        if d.iter().any(|&v| v <= 1e-12 * scale) {
            None
        } else {
            shape_potential(x, masses).ok()
        }
    })
}

/// Kind of a critical point of the shape potential.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalKind {
    Minimum,
    Saddle,
    Maximum,
}

/// A critical point on the round equilateral sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub w: [f64; 3],
    pub value: f64,
    pub kind: CriticalKind,
    pub gradient_norm: f64,
}

/// Orthonormal tangent basis at a unit vector.
fn tangent_basis(w: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if w[0].abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let t1 = w.cross(&helper).normalize();
    let t2 = w.cross(&t1);
    (t1, t2)
}

fn tangent_gradient(form: &RoundForm, w: &Vector3<f64>, t: &(Vector3<f64>, Vector3<f64>)) -> Vector2<f64> {
    let g = form.potential_gradient(w);
    Vector2::new(g.dot(&t.0), g.dot(&t.1))
}

fn on_sphere(w: &Vector3<f64>, t: &(Vector3<f64>, Vector3<f64>), d: &Vector2<f64>) -> Vector3<f64> {
    (w + t.0 * d[0] + t.1 * d[1]).normalize()
}

/// Tangential Hessian at `w` by central differences of the analytic gradient.
fn tangent_hessian(form: &RoundForm, w: &Vector3<f64>) -> Matrix2<f64> {
    let t = tangent_basis(w);
    let h = 1e-6;
    let mut m = Matrix2::zeros();
    for j in 0..2 {
        let mut d = Vector2::zeros();
        d[j] = h;
        let wp = on_sphere(w, &t, &d);
        let wm = on_sphere(w, &t, &(-d));
        let gp = tangent_gradient(form, &wp, &t);
        let gm = tangent_gradient(form, &wm, &t);
        m.set_column(j, &((gp - gm) / (2.0 * h)));
    }
    (m + m.transpose()) * 0.5
}

/// Newton iteration for a critical point of `V` on the unit sphere.
fn newton_critical(form: &RoundForm, start: Vector3<f64>) -> Option<Vector3<f64>> {
    let mut w = start.normalize();
    for _ in 0..60 {
        let t = tangent_basis(&w);
        let g = tangent_gradient(form, &w, &t);
        if !g.iter().all(|v| v.is_finite()) {
            return None;
        }
        if g.norm() < 1e-12 {
            return Some(w);
        }
        let hess = tangent_hessian(form, &w);
        let step = hess.lu().solve(&(-g))?;
        let step = if step.norm() > 0.2 { step * (0.2 / step.norm()) } else { step };
        w = on_sphere(&w, &t, &step);
        let (d, _) = form.distances_sq(&w);
        if d.iter().any(|&v| v < 1e-8) {
            return None;
        }
    }
    let t = tangent_basis(&w);
    (tangent_gradient(form, &w, &t).norm() < 1e-9).then_some(w)
}

/// All critical points of the shape potential, located by Newton refinement
/// from every node of a longitude/latitude seed grid and deduplicated.
pub fn critical_points(masses: &Masses, seeds_per_axis: usize) -> Vec<CriticalPoint> {
    let form = RoundForm::equilateral(*masses);
    let mut found: Vec<CriticalPoint> = Vec::new();
    let n = seeds_per_axis.max(4);
    for j in 0..n {
        for i in 0..2 * n {
            let u = -std::f64::consts::PI + (i as f64 + 0.5) * std::f64::consts::PI / n as f64;
            let v = -std::f64::consts::FRAC_PI_2 + (j as f64 + 0.5) * std::f64::consts::PI / n as f64;
            let Some(w) = newton_critical(&form, lon_lat_to_w(u, v)) else { continue };
            if found.iter().any(|c| (Vector3::from(c.w) - w).norm() < 1e-6) {
                continue;
            }
            let hess = tangent_hessian(&form, &w);
            let eig = hess.symmetric_eigenvalues();
            let kind = match (eig[0] > 0.0, eig[1] > 0.0) {
                (true, true) => CriticalKind::Minimum,
                (false, false) => CriticalKind::Maximum,
                _ => CriticalKind::Saddle,
            };
            let t = tangent_basis(&w);
            found.push(CriticalPoint {
                w: w.into(),
                value: form.potential(&w),
                kind,
                gradient_norm: tangent_gradient(&form, &w, &t).norm(),
            });
        }
    }
    found.sort_by(|a, b| a.value.total_cmp(&b.value));
    found
}

/// Collinear (Euler) critical points: roots of `dV/du` on the equator of the
/// round equilateral sphere, bracketed between consecutive binary collisions
/// and refined by bisection to `1e-12`.
pub fn euler_points(masses: &Masses) -> Vec<CriticalPoint> {
    let form = RoundForm::equilateral(*masses);
    let dvdu = |u: f64| {
        let w = lon_lat_to_w(u, 0.0);
        form.potential_gradient(&w).dot(&Vector3::new(-u.sin(), u.cos(), 0.0))
    };
    // Collisions at u = 0, 2π/3, 4π/3 (the cube roots of unity).
    let third = 2.0 * std::f64::consts::PI / 3.0;
    let mut out = Vec::new();
    for k in 0..3 {
        let (mut a, mut b) = (k as f64 * third + 1e-6, (k + 1) as f64 * third - 1e-6);
        let (mut fa, fb) = (dvdu(a), dvdu(b));
        if fa.signum() == fb.signum() {
            continue;
        }
        while b - a > 1e-12 {
            let c = 0.5 * (a + b);
            let fc = dvdu(c);
            if fc.signum() == fa.signum() {
                a = c;
                fa = fc;
            } else {
                b = c;
            }
        }
        let w = lon_lat_to_w(0.5 * (a + b), 0.0);
        let t = tangent_basis(&w);
        out.push(CriticalPoint {
            w: w.into(),
            value: form.potential(&w),
            kind: CriticalKind::Saddle,
            gradient_norm: tangent_gradient(&form, &w, &t).norm(),
        });
    }
    out
}

/// Binary-collision shapes on the round equilateral sphere.
pub fn collision_points() -> [[f64; 3]; 3] {
    let third = 2.0 * std::f64::consts::PI / 3.0;
    [0.0, third, 2.0 * third].map(|u| lon_lat_to_w(u, 0.0).into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Triple;
    use crate::algebra::{fs_cometric, project_to_w};
    use crate::integrate::OdeSystem;
    use crate::oracle::Hamiltonian;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_triple(rng: &mut ChaCha8Rng) -> Triple {
        Triple::from_reals(&(0..6).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>())
    }

    /// Random admissible reduced state: `X ∈ 𝒲`, `⟨Z, X⟩ = 0`.
    fn random_red(rng: &mut ChaCha8Rng, masses: &Masses) -> RedState {
        let x = project_to_w(&random_triple(rng));
        let z0 = random_triple(rng);
        let xs = dual_vector(&x, masses);
        let z = z0 - xs * (pairing(&xs, &x).conj().inv() * pairing(&z0, &x).conj());
        RedState { r: rng.gen_range(0.5..2.0), p_r: rng.gen_range(-1.0..1.0), x, z, mu: rng.gen_range(-1.0..1.0) }
    }

    fn equilateral_x() -> Config3 {
        let w = crate::relative::omega();
        let s = 1.0 / 3f64.sqrt();
        let q = [C64::new(s, 0.0), w * s, w.conj() * s];
        Triple::new(q[0] - q[1], q[2] - q[0], q[1] - q[2])
    }

    #[test]
    fn random_states_satisfy_constraints() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let s = random_red(&mut rng, &m);
            assert!(pairing(&s.z, &s.x).norm() < 1e-13);
        }
    }

    #[test]
    fn momentum_shift_examples() {
        let eq = Masses::equal();
        let x = equilateral_x();
        let z = Triple::real(0.1, 0.2, -0.3);
        assert_eq!(momentum_shift(&x, &z, 0.0, &eq).unwrap(), z);
        let y = momentum_shift(&x, &Triple::ZERO, 1.0, &eq).unwrap();
        assert_relative_eq!(pairing(&y, &x).im, -1.0, epsilon = 1e-14);
        assert!(pairing(&y, &x).re.abs() < 1e-14);
        let back = y - gamma(&x, &eq).unwrap();
        assert!(back.norm() < 1e-15);
    }

    #[test]
    fn h_mu_examples() {
        let eq = Masses::equal();
        let s = RedState { r: 1.0, p_r: 0.0, x: equilateral_x(), z: Triple::ZERO, mu: 0.0 };
        assert_relative_eq!(h_mu(&s, &eq).unwrap(), -3.0, epsilon = 1e-14);
        let s2 = RedState { mu: 2.0, ..s };
        assert_relative_eq!(h_mu(&s2, &eq).unwrap(), -1.0, epsilon = 1e-14);
    }

    #[test]
    fn fs_form_of_h_mu_agrees() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let s = random_red(&mut rng, &m);
            assert_relative_eq!(h_mu(&s, &m).unwrap(), h_mu_fs(&s, &m).unwrap(), max_relative = 1e-12);
            let fs = fs_cometric(&s.x, &s.z, &m).unwrap();
            assert_relative_eq!(fs, 2.0 * mass_norm_sq(&s.x, &m) * kinetic(&s.z, &m), max_relative = 1e-12);
        }
    }

    #[test]
    fn reduction_round_trip_and_energy() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let s = random_red(&mut rng, &m);
            let sph = from_reduced(&s, &m).unwrap();
            assert_relative_eq!(sph.angular_momentum(), s.mu, epsilon = 1e-13);
            assert!(sph.scaling_momentum().abs() < 1e-13);
            assert_relative_eq!(
                crate::spherical::h_sph(&sph, &m).unwrap(),
                h_mu(&s, &m).unwrap(),
                max_relative = 1e-12
            );
            let back = to_reduced(&sph, &m).unwrap();
            assert!((back.z - s.z).norm() < 1e-13);
        }
    }

    #[test]
    fn lagrange_point_is_critical() {
        let eq = Masses::equal();
        let s = RedState { r: 1.0, p_r: 0.0, x: equilateral_x(), z: Triple::ZERO, mu: 0.0 };
        let d = rhs_mu(&s, &eq).unwrap();
        assert_relative_eq!(d.p_r, -3.0, epsilon = 1e-13);
        let e = crate::algebra::fs_unit(&s.x, &eq).unwrap();
        assert!(pairing(&d.z, &s.x).norm() < 1e-10);
        assert!(pairing(&d.z, &e).norm() < 1e-10);
    }

    #[test]
    fn system_matches_closed_form() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = random_red(&mut rng, &m);
        let sys = reduced_system(m, s.mu);
        let y = s.to_reals(0.0);
        let mut dy = vec![0.0; 15];
        sys.rhs(0.0, &y, &mut dy);
        let expected = rhs_mu(&s, &m).unwrap().to_reals(1.0);
        for i in 0..15 {
            assert!((dy[i] - expected[i]).abs() < 1e-12, "component {i}: {} vs {}", dy[i], expected[i]);
        }
        assert_relative_eq!(sys.energy(&y), h_mu(&s, &m).unwrap(), max_relative = 1e-13);
    }

    #[test]
    fn affine_chart_matches_homogeneous() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for form in [AffineForm::jacobi(m), AffineForm::equilateral(m)] {
            let sys = RadialSystem::new(form.clone(), 0.7);
            for _ in 0..50 {
                let a = AffineRedState {
                    r: rng.gen_range(0.5..2.0),
                    p_r: rng.gen_range(-1.0..1.0),
                    z: C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
                    zeta: C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    mu: 0.7,
                };
                let red = form.to_reduced(&a);
                assert!(pairing(&red.z, &red.x).norm() < 1e-12);
                assert_relative_eq!(sys.hamiltonian(&a.to_reals(0.0)), h_mu(&red, &m).unwrap(), max_relative = 1e-11);
                let back = form.from_reduced(&red).unwrap();
                assert!((back.z - a.z).norm() < 1e-12 && (back.zeta - a.zeta).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn jacobi_affine_norm_and_lagrange_points() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let form = AffineForm::jacobi(m);
        let z = C64::new(0.3, -0.4);
        let mu2 = form.basis.gram[(1, 1)].re;
        assert_relative_eq!(form.basis.norm_sq(form.xi(z)), mu2 * (1.0 + z.norm_sqr()), max_relative = 1e-14);
        // In the ratio coordinate ξ2/ξ1 the Lagrange shapes are equilateral.
        let basis = make_basis(&BasisKind::Jacobi, &m).unwrap();
        for l in jacobi_lagrange_points(&m) {
            let d = basis.distances([C64::new(1.0, 0.0), l]);
            assert_relative_eq!(d[0], d[1], epsilon = 1e-14);
            assert_relative_eq!(d[1], d[2], epsilon = 1e-14);
        }
    }

    #[test]
    fn equilateral_chart_examples() {
        let eq = Masses::equal();
        let form = AffineForm::equilateral(eq);
        let sys = RadialSystem::new(form.clone(), 0.0);
        let e = sys.form.eval(&[0.0, 0.0], &[0.0, 0.0]);
        assert_relative_eq!(e.v, 3.0, epsilon = 1e-13);
        assert!(e.grad_v.iter().all(|g| g.abs() < 1e-10));
        // Collisions at the cube roots of unity.
        assert!(form.potential(C64::new(1.0, 0.0)).is_err());
        let x = form.embed(crate::relative::omega());
        assert!(x[1].norm() < 1e-14);
        // Radial monotonicity: V increases away from z = 0 inside the unit disk.
        for k in 0..12 {
            let dir = C64::from_polar(1.0, 0.3 + k as f64 * 0.5);
            for &s in &[0.2, 0.5, 0.8] {
                let z = dir * s;
                let ev = sys.form.eval(&[z.re, z.im], &[0.0, 0.0]);
                let radial = ev.grad_v[0] * z.re + ev.grad_v[1] * z.im;
                assert!(radial > 0.0, "z = {z}");
            }
            for &s in &[1.3, 2.0, 4.0] {
                let z = dir * s;
                let ev = sys.form.eval(&[z.re, z.im], &[0.0, 0.0]);
                let radial = ev.grad_v[0] * z.re + ev.grad_v[1] * z.im;
                assert!(radial < 0.0, "z = {z}");
            }
        }
    }

    #[test]
    fn hopf_examples() {
        let one = C64::new(1.0, 0.0);
        assert_eq!(hopf_map([one, C64::default()]), Vector3::new(0.0, 0.0, 1.0));
        let w = hopf_map([one, one]);
        assert_eq!(w, Vector3::new(2.0, 0.0, 0.0));
        assert_relative_eq!(w.norm(), 2.0);
        let xi = [C64::new(0.3, -0.7), C64::new(1.1, 0.2)];
        let ph = C64::from_polar(1.0, 0.9);
        assert!((hopf_map([xi[0] * ph, xi[1] * ph]) - hopf_map(xi)).norm() < 1e-14);
        for w in [Vector3::new(0.3, -0.2, 0.9), Vector3::new(0.3, -0.2, -0.9), Vector3::new(0.0, 0.0, -1.0)] {
            assert!((hopf_map(hopf_section(&w).unwrap()) - w).norm() < 1e-14);
        }
    }

    #[test]
    fn round_chart_equilateral_examples() {
        let eq = Masses::equal();
        let form = RoundForm::equilateral(eq);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let w = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let u = w.normalize();
            let (d, _) = form.distances_sq(&u);
            let s3 = 3f64.sqrt() / 2.0;
            assert_relative_eq!(d[0], 1.0 - u[0], epsilon = 1e-14);
            assert_relative_eq!(d[1], 1.0 + 0.5 * u[0] + s3 * u[1], epsilon = 1e-14);
            assert_relative_eq!(d[2], 1.0 + 0.5 * u[0] - s3 * u[1], epsilon = 1e-14);
            assert_relative_eq!(form.kappa(&(w * 2.5)), 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn round_chart_matches_homogeneous() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for kind in [BasisKind::Equilateral, BasisKind::Jacobi] {
            let form = RoundForm::new(make_basis(&kind, &m).unwrap(), m);
            let sys = RadialSystem::new(form.clone(), 0.0);
            for _ in 0..50 {
                let s = RedState { mu: 0.0, ..random_red(&mut rng, &m) };
                let round = form.from_reduced(&s);
                let w = Vector3::from(round.w);
                assert!(w.dot(&Vector3::from(round.alpha)).abs() < 1e-12);
                assert_relative_eq!(sys.hamiltonian(&round.to_reals(0.0)), h_mu(&s, &m).unwrap(), max_relative = 1e-11);
                let back = form.to_reduced(&round).unwrap();
                assert_relative_eq!(h_mu(&back, &m).unwrap(), h_mu(&s, &m).unwrap(), max_relative = 1e-11);
                let again = form.from_reduced(&back);
                for k in 0..3 {
                    assert!((again.w[k] - round.w[k]).abs() < 1e-12);
                    assert!((again.alpha[k] - round.alpha[k]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn potential_grid_examples() {
        let eq = Masses::equal();
        let grid = potential_grid(GridChart::Round, 61, &eq).unwrap();
        let min = grid.iter().map(|p| p.value).fold(f64::INFINITY, f64::min);
        assert_relative_eq!(min, 3.0, epsilon = 1e-12);
        // Longitudes 0 and ±2π/3 on the equator are grid nodes at this resolution.
        assert_eq!(grid.iter().filter(|p| p.value.is_infinite()).count(), 3);
        assert!(potential_grid(GridChart::Round, 1, &eq).is_err());
        assert!(potential_grid(GridChart::Affine, 5000, &eq).is_err());
    }

    #[test]
    fn critical_points_equal_masses() {
        let eq = Masses::equal();
        let cps = critical_points(&eq, 12);
        assert_eq!(cps.len(), 5, "{cps:?}");
        let minima: Vec<_> = cps.iter().filter(|c| c.kind == CriticalKind::Minimum).collect();
        let saddles: Vec<_> = cps.iter().filter(|c| c.kind == CriticalKind::Saddle).collect();
        assert_eq!(minima.len(), 2);
        assert_eq!(saddles.len(), 3);
        for c in minima {
            assert_relative_eq!(c.value, 3.0, epsilon = 1e-10);
        }
        for c in saddles {
            assert_relative_eq!(c.value, 5.0 / 2f64.sqrt(), epsilon = 1e-9);
        }
        let euler = euler_points(&eq);
        assert_eq!(euler.len(), 3);
        for c in euler {
            assert!(c.gradient_norm < 1e-8);
            assert_relative_eq!(c.value, 5.0 / 2f64.sqrt(), epsilon = 1e-9);
        }
    }
}
