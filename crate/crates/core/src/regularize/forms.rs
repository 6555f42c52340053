//! Regularized Hamiltonians as instances of the general radial form with
//! `A = τ`, `V = W`, `C = hτ`.
//!
//! * [`ConeForm`] — homogeneous cone coordinates `(z, η) ∈ 𝒞 × ℂ³`, with the
//!   kinetic block `(N/S³) Σ |π_i|² ρ_opp/(8m_i)`; spherical (unreduced) or
//!   reduced (curvature `−2τiη`).
//! * [`QuadForm`] — the quadratic parametrization `z = g(x)`, kinetic block
//!   `(N/S³) Σ |π'_i|² ρ_opp/(32m_i)`; reduced curvature `−2τiy`.
//! * [`RegAffineForm`] — the affine chart `x = (1, z)` of the regularized
//!   shape sphere: `kin = ¼(τ/λ)(1+|z|²)²|ζ|²`, curvature `−2τiζ`.
//! * [`RegRoundForm`] — the `c`-sphere: `kin = (τ/λ)|c|²|γ|²`, curvature
//!   `(2τ/|c|) γ × c`.
//!
//! Here `S = Σρ`, `N = (1/m)Σ m_im_jρ_ij²` and `τ/λ = mN²/(4m1m2m3S⁴)`.

use nalgebra::Vector3;

use super::{
    quad_jacobian, quad_param, quad_pullback, rho, rho_of_c, ConeState, QuadState, RegAffineState, RegRoundState,
    RhoFunctions,
};
use crate::algebra::{pairing, Masses, Triple, C64, I};
use crate::form::{rescale_gauge, FormEval, RadialSystem, ShapeForm};
use crate::integrate::Invariant;

/// One term `coef · p[mom] · conj(q[pos])` of a momentum bilinear `π`.
type PiTerm = (f64, usize, usize);

/// A bilinear `π` weighted by `ρ_opp/m_body`.
struct PiSpec {
    terms: [PiTerm; 2],
    body: usize,
    opp: usize,
}

/// `π1 = η12 z̄31 − η31 z̄12`, `π2 = η23 z̄12 − η12 z̄23`, `π3 = η31 z̄23 − η23 z̄31`.
const CONE_PI: [PiSpec; 3] = [
    PiSpec { terms: [(1.0, 0, 1), (-1.0, 1, 0)], body: 0, opp: 2 },
    PiSpec { terms: [(1.0, 2, 0), (-1.0, 0, 2)], body: 1, opp: 1 },
    PiSpec { terms: [(1.0, 1, 2), (-1.0, 2, 1)], body: 2, opp: 0 },
];

/// `π'1 = y1x̄2 + y2x̄1`, `π'2 = y1x̄2 − y2x̄1`, `π'3 = y1x̄1 − y2x̄2`.
const QUAD_PI: [PiSpec; 3] = [
    PiSpec { terms: [(1.0, 0, 1), (1.0, 1, 0)], body: 0, opp: 2 },
    PiSpec { terms: [(1.0, 0, 1), (-1.0, 1, 0)], body: 1, opp: 1 },
    PiSpec { terms: [(1.0, 0, 0), (-1.0, 1, 1)], body: 2, opp: 0 },
];

/// `Σ |π_i|² ρ_opp/(denom·m_i)` with its `ρ`-partials and complex gradients.
struct PiBlock {
    value: f64,
    d_rho: [f64; 3],
    g_pos: Vec<C64>,
    g_mom: Vec<C64>,
}

fn pi_block(specs: &[PiSpec; 3], pos: &[C64], mom: &[C64], rho: &[f64; 3], masses: &Masses, denom: f64) -> PiBlock {
    let m = masses.as_array();
    let mut b = PiBlock {
        value: 0.0,
        d_rho: [0.0; 3],
        g_pos: vec![C64::default(); pos.len()],
        g_mom: vec![C64::default(); mom.len()],
    };
    for spec in specs {
        let pi: C64 = spec.terms.iter().map(|&(c, p, q)| mom[p] * pos[q].conj() * c).sum();
        let wgt = 1.0 / (denom * m[spec.body]);
        let ro = rho[spec.opp];
        b.value += wgt * pi.norm_sqr() * ro;
        b.d_rho[spec.opp] += wgt * pi.norm_sqr();
        for &(c, p, q) in &spec.terms {
            b.g_pos[q] += pi.conj() * mom[p] * (2.0 * c * wgt * ro);
            b.g_mom[p] += pi * pos[q] * (2.0 * c * wgt * ro);
        }
    }
    b
}

fn to_reals(v: &[C64], out: &mut [f64]) {
    for (k, c) in v.iter().enumerate() {
        out[2 * k] = c.re;
        out[2 * k + 1] = c.im;
    }
}

fn from_reals(v: &[f64]) -> Vec<C64> {
    v.chunks(2).map(|p| C64::new(p[0], p[1])).collect()
}

/// Chain a `ρ`-gradient to cone coordinates: `Σ_k g_k · 2 z_k e_k`.
fn cone_grad(d: &[f64; 3], z: &Triple) -> Triple {
    Triple(std::array::from_fn(|k| z[k] * (2.0 * d[k])))
}

fn euclid_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Regularized Hamiltonian in homogeneous cone coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeForm {
    pub masses: Masses,
    pub h: f64,
    /// Reduced by rotations (`⟨η,z⟩ = 0`, curvature term) or spherical.
    pub reduced: bool,
}

impl ShapeForm for ConeForm {
    fn label(&self) -> &'static str {
        if self.reduced {
            "reg_cone"
        } else {
            "reg_sph"
        }
    }
    fn shape_dim(&self) -> usize {
        6
    }
    fn eval(&self, x: &[f64], z: &[f64]) -> FormEval {
        let (zc, eta) = (Triple::from_reals(x), Triple::from_reals(z));
        let r = rho(&zc);
        let f = RhoFunctions::new(r, &self.masses);
        let b = pi_block(&CONE_PI, &zc.0, &eta.0, &r, &self.masses, 8.0);
        let mut e = FormEval::unregularized(6);
        e.kin = f.n_over_s3 * b.value;
        let d_rho: [f64; 3] = std::array::from_fn(|k| f.d_n_over_s3[k] * b.value + f.n_over_s3 * b.d_rho[k]);
        let gx = cone_grad(&d_rho, &zc) + Triple::from_slice(&b.g_pos) * f.n_over_s3;
        gx.write_reals(&mut e.grad_kin_x);
        (Triple::from_slice(&b.g_mom) * f.n_over_s3).write_reals(&mut e.grad_kin_z);
        e.v = f.w;
        cone_grad(&f.d_w, &zc).write_reals(&mut e.grad_v);
        let mut gt = vec![0.0; 6];
        cone_grad(&f.d_tau, &zc).write_reals(&mut gt);
        e.set_time_factor(f.tau, &gt, self.h);
        e
    }
    fn curvature(&self, x: &[f64], z: &[f64], out: &mut [f64]) {
        if !self.reduced {
            out.fill(0.0);
            return;
        }
        let t = super::tau(&Triple::from_reals(x));
        (Triple::from_reals(z) * (-I * 2.0 * t)).write_reals(out);
    }
    fn normalize(&self, x: &mut [f64], z: &mut [f64]) -> bool {
        let n = euclid_norm(x);
        rescale_gauge(x, z, n)
    }
    fn constraints(&self, x: &[f64], z: &[f64]) -> Vec<Invariant> {
        let (zc, eta) = (Triple::from_reals(x), Triple::from_reals(z));
        let p = pairing(&eta, &zc);
        let scale = zc.norm() * eta.norm().max(1.0);
        let mut out = vec![Invariant::constraint("cone", super::cone_residual(&zc))];
        if self.reduced {
            out.push(Invariant::constraint("pairing", p.norm() / scale));
        } else {
            out.push(Invariant::constraint("scaling_momentum", p.re.abs() / scale));
            out.push(Invariant::conserved("angular_momentum", -p.im / 2.0));
        }
        out
    }
    fn regularized(&self) -> bool {
        true
    }
}

/// Regularized Hamiltonian in the quadratic parametrization of the cone.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadForm {
    pub masses: Masses,
    pub h: f64,
    pub reduced: bool,
}

impl ShapeForm for QuadForm {
    fn label(&self) -> &'static str {
        if self.reduced {
            "reg_quad_mu"
        } else {
            "reg_quad"
        }
    }
    fn shape_dim(&self) -> usize {
        4
    }
    fn eval(&self, x: &[f64], z: &[f64]) -> FormEval {
        let xs = from_reals(x);
        let ys = from_reals(z);
        let xa = [xs[0], xs[1]];
        let zc = quad_param(xa);
        let r = rho(&zc);
        let f = RhoFunctions::new(r, &self.masses);
        let b = pi_block(&QUAD_PI, &xs, &ys, &r, &self.masses, 32.0);
        let mut e = FormEval::unregularized(4);
        e.kin = f.n_over_s3 * b.value;
        let d_rho: [f64; 3] = std::array::from_fn(|k| f.d_n_over_s3[k] * b.value + f.n_over_s3 * b.d_rho[k]);
        let pull = quad_pullback(xa, &cone_grad(&d_rho, &zc));
        let gx: Vec<C64> = (0..2).map(|j| pull[j] + b.g_pos[j] * f.n_over_s3).collect();
        to_reals(&gx, &mut e.grad_kin_x);
        let gy: Vec<C64> = b.g_mom.iter().map(|g| g * f.n_over_s3).collect();
        to_reals(&gy, &mut e.grad_kin_z);
        e.v = f.w;
        to_reals(&quad_pullback(xa, &cone_grad(&f.d_w, &zc)), &mut e.grad_v);
        let mut gt = vec![0.0; 4];
        to_reals(&quad_pullback(xa, &cone_grad(&f.d_tau, &zc)), &mut gt);
        e.set_time_factor(f.tau, &gt, self.h);
        e
    }
    fn curvature(&self, x: &[f64], z: &[f64], out: &mut [f64]) {
        if !self.reduced {
            out.fill(0.0);
            return;
        }
        let xs = from_reals(x);
        let t = super::tau(&quad_param([xs[0], xs[1]]));
        let c: Vec<C64> = from_reals(z).iter().map(|y| -I * 2.0 * t * y).collect();
        to_reals(&c, out);
    }
    fn normalize(&self, x: &mut [f64], z: &mut [f64]) -> bool {
        let n = euclid_norm(x);
        rescale_gauge(x, z, n)
    }
    fn constraints(&self, x: &[f64], z: &[f64]) -> Vec<Invariant> {
        let (xs, ys) = (from_reals(x), from_reals(z));
        let p: C64 = (0..2).map(|j| ys[j].conj() * xs[j]).sum();
        let scale = euclid_norm(x) * euclid_norm(z).max(1.0);
        if self.reduced {
            vec![Invariant::constraint("pairing", p.norm() / scale)]
        } else {
            vec![
                Invariant::constraint("scaling_momentum", p.re.abs() / scale),
                Invariant::conserved("angular_momentum", -p.im / 4.0),
            ]
        }
    }
    fn regularized(&self) -> bool {
        true
    }
}

/// Regularized reduced Hamiltonian in the affine chart `x = (1, z)`:
/// binary collision 12 sits at `z = 0`, 31 and 23 at `z = ±i`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegAffineForm {
    pub masses: Masses,
    pub h: f64,
}

/// Coefficient of the affine kinetic block `k0 (τ/λ)(1+|z|²)²|ζ|²`.
pub const REG_AFFINE_K0: f64 = 0.25;

impl RegAffineForm {
    /// The cone point `g(1, z)`.
    pub fn cone_point(z: C64) -> Triple {
        quad_param([C64::new(1.0, 0.0), z])
    }

    /// Pull back a cone gradient to the affine coordinate.
    fn pull(z: C64, g: &Triple) -> C64 {
        let d = quad_jacobian([C64::new(1.0, 0.0), z]);
        (0..3).map(|k| g[k] * d[k][1].conj()).sum()
    }
}

impl ShapeForm for RegAffineForm {
    fn label(&self) -> &'static str {
        "reg_affine"
    }
    fn shape_dim(&self) -> usize {
        2
    }
    fn eval(&self, x: &[f64], z: &[f64]) -> FormEval {
        let zc = C64::new(x[0], x[1]);
        let zeta = C64::new(z[0], z[1]);
        let cone = Self::cone_point(zc);
        let f = RhoFunctions::new(rho(&cone), &self.masses);
        let p = 1.0 + zc.norm_sqr();
        let zz = zeta.norm_sqr();
        let k0 = REG_AFFINE_K0;
        let mut e = FormEval::unregularized(2);
        e.kin = k0 * f.tau_over_lambda * p * p * zz;
        let g_r = Self::pull(zc, &cone_grad(&f.d_tau_over_lambda, &cone));
        let gx = g_r * (k0 * zz * p * p) + zc * (k0 * zz * f.tau_over_lambda * 4.0 * p);
        let gz = zeta * (2.0 * k0 * f.tau_over_lambda * p * p);
        to_reals(&[gx], &mut e.grad_kin_x);
        to_reals(&[gz], &mut e.grad_kin_z);
        e.v = f.w;
        to_reals(&[Self::pull(zc, &cone_grad(&f.d_w, &cone))], &mut e.grad_v);
        let mut gt = vec![0.0; 2];
        to_reals(&[Self::pull(zc, &cone_grad(&f.d_tau, &cone))], &mut gt);
        e.set_time_factor(f.tau, &gt, self.h);
        e
    }
    fn curvature(&self, x: &[f64], z: &[f64], out: &mut [f64]) {
        let t = super::tau(&Self::cone_point(C64::new(x[0], x[1])));
        out[0] = 2.0 * t * z[1];
        out[1] = -2.0 * t * z[0];
    }
    fn regularized(&self) -> bool {
        true
    }
}

/// Regularized reduced Hamiltonian on the `c`-sphere.
#[derive(Clone, Debug, PartialEq)]
pub struct RegRoundForm {
    pub masses: Masses,
    pub h: f64,
}

impl RegRoundForm {
    fn rho_grads(c: &Vector3<f64>) -> [Vector3<f64>; 3] {
        std::array::from_fn(|k| {
            let mut g = c * 2.0;
            g[k] = 0.0;
            g
        })
    }
    fn chain(d: &[f64; 3], g: &[Vector3<f64>; 3]) -> Vector3<f64> {
        g[0] * d[0] + g[1] * d[1] + g[2] * d[2]
    }
}

impl ShapeForm for RegRoundForm {
    fn label(&self) -> &'static str {
        "reg_round"
    }
    fn shape_dim(&self) -> usize {
        3
    }
    fn eval(&self, x: &[f64], z: &[f64]) -> FormEval {
        let c = Vector3::new(x[0], x[1], x[2]);
        let g = Vector3::new(z[0], z[1], z[2]);
        let f = RhoFunctions::new(rho_of_c(&c), &self.masses);
        let dr = Self::rho_grads(&c);
        let (cc, gg) = (c.norm_squared(), g.norm_squared());
        let mut e = FormEval::unregularized(3);
        e.kin = f.tau_over_lambda * cc * gg;
        let gx = Self::chain(&f.d_tau_over_lambda, &dr) * (cc * gg) + c * (2.0 * f.tau_over_lambda * gg);
        e.grad_kin_x.copy_from_slice(gx.as_slice());
        e.grad_kin_z.copy_from_slice((g * (2.0 * f.tau_over_lambda * cc)).as_slice());
        e.v = f.w;
        e.grad_v.copy_from_slice(Self::chain(&f.d_w, &dr).as_slice());
        let gt = Self::chain(&f.d_tau, &dr);
        e.set_time_factor(f.tau, gt.as_slice(), self.h);
        e
    }
    fn curvature(&self, x: &[f64], z: &[f64], out: &mut [f64]) {
        let c = Vector3::new(x[0], x[1], x[2]);
        let g = Vector3::new(z[0], z[1], z[2]);
        let t = RhoFunctions::new(rho_of_c(&c), &self.masses).tau;
        out.copy_from_slice((g.cross(&c) * (2.0 * t / c.norm())).as_slice());
    }
    fn normalize(&self, x: &mut [f64], z: &mut [f64]) -> bool {
        let n = euclid_norm(x);
        rescale_gauge(x, z, n)
    }
    fn constraints(&self, x: &[f64], z: &[f64]) -> Vec<Invariant> {
        let dot: f64 = (0..3).map(|k| x[k] * z[k]).sum();
        vec![Invariant::constraint("orthogonality", dot.abs()), Invariant::conserved("sphere_norm", euclid_norm(x))]
    }
    fn regularized(&self) -> bool {
        true
    }
}

pub type ConeSystem = RadialSystem<ConeForm>;
pub type QuadSystem = RadialSystem<QuadForm>;
pub type RegAffineSystem = RadialSystem<RegAffineForm>;
pub type RegRoundSystem = RadialSystem<RegRoundForm>;

/// `H̃_sph` in cone coordinates (no rotation reduction).
pub fn cone_sph_system(masses: Masses, h: f64) -> ConeSystem {
    RadialSystem::new(ConeForm { masses, h, reduced: false }, 0.0)
}

/// `H̃_μ` in cone coordinates.
pub fn cone_reduced_system(masses: Masses, mu: f64, h: f64) -> ConeSystem {
    RadialSystem::new(ConeForm { masses, h, reduced: true }, mu)
}

/// `H̃_sph` in the quadratic parametrization.
pub fn quad_sph_system(masses: Masses, h: f64) -> QuadSystem {
    RadialSystem::new(QuadForm { masses, h, reduced: false }, 0.0)
}

/// `H̃_μ` in the quadratic parametrization.
pub fn quad_reduced_system(masses: Masses, mu: f64, h: f64) -> QuadSystem {
    RadialSystem::new(QuadForm { masses, h, reduced: true }, mu)
}

/// `H̃_μ` in the regularized affine chart.
pub fn reg_affine_system(masses: Masses, mu: f64, h: f64) -> RegAffineSystem {
    RadialSystem::new(RegAffineForm { masses, h }, mu)
}

/// `H̃_μ` on the `c`-sphere.
pub fn reg_round_system(masses: Masses, mu: f64, h: f64) -> RegRoundSystem {
    RadialSystem::new(RegRoundForm { masses, h }, mu)
}

/// `H̃_sph(r, p_r, z, η)`.
pub fn h_tilde_sph(s: &ConeState, masses: &Masses) -> f64 {
    cone_sph_system(*masses, s.h).hamiltonian(&s.to_reals(0.0))
}

/// `H̃_sph(r, p_r, x, y)`.
pub fn h_tilde_sph_quad(s: &QuadState, masses: &Masses) -> f64 {
    quad_sph_system(*masses, s.h).hamiltonian(&s.to_reals(0.0))
}

/// `H̃_μ(r, p_r, z, η)` with the π kinetic block.
pub fn h_tilde_mu(s: &ConeState, masses: &Masses) -> f64 {
    cone_reduced_system(*masses, s.mu, s.h).hamiltonian(&s.to_reals(0.0))
}

/// `H̃_μ` with the kinetic block written through the cone Fubini–Study
/// cometric: `m N² |⟨η, z × z̄⟩|²/(8 m1m2m3 r² S⁵)`.
pub fn h_tilde_mu_fs(s: &ConeState, masses: &Masses) -> f64 {
    let f = RhoFunctions::new(rho(&s.z), masses);
    let t = s.z.cross(&s.z.conj());
    let sig = pairing(&s.eta, &t).norm_sqr();
    let r2 = s.r * s.r;
    let kin = masses.total() * f.n * f.n * sig / (8.0 * masses.product() * f.s.powi(5));
    0.5 * f.tau * (s.p_r * s.p_r + s.mu * s.mu / r2) + kin / r2 - f.w / s.r - s.h * f.tau
}

/// `H̃_μ(r, p_r, x, y)` with the compact kinetic block `(τ/4λ)|y1x2 − x1y2|²`.
pub fn h_tilde_mu_quad_compact(s: &QuadState, masses: &Masses) -> f64 {
    let f = RhoFunctions::new(rho(&quad_param(s.x)), masses);
    let r2 = s.r * s.r;
    let kin = 0.25 * f.tau_over_lambda * (s.y[0] * s.x[1] - s.x[0] * s.y[1]).norm_sqr();
    0.5 * f.tau * (s.p_r * s.p_r + s.mu * s.mu / r2) + kin / r2 - f.w / s.r - s.h * f.tau
}

/// `H̃_μ` in the regularized affine chart.
pub fn h_tilde_mu_affine(s: &RegAffineState, masses: &Masses) -> f64 {
    reg_affine_system(*masses, s.mu, s.h).hamiltonian(&s.to_reals(0.0))
}

/// `H̃_μ(r, p_r, c, γ)`.
pub fn h_tilde_mu_c(s: &RegRoundState, masses: &Masses) -> f64 {
    reg_round_system(*masses, s.mu, s.h).hamiltonian(&s.to_reals(0.0))
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;
    use crate::algebra::{dual_vector, mass_norm_sq, project_to_w};
    use crate::integrate::OdeSystem;
    use crate::oracle::fd_gradient_check;
    use crate::oracle::Hamiltonian;
    use crate::reduced::{h_mu, RedState};
    use crate::spherical::{h_sph, SphState};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rc(rng: &mut ChaCha8Rng) -> C64 {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    }

    /// Random reduced cone state through the quadratic chart.
    fn random_cone_state(rng: &mut ChaCha8Rng, mu: f64, h: f64) -> ConeState {
        let x = [rc(rng), rc(rng)];
        let y0 = [rc(rng), rc(rng)];
        let nx = x[0].norm_sqr() + x[1].norm_sqr();
        let p: C64 = (0..2).map(|j| y0[j].conj() * x[j]).sum();
        let y = [y0[0] + x[0] * (p.conj() / nx) * -1.0, y0[1] - x[1] * (p.conj() / nx)];
        QuadState { r: rng.gen_range(0.5..2.0), p_r: rng.gen_range(-1.0..1.0), x, y, mu, h }.to_cone()
    }

    #[test]
    fn cone_state_constraints() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let s = random_cone_state(&mut rng, 0.3, -1.0);
            assert!(s.pairing().norm() < 1e-12);
            assert!(cone_residual(&s.z) < 1e-14);
        }
    }

    #[test]
    fn kinetic_forms_agree() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let s = random_cone_state(&mut rng, 0.4, -0.8);
            let q = QuadState::from_cone(&s).unwrap();
            let a = h_tilde_mu(&s, &m);
            assert_relative_eq!(h_tilde_mu_fs(&s, &m), a, max_relative = 1e-11);
            let qs = quad_reduced_system(m, s.mu, s.h);
            assert_relative_eq!(qs.hamiltonian(&q.to_reals(0.0)), a, max_relative = 1e-11);
            assert_relative_eq!(h_tilde_mu_quad_compact(&q, &m), a, max_relative = 1e-11);
            if let Ok(af) = RegAffineState::from_quad(&q) {
                assert_relative_eq!(h_tilde_mu_affine(&af, &m), a, max_relative = 1e-10);
            }
            let c = RegRoundState::from_cone(&s);
            assert_relative_eq!(h_tilde_mu_c(&c, &m), a, max_relative = 1e-10);
        }
    }

    #[test]
    fn poincare_identity_reduced() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let s = random_cone_state(&mut rng, 0.7, -1.3);
            let (x, z) = cone_to_homogeneous(&s.z, &s.eta).unwrap();
            let red = RedState { r: s.r, p_r: s.p_r, x, z, mu: s.mu };
            let expected = tau(&s.z) * (h_mu(&red, &m).unwrap() - s.h);
            assert_relative_eq!(h_tilde_mu(&s, &m), expected, max_relative = 1e-11, epsilon = 1e-13);
        }
    }

    #[test]
    fn poincare_identity_spherical() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let x = project_to_w(&Triple([rc(&mut rng), rc(&mut rng), rc(&mut rng)]));
            let y0 = Triple([rc(&mut rng), rc(&mut rng), rc(&mut rng)]);
            // Remove the scaling momentum: Re⟨Y, X⟩ = 0.
            let xs = dual_vector(&x, &m);
            let y = y0 - xs * (pairing(&y0, &x).re / mass_norm_sq(&x, &m));
            let sph = SphState { r: 1.3, p_r: 0.2, x, y };
            let (z, eta) = homogeneous_to_cone(&x, &y, [false, false, true]).unwrap();
            let cs = ConeState { r: sph.r, p_r: sph.p_r, z, eta, mu: 0.0, h: -0.9 };
            assert!(pairing(&eta, &z).re.abs() < 1e-12);
            let expected = tau(&z) * (h_sph(&sph, &m).unwrap() - cs.h);
            assert_relative_eq!(h_tilde_sph(&cs, &m), expected, max_relative = 1e-11, epsilon = 1e-13);
            let q = QuadState::from_cone(&cs).unwrap();
            assert_relative_eq!(h_tilde_sph_quad(&q, &m), expected, max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn finite_at_binary_collision() {
        let eq = Masses::equal();
        let i = C64::new(0.0, 1.0);
        let z = Triple::new(C64::default(), C64::new(1.0, 0.0), i);
        let s = ConeState {
            r: 1.0,
            p_r: 0.1,
            z,
            eta: Triple::new(C64::new(0.3, 0.0), C64::default(), C64::default()),
            mu: 0.0,
            h: -1.0,
        };
        assert!(h_tilde_sph(&s, &eq).is_finite());
        let af = RegAffineState { r: 1.0, p_r: 0.0, z: C64::default(), zeta: C64::default(), mu: 0.0, h: -1.0 };
        let w = (2.0f64 / 3.0).sqrt() / 8.0;
        assert_relative_eq!(h_tilde_mu_affine(&af, &eq), -w, epsilon = 1e-15);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let (mu, h) = (0.6, -1.1);
        let cone = |rng: &mut ChaCha8Rng| random_cone_state(rng, mu, h);
        let quad = |rng: &mut ChaCha8Rng| QuadState::from_cone(&cone(rng)).unwrap();
        let reports = [
            fd_gradient_check("cone_mu", &cone_reduced_system(m, mu, h), 50, 1, |r| cone(r).to_reals(0.0)),
            fd_gradient_check("cone_sph", &cone_sph_system(m, h), 50, 2, |r| cone(r).to_reals(0.0)),
            fd_gradient_check("quad_mu", &quad_reduced_system(m, mu, h), 50, 3, |r| quad(r).to_reals(0.0)),
            fd_gradient_check("quad_sph", &quad_sph_system(m, h), 50, 4, |r| quad(r).to_reals(0.0)),
            fd_gradient_check("reg_affine", &reg_affine_system(m, mu, h), 50, 5, |r| {
                RegAffineState::from_quad(&quad(r)).unwrap().to_reals(0.0)
            }),
            fd_gradient_check("reg_round", &reg_round_system(m, mu, h), 50, 6, |r| {
                RegRoundState::from_cone(&cone(r)).to_reals(0.0)
            }),
        ];
        for r in reports {
            assert!(r.passed(1e-6), "{r:?}");
        }
    }

    #[test]
    fn regularized_equations_bounded_at_collision() {
        let eq = Masses::equal();
        let sys = reg_affine_system(eq, 0.0, -1.0);
        let y = RegAffineState { r: 1.0, p_r: -0.3, z: C64::default(), zeta: C64::new(0.4, -0.2), mu: 0.0, h: -1.0 }
            .to_reals(0.0);
        let mut dy = vec![0.0; 7];
        sys.rhs(0.0, &y, &mut dy);
        assert!(dy.iter().all(|v| v.is_finite()));
        assert!(sys.energy(&y).is_finite());
    }
}
