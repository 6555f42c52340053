//! Simultaneous Levi-Civita regularization of the three binary collisions.
//!
//! Each homogeneous relative position is squared, `X_ij = z_ij²`, so the
//! subspace `𝒲` pulls back to the quadratic cone `𝒞: z12² + z31² + z23² = 0`.
//! Momenta transform by `Y_ij = η_ij/(2 z̄_ij)`.  After the Poincaré time
//! change `dt = τ ds` with `τ = ρ12ρ31ρ23/(ρ12+ρ31+ρ23)³`, `ρ_ij = |z_ij|²`,
//! every regularized Hamiltonian is a function of the `ρ_ij` and of a
//! chart-specific quadratic momentum form, and physical motion lives on its
//! zero level.
//!
//! This module holds the geometry shared by all regularized charts: the
//! squaring map and its branches, `τ`, the regularized potential `W`, the
//! conformal factor `λ`, the quadratic parametrization of the cone, the
//! `SO(3)` frame and the `c = Re z × Im z` sphere with its local inverses.

pub mod forms;
pub mod kepler;
pub mod lemaitre;

use nalgebra::{Matrix2, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::algebra::{pairing, CoConfig3, Config3, Masses, Triple, C64, MEMBERSHIP_TOL};
use crate::error::{Error, Result};

/// Squaring map `X = (z12², z31², z23²)`.
pub fn lc_project(z: &Config3) -> Config3 {
    z.map(|v| v * v)
}

/// Unit-normalized cone residual `|z12² + z31² + z23²|/‖z‖²`.
pub fn cone_residual(z: &Config3) -> f64 {
    let n = z.norm_sq();
    if n == 0.0 {
        return 0.0;
    }
    lc_project(z).sum().norm() / n
}

/// Lift `X ∈ 𝒲₀` to the cone using principal square roots with the given
/// sign choices (`true` negates the root).
pub fn lc_lift(x: &Config3, branch: [bool; 3]) -> Result<Config3> {
    if x.norm() == 0.0 {
        return Err(Error::ZeroConfiguration);
    }
    let z = Triple(std::array::from_fn(|k| {
        let s = x[k].sqrt();
        if branch[k] {
            -s
        } else {
            s
        }
    }));
    if cone_residual(&z) > MEMBERSHIP_TOL {
        return Err(Error::InvalidBranch(branch));
    }
    Ok(z)
}

/// All eight sign patterns.
pub fn all_branches() -> [[bool; 3]; 8] {
    std::array::from_fn(|i| [i & 1 != 0, i & 2 != 0, i & 4 != 0])
}

/// Lift choosing, among the admissible branches, the one closest to `prev`
/// (continuity policy along trajectories).
pub fn lc_lift_continuous(x: &Config3, prev: &Config3) -> Result<Config3> {
    all_branches()
        .iter()
        .filter_map(|b| lc_lift(x, *b).ok())
        .min_by(|a, b| (*a - *prev).norm().total_cmp(&(*b - *prev).norm()))
        .ok_or(Error::ZeroConfiguration)
}

/// Homogeneous mutual distances `ρ_ij = |z_ij|²`.
pub fn rho(z: &Config3) -> [f64; 3] {
    [z[0].norm_sqr(), z[1].norm_sqr(), z[2].norm_sqr()]
}

/// Time factor `τ = ρ12ρ31ρ23/‖z‖⁶ ∈ [0, 1/27]`.
pub fn tau(z: &Config3) -> f64 {
    let r = rho(z);
    let s = r[0] + r[1] + r[2];
    r[0] * r[1] * r[2] / (s * s * s)
}

/// The degree-zero functions of `(ρ12, ρ31, ρ23)` entering every regularized
/// Hamiltonian, with their partial derivatives with respect to each `ρ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RhoFunctions {
    /// `S = Σρ`.
    pub s: f64,
    /// `N = (1/m)Σ m_im_j ρ_ij²`, the squared mass norm of `X(z)`.
    pub n: f64,
    /// `τ = Πρ/S³`.
    pub tau: f64,
    /// `W = √N Σ m_im_j Π_{kl≠ij} ρ_kl / S³`.
    pub w: f64,
    /// `τ/λ = mN²/(4 m1m2m3 S⁴)`.
    pub tau_over_lambda: f64,
    /// `N/S³`.
    pub n_over_s3: f64,
    pub d_tau: [f64; 3],
    pub d_w: [f64; 3],
    pub d_tau_over_lambda: [f64; 3],
    pub d_n_over_s3: [f64; 3],
}

impl RhoFunctions {
    pub fn new(rho: [f64; 3], masses: &Masses) -> Self {
        let wt = masses.pair_weights();
        let m = masses.total();
        let s = rho[0] + rho[1] + rho[2];
        let (s3, s4) = (s * s * s, s * s * s * s);
        let n = (0..3).map(|k| wt[k] * rho[k] * rho[k]).sum::<f64>() / m;
        let d_n: [f64; 3] = std::array::from_fn(|k| 2.0 * wt[k] * rho[k] / m);
        let other = |k: usize| [(k + 1) % 3, (k + 2) % 3];
        let d_prod: [f64; 3] = std::array::from_fn(|k| {
            let [a, b] = other(k);
            rho[a] * rho[b]
        });
        let prod = rho[0] * rho[1] * rho[2];
        let tau = prod / s3;
        let d_tau = std::array::from_fn(|k| d_prod[k] / s3 - 3.0 * tau / s);
        let e = (0..3).map(|k| wt[k] * d_prod[k]).sum::<f64>();
        let d_e: [f64; 3] = std::array::from_fn(|k| {
            let [a, b] = other(k);
            wt[a] * rho[b] + wt[b] * rho[a]
        });
        let sn = n.sqrt();
        let w = sn * e / s3;
        let d_w = std::array::from_fn(|k| {
            let from_n = if n > 0.0 { d_n[k] * w / (2.0 * n) } else { 0.0 };
            from_n + sn * d_e[k] / s3 - 3.0 * w / s
        });
        let tol = m * n * n / (4.0 * masses.product() * s4);
        let d_tol = std::array::from_fn(|k| m * 2.0 * n * d_n[k] / (4.0 * masses.product() * s4) - 4.0 * tol / s);
        let f = n / s3;
        let d_f = std::array::from_fn(|k| d_n[k] / s3 - 3.0 * f / s);
        Self {
            s,
            n,
            tau,
            w,
            tau_over_lambda: tol,
            n_over_s3: f,
            d_tau,
            d_w,
            d_tau_over_lambda: d_tol,
            d_n_over_s3: d_f,
        }
    }

    /// Conformal factor `λ = τ/(τ/λ)`.
    pub fn lambda(&self) -> f64 {
        self.tau / self.tau_over_lambda
    }
}

/// Regularized shape potential `W(z) = τ(z)·V(X(z))`, finite at binary
/// collisions.
pub fn reg_potential(z: &Config3, masses: &Masses) -> f64 {
    RhoFunctions::new(rho(z), masses).w
}

/// Conformal factor `λ(z)` relating the pulled-back and the cone
/// Fubini–Study metrics.
pub fn lambda_conformal(z: &Config3, masses: &Masses) -> f64 {
    let r = rho(z);
    let wt = masses.pair_weights();
    let q: f64 = (0..3).map(|k| wt[k] * r[k] * r[k]).sum();
    4.0 * masses.total() * masses.product() * (r[0] + r[1] + r[2]) * r[0] * r[1] * r[2] / (q * q)
}

/// Quadratic parametrization `z = (2i x1x2, x1² + x2², i(x1² − x2²))` of the
/// cone (2-to-1, even).
pub fn quad_param(x: [C64; 2]) -> Config3 {
    let i = C64::new(0.0, 1.0);
    let (a, b) = (x[0] * x[0], x[1] * x[1]);
    Triple::new(i * 2.0 * x[0] * x[1], a + b, i * (a - b))
}

/// Holomorphic Jacobian `∂z_k/∂x_j` of [`quad_param`] (rows `k`, columns `j`).
pub fn quad_jacobian(x: [C64; 2]) -> [[C64; 2]; 3] {
    let i = C64::new(0.0, 1.0);
    [[i * 2.0 * x[1], i * 2.0 * x[0]], [x[0] * 2.0, x[1] * 2.0], [i * 2.0 * x[0], -i * 2.0 * x[1]]]
}

/// A preimage of a cone point under [`quad_param`] (the other one is `−x`).
pub fn quad_inverse(z: &Config3) -> Result<[C64; 2]> {
    let i = C64::new(0.0, 1.0);
    let x1 = ((z[1] - i * z[2]) * 0.5).sqrt();
    let x2sq = (z[1] + i * z[2]) * 0.5;
    let x = if x1.norm() > 0.0 { [x1, z[0] / (i * 2.0 * x1)] } else { [C64::default(), x2sq.sqrt()] };
    let back = quad_param(x);
    let scale = z.norm().max(f64::MIN_POSITIVE);
    if (back - *z).norm() > 1e-8 * scale {
        return Err(Error::Constraint { name: "cone", residual: cone_residual(z) });
    }
    Ok(x)
}

/// Pull a complex gradient on `z`-space back to `x`-space through
/// [`quad_param`]: `G_x = Σ_k G_z,k · conj(∂z_k/∂x_j)`.
pub fn quad_pullback(x: [C64; 2], gz: &Triple) -> [C64; 2] {
    let d = quad_jacobian(x);
    std::array::from_fn(|j| (0..3).map(|k| gz[k] * d[k][j].conj()).sum())
}

/// Momentum pullback `y_j = Σ_k η_k conj(∂z_k/∂x_j)`.
pub fn quad_momentum(x: [C64; 2], eta: &CoConfig3) -> [C64; 2] {
    quad_pullback(x, eta)
}

/// Minimum-norm cone momentum `η` with [`quad_momentum`]`(x, η) = y`.
pub fn quad_momentum_lift(x: [C64; 2], y: [C64; 2]) -> CoConfig3 {
    let d = quad_jacobian(x);
    // M[j][k] = conj(d[k][j]); η = Mᴴ (M Mᴴ)⁻¹ y.
    let mut mmh = Matrix2::<C64>::zeros();
    for a in 0..2 {
        for b in 0..2 {
            mmh[(a, b)] = (0..3).map(|k| d[k][a].conj() * d[k][b]).sum();
        }
    }
    let sol = mmh.lu().solve(&nalgebra::Vector2::new(y[0], y[1])).unwrap_or_else(nalgebra::Vector2::zeros);
    Triple(std::array::from_fn(|k| d[k][0] * sol[0] + d[k][1] * sol[1]))
}

/// Real and imaginary parts of `z`.
pub fn re_im(z: &Config3) -> (Vector3<f64>, Vector3<f64>) {
    (Vector3::from(z.re()), Vector3::from(z.im()))
}

/// `SO(3)` frame `A(z)` with columns `a/s, b/s, c/s²`, `s² = ‖z‖²/2`.
pub fn so3_frame(z: &Config3) -> Result<Matrix3<f64>> {
    let res = cone_residual(z);
    if res > MEMBERSHIP_TOL {
        return Err(Error::Constraint { name: "cone", residual: res });
    }
    let (a, b) = re_im(z);
    let s2 = z.norm_sq() / 2.0;
    if s2 == 0.0 {
        return Err(Error::ZeroConfiguration);
    }
    let s = s2.sqrt();
    let c = a.cross(&b);
    Ok(Matrix3::from_columns(&[a / s, b / s, c / s2]))
}

/// `c = Re z × Im z`; invariant under rotations `z ↦ e^{iθ}z`.
pub fn c_map(z: &Config3) -> Vector3<f64> {
    let (a, b) = re_im(z);
    a.cross(&b)
}

/// Homogeneous distances of the `c`-sphere, `ρ12 = c31² + c23²` etc.; these
/// are `|c|·|z_ij|²` for any cone point mapping to `c`.
pub fn rho_of_c(c: &Vector3<f64>) -> [f64; 3] {
    let sq = c.map(|v| v * v);
    [sq[1] + sq[2], sq[0] + sq[2], sq[0] + sq[1]]
}

/// Local inverse `h_ij` of the projective map `z ↦ c`, defined where the
/// `ij` component of the preimage is nonzero.
pub fn local_inverse(c: &Vector3<f64>, which: usize) -> Result<Config3> {
    let n = c.norm();
    if n == 0.0 {
        return Err(Error::ZeroConfiguration);
    }
    let (k, a, b) = match which {
        0 => (0, 1, 2),
        1 => (1, 2, 0),
        2 => (2, 0, 1),
        _ => return Err(Error::InvalidState(format!("no local inverse {which}"))),
    };
    let lead = c[a] * c[a] + c[b] * c[b];
    if lead <= 1e-12 * n * n {
        return Err(Error::OutOfChart { chart: "c local inverse" });
    }
    let mut z = [C64::default(); 3];
    z[k] = C64::new(lead, 0.0);
    z[a] = C64::new(-c[k] * c[a], n * c[b]);
    z[b] = C64::new(-c[k] * c[b], -n * c[a]);
    Ok(Triple(z))
}

/// The best-conditioned local inverse.
pub fn c_inverse(c: &Vector3<f64>) -> Result<Config3> {
    let r = rho_of_c(c);
    let k = (0..3).max_by(|&i, &j| r[i].total_cmp(&r[j])).unwrap_or(0);
    local_inverse(c, k)
}

/// Cone momentum to the `c`-sphere covector
/// `γ = −(u·c)a/|c|² − (v·c)b/|c|²`, `η = u + iv`.
pub fn gamma_of_eta(z: &Config3, eta: &CoConfig3) -> Vector3<f64> {
    let (a, b) = re_im(z);
    let c = a.cross(&b);
    let (u, v) = re_im(eta);
    let c2 = c.norm_squared();
    -(a * u.dot(&c) + b * v.dot(&c)) / c2
}

/// Lift a `c`-sphere state `(c, γ)` to a cone state `(z, η)` with
/// `c_map(z) = c`, `u = b × γ`, `v = −a × γ`.
pub fn cone_of_c(c: &Vector3<f64>, gamma: &Vector3<f64>) -> Result<(Config3, CoConfig3)> {
    let z0 = c_inverse(c)?;
    // c_map(z0) = s·c with s > 0; rescale so that c_map(z) = c exactly.
    let s = c_map(&z0).dot(c) / c.norm_squared();
    let z = z0 * C64::new(1.0 / s.sqrt(), 0.0);
    let (a, b) = re_im(&z);
    let u = b.cross(gamma);
    let v = -a.cross(gamma);
    Ok((z, Triple::from_re_im(u.into(), v.into())))
}

/// Cone state to homogeneous coordinates `X = z²`, `Y = η/(2z̄)`; requires
/// all `z_ij ≠ 0`.
pub fn cone_to_homogeneous(z: &Config3, eta: &CoConfig3) -> Result<(Config3, CoConfig3)> {
    let scale = z.norm();
    for (k, label) in crate::algebra::PAIR_LABELS.iter().enumerate() {
        if z[k].norm() <= 1e-12 * scale {
            return Err(Error::Collision { pair: label, distance: z[k].norm_sqr() });
        }
    }
    Ok((lc_project(z), eta.zip(z, |e, zk| e / (zk.conj() * 2.0))))
}

/// Homogeneous state to the cone with a chosen branch; `η = 2 z̄ Y`.
pub fn homogeneous_to_cone(x: &Config3, y: &CoConfig3, branch: [bool; 3]) -> Result<(Config3, CoConfig3)> {
    let z = lc_lift(x, branch)?;
    Ok((z, z.zip(y, |zk, yk| zk.conj() * yk * 2.0)))
}

/// The regularized state on the cone.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeState {
    pub r: f64,
    pub p_r: f64,
    pub z: Config3,
    pub eta: CoConfig3,
    pub mu: f64,
    pub h: f64,
}

impl ConeState {
    pub fn to_reals(&self, t: f64) -> Vec<f64> {
        let mut v = vec![0.0; 15];
        v[0] = self.r;
        self.z.write_reals(&mut v[1..7]);
        v[7] = self.p_r;
        self.eta.write_reals(&mut v[8..14]);
        v[14] = t;
        v
    }
    pub fn from_reals(v: &[f64], mu: f64, h: f64) -> Self {
        Self { r: v[0], z: Triple::from_reals(&v[1..7]), p_r: v[7], eta: Triple::from_reals(&v[8..14]), mu, h }
    }
    /// Complex pairing `⟨η, z⟩`.
    pub fn pairing(&self) -> C64 {
        pairing(&self.eta, &self.z)
    }
}

/// The regularized state in the quadratic parametrization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadState {
    pub r: f64,
    pub p_r: f64,
    pub x: [C64; 2],
    pub y: [C64; 2],
    pub mu: f64,
    pub h: f64,
}

impl QuadState {
    pub fn to_reals(&self, t: f64) -> Vec<f64> {
        vec![
            self.r,
            self.x[0].re,
            self.x[0].im,
            self.x[1].re,
            self.x[1].im,
            self.p_r,
            self.y[0].re,
            self.y[0].im,
            self.y[1].re,
            self.y[1].im,
            t,
        ]
    }
    pub fn from_reals(v: &[f64], mu: f64, h: f64) -> Self {
        Self {
            r: v[0],
            x: [C64::new(v[1], v[2]), C64::new(v[3], v[4])],
            p_r: v[5],
            y: [C64::new(v[6], v[7]), C64::new(v[8], v[9])],
            mu,
            h,
        }
    }
    /// Push forward to the cone (minimum-norm momentum).
    pub fn to_cone(&self) -> ConeState {
        ConeState {
            r: self.r,
            p_r: self.p_r,
            z: quad_param(self.x),
            eta: quad_momentum_lift(self.x, self.y),
            mu: self.mu,
            h: self.h,
        }
    }
    /// Pull a cone state back to the quadratic chart.
    pub fn from_cone(s: &ConeState) -> Result<Self> {
        let x = quad_inverse(&s.z)?;
        Ok(Self { r: s.r, p_r: s.p_r, x, y: quad_momentum(x, &s.eta), mu: s.mu, h: s.h })
    }
}

/// Regularized affine state: `x = (1, z)`, `y = (−z̄ζ, ζ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegAffineState {
    pub r: f64,
    pub p_r: f64,
    pub z: C64,
    pub zeta: C64,
    pub mu: f64,
    pub h: f64,
}

impl RegAffineState {
    pub fn to_reals(&self, t: f64) -> Vec<f64> {
        vec![self.r, self.z.re, self.z.im, self.p_r, self.zeta.re, self.zeta.im, t]
    }
    pub fn from_reals(v: &[f64], mu: f64, h: f64) -> Self {
        Self { r: v[0], z: C64::new(v[1], v[2]), p_r: v[3], zeta: C64::new(v[4], v[5]), mu, h }
    }
    pub fn to_quad(&self) -> QuadState {
        let one = C64::new(1.0, 0.0);
        QuadState {
            r: self.r,
            p_r: self.p_r,
            x: [one, self.z],
            y: [-(self.z.conj() * self.zeta), self.zeta],
            mu: self.mu,
            h: self.h,
        }
    }
    /// Affine representative of a quadratic state (requires `x1 ≠ 0`).
    pub fn from_quad(s: &QuadState) -> Result<Self> {
        let size = (s.x[0].norm_sqr() + s.x[1].norm_sqr()).sqrt();
        if s.x[0].norm() <= 1e-12 * size {
            return Err(Error::OutOfChart { chart: "reg_affine" });
        }
        Ok(Self { r: s.r, p_r: s.p_r, z: s.x[1] / s.x[0], zeta: s.y[1] * s.x[0].conj(), mu: s.mu, h: s.h })
    }
}

/// Regularized round state on the `c`-sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegRoundState {
    pub r: f64,
    pub p_r: f64,
    pub c: [f64; 3],
    pub gamma: [f64; 3],
    pub mu: f64,
    pub h: f64,
}

impl RegRoundState {
    pub fn to_reals(&self, t: f64) -> Vec<f64> {
        let [c1, c2, c3] = self.c;
        let [g1, g2, g3] = self.gamma;
        vec![self.r, c1, c2, c3, self.p_r, g1, g2, g3, t]
    }
    pub fn from_reals(v: &[f64], mu: f64, h: f64) -> Self {
        Self { r: v[0], c: [v[1], v[2], v[3]], p_r: v[4], gamma: [v[5], v[6], v[7]], mu, h }
    }
    pub fn from_cone(s: &ConeState) -> Self {
        Self { r: s.r, p_r: s.p_r, c: c_map(&s.z).into(), gamma: gamma_of_eta(&s.z, &s.eta).into(), mu: s.mu, h: s.h }
    }
    pub fn to_cone(&self) -> Result<ConeState> {
        let (z, eta) = cone_of_c(&Vector3::from(self.c), &Vector3::from(self.gamma))?;
        Ok(ConeState { r: self.r, p_r: self.p_r, z, eta, mu: self.mu, h: self.h })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{fs_metric, project_to_w, Masses};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rc(rng: &mut ChaCha8Rng) -> C64 {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    }

    fn random_cone(rng: &mut ChaCha8Rng) -> Config3 {
        quad_param([rc(rng), rc(rng)])
    }

    #[test]
    fn lc_project_examples() {
        let i = C64::new(0.0, 1.0);
        let z = Triple::new(C64::default(), C64::new(1.0, 0.0), i);
        let x = lc_project(&z);
        assert_eq!(x, Triple::real(0.0, 1.0, -1.0));
        assert_eq!(x.sum(), C64::default());
        let k = C64::new(0.3, -1.2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = random_cone(&mut rng);
        assert!((lc_project(&(z * k)) - lc_project(&z) * (k * k)).norm() < 1e-14);
    }

    #[test]
    fn lc_lift_examples() {
        let x = Triple::real(0.0, 1.0, -1.0);
        let lifts: Vec<_> = all_branches().iter().filter_map(|b| lc_lift(&x, *b).ok()).collect();
        let mut distinct: Vec<Config3> = Vec::new();
        for z in lifts {
            if !distinct.iter().any(|d| (*d - z).norm() < 1e-14) {
                distinct.push(z);
            }
        }
        assert_eq!(distinct.len(), 4);
        let i = C64::new(0.0, 1.0);
        let one = C64::new(1.0, 0.0);
        assert!(distinct.iter().any(|z| (*z - Triple::new(C64::default(), one, i)).norm() < 1e-15));
        assert!(distinct.iter().any(|z| (*z - Triple::new(C64::default(), one, -i)).norm() < 1e-15));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let x = project_to_w(&Triple([rc(&mut rng), rc(&mut rng), rc(&mut rng)]));
            let z = lc_lift(&x, [false, true, false]).unwrap();
            assert!((lc_project(&z) - x).norm() < 1e-13);
        }
        assert!(matches!(lc_lift(&Triple::real(1.0, 1.0, 1.0), [false; 3]), Err(Error::InvalidBranch(_))));
    }

    #[test]
    fn tau_examples() {
        let eq = Triple::real(1.0, 1.0, 1.0);
        assert_relative_eq!(tau(&eq), 1.0 / 27.0, epsilon = 1e-16);
        let i = C64::new(0.0, 1.0);
        assert_eq!(tau(&Triple::new(C64::default(), C64::new(1.0, 0.0), i)), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let z = random_cone(&mut rng);
            let t = tau(&z);
            assert!((0.0..=1.0 / 27.0).contains(&t));
            assert_relative_eq!(tau(&(z * C64::new(2.0, -0.7))), t, max_relative = 1e-13);
        }
    }

    #[test]
    fn reg_potential_identity() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let z = random_cone(&mut rng);
            let v = crate::spherical::shape_potential(&lc_project(&z), &m).unwrap();
            assert_relative_eq!(reg_potential(&z, &m), tau(&z) * v, max_relative = 1e-12);
            assert_relative_eq!(
                reg_potential(&(z * C64::new(-0.4, 1.3)), &m),
                reg_potential(&z, &m),
                max_relative = 1e-13
            );
        }
        // Binary collision 12 with ρ = (0, 1, 1): W = sqrt(2/3)/8.
        let i = C64::new(0.0, 1.0);
        let z = Triple::new(C64::default(), C64::new(1.0, 0.0), i);
        assert_relative_eq!(reg_potential(&z, &Masses::equal()), (2.0f64 / 3.0).sqrt() / 8.0, epsilon = 1e-15);
    }

    #[test]
    fn rho_function_partials() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let base = [0.3, 1.1, 0.6];
        let f = RhoFunctions::new(base, &m);
        for k in 0..3 {
            let h = 1e-6;
            let mut p = base;
            let mut q = base;
            p[k] += h;
            q[k] -= h;
            let (fp, fq) = (RhoFunctions::new(p, &m), RhoFunctions::new(q, &m));
            let fd = |a: f64, b: f64| (a - b) / (2.0 * h);
            assert_relative_eq!(f.d_tau[k], fd(fp.tau, fq.tau), max_relative = 1e-7);
            assert_relative_eq!(f.d_w[k], fd(fp.w, fq.w), max_relative = 1e-7);
            assert_relative_eq!(
                f.d_tau_over_lambda[k],
                fd(fp.tau_over_lambda, fq.tau_over_lambda),
                max_relative = 1e-7
            );
            assert_relative_eq!(f.d_n_over_s3[k], fd(fp.n_over_s3, fq.n_over_s3), max_relative = 1e-7);
        }
    }

    #[test]
    fn quad_param_examples() {
        let z = quad_param([C64::new(1.0, 0.0), C64::default()]);
        let i = C64::new(0.0, 1.0);
        assert_eq!(z, Triple::new(C64::default(), C64::new(1.0, 0.0), i));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let x = [rc(&mut rng), rc(&mut rng)];
            let z = quad_param(x);
            assert!(cone_residual(&z) < 1e-15);
            assert_eq!(quad_param([-x[0], -x[1]]), z);
            let nx = x[0].norm_sqr() + x[1].norm_sqr();
            assert_relative_eq!(z.norm_sq(), 2.0 * nx * nx, max_relative = 1e-13);
            let back = quad_inverse(&z).unwrap();
            assert!((quad_param(back) - z).norm() < 1e-13);
        }
    }

    #[test]
    fn lambda_identities() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let x = [rc(&mut rng), rc(&mut rng)];
            let z = quad_param(x);
            let f = RhoFunctions::new(rho(&z), &m);
            assert_relative_eq!(f.lambda(), lambda_conformal(&z, &m), max_relative = 1e-12);
            let nx = x[0].norm_sqr() + x[1].norm_sqr();
            let xn = lc_project(&z);
            let expected =
                m.total() * crate::algebra::mass_norm_sq(&xn, &m).powi(2) / (64.0 * m.product() * nx.powi(8));
            assert_relative_eq!(f.tau_over_lambda, expected, max_relative = 1e-12);
            // Pullback of the Fubini–Study metric: f*FS_W = λ FS_C.
            let v = Triple([rc(&mut rng), rc(&mut rng), rc(&mut rng)]);
            // Tangent to the cone: remove the normal component along z̄.
            let n = z.conj();
            let v = v - n * (n.dot(&v.conj()).conj() / n.norm_sq());
            let dx = z.zip(&v, |a, b| a * b * 2.0);
            let fs_w = fs_metric(&xn, &dx, &m);
            let t = z.cross(&z.conj());
            let sig = t.conj().dot(&v).norm_sqr() / z.norm_sq();
            let fs_c = sig / z.norm_sq().powi(2);
            assert_relative_eq!(fs_w, f.lambda() * fs_c, max_relative = 1e-10);
        }
    }

    #[test]
    fn so3_examples() {
        let i = C64::new(0.0, 1.0);
        let z = Triple::new(C64::default(), C64::new(1.0, 0.0), i);
        let a = so3_frame(&z).unwrap();
        assert_eq!(a, Matrix3::new(0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0));
        assert_relative_eq!(a.determinant(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let z = random_cone(&mut rng);
            let a = so3_frame(&z).unwrap();
            assert!((a.transpose() * a - Matrix3::identity()).norm() < 1e-12);
            assert!((a.determinant() - 1.0).abs() < 1e-12);
        }
        assert!(so3_frame(&Triple::real(1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn c_sphere_examples() {
        let i = C64::new(0.0, 1.0);
        let z = Triple::new(C64::default(), C64::new(1.0, 0.0), i);
        let c = c_map(&z);
        assert_eq!(c, Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(rho_of_c(&c), [0.0, 1.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let z = random_cone(&mut rng);
            let c = c_map(&z);
            let r = rho(&z);
            let rc = rho_of_c(&c);
            for k in 0..3 {
                assert!((rc[k] / c.norm() - r[k]).abs() < 1e-12 * z.norm_sq());
            }
            let rot = C64::from_polar(1.0, 1.1);
            assert!((c_map(&(z * rot)) - c).norm() < 1e-13 * c.norm());
            for which in 0..3 {
                let w = local_inverse(&c, which).unwrap();
                // Same projective point: w ∥ z.
                let k = w[which] / z[which];
                assert!((w - z * k).norm() < 1e-10 * w.norm());
            }
        }
        assert!(local_inverse(&Vector3::new(1.0, 0.0, 0.0), 0).is_err());
    }

    #[test]
    fn c_momentum_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let c = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let g0 = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let g = g0 - c * (g0.dot(&c) / c.norm_squared());
            let (z, eta) = cone_of_c(&c, &g).unwrap();
            assert!((c_map(&z) - c).norm() < 1e-12);
            assert!(pairing(&eta, &z).norm() < 1e-12);
            assert!((gamma_of_eta(&z, &eta) - g).norm() < 1e-12);
        }
    }

    #[test]
    fn quad_momentum_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let x = [rc(&mut rng), rc(&mut rng)];
            let y = [rc(&mut rng), rc(&mut rng)];
            let eta = quad_momentum_lift(x, y);
            let back = quad_momentum(x, &eta);
            assert!((back[0] - y[0]).norm() < 1e-12 && (back[1] - y[1]).norm() < 1e-12);
        }
    }
}
