//! Complex triple arithmetic, mass metrics, pairings and the Fubini–Study
//! building blocks shared by every chart.
//!
//! Relative configurations and their momenta are triples of complex numbers
//! indexed by the body pairs in the fixed order `(12, 31, 23)`.  Gradients of
//! real functions of complex variables follow one convention throughout the
//! crate: the gradient of `f` with respect to `w = u + i v` is
//! `∂f/∂u + i ∂f/∂v`, so that `df = Re Σ conj(G_k) dw_k`.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type C64 = Complex64;

/// `i`, the imaginary unit.
pub const I: C64 = C64::new(0.0, 1.0);

/// Absolute tolerance for constraint membership tests on unit-normalized inputs.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

/// Labels of the three body pairs in storage order.
pub const PAIR_LABELS: [&str; 3] = ["12", "31", "23"];

/// The three positive masses together with their cached sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct Masses {
    m1: f64,
    m2: f64,
    m3: f64,
    m: f64,
}

impl Masses {
    pub fn new(m1: f64, m2: f64, m3: f64) -> Result<Self> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !(ok(m1) && ok(m2) && ok(m3)) {
            return Err(Error::InvalidMasses(m1, m2, m3));
        }
        Ok(Self { m1, m2, m3, m: m1 + m2 + m3 })
    }

    /// Three unit masses.
    pub fn equal() -> Self {
        Self { m1: 1.0, m2: 1.0, m3: 1.0, m: 3.0 }
    }

    pub fn m1(&self) -> f64 {
        self.m1
    }
    pub fn m2(&self) -> f64 {
        self.m2
    }
    pub fn m3(&self) -> f64 {
        self.m3
    }
    /// Total mass `m = m1 + m2 + m3`.
    pub fn total(&self) -> f64 {
        self.m
    }
    pub fn as_array(&self) -> [f64; 3] {
        [self.m1, self.m2, self.m3]
    }
    /// `m1 m2 m3`.
    pub fn product(&self) -> f64 {
        self.m1 * self.m2 * self.m3
    }
    /// Pair products `(m1 m2, m3 m1, m2 m3)` in storage order.
    pub fn pair_weights(&self) -> [f64; 3] {
        [self.m1 * self.m2, self.m3 * self.m1, self.m2 * self.m3]
    }
    /// Normal vector `N = (m3, m2, m1)` spanning the mass-orthogonal
    /// complement of the translation-reduced subspace.
    pub fn normal(&self) -> Triple {
        Triple::real(self.m3, self.m2, self.m1)
    }

    /// The real symmetric matrix `B` with `K(P) = ½ Pᴴ B P`.
    pub fn b_matrix(&self) -> Matrix3<f64> {
        let (a, b, c) = (1.0 / self.m1, 1.0 / self.m2, 1.0 / self.m3);
        Matrix3::new(a + b, -a, -b, -a, c + a, -c, -b, -c, b + c)
    }
}

impl TryFrom<[f64; 3]> for Masses {
    type Error = Error;
    fn try_from(v: [f64; 3]) -> Result<Self> {
        Masses::new(v[0], v[1], v[2])
    }
}

impl From<Masses> for [f64; 3] {
    fn from(m: Masses) -> Self {
        m.as_array()
    }
}

/// A triple of complex numbers in pair order `(12, 31, 23)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Triple(pub [C64; 3]);

/// Role alias: relative or homogeneous configuration (`Q`, `X`, `z`).
pub type Config3 = Triple;
/// Role alias: momentum covector (`P`, `Y`, `Z`, `η`).
pub type CoConfig3 = Triple;

impl Triple {
    pub const ZERO: Triple = Triple([C64::new(0.0, 0.0); 3]);

    pub const fn new(v12: C64, v31: C64, v23: C64) -> Self {
        Triple([v12, v31, v23])
    }
    pub const fn real(v12: f64, v31: f64, v23: f64) -> Self {
        Triple([C64::new(v12, 0.0), C64::new(v31, 0.0), C64::new(v23, 0.0)])
    }
    pub fn v12(&self) -> C64 {
        self.0[0]
    }
    pub fn v31(&self) -> C64 {
        self.0[1]
    }
    pub fn v23(&self) -> C64 {
        self.0[2]
    }
    pub fn sum(&self) -> C64 {
        self.0[0] + self.0[1] + self.0[2]
    }
    pub fn conj(&self) -> Triple {
        self.map(|z| z.conj())
    }
    pub fn map(&self, f: impl Fn(C64) -> C64) -> Triple {
        Triple([f(self.0[0]), f(self.0[1]), f(self.0[2])])
    }
    pub fn zip(&self, o: &Triple, f: impl Fn(C64, C64) -> C64) -> Triple {
        Triple([f(self.0[0], o.0[0]), f(self.0[1], o.0[1]), f(self.0[2], o.0[2])])
    }
    pub fn scale(&self, k: C64) -> Triple {
        self.map(|z| z * k)
    }
    /// Squared Euclidean (standard Hermitian) norm `Σ |v_k|²`.
    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }
    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
    /// Complex bilinear dot product `Σ a_k b_k`.
    pub fn dot(&self, o: &Triple) -> C64 {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }
    /// Complex bilinear cross product, components taken in storage order.
    pub fn cross(&self, o: &Triple) -> Triple {
        let (a, b) = (&self.0, &o.0);
        Triple([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])
    }
    /// Real parts as a vector of `ℝ³`.
    pub fn re(&self) -> [f64; 3] {
        [self.0[0].re, self.0[1].re, self.0[2].re]
    }
    /// Imaginary parts as a vector of `ℝ³`.
    pub fn im(&self) -> [f64; 3] {
        [self.0[0].im, self.0[1].im, self.0[2].im]
    }
    pub fn from_re_im(a: [f64; 3], b: [f64; 3]) -> Triple {
        Triple([C64::new(a[0], b[0]), C64::new(a[1], b[1]), C64::new(a[2], b[2])])
    }
    /// Write as six reals `(re12, im12, re31, im31, re23, im23)`.
    pub fn write_reals(&self, out: &mut [f64]) {
        for k in 0..3 {
            out[2 * k] = self.0[k].re;
            out[2 * k + 1] = self.0[k].im;
        }
    }
    /// Inverse of [`Triple::write_reals`].
    /// Build from the first three entries of a complex slice.
    pub fn from_slice(v: &[C64]) -> Triple {
        Triple([v[0], v[1], v[2]])
    }
    pub fn from_reals(v: &[f64]) -> Triple {
        Triple([C64::new(v[0], v[1]), C64::new(v[2], v[3]), C64::new(v[4], v[5])])
    }
    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Index<usize> for Triple {
    type Output = C64;
    fn index(&self, k: usize) -> &C64 {
        &self.0[k]
    }
}
impl IndexMut<usize> for Triple {
    fn index_mut(&mut self, k: usize) -> &mut C64 {
        &mut self.0[k]
    }
}
impl Add for Triple {
    type Output = Triple;
    fn add(self, o: Triple) -> Triple {
        self.zip(&o, |a, b| a + b)
    }
}
impl Sub for Triple {
    type Output = Triple;
    fn sub(self, o: Triple) -> Triple {
        self.zip(&o, |a, b| a - b)
    }
}
impl AddAssign for Triple {
    fn add_assign(&mut self, o: Triple) {
        *self = *self + o;
    }
}
impl SubAssign for Triple {
    fn sub_assign(&mut self, o: Triple) {
        *self = *self - o;
    }
}
impl Neg for Triple {
    type Output = Triple;
    fn neg(self) -> Triple {
        self.map(|z| -z)
    }
}
impl Mul<f64> for Triple {
    type Output = Triple;
    fn mul(self, k: f64) -> Triple {
        self.map(|z| z * k)
    }
}
impl Mul<C64> for Triple {
    type Output = Triple;
    fn mul(self, k: C64) -> Triple {
        self.scale(k)
    }
}

/// Evaluation pairing `⟨P,Q⟩ = Σ conj(P_ij) Q_ij`.
///
/// The real part is the real evaluation pairing; for physical momenta and
/// positions the imaginary part is minus the angular momentum.
pub fn pairing(p: &CoConfig3, q: &Config3) -> C64 {
    p.0.iter().zip(q.0.iter()).map(|(a, b)| a.conj() * b).sum()
}

/// Mass-metric Hermitian inner product `(1/m) Σ m_i m_j conj(Q_ij) V_ij`.
pub fn mass_inner(q: &Config3, v: &Config3, masses: &Masses) -> C64 {
    let w = masses.pair_weights();
    (0..3).map(|k| q.0[k].conj() * v.0[k] * w[k]).sum::<C64>() / masses.total()
}

/// Squared mass norm `|Q|² = (1/m)(m1m2|Q12|² + m3m1|Q31|² + m2m3|Q23|²)`.
pub fn mass_norm_sq(q: &Config3, masses: &Masses) -> f64 {
    let w = masses.pair_weights();
    (0..3).map(|k| w[k] * q.0[k].norm_sqr()).sum::<f64>() / masses.total()
}

/// Mass norm `|Q|`.
pub fn mass_norm(q: &Config3, masses: &Masses) -> f64 {
    mass_norm_sq(q, masses).sqrt()
}

/// Dual (inverse) mass metric `|P|² = m Σ |P_ij|²/(m_i m_j)`.
pub fn dual_mass_norm_sq(p: &CoConfig3, masses: &Masses) -> f64 {
    let w = masses.pair_weights();
    masses.total() * (0..3).map(|k| p.0[k].norm_sqr() / w[k]).sum::<f64>()
}

/// Mass-dual covector `Q* = (1/m)(m1m2 Q12, m1m3 Q31, m2m3 Q23)`, so that
/// `⟨Q*, V⟩` equals the mass inner product of `Q` and `V`.  It is also half
/// the gradient of `|Q|²`.
pub fn dual_vector(q: &Config3, masses: &Masses) -> CoConfig3 {
    let w = masses.pair_weights();
    let m = masses.total();
    Triple([q.0[0] * (w[0] / m), q.0[1] * (w[1] / m), q.0[2] * (w[2] / m)])
}

/// Inverse of [`dual_vector`].
pub fn from_dual(p: &CoConfig3, masses: &Masses) -> Config3 {
    let w = masses.pair_weights();
    let m = masses.total();
    Triple([p.0[0] * (m / w[0]), p.0[1] * (m / w[1]), p.0[2] * (m / w[2])])
}

/// Kinetic energy of relative momenta,
/// `K(P) = |P12−P31|²/(2m1) + |P23−P12|²/(2m2) + |P31−P23|²/(2m3)`.
pub fn kinetic(p: &CoConfig3, masses: &Masses) -> f64 {
    let [a, b, c] = p.0;
    (a - b).norm_sqr() / (2.0 * masses.m1())
        + (c - a).norm_sqr() / (2.0 * masses.m2())
        + (b - c).norm_sqr() / (2.0 * masses.m3())
}

/// Gradient of [`kinetic`], i.e. `B·P`.
pub fn kinetic_gradient(p: &CoConfig3, masses: &Masses) -> Config3 {
    let [a, b, c] = p.0;
    let (i1, i2, i3) = (1.0 / masses.m1(), 1.0 / masses.m2(), 1.0 / masses.m3());
    Triple([(a - b) * i1 - (c - a) * i2, (b - c) * i3 - (a - b) * i1, (c - a) * i2 - (b - c) * i3])
}

/// Whether `Q` lies in the translation-reduced subspace `Q12 + Q31 + Q23 = 0`,
/// measured relative to the size of `Q`.
pub fn in_w(q: &Config3, tol: f64) -> bool {
    w_residual(q) <= tol
}

/// Relative residual `|Q_tot| / max(1, ‖Q‖)` of the translation constraint.
pub fn w_residual(q: &Config3) -> f64 {
    q.sum().norm() / q.norm().max(1.0)
}

fn require_w(q: &Config3) -> Result<()> {
    if q.norm() == 0.0 {
        return Err(Error::ZeroConfiguration);
    }
    let residual = q.sum().norm() / q.norm();
    if residual > MEMBERSHIP_TOL {
        return Err(Error::NotTranslationReduced { residual });
    }
    Ok(())
}

/// Orthogonal projection (Euclidean) onto the translation-reduced subspace.
pub fn project_to_w(q: &Config3) -> Config3 {
    let mean = q.sum() / 3.0;
    q.map(|z| z - mean)
}

/// Canonical representative of a momentum translation class: the unique
/// `P + (c,c,c)` satisfying `m3 P12 + m2 P31 + m1 P23 = 0`.
pub fn normalize_momentum(p: &CoConfig3, masses: &Masses) -> CoConfig3 {
    let n = masses.normal();
    let c = -(n.0[0] * p.0[0] + n.0[1] * p.0[1] + n.0[2] * p.0[2]) / masses.total();
    p.map(|z| z + c)
}

/// The vector field `T(Q)` which, together with `Q` and `N`, forms a
/// Hermitian-orthogonal basis for the mass metric.
pub fn tangent_field(q: &Config3, masses: &Masses) -> Config3 {
    let [q12, q31, q23] = q.0.map(|z| z.conj());
    let (m1, m2, m3) = (masses.m1(), masses.m2(), masses.m3());
    Triple([q31 / m2 - q23 / m1, q23 / m1 - q12 / m3, q12 / m3 - q31 / m2])
}

/// The frame `(Q, N, T)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub radial: Config3,
    pub normal: Config3,
    pub tangent: Config3,
}

impl Frame {
    /// Largest pairwise mass-metric inner product, relative to the product of norms.
    pub fn orthogonality_residual(&self, masses: &Masses) -> f64 {
        let v = [self.radial, self.normal, self.tangent];
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in (i + 1)..3 {
                let ip = mass_inner(&v[i], &v[j], masses).norm();
                let scale = mass_norm(&v[i], masses) * mass_norm(&v[j], masses);
                worst = worst.max(ip / scale);
            }
        }
        worst
    }
}

/// Build the Hermitian-orthogonal frame `(Q, N, T)` at `Q ∈ 𝒲₀`.
pub fn qnt_frame(q: &Config3, masses: &Masses) -> Result<Frame> {
    require_w(q)?;
    Ok(Frame { radial: *q, normal: masses.normal(), tangent: tangent_field(q, masses) })
}

/// The Fubini–Study unit field `e(X) = sqrt(m1 m2 m3 / m) T(X)`.
pub fn fs_unit(x: &Config3, masses: &Masses) -> Result<Config3> {
    require_w(x)?;
    Ok(tangent_field(x, masses) * (masses.product() / masses.total()).sqrt())
}

/// Fubini–Study cometric `‖Z‖²_FS = |⟨Z, e(X)⟩|²`.
pub fn fs_cometric(x: &Config3, z: &CoConfig3, masses: &Masses) -> Result<f64> {
    Ok(pairing(z, &fs_unit(x, masses)?).norm_sqr())
}

/// Fubini–Study metric of a tangent vector `V` at `X` induced by the mass metric.
pub fn fs_metric(x: &Config3, v: &Config3, masses: &Masses) -> f64 {
    let xx = mass_norm_sq(x, masses);
    (xx * mass_norm_sq(v, masses) - mass_inner(x, v, masses).norm_sqr()) / (xx * xx)
}

/// Shape one-form `α(Z)` in its mass-symmetric form
/// `(1/m)(m1m2 X12(Z23−Z31) + m3m1 X31(Z12−Z23) + m2m3 X23(Z31−Z12))`.
///
/// On the constraint set `⟨Z,X⟩ = 0` the shape kinetic energy is
/// `m|α|²/(2 m1 m2 m3) = |X|² K(Z)`.
pub fn alpha_form(x: &Config3, z: &CoConfig3, masses: &Masses) -> Result<C64> {
    if x.norm() == 0.0 {
        return Err(Error::ZeroConfiguration);
    }
    let w = masses.pair_weights();
    let [x12, x31, x23] = x.0;
    let [z12, z31, z23] = z.0;
    Ok((x12 * (z23 - z31) * w[0] + x31 * (z12 - z23) * w[1] + x23 * (z31 - z12) * w[2]) / masses.total())
}

/// All four expressions for the shape one-form: the symmetric one followed by
/// `|X|²(Z31−Z12)/conj(X23)`, `|X|²(Z12−Z23)/conj(X31)` and
/// `|X|²(Z23−Z31)/conj(X12)`.  They agree on the constraint set.
pub fn alpha_form_variants(x: &Config3, z: &CoConfig3, masses: &Masses) -> Result<[C64; 4]> {
    let a0 = alpha_form(x, z, masses)?;
    let xx = mass_norm_sq(x, masses);
    let [x12, x31, x23] = x.0;
    let [z12, z31, z23] = z.0;
    Ok([a0, (z31 - z12) * xx / x23.conj(), (z12 - z23) * xx / x31.conj(), (z23 - z31) * xx / x12.conj()])
}

/// All four expressions for the one-form `σ(V)`: `⟨e,V⟩` scaled to be
/// mass-independent, followed by the three elimination forms
/// `X31V12 − X12V31`, `X12V23 − X23V12`, `X23V31 − X31V23`.
pub fn sigma_form_variants(x: &Config3, v: &Config3, masses: &Masses) -> Result<[C64; 4]> {
    let e = fs_unit(x, masses)?;
    let s0 = mass_inner(&e, v, masses) * (masses.total() / masses.product()).sqrt();
    let [x12, x31, x23] = x.0;
    let [v12, v31, v23] = v.0;
    Ok([s0, x31 * v12 - x12 * v31, x12 * v23 - x23 * v12, x23 * v31 - x31 * v23])
}

/// Distances `|Q_ij|` in storage order.
pub fn pair_distances(q: &Config3) -> [f64; 3] {
    [q.0[0].norm(), q.0[1].norm(), q.0[2].norm()]
}

/// Force function `U(Q) = Σ m_i m_j / |Q_ij|`.
pub fn force_function(q: &Config3, masses: &Masses) -> Result<f64> {
    let w = masses.pair_weights();
    let mut u = 0.0;
    for k in 0..3 {
        let d = q.0[k].norm();
        if d == 0.0 {
            return Err(Error::Collision { pair: PAIR_LABELS[k], distance: d });
        }
        u += w[k] / d;
    }
    Ok(u)
}

/// Gradient of [`force_function`]: component `ij` is `−m_i m_j Q_ij / |Q_ij|³`.
pub fn force_function_gradient(q: &Config3, masses: &Masses) -> Config3 {
    let w = masses.pair_weights();
    Triple([0, 1, 2].map(|k| {
        let d = q.0[k].norm();
        -q.0[k] * (w[k] / (d * d * d))
    }))
}
