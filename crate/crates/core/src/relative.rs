//! Translation reduction: relative coordinates `Q_ij = q_i − q_j`, their
//! conjugate momenta, the Hamiltonian `H_rel` and basis parametrizations of
//! the translation-reduced plane `𝒲 = {Q12 + Q31 + Q23 = 0}`.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::algebra::{
    dual_vector, force_function, force_function_gradient, kinetic, kinetic_gradient, mass_inner, mass_norm, pairing,
    w_residual, CoConfig3, Config3, Masses, Triple, C64, MEMBERSHIP_TOL, PAIR_LABELS,
};
use crate::error::{Error, Result};
use crate::integrate::{Direction, EventAction, EventSpec, Invariant, OdeSystem};
use crate::oracle::Hamiltonian;

/// Positions and momenta of the three bodies (indexed by body, not by pair).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    pub q: Triple,
    pub p: Triple,
}

/// Relative configuration and momentum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelState {
    pub q: Config3,
    pub p: CoConfig3,
}

impl RelState {
    pub fn to_reals(&self) -> Vec<f64> {
        let mut y = vec![0.0; 12];
        self.q.write_reals(&mut y[0..6]);
        self.p.write_reals(&mut y[6..12]);
        y
    }
    pub fn from_reals(y: &[f64]) -> Self {
        Self { q: Triple::from_reals(&y[0..6]), p: Triple::from_reals(&y[6..12]) }
    }
    /// Angular momentum `μ = −Im⟨P,Q⟩`.
    pub fn angular_momentum(&self) -> f64 {
        -pairing(&self.p, &self.q).im
    }
}

/// Pass from body coordinates to relative coordinates.
pub fn reduce_translations(s: &BodyState, masses: &Masses) -> Result<RelState> {
    let ptot = s.p.sum().norm();
    if ptot > MEMBERSHIP_TOL * s.p.norm().max(1.0) {
        return Err(Error::NonzeroTotalMomentum { residual: ptot });
    }
    let [q1, q2, q3] = s.q.0;
    let [p1, p2, p3] = s.p.0;
    let (m1, m2, m3, m) = (masses.m1(), masses.m2(), masses.m3(), masses.total());
    Ok(RelState {
        q: Triple::new(q1 - q2, q3 - q1, q2 - q3),
        p: Triple::new((p1 * m2 - p2 * m1) / m, (p3 * m1 - p1 * m3) / m, (p2 * m3 - p3 * m2) / m),
    })
}

/// Recover body positions (center of mass at the origin) and momenta (zero
/// total momentum) from relative coordinates.
pub fn restore_bodies(s: &RelState, masses: &Masses) -> Result<BodyState> {
    let residual = w_residual(&s.q);
    if residual > MEMBERSHIP_TOL {
        return Err(Error::NotTranslationReduced { residual });
    }
    let [q12, q31, _] = s.q.0;
    let q1 = (q12 * masses.m2() - q31 * masses.m3()) / masses.total();
    let [p12, p31, p23] = s.p.0;
    Ok(BodyState { q: Triple::new(q1, q1 - q12, q1 + q31), p: Triple::new(p12 - p31, p23 - p12, p31 - p23) })
}

/// `H_rel = K(P) − U(Q)`.
pub fn h_rel(s: &RelState, masses: &Masses) -> Result<f64> {
    Ok(kinetic(&s.p, masses) - force_function(&s.q, masses)?)
}

/// Hamilton's equations of `H_rel`: `Q̇ = B P`, `Ṗ = ∇U(Q)`.
pub fn rhs_rel(s: &RelState, masses: &Masses) -> Result<RelState> {
    force_function(&s.q, masses)?;
    Ok(RelState { q: kinetic_gradient(&s.p, masses), p: force_function_gradient(&s.q, masses) })
}

/// The relative-coordinate flow as an integrable system with state `[Q | P]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelativeSystem {
    pub masses: Masses,
}

impl RelativeSystem {
    pub fn new(masses: Masses) -> Self {
        Self { masses }
    }

    /// Halting event for near-collisions: `min |Q_ij| < 1e-6 |Q|`.
    pub fn collision_guard(&self) -> EventSpec<'static> {
        let masses = self.masses;
        EventSpec::new("collision", Direction::Down, EventAction::Halt, move |_t, y: &[f64]| {
            let q = Triple::from_reals(&y[0..6]);
            let dmin = q.0.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
            dmin - 1e-6 * mass_norm(&q, &masses)
        })
    }
}

impl OdeSystem for RelativeSystem {
    fn dim(&self) -> usize {
        12
    }
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let s = RelState::from_reals(y);
        kinetic_gradient(&s.p, &self.masses).write_reals(&mut dy[0..6]);
        force_function_gradient(&s.q, &self.masses).write_reals(&mut dy[6..12]);
    }
    fn invariants(&self, _t: f64, y: &[f64]) -> Vec<Invariant> {
        let s = RelState::from_reals(y);
        vec![
            Invariant::conserved("energy", h_rel(&s, &self.masses).unwrap_or(f64::NAN)),
            Invariant::conserved("angular_momentum", s.angular_momentum()),
            Invariant::constraint("translation", s.q.sum().norm()),
        ]
    }
}

impl Hamiltonian for RelativeSystem {
    fn n_q(&self) -> usize {
        6
    }
    fn energy(&self, y: &[f64]) -> f64 {
        h_rel(&RelState::from_reals(y), &self.masses).unwrap_or(f64::NAN)
    }
}

/// Named parametrizations of `𝒲`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    /// `e1 = (−1, 0, 1)`, `e2 = (0, 1, −1)`: body 1 as origin.
    Heliocentric,
    /// `e1 = (−1, ν2, ν1)`, `e2 = (0, 1, −1)` with `ν_i = m_i/(m1+m2)`.
    Jacobi,
    /// `e1 = (1, ω, ω̄)`, `e2 = −ē1`: collisions at the cube roots of unity.
    Equilateral,
    Custom(Config3, Config3),
}

/// A complex basis of `𝒲` with its mass-metric Gram matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartBasis {
    pub e1: Config3,
    pub e2: Config3,
    /// `G_ij = ⟨e_i, e_j⟩` in the mass metric.
    pub gram: Matrix2<C64>,
    pub det_g: f64,
    gram_inv: Matrix2<C64>,
}

/// Primitive cube root of unity `ω = exp(2πi/3)`.
pub fn omega() -> C64 {
    C64::new(-0.5, 3f64.sqrt() / 2.0)
}

/// Build a basis of `𝒲` together with its Gram matrix.
pub fn make_basis(kind: &BasisKind, masses: &Masses) -> Result<ChartBasis> {
    let (e1, e2) = match kind {
        BasisKind::Heliocentric => (Triple::real(-1.0, 0.0, 1.0), Triple::real(0.0, 1.0, -1.0)),
        BasisKind::Jacobi => {
            let s = masses.m1() + masses.m2();
            (Triple::real(-1.0, masses.m2() / s, masses.m1() / s), Triple::real(0.0, 1.0, -1.0))
        }
        BasisKind::Equilateral => {
            let w = omega();
            let e1 = Triple::new(C64::new(1.0, 0.0), w, w.conj());
            (e1, -e1.conj())
        }
        BasisKind::Custom(a, b) => (*a, *b),
    };
    ChartBasis::new(e1, e2, masses)
}

impl ChartBasis {
    pub fn new(e1: Config3, e2: Config3, masses: &Masses) -> Result<Self> {
        for e in [&e1, &e2] {
            let residual = e.sum().norm() / e.norm().max(f64::MIN_POSITIVE);
            if residual > MEMBERSHIP_TOL {
                return Err(Error::NotTranslationReduced { residual });
            }
        }
        let g11 = mass_inner(&e1, &e1, masses);
        let g12 = mass_inner(&e1, &e2, masses);
        let g22 = mass_inner(&e2, &e2, masses);
        let gram = Matrix2::new(g11, g12, g12.conj(), g22);
        let det_g = (g11 * g22 - g12 * g12.conj()).re;
        if !(det_g > 1e-14) {
            return Err(Error::DependentBasis { det: det_g });
        }
        let inv = Matrix2::new(g22, -g12, -g12.conj(), g11) / C64::new(det_g, 0.0);
        Ok(Self { e1, e2, gram, det_g, gram_inv: inv })
    }

    /// The same basis with `e1` and `e2` exchanged.
    pub fn swapped(&self, masses: &Masses) -> Result<Self> {
        Self::new(self.e2, self.e1, masses)
    }

    pub fn gram_inv(&self) -> &Matrix2<C64> {
        &self.gram_inv
    }

    /// `Q = ξ1 e1 + ξ2 e2`.
    pub fn embed(&self, xi: [C64; 2]) -> Config3 {
        self.e1 * xi[0] + self.e2 * xi[1]
    }

    /// Coordinates of `Q ∈ 𝒲`: `ξ = G⁻¹ Eᴴ M Q`.
    pub fn coords(&self, q: &Config3, masses: &Masses) -> [C64; 2] {
        let mq = dual_vector(q, masses);
        self.apply_gram_inv(self.momentum_coords(&mq))
    }

    /// Dual momenta `η_i` with `⟨P, e_i⟩ = conj(η_i)`.
    pub fn momentum_coords(&self, p: &CoConfig3) -> [C64; 2] {
        [pairing(&self.e1, p), pairing(&self.e2, p)]
    }

    /// A momentum `P` with `Eᴴ P = η`: the mass dual of `E G⁻¹ η`.
    pub fn momentum_lift(&self, eta: [C64; 2], masses: &Masses) -> CoConfig3 {
        dual_vector(&self.embed(self.apply_gram_inv(eta)), masses)
    }

    pub fn apply_gram_inv(&self, v: [C64; 2]) -> [C64; 2] {
        let g = &self.gram_inv;
        [g[(0, 0)] * v[0] + g[(0, 1)] * v[1], g[(1, 0)] * v[0] + g[(1, 1)] * v[1]]
    }

    /// Mass norm `ξᴴ G ξ`.
    pub fn norm_sq(&self, xi: [C64; 2]) -> f64 {
        let g = &self.gram;
        (xi[0].conj() * (g[(0, 0)] * xi[0] + g[(0, 1)] * xi[1])
            + xi[1].conj() * (g[(1, 0)] * xi[0] + g[(1, 1)] * xi[1]))
            .re
    }

    /// Dual norm `ηᴴ G⁻¹ η`.
    pub fn conorm_sq(&self, eta: [C64; 2]) -> f64 {
        let v = self.apply_gram_inv(eta);
        (eta[0].conj() * v[0] + eta[1].conj() * v[1]).re
    }

    /// Mutual distances `ρ_ij = |a_ij ξ1 + b_ij ξ2|`.
    pub fn distances(&self, xi: [C64; 2]) -> [f64; 3] {
        let q = self.embed(xi);
        [q[0].norm(), q[1].norm(), q[2].norm()]
    }
}

/// `H(ξ, η) = ½ ηᴴ G⁻¹ η − U(ξ)`.
pub fn h_chart(xi: [C64; 2], eta: [C64; 2], basis: &ChartBasis, masses: &Masses) -> Result<f64> {
    Ok(0.5 * basis.conorm_sq(eta) - force_function(&basis.embed(xi), masses)?)
}

/// Hamilton's equations of [`h_chart`]: `ξ̇ = G⁻¹η`, `η̇ = ∇_ξ U`.
pub fn rhs_chart(xi: [C64; 2], eta: [C64; 2], basis: &ChartBasis, masses: &Masses) -> Result<([C64; 2], [C64; 2])> {
    let q = basis.embed(xi);
    for k in 0..3 {
        if q[k].norm() == 0.0 {
            return Err(Error::Collision { pair: PAIR_LABELS[k], distance: 0.0 });
        }
    }
    let g = force_function_gradient(&q, masses);
    let pull = |e: &Triple| (0..3).map(|k| g[k] * e[k].conj()).sum::<C64>();
    Ok((basis.apply_gram_inv(eta), [pull(&basis.e1), pull(&basis.e2)]))
}

/// The `(ξ, η)` flow with state `[ξ | η]` (eight reals).
#[derive(Clone, Debug, PartialEq)]
pub struct ChartSystem {
    pub basis: ChartBasis,
    pub masses: Masses,
}

impl ChartSystem {
    pub fn split(y: &[f64]) -> ([C64; 2], [C64; 2]) {
        ([C64::new(y[0], y[1]), C64::new(y[2], y[3])], [C64::new(y[4], y[5]), C64::new(y[6], y[7])])
    }
    pub fn join(xi: [C64; 2], eta: [C64; 2]) -> Vec<f64> {
        vec![xi[0].re, xi[0].im, xi[1].re, xi[1].im, eta[0].re, eta[0].im, eta[1].re, eta[1].im]
    }
    /// Map a chart state to relative coordinates.
    pub fn to_relative(&self, y: &[f64]) -> RelState {
        let (xi, eta) = Self::split(y);
        RelState { q: self.basis.embed(xi), p: self.basis.momentum_lift(eta, &self.masses) }
    }
    /// Map a relative state to chart coordinates.
    pub fn from_relative(&self, s: &RelState) -> Vec<f64> {
        Self::join(self.basis.coords(&s.q, &self.masses), self.basis.momentum_coords(&s.p))
    }
}

impl OdeSystem for ChartSystem {
    fn dim(&self) -> usize {
        8
    }
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let (xi, eta) = Self::split(y);
        match rhs_chart(xi, eta, &self.basis, &self.masses) {
            Ok((dxi, deta)) => dy.copy_from_slice(&Self::join(dxi, deta)),
            Err(_) => dy.fill(f64::NAN),
        }
    }
    fn invariants(&self, _t: f64, y: &[f64]) -> Vec<Invariant> {
        let (xi, eta) = Self::split(y);
        vec![Invariant::conserved("energy", h_chart(xi, eta, &self.basis, &self.masses).unwrap_or(f64::NAN))]
    }
}

impl Hamiltonian for ChartSystem {
    fn n_q(&self) -> usize {
        4
    }
    fn energy(&self, y: &[f64]) -> f64 {
        let (xi, eta) = Self::split(y);
        h_chart(xi, eta, &self.basis, &self.masses).unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{normalize_momentum, I};
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn equilateral_unit() -> Config3 {
        let w = omega();
        // Vertices 1, ω, ω̄ scaled to unit side.
        let s = 1.0 / 3f64.sqrt();
        let q = [c(s, 0.0), w * s, w.conj() * s];
        Triple::new(q[0] - q[1], q[2] - q[0], q[1] - q[2])
    }

    #[test]
    fn reduce_examples() {
        let eq = Masses::equal();
        let bodies = BodyState { q: Triple::real(1.0, 0.0, -1.0), p: Triple::ZERO };
        let s = reduce_translations(&bodies, &eq).unwrap();
        assert_eq!(s.q, Triple::real(1.0, -2.0, 1.0));
        assert_eq!(s.p, Triple::ZERO);
        let bodies = BodyState { q: Triple::real(1.0, 0.0, -1.0), p: Triple::real(1.0, -2.0, 1.0) };
        let s = reduce_translations(&bodies, &eq).unwrap();
        assert!((s.p - Triple::real(1.0, 0.0, -1.0)).norm() < 1e-15);
        assert_eq!(s.q.sum(), C64::new(0.0, 0.0));
        let moving = BodyState { q: Triple::ZERO, p: Triple::real(1.0, 0.0, 0.0) };
        assert!(matches!(reduce_translations(&moving, &eq), Err(Error::NonzeroTotalMomentum { .. })));
    }

    #[test]
    fn restore_examples() {
        let eq = Masses::equal();
        let s = RelState { q: Triple::real(1.0, -2.0, 1.0), p: Triple::ZERO };
        let b = restore_bodies(&s, &eq).unwrap();
        assert!((b.q - Triple::real(1.0, 0.0, -1.0)).norm() < 1e-15);
        assert_eq!(b.p, Triple::ZERO);
        let bad = RelState { q: Triple::real(1.0, 1.0, 1.0), p: Triple::ZERO };
        assert!(restore_bodies(&bad, &eq).is_err());
    }

    #[test]
    fn round_trip_through_bodies() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let q = Triple::new(c(1.0, 1.0), C64::default(), c(-1.0, -1.0));
        let p = Triple::new(c(0.5, -0.25), c(-1.5, 2.0), c(1.0, -1.75));
        let bodies = BodyState { q, p };
        let rel = reduce_translations(&bodies, &m).unwrap();
        let back = restore_bodies(&rel, &m).unwrap();
        let com = (q[0] * m.m1() + q[1] * m.m2() + q[2] * m.m3()) / m.total();
        assert!((back.q - q.map(|z| z - com)).norm() < 1e-14);
        assert!((back.p - p).norm() < 1e-14);
        let rel2 = reduce_translations(&back, &m).unwrap();
        assert!((normalize_momentum(&rel2.p, &m) - normalize_momentum(&rel.p, &m)).norm() < 1e-14);
    }

    #[test]
    fn h_rel_examples() {
        let eq = Masses::equal();
        let s = RelState { q: equilateral_unit(), p: Triple::ZERO };
        assert_relative_eq!(h_rel(&s, &eq).unwrap(), -3.0, epsilon = 1e-14);
        let s = RelState { q: Triple::real(1.0, -2.0, 1.0), p: Triple::ZERO };
        assert_relative_eq!(h_rel(&s, &eq).unwrap(), -2.5, epsilon = 1e-14);
        let s = RelState { q: Triple::real(1.0, -2.0, 1.0), p: Triple::real(1.0, 0.0, 0.0) };
        assert_relative_eq!(h_rel(&s, &eq).unwrap(), -1.5, epsilon = 1e-14);
        let s = RelState { q: Triple::real(0.0, 1.0, -1.0), p: Triple::ZERO };
        assert!(matches!(h_rel(&s, &eq), Err(Error::Collision { pair: "12", .. })));
    }

    #[test]
    fn rhs_rel_examples() {
        let eq = Masses::equal();
        let q = equilateral_unit();
        let d = rhs_rel(&RelState { q, p: Triple::ZERO }, &eq).unwrap();
        assert_eq!(d.q, Triple::ZERO);
        assert!((d.p + q).norm() < 1e-14);
        let d = rhs_rel(&RelState { q, p: Triple::real(1.0, 0.0, 0.0) }, &eq).unwrap();
        assert!((d.q - Triple::real(2.0, -1.0, -1.0)).norm() < 1e-15);
        assert!(d.q.sum().norm() < 1e-15);
        assert!(d.p.sum().norm() > 0.0 || d.p.sum().norm() == 0.0);
    }

    #[test]
    fn basis_examples() {
        let eq = Masses::equal();
        let j = make_basis(&BasisKind::Jacobi, &eq).unwrap();
        assert_relative_eq!(j.gram[(0, 0)].re, 0.5, epsilon = 1e-15);
        assert_relative_eq!(j.gram[(1, 1)].re, 2.0 / 3.0, epsilon = 1e-15);
        assert!(j.gram[(0, 1)].norm() < 1e-14);
        let h = make_basis(&BasisKind::Heliocentric, &eq).unwrap();
        assert_relative_eq!(h.gram[(0, 0)].re, 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(h.gram[(0, 1)], h.gram[(1, 0)].conj());
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let j = make_basis(&BasisKind::Jacobi, &m).unwrap();
        assert_relative_eq!(j.gram[(0, 0)].re, 2.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(j.gram[(1, 1)].re, 9.0 / 6.0, epsilon = 1e-14);
        assert_relative_eq!(j.det_g, m.product() / m.total(), epsilon = 1e-14);
        let e = make_basis(&BasisKind::Equilateral, &m).unwrap();
        assert_relative_eq!(e.det_g, 3.0 * m.product() / m.total(), epsilon = 1e-13);
        let bad = BasisKind::Custom(Triple::real(1.0, -1.0, 0.0), Triple::real(2.0, -2.0, 0.0));
        assert!(matches!(make_basis(&bad, &m), Err(Error::DependentBasis { .. })));
    }

    #[test]
    fn h_chart_examples() {
        let eq = Masses::equal();
        let h = make_basis(&BasisKind::Heliocentric, &eq).unwrap();
        // Bodies 2 and 3 at −1 and i relative to body 1: two unit sides and a √2 side.
        let v = h_chart([c(-1.0, 0.0), I], [C64::default(); 2], &h, &eq).unwrap();
        assert_relative_eq!(v, -(2.0 + 1.0 / 2f64.sqrt()), epsilon = 1e-14);
        let j = make_basis(&BasisKind::Jacobi, &eq).unwrap();
        let xi = j.coords(&equilateral_unit(), &eq);
        assert_relative_eq!(h_chart(xi, [C64::default(); 2], &j, &eq).unwrap(), -3.0, epsilon = 1e-13);
    }

    #[test]
    fn chart_momenta_are_consistent_with_relative_coordinates() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        for kind in [BasisKind::Heliocentric, BasisKind::Jacobi, BasisKind::Equilateral] {
            let basis = make_basis(&kind, &m).unwrap();
            let sys = ChartSystem { basis: basis.clone(), masses: m };
            let y = [0.3, -1.1, 0.7, 0.4, 0.2, -0.5, 1.3, 0.6];
            let rel = sys.to_relative(&y);
            let back = sys.from_relative(&rel);
            for k in 0..8 {
                assert!((back[k] - y[k]).abs() < 1e-13, "{kind:?}");
            }
            let (xi, eta) = ChartSystem::split(&y);
            assert_relative_eq!(h_chart(xi, eta, &basis, &m).unwrap(), h_rel(&rel, &m).unwrap(), epsilon = 1e-12);
        }
    }
}
