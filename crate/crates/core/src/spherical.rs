//! Spherical-homogeneous coordinates `(r, p_r, X, Y)`: the size `r = |Q|`
//! separated from a homogeneous shape representative `X`, with
//!
//! `H_sph = ½p_r² + (|X|²/r²) K(Y) − V(X)/r`,  `V(X) = |X| U(X)`.
//!
//! The same homogeneous shape functions serve the rotation-reduced chart,
//! which differs only by the `μ²/r²` term, the curvature force `−2iZ` and the
//! complex constraint `⟨Z, X⟩ = 0`; both are provided by [`HomogeneousForm`].

use serde::{Deserialize, Serialize};

use crate::algebra::{
    dual_vector, force_function, force_function_gradient, kinetic, kinetic_gradient, mass_norm, mass_norm_sq, pairing,
    CoConfig3, Config3, Masses, Triple, I, MEMBERSHIP_TOL,
};
use crate::error::{Error, Result};
use crate::form::{rescale_gauge, FormEval, RadialSystem, ShapeForm};
use crate::integrate::Invariant;
use crate::relative::RelState;

/// A point of the spherical-homogeneous phase space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphState {
    pub r: f64,
    pub p_r: f64,
    pub x: Config3,
    pub y: CoConfig3,
}

impl SphState {
    /// State vector `[r, X, p_r, Y, t]` for [`SphericalSystem`].
    pub fn to_reals(&self, t: f64) -> Vec<f64> {
        let mut v = vec![0.0; 15];
        v[0] = self.r;
        self.x.write_reals(&mut v[1..7]);
        v[7] = self.p_r;
        self.y.write_reals(&mut v[8..14]);
        v[14] = t;
        v
    }

    pub fn from_reals(v: &[f64]) -> Self {
        Self { r: v[0], x: Triple::from_reals(&v[1..7]), p_r: v[7], y: Triple::from_reals(&v[8..14]) }
    }

    /// Scaling momentum `Re⟨Y, X⟩` (zero on the constraint set).
    pub fn scaling_momentum(&self) -> f64 {
        pairing(&self.y, &self.x).re
    }

    /// Angular momentum `−Im⟨Y, X⟩`.
    pub fn angular_momentum(&self) -> f64 {
        -pairing(&self.y, &self.x).im
    }
}

/// Map relative coordinates to spherical-homogeneous coordinates with `X = Q`.
pub fn to_spherical(s: &RelState, masses: &Masses) -> Result<SphState> {
    let r = mass_norm(&s.q, masses);
    if r == 0.0 {
        return Err(Error::ZeroConfiguration);
    }
    let radial = pairing(&s.p, &s.q).re;
    let y = s.p - dual_vector(&s.q, masses) * (radial / (r * r));
    Ok(SphState { r, p_r: radial / r, x: s.q, y })
}

/// Pseudo-inverse of [`to_spherical`]: `Q = rX/|X|`, `P = (p_r/|X|)X* + (|X|/r)Y`.
pub fn from_spherical(s: &SphState, masses: &Masses) -> Result<RelState> {
    let nx = mass_norm(&s.x, masses);
    if nx == 0.0 {
        return Err(Error::ZeroConfiguration);
    }
    let residual = s.scaling_momentum().abs() / (nx * s.y.norm().max(1.0));
    if residual > MEMBERSHIP_TOL {
        return Err(Error::Constraint { name: "scaling_momentum", residual });
    }
    Ok(RelState { q: s.x * (s.r / nx), p: dual_vector(&s.x, masses) * (s.p_r / nx) + s.y * (nx / s.r) })
}

/// Shape potential `V(X) = |X| U(X)`, invariant under complex scaling.
pub fn shape_potential(x: &Config3, masses: &Masses) -> Result<f64> {
    let nx = mass_norm(x, masses);
    if nx == 0.0 {
        return Err(Error::ZeroConfiguration);
    }
    Ok(nx * force_function(x, masses)?)
}

/// Real gradient `DV = U X*/|X| + |X| ∇U`.
pub fn shape_potential_gradient(x: &Config3, masses: &Masses) -> Result<CoConfig3> {
    let nx = mass_norm(x, masses);
    let u = force_function(x, masses)?;
    Ok(dual_vector(x, masses) * (u / nx) + force_function_gradient(x, masses) * nx)
}

/// `H_sph`.
pub fn h_sph(s: &SphState, masses: &Masses) -> Result<f64> {
    let xx = mass_norm_sq(&s.x, masses);
    Ok(0.5 * s.p_r * s.p_r + xx * kinetic(&s.y, masses) / (s.r * s.r) - shape_potential(&s.x, masses)? / s.r)
}

/// Hamilton's equations of `H_sph`.
pub fn rhs_sph(s: &SphState, masses: &Masses) -> Result<SphState> {
    let (r2, r3) = (s.r * s.r, s.r * s.r * s.r);
    let xx = mass_norm_sq(&s.x, masses);
    let k = kinetic(&s.y, masses);
    let v = shape_potential(&s.x, masses)?;
    let dv = shape_potential_gradient(&s.x, masses)?;
    Ok(SphState {
        r: s.p_r,
        p_r: 2.0 * xx * k / r3 - v / r2,
        x: kinetic_gradient(&s.y, masses) * (xx / r2),
        y: dv * (1.0 / s.r) - dual_vector(&s.x, masses) * (2.0 * k / r2),
    })
}

/// Homogeneous shape functions `kin = |X|²K(Z)`, `V = |X|U(X)` on `ℂ³`.
///
/// The unreduced (spherical) variant carries the angular momentum inside
/// `Y`; the reduced variant adds the curvature force `−2iZ` and the complex
/// constraint `⟨Z, X⟩ = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HomogeneousForm {
    pub masses: Masses,
    pub reduced: bool,
}

impl ShapeForm for HomogeneousForm {
    fn label(&self) -> &'static str {
        if self.reduced {
            "reduced"
        } else {
            "spherical"
        }
    }

    fn shape_dim(&self) -> usize {
        6
    }

    fn eval(&self, x: &[f64], z: &[f64]) -> FormEval {
        let m = &self.masses;
        let (x, z) = (Triple::from_reals(x), Triple::from_reals(z));
        let mut e = FormEval::unregularized(6);
        let xx = mass_norm_sq(&x, m);
        let k = kinetic(&z, m);
        e.kin = xx * k;
        (dual_vector(&x, m) * (2.0 * k)).write_reals(&mut e.grad_kin_x);
        (kinetic_gradient(&z, m) * xx).write_reals(&mut e.grad_kin_z);
        match (shape_potential(&x, m), shape_potential_gradient(&x, m)) {
            (Ok(v), Ok(dv)) => {
                e.v = v;
                dv.write_reals(&mut e.grad_v);
            }
            _ => {
                e.v = f64::NAN;
                e.grad_v.fill(f64::NAN);
            }
        }
        e
    }

    fn curvature(&self, _x: &[f64], z: &[f64], out: &mut [f64]) {
        if self.reduced {
            (Triple::from_reals(z) * (I * -2.0)).write_reals(out);
        } else {
            out.fill(0.0);
        }
    }

    fn normalize(&self, x: &mut [f64], z: &mut [f64]) -> bool {
        let norm = mass_norm(&Triple::from_reals(x), &self.masses);
        rescale_gauge(x, z, norm)
    }

    fn constraints(&self, x: &[f64], z: &[f64]) -> Vec<Invariant> {
        let (x, z) = (Triple::from_reals(x), Triple::from_reals(z));
        let pair = pairing(&z, &x);
        let scale = x.norm().max(1e-300);
        let mut out = vec![
            Invariant::constraint("translation", x.sum().norm() / scale),
            Invariant::conserved("shape_norm", mass_norm(&x, &self.masses)),
        ];
        if self.reduced {
            out.push(Invariant::constraint("pairing", pair.norm()));
        } else {
            out.push(Invariant::constraint("scaling_momentum", pair.re.abs()));
            out.push(Invariant::conserved("angular_momentum", -pair.im));
        }
        out
    }
}

/// The spherical-homogeneous flow with state `[r, X, p_r, Y, t]`.
pub type SphericalSystem = RadialSystem<HomogeneousForm>;

/// Build the spherical system for the given masses.
pub fn spherical_system(masses: Masses) -> SphericalSystem {
    RadialSystem::new(HomogeneousForm { masses, reduced: false }, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{normalize_momentum, project_to_w, C64};
    use crate::integrate::OdeSystem;
    use crate::relative::h_rel;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn equilateral(side: f64) -> Config3 {
        let w = crate::relative::omega();
        let s = side / 3f64.sqrt();
        let q = [C64::new(s, 0.0), w * s, w.conj() * s];
        Triple::new(q[0] - q[1], q[2] - q[0], q[1] - q[2])
    }

    fn random_rel(rng: &mut ChaCha8Rng) -> RelState {
        let mut t = || Triple::from_reals(&(0..6).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
        RelState { q: project_to_w(&t()), p: t() }
    }

    #[test]
    fn to_spherical_examples() {
        let eq = Masses::equal();
        let s = to_spherical(&RelState { q: equilateral(1.0), p: Triple::ZERO }, &eq).unwrap();
        assert_relative_eq!(s.r, 1.0, epsilon = 1e-14);
        assert_eq!(s.p_r, 0.0);
        assert_eq!(s.y, Triple::ZERO);
        let q = equilateral(1.3);
        let s = to_spherical(&RelState { q, p: dual_vector(&q, &eq) }, &eq).unwrap();
        assert_relative_eq!(s.p_r, mass_norm(&q, &eq), epsilon = 1e-14);
        assert!(s.y.norm() < 1e-14);
        assert!(to_spherical(&RelState { q: Triple::ZERO, p: Triple::ZERO }, &eq).is_err());
    }

    #[test]
    fn spherical_round_trips() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let rel = random_rel(&mut rng);
            let s = to_spherical(&rel, &m).unwrap();
            assert!(s.scaling_momentum().abs() < 1e-14);
            let back = from_spherical(&s, &m).unwrap();
            assert!((back.q - rel.q).norm() < 1e-13);
            assert!((back.p - rel.p).norm() < 1e-13);
            assert_relative_eq!(
                h_sph(&s, &m).unwrap(),
                h_rel(&rel, &m).unwrap(),
                epsilon = 1e-11,
                max_relative = 1e-12
            );
        }
        // F∘G rescales X by r/|X| and Y by |X|/r.
        let s = SphState { r: 2.0, p_r: 0.3, x: equilateral(0.5), y: Triple::ZERO };
        let again = to_spherical(&from_spherical(&s, &m).unwrap(), &m).unwrap();
        let k = s.r / mass_norm(&s.x, &m);
        assert!((again.x - s.x * k).norm() < 1e-14);
        assert_relative_eq!(again.p_r, s.p_r, epsilon = 1e-14);
    }

    #[test]
    fn from_spherical_rest_state() {
        let eq = Masses::equal();
        let x = equilateral(1.0);
        let rel = from_spherical(&SphState { r: 2.0, p_r: 0.0, x, y: Triple::ZERO }, &eq).unwrap();
        assert!((rel.q - x * 2.0).norm() < 1e-14);
        assert_eq!(rel.p, Triple::ZERO);
    }

    #[test]
    fn shape_potential_examples() {
        let eq = Masses::equal();
        assert_relative_eq!(shape_potential(&equilateral(0.7), &eq).unwrap(), 3.0, epsilon = 1e-14);
        let x = Triple::real(1.0, -2.0, 1.0);
        assert_relative_eq!(shape_potential(&x, &eq).unwrap(), 5.0 / 2f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(
            shape_potential(&(x * C64::new(0.0, 2.0)), &eq).unwrap(),
            shape_potential(&x, &eq).unwrap(),
            epsilon = 1e-14
        );
        assert!(shape_potential(&Triple::real(0.0, 1.0, -1.0), &eq).is_err());
    }

    #[test]
    fn shape_potential_gradient_matches_differences() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let x = random_rel(&mut rng).q;
            let g = shape_potential_gradient(&x, &m).unwrap();
            let mut v = vec![0.0; 6];
            x.write_reals(&mut v);
            let mut gr = vec![0.0; 6];
            g.write_reals(&mut gr);
            for i in 0..6 {
                let h = 1e-6;
                let mut a = v.clone();
                a[i] += h;
                let mut b = v.clone();
                b[i] -= h;
                let fd = (shape_potential(&Triple::from_reals(&a), &m).unwrap()
                    - shape_potential(&Triple::from_reals(&b), &m).unwrap())
                    / (2.0 * h);
                assert!((fd - gr[i]).abs() <= 1e-6 * fd.abs().max(1e-3 * g.max_abs()), "{fd} vs {}", gr[i]);
            }
        }
    }

    #[test]
    fn h_sph_examples() {
        let eq = Masses::equal();
        let s = SphState { r: 1.0, p_r: 0.0, x: equilateral(1.0), y: Triple::ZERO };
        assert_relative_eq!(h_sph(&s, &eq).unwrap(), -3.0, epsilon = 1e-14);
        let s2 = SphState { r: 2.0, ..s };
        assert_relative_eq!(h_sph(&s2, &eq).unwrap(), -1.5, epsilon = 1e-14);
        let d = rhs_sph(&s, &eq).unwrap();
        assert_eq!(d.r, 0.0);
        assert_relative_eq!(d.p_r, -3.0, epsilon = 1e-14);
        assert_eq!(d.x, Triple::ZERO);
    }

    #[test]
    fn system_matches_closed_form_rhs() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let sys = spherical_system(m);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = to_spherical(&random_rel(&mut rng), &m).unwrap();
        let y = s.to_reals(0.0);
        let mut dy = vec![0.0; 15];
        sys.rhs(0.0, &y, &mut dy);
        let d = rhs_sph(&s, &m).unwrap();
        let expected = d.to_reals(1.0);
        for i in 0..15 {
            assert!((dy[i] - expected[i]).abs() < 1e-12, "component {i}");
        }
        assert_relative_eq!(sys.hamiltonian(&y), h_sph(&s, &m).unwrap(), epsilon = 1e-14);
    }

    #[test]
    fn gauge_preserves_physical_state() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let sys = spherical_system(m);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rel = random_rel(&mut rng);
        let mut y = to_spherical(&rel, &m).unwrap().to_reals(0.0);
        let h0 = sys.hamiltonian(&y);
        assert!(crate::integrate::OdeSystem::renormalize(&sys, &mut y));
        let s = SphState::from_reals(&y);
        assert_relative_eq!(mass_norm(&s.x, &m), 1.0, epsilon = 1e-14);
        assert_relative_eq!(sys.hamiltonian(&y), h0, epsilon = 1e-12);
        let back = from_spherical(&s, &m).unwrap();
        assert!((back.q - rel.q).norm() < 1e-13);
        assert!((normalize_momentum(&back.p, &m) - normalize_momentum(&rel.p, &m)).norm() < 1e-12);
    }
}
