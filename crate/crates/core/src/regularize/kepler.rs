//! Levi-Civita regularization of the planar Kepler problem, used as a
//! self-test of the squaring machinery.
//!
//! With `q = z²` and the Poincaré time change, the zero level of
//! `H̃ = ½(|η|² − h|z|² − α)` carries the Kepler orbits of energy `h`: a
//! harmonic oscillator of angular frequency `sqrt(−h)` when `h < 0`.  Along
//! the oscillator flow `q = z²`, `p = √2 η/z̄` and `dt/ds = √2|z|²` solve
//! `q̇ = p`, `ṗ = −α q/|q|³` with `½|p|² − α/|q| = h`.

use crate::algebra::C64;
use crate::integrate::{Invariant, OdeSystem};
use crate::oracle::Hamiltonian;

/// The regularized Kepler oscillator with state `[Re z, Im z, Re η, Im η, t]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KeplerLc {
    pub h: f64,
    pub alpha: f64,
}

impl KeplerLc {
    pub fn new(h: f64, alpha: f64) -> Self {
        Self { h, alpha }
    }

    pub fn hamiltonian(&self, z: C64, eta: C64) -> f64 {
        0.5 * (eta.norm_sqr() - self.h * z.norm_sqr() - self.alpha)
    }

    /// A zero-level initial state at `z = 1` with purely tangential `η`.
    pub fn periapsis_state(&self) -> Vec<f64> {
        let speed = (self.alpha + self.h).max(0.0).sqrt();
        vec![1.0, 0.0, 0.0, speed, 0.0]
    }

    /// Kepler position and velocity `(q, p)` of a regularized state.
    pub fn to_kepler(&self, y: &[f64]) -> (C64, C64) {
        let z = C64::new(y[0], y[1]);
        let eta = C64::new(y[2], y[3]);
        (z * z, eta * std::f64::consts::SQRT_2 / z.conj())
    }

    /// Kepler energy `½|p|² − α/|q|`.
    pub fn kepler_energy(&self, q: C64, p: C64) -> f64 {
        0.5 * p.norm_sqr() - self.alpha / q.norm()
    }
}

impl OdeSystem for KeplerLc {
    fn dim(&self) -> usize {
        5
    }
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = y[2];
        dy[1] = y[3];
        dy[2] = self.h * y[0];
        dy[3] = self.h * y[1];
        dy[4] = std::f64::consts::SQRT_2 * (y[0] * y[0] + y[1] * y[1]);
    }
    fn invariants(&self, _t: f64, y: &[f64]) -> Vec<Invariant> {
        let e = self.hamiltonian(C64::new(y[0], y[1]), C64::new(y[2], y[3]));
        vec![Invariant::conserved("energy", e), Invariant::constraint("zero_level", e.abs())]
    }
}

impl Hamiltonian for KeplerLc {
    fn n_q(&self) -> usize {
        2
    }
    fn energy(&self, y: &[f64]) -> f64 {
        self.hamiltonian(C64::new(y[0], y[1]), C64::new(y[2], y[3]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::{integrate, IntegratorOptions};
    use approx::assert_relative_eq;

    #[test]
    fn zero_level_start() {
        let k = KeplerLc::new(-1.0, 1.25);
        let y = k.periapsis_state();
        assert_eq!(y[3], 0.5);
        assert_eq!(k.energy(&y), 0.0);
        let (q, p) = k.to_kepler(&y);
        assert_relative_eq!(k.kepler_energy(q, p), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn kepler_energy_along_flow() {
        let k = KeplerLc::new(-1.0, 1.25);
        let traj = integrate(&k, 0.0, &k.periapsis_state(), 10.0, &IntegratorOptions::with_tol(1e-12), &[]).unwrap();
        for y in &traj.states {
            let (q, p) = k.to_kepler(y);
            assert!((k.kepler_energy(q, p) + 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn collision_orbit_passes_origin() {
        // Zero angular momentum: η ∥ z, the oscillator passes through z = 0.
        let k = KeplerLc::new(-1.0, 1.0);
        let y0 = vec![0.0, 0.0, 1.0, 0.0, 0.0];
        let traj = integrate(&k, 0.0, &y0, 4.0, &IntegratorOptions::with_tol(1e-12), &[]).unwrap();
        assert!(traj.states.iter().all(|y| y.iter().all(|v| v.is_finite())));
        let y = traj.final_state();
        assert_relative_eq!(y[0], 4f64.sin(), epsilon = 1e-9);
    }
}
