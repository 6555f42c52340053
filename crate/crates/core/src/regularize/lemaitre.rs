//! The projective squaring map `ℙ(𝒞) → ℙ(𝒲)` viewed as a map of the
//! two-sphere: a four-to-one branched covering, two-to-one over the three
//! binary-collision shapes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{all_branches, lc_lift, lc_project};
use crate::algebra::{Config3, Masses, Triple};
use crate::error::Result;
use crate::reduced::{hopf_section, lon_lat_to_w, w_to_lon_lat, RoundForm};

/// Tolerance below which two projective points are identified.
pub const PROJECTIVE_TOL: f64 = 1e-8;

/// Fubini–Study distance-like separation `sqrt(1 − |⟨a,b⟩|²/(|a|²|b|²))`.
pub fn projective_distance(a: &Config3, b: &Config3) -> f64 {
    let ip = a.conj().dot(b).norm_sqr();
    (1.0 - ip / (a.norm_sq() * b.norm_sq())).max(0.0).sqrt()
}

/// Projective preimages of one shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preimages {
    pub points: Vec<Config3>,
    /// Smallest projective separation between distinct preimages
    /// (`+∞` when there is only one).
    pub min_separation: f64,
}

/// All projective preimages of the shape `[X]`, by enumerating the sign
/// patterns of [`lc_lift`] and deduplicating up to complex scaling.
pub fn lemaitre_preimages(x: &Config3, _masses: &Masses) -> Preimages {
    let mut points: Vec<Config3> = Vec::new();
    for b in all_branches() {
        let Ok(z) = lc_lift(x, b) else { continue };
        if points.iter().all(|p| projective_distance(p, &z) > PROJECTIVE_TOL) {
            points.push(z);
        }
    }
    let mut min_separation = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            min_separation = min_separation.min(projective_distance(&points[i], &points[j]));
        }
    }
    Preimages { points, min_separation }
}

/// Configuration of the round-sphere point `w` in the equilateral basis.
pub fn shape_from_w(w: &nalgebra::Vector3<f64>, masses: &Masses) -> Result<Config3> {
    let form = RoundForm::equilateral(*masses);
    Ok(form.basis.embed(hopf_section(w)?))
}

/// A shape drawn uniformly on the round (equilateral) shape sphere.
pub fn random_round_shape(masses: &Masses, rng: &mut impl Rng) -> Config3 {
    let zc: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let s = (1.0 - zc * zc).sqrt();
    let w = nalgebra::Vector3::new(s * phi.cos(), s * phi.sin(), zc);
    shape_from_w(&w, masses).expect("unit vector has a Hopf preimage")
}

/// The three binary-collision shapes `X12 = 0`, `X31 = 0`, `X23 = 0`.
pub fn collision_shapes(_masses: &Masses) -> [Config3; 3] {
    [Triple::real(0.0, 1.0, -1.0), Triple::real(1.0, 0.0, -1.0), Triple::real(1.0, -1.0, 0.0)]
}

/// One row of the covering survey.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringSample {
    pub shape_u: f64,
    pub shape_v: f64,
    pub n_preimages: usize,
}

/// Preimage counts on a longitude/latitude grid of the round shape sphere
/// (`resolution` points per axis), followed by the three collision shapes.
pub fn covering_grid(resolution: usize, masses: &Masses) -> Result<Vec<CoveringSample>> {
    let nodes = crate::reduced::grid_nodes(crate::reduced::GridChart::Round, resolution)?;
    let form = RoundForm::equilateral(*masses);
    let mut out = Vec::with_capacity(nodes.len() + 3);
    for (u, v) in nodes {
        let x = shape_from_w(&lon_lat_to_w(u, v), masses)?;
        out.push(CoveringSample { shape_u: u, shape_v: v, n_preimages: lemaitre_preimages(&x, masses).points.len() });
    }
    for x in collision_shapes(masses) {
        let xi = form.basis.coords(&x, masses);
        let (u, v) = w_to_lon_lat(&crate::reduced::hopf_map(xi));
        out.push(CoveringSample { shape_u: u, shape_v: v, n_preimages: lemaitre_preimages(&x, masses).points.len() });
    }
    Ok(out)
}

/// Projective distance between the image of a cone point and a shape.
pub fn image_distance(z: &Config3, x: &Config3) -> f64 {
    projective_distance(&lc_project(z), x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn equilateral_shape_has_four_preimages() {
        let eq = Masses::equal();
        let x = shape_from_w(&nalgebra::Vector3::new(0.0, 0.0, 1.0), &eq).unwrap();
        let pre = lemaitre_preimages(&x, &eq);
        assert_eq!(pre.points.len(), 4);
        for z in &pre.points {
            assert!(image_distance(z, &x) < 1e-10);
        }
    }

    #[test]
    fn collision_shapes_have_two_preimages() {
        let eq = Masses::equal();
        for x in collision_shapes(&eq) {
            let pre = lemaitre_preimages(&x, &eq);
            assert_eq!(pre.points.len(), 2);
            assert!(pre.min_separation > 1e-6);
        }
    }

    #[test]
    fn random_shapes_have_four_preimages() {
        let m = Masses::new(1.0, 2.0, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x = random_round_shape(&m, &mut rng);
            let pre = lemaitre_preimages(&x, &m);
            assert_eq!(pre.points.len(), 4);
            assert!(pre.min_separation > 1e-6);
        }
    }

    #[test]
    fn covering_grid_counts() {
        let eq = Masses::equal();
        let g = covering_grid(8, &eq).unwrap();
        assert_eq!(g.len(), 67);
        assert!(g[..64].iter().all(|s| s.n_preimages == 4 || s.n_preimages == 2));
        assert!(g[64..].iter().all(|s| s.n_preimages == 2));
    }
}
