//! Independent verification engines: finite-difference gradient checks of
//! Hamiltonian vector fields, cross-chart trajectory comparison and the
//! covering-degree survey of the regularizing map.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::Masses;
use crate::integrate::OdeSystem;
use crate::regularize::lemaitre::{collision_shapes, lemaitre_preimages, random_round_shape};

/// A vector field that is Hamiltonian up to an explicit curvature force.
///
/// The state is laid out as `[q | p | extra]` with `n_q` coordinates and
/// `n_q` conjugate momenta; extra trailing components (such as a physical
/// clock) are ignored by the checks.  The vector field must equal
/// `q̇ = ∂H/∂p`, `ṗ = −∂H/∂q + curvature`.
pub trait Hamiltonian: OdeSystem {
    fn n_q(&self) -> usize;
    fn energy(&self, y: &[f64]) -> f64;
    /// Non-canonical force added to `ṗ` (zero by default).
    fn curvature(&self, _y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// Result of a finite-difference gradient check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub chart: String,
    pub seed: u64,
    pub samples: usize,
    pub max_rel_err: f64,
    pub worst_state: Vec<f64>,
    pub worst_component: usize,
    /// Maximum relative error per state component.
    pub per_component: Vec<f64>,
}

impl GradCheckReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

/// Finite-difference step used by the gradient oracle.
pub const FD_STEP: f64 = 1e-6;

/// Compare the canonical part of the vector field with central differences
/// of the Hamiltonian on `n_samples` states drawn by `sample`.
///
/// Each component's error is `|a − b| / max(|b|, 1e-3 ‖b‖∞)`, where `b` is the
/// finite-difference value; the floor keeps near-zero components from
/// dominating.
pub fn fd_gradient_check<H: Hamiltonian + ?Sized>(
    chart: &str,
    system: &H,
    n_samples: usize,
    seed: u64,
    mut sample: impl FnMut(&mut ChaCha8Rng) -> Vec<f64>,
) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nq = system.n_q();
    let mut report = GradCheckReport {
        chart: chart.to_string(),
        seed,
        samples: n_samples,
        max_rel_err: 0.0,
        worst_state: Vec::new(),
        worst_component: 0,
        per_component: vec![0.0; 2 * nq],
    };
    let mut dy = vec![0.0; system.dim()];
    let mut curv = vec![0.0; nq];
    for _ in 0..n_samples {
        let y = sample(&mut rng);
        system.rhs(0.0, &y, &mut dy);
        system.curvature(&y, &mut curv);
        let grad = central_gradient(system, &y, 2 * nq);
        // Canonical prediction from the Hamiltonian.
        let mut b = vec![0.0; 2 * nq];
        let mut a = vec![0.0; 2 * nq];
        for i in 0..nq {
            b[i] = grad[nq + i];
            b[nq + i] = -grad[i];
            a[i] = dy[i];
            a[nq + i] = dy[nq + i] - curv[i];
        }
        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..2 * nq {
            let floor = (1e-3 * scale).max(1e-12);
            let err = (a[i] - b[i]).abs() / b[i].abs().max(floor);
            let err = if err.is_nan() { f64::INFINITY } else { err };
            report.per_component[i] = report.per_component[i].max(err);
            if err >= report.max_rel_err {
                report.max_rel_err = err;
                report.worst_state = y.clone();
                report.worst_component = i;
            }
        }
    }
    report
}

/// Central-difference gradient of the Hamiltonian in the first `n` components.
pub fn central_gradient<H: Hamiltonian + ?Sized>(system: &H, y: &[f64], n: usize) -> Vec<f64> {
    let mut work = y.to_vec();
    (0..n)
        .map(|i| {
            let h = FD_STEP * y[i].abs().max(1.0);
            work[i] = y[i] + h;
            let fp = system.energy(&work);
            work[i] = y[i] - h;
            let fm = system.energy(&work);
            work[i] = y[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Outcome of a cross-chart trajectory comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub max_distance: f64,
    pub worst_time: f64,
    pub compared: usize,
    /// Samples that could not be mapped into the target chart or fall
    /// outside the reference window.
    pub out_of_chart: usize,
}

/// Sup-distance between mapped samples of one trajectory and a reference
/// trajectory evaluated at the same physical times.
///
/// `samples` yields `(physical time, state already mapped to the reference
/// chart)` or `None` for samples that are out of chart; `reference` evaluates
/// the reference trajectory (normally its dense output, canonically
/// normalized) at a physical time.
pub fn cross_chart_compare(
    samples: impl IntoIterator<Item = Option<(f64, Vec<f64>)>>,
    reference: impl Fn(f64) -> Option<Vec<f64>>,
    distance: impl Fn(&[f64], &[f64]) -> f64,
) -> CompareReport {
    let mut report = CompareReport { max_distance: 0.0, worst_time: f64::NAN, compared: 0, out_of_chart: 0 };
    for s in samples {
        let Some((t, mapped)) = s else {
            report.out_of_chart += 1;
            continue;
        };
        let Some(r) = reference(t) else {
            report.out_of_chart += 1;
            continue;
        };
        let d = distance(&mapped, &r);
        let d = if d.is_nan() { f64::INFINITY } else { d };
        report.compared += 1;
        if d >= report.max_distance {
            report.max_distance = d;
            report.worst_time = t;
        }
    }
    report
}

/// Max-norm distance between two real vectors of equal length.
pub fn max_abs_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Histogram of projective preimage counts over random shapes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringReport {
    pub seed: u64,
    pub samples: usize,
    /// `(preimage count, number of shapes)` pairs, sorted by count.
    pub histogram: Vec<(usize, usize)>,
    /// Preimage counts at the three binary-collision shapes.
    pub collision_counts: [usize; 3],
    /// Smallest projective separation between distinct preimages of one shape.
    pub min_separation: f64,
}

/// Draw shapes uniformly on the round shape sphere and count their
/// projective preimages on the regularized shape sphere.
pub fn covering_degree_estimate(masses: &Masses, n_samples: usize, seed: u64) -> CoveringReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = std::collections::BTreeMap::new();
    let mut min_sep = f64::INFINITY;
    for _ in 0..n_samples {
        let x = random_round_shape(masses, &mut rng);
        let pre = lemaitre_preimages(&x, masses);
        min_sep = min_sep.min(pre.min_separation);
        *counts.entry(pre.points.len()).or_insert(0usize) += 1;
    }
    let shapes = collision_shapes(masses);
    let collision_counts = shapes.map(|x| lemaitre_preimages(&x, masses).points.len());
    CoveringReport {
        seed,
        samples: n_samples,
        histogram: counts.into_iter().collect(),
        collision_counts,
        min_separation: min_sep,
    }
}

/// Uniform sample in `[-a, a]`.
pub fn uniform(rng: &mut impl Rng, a: f64) -> f64 {
    rng.gen_range(-a..a)
}
