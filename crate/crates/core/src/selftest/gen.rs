//! Random instances for the randomized suites.

use rand::Rng;

use crate::model::{AffinePiece, RewardFunction, WeightDistribution};
use crate::value_dist::DiscreteValueDistribution;

/// Random distribution on `[0, c_max]` with `1..=max_atoms` atoms. About a
/// third of the draws put atoms on a coarse lattice so ties and coincident
/// breakpoints show up.
pub fn random_dist<R: Rng + ?Sized>(rng: &mut R, max_atoms: usize, c_max: f64) -> DiscreteValueDistribution {
    let n = rng.random_range(1..=max_atoms);
    let lattice = rng.random_bool(0.3);
    let atoms = (0..n)
        .map(|_| {
            if lattice {
                rng.random_range(0..=20) as f64 * 0.05 * c_max
            } else {
                rng.random::<f64>() * c_max
            }
        })
        .collect();
    let weights = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    DiscreteValueDistribution::new(atoms, weights, c_max).expect("valid random distribution")
}

/// Moves every atom by up to `scale` and jitters the weights.
pub fn perturb<R: Rng + ?Sized>(rng: &mut R, d: &DiscreteValueDistribution, scale: f64) -> DiscreteValueDistribution {
    let c_max = d.c_max();
    let atoms = d
        .atoms()
        .iter()
        .map(|a| (a + rng.random_range(-scale..=scale)).clamp(0.0, c_max))
        .collect();
    let weights = d
        .weights()
        .iter()
        .map(|w| w * (1.0 + rng.random_range(-0.5..0.5) * scale.min(1.0)))
        .collect();
    DiscreteValueDistribution::new(atoms, weights, c_max).expect("valid perturbation")
}

/// A pair on `[0, 1]`: independent, a small perturbation, or a shift.
pub fn random_pair<R: Rng + ?Sized>(rng: &mut R, max_atoms: usize) -> (DiscreteValueDistribution, DiscreteValueDistribution) {
    let d = random_dist(rng, max_atoms, 1.0);
    let dp = match rng.random_range(0..3) {
        0 => random_dist(rng, max_atoms, 1.0),
        1 => {
            let scale = rng.random_range(0.001..0.2);
            perturb(rng, &d, scale)
        }
        _ => d.shift_plus_eps(rng.random_range(0.0..0.2)).expect("eps >= 0"),
    };
    (d, dp)
}

pub fn random_weights<R: Rng + ?Sized>(rng: &mut R, max_atoms: usize, dim: usize) -> WeightDistribution {
    let k = rng.random_range(1..=max_atoms);
    let atoms = (0..k).map(|_| random_point(rng, dim)).collect();
    let weights = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    WeightDistribution::new(atoms, weights).expect("valid random weights")
}

pub fn random_point<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random::<f64>()).collect()
}

/// Linear, gate or max-affine reward in dimension `dim`.
pub fn random_reward<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> RewardFunction {
    match rng.random_range(0..3) {
        0 if dim >= 2 => RewardFunction::gate(dim).expect("dim >= 2"),
        1 => {
            let pieces = (0..rng.random_range(1..=3))
                .map(|_| AffinePiece {
                    slope: random_point(rng, dim),
                    offset: rng.random_range(-0.2..0.2),
                    context_slope: random_point(rng, dim),
                })
                .collect();
            RewardFunction::max_affine(dim, pieces, 2.0 * dim as f64).expect("valid pieces")
        }
        _ => RewardFunction::linear(dim).expect("dim >= 1"),
    }
}

/// Opening costs in `[0, 0.4 c_max]`, some exactly zero.
pub fn random_costs<R: Rng + ?Sized>(rng: &mut R, n: usize, c_max: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if rng.random_bool(0.1) {
                0.0
            } else {
                rng.random_range(0.0..0.4) * c_max
            }
        })
        .collect()
}
