//! Brute-force reference evaluators.
//!
//! These enumerate every joint outcome and replay the policy literally.
//! They only read atoms and weights, nothing else from the library.

use crate::value_dist::DiscreteValueDistribution;

/// Calls `visit` with every outcome tuple and its probability.
fn for_each_outcome(dists: &[DiscreteValueDistribution], mut visit: impl FnMut(&[f64], f64)) {
    let n = dists.len();
    let mut idx = vec![0usize; n];
    let mut values = vec![0.0; n];
    loop {
        let mut p = 1.0;
        for (i, d) in dists.iter().enumerate() {
            values[i] = d.atoms()[idx[i]];
            p *= d.weights()[idx[i]];
        }
        visit(&values, p);
        // Mixed-radix increment.
        let mut i = 0;
        loop {
            if i == n {
                return;
            }
            idx[i] += 1;
            if idx[i] < dists[i].len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Expected net reward of opening boxes by decreasing `caps` (ties to the
/// lower index) while the best value seen is below the next cap.
pub fn pandora_value(dists: &[DiscreteValueDistribution], costs: &[f64], caps: &[f64]) -> f64 {
    let mut order: Vec<usize> = Vec::new();
    let mut left: Vec<usize> = (0..caps.len()).collect();
    while !left.is_empty() {
        let mut pick = 0;
        for j in 1..left.len() {
            if caps[left[j]] > caps[left[pick]] {
                pick = j;
            }
        }
        order.push(left.remove(pick));
    }
    let mut total = 0.0;
    for_each_outcome(dists, |values, p| {
        let mut best = 0.0_f64;
        let mut paid = 0.0;
        for &i in &order {
            if best >= caps[i] {
                break;
            }
            paid += costs[i];
            best = best.max(values[i]);
        }
        total += p * (best - paid);
    });
    total
}

/// Expected accepted reward: the first `r_i >= thresholds[i]`, else 0.
pub fn stopping_value(dists: &[DiscreteValueDistribution], thresholds: &[f64]) -> f64 {
    let mut total = 0.0;
    for_each_outcome(dists, |values, p| {
        let got = values
            .iter()
            .zip(thresholds)
            .find(|(r, t)| r >= t)
            .map_or(0.0, |(r, _)| *r);
        total += p * got;
    });
    total
}

/// `p` times the mass at or above `p`.
pub fn price_revenue(d: &DiscreteValueDistribution, p: f64) -> f64 {
    let mass: f64 = d
        .atoms()
        .iter()
        .zip(d.weights())
        .filter(|(a, _)| **a >= p)
        .map(|(_, w)| w)
        .sum();
    p * mass
}

/// Best revenue over prices `0, step, 2 step, ...` up to `c_max`.
pub fn grid_best_revenue(d: &DiscreteValueDistribution, step: f64) -> (f64, f64) {
    let steps = (d.c_max() / step).round() as usize;
    (0..=steps)
        .map(|i| {
            let p = i as f64 * step;
            (p, price_revenue(d, p))
        })
        .fold((0.0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
}
