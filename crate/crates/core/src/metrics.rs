//! Exact distances between discrete value distributions.

use crate::value_dist::DiscreteValueDistribution;

/// Bisection stops once the bracket is narrower than this.
pub const LEVY_TOL: f64 = 1e-9;

/// `sup_c |E_D max{c, r} - E_D' max{c, r}|` over `c in [0, c_max]`.
///
/// The gap is piecewise linear in `c` with breakpoints at atoms, so
/// evaluating at every atom and at both endpoints is exact; the grid of
/// step `resolution` is evaluated as well.
pub fn capped_gap_sup(
    d: &DiscreteValueDistribution,
    dp: &DiscreteValueDistribution,
    resolution: f64,
) -> f64 {
    let c_max = d.c_max().max(dp.c_max());
    let gap = |c: f64| (d.capped_expectation(c) - dp.capped_expectation(c)).abs();
    let mut best = gap(0.0).max(gap(c_max));
    for &a in d.atoms().iter().chain(dp.atoms()) {
        best = best.max(gap(a));
    }
    if resolution > 0.0 && resolution.is_finite() {
        let steps = (c_max / resolution).ceil() as usize;
        for i in 0..=steps {
            best = best.max(gap((i as f64 * resolution).min(c_max)));
        }
    }
    best
}

/// `sup_z G(z) - F(z + shift)` over all real `z`.
///
/// Both functions are right-continuous steps, so the difference is constant
/// between consecutive breakpoints `{atoms of G} ∪ {atoms of F - shift}` and
/// the supremum is attained at one of them (or is 0 far to the left).
fn max_excess(g: &DiscreteValueDistribution, f: &DiscreteValueDistribution, shift: f64) -> f64 {
    let mut best: f64 = 0.0;
    for (i, &a) in g.atoms().iter().enumerate() {
        best = best.max(g.cumulative_at(i) - f.cdf(a + shift));
    }
    for (k, &b) in f.atoms().iter().enumerate() {
        // At z = b - shift the shifted F has just jumped to its value at b.
        best = best.max(g.cdf(b - shift) - f.cumulative_at(k));
    }
    best
}

fn levy_feasible(d: &DiscreteValueDistribution, dp: &DiscreteValueDistribution, eps: f64) -> bool {
    max_excess(dp, d, eps) <= eps && max_excess(d, dp, eps) <= eps
}

/// Lévy distance `inf{eps : F(z - eps) - eps <= G(z) <= F(z + eps) + eps
/// for all z}`, found by bisection to [`LEVY_TOL`].
pub fn levy_distance(d: &DiscreteValueDistribution, dp: &DiscreteValueDistribution) -> f64 {
    if levy_feasible(d, dp, 0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > LEVY_TOL {
        let mid = 0.5 * (lo + hi);
        if levy_feasible(d, dp, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Brute-force Lévy distance: scans `eps` over multiples of `grid_step` and
/// checks the defining inequalities on a lattice of the same step.
///
/// Written against nothing but direct CDF sums, so it can serve as an
/// independent check of [`levy_distance`]. Agrees with it to within
/// `2 * grid_step`.
pub fn levy_distance_oracle(
    d: &DiscreteValueDistribution,
    dp: &DiscreteValueDistribution,
    grid_step: f64,
) -> f64 {
    assert!(grid_step > 0.0, "grid_step must be positive");
    let cdf = |dist: &DiscreteValueDistribution, z: f64| -> f64 {
        dist.iter().filter(|(a, _)| *a <= z).map(|(_, w)| w).sum()
    };
    let lo_atom = d.min_atom().min(dp.min_atom());
    let hi_atom = d.max_atom().max(dp.max_atom());
    let pad = (1.0 / grid_step).ceil() as i64 + 2;
    let i_min = (lo_atom / grid_step).floor() as i64 - pad;
    let i_max = (hi_atom / grid_step).ceil() as i64 + pad;
    let len = (i_max - i_min + 1) as usize;
    let z = |i: usize| (i_min + i as i64) as f64 * grid_step;
    let f_vals: Vec<f64> = (0..len).map(|i| cdf(d, z(i))).collect();
    let g_vals: Vec<f64> = (0..len).map(|i| cdf(dp, z(i))).collect();
    let at = |vals: &[f64], i: i64| -> f64 {
        if i < 0 {
            0.0
        } else if i as usize >= vals.len() {
            1.0
        } else {
            vals[i as usize]
        }
    };

    let max_k = (1.0 / grid_step).ceil() as i64 + 1;
    for k in 0..=max_k {
        let eps = k as f64 * grid_step;
        let ok = (0..len as i64).all(|i| {
            let g = g_vals[i as usize];
            at(&f_vals, i - k) - eps <= g + 1e-12 && g <= at(&f_vals, i + k) + eps + 1e-12
        });
        if ok {
            return eps;
        }
    }
    max_k as f64 * grid_step
}

/// Wasserstein-1 distance: the area between the two CDFs.
pub fn wasserstein_distance(d: &DiscreteValueDistribution, dp: &DiscreteValueDistribution) -> f64 {
    let mut points: Vec<f64> = d.atoms().iter().chain(dp.atoms()).copied().collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    points
        .windows(2)
        .map(|w| (d.cdf(w[0]) - dp.cdf(w[0])).abs() * (w[1] - w[0]))
        .sum()
}
