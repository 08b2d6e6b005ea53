//! The capped squared loss.
//!
//! For a hypothesis `V'`, a sample `(x, y)` and a cap grid `C`, the loss is
//!
//! ```text
//! l(V', (x, y)) = sum_{c in C} (E_{v ~ V'} max{c, f(v, x)} - max{c, y})^2
//! ```
//!
//! It regresses every capped expectation on the grid at once. At a fixed
//! context, the excess true loss of `V'` over the ground truth equals the
//! sum of squared capped-expectation gaps ([`loss_gap_decomposition`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LabeledSample, RewardFunction, WeightDistribution};

/// Caps `{0, eps, 2 eps, ...}` strictly below `c_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapGrid {
    epsilon: f64,
    c_max: f64,
    values: Vec<f64>,
}

impl CapGrid {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Builds the cap grid for range `c_max` and step `epsilon`.
pub fn cap_grid(c_max: f64, epsilon: f64) -> Result<CapGrid> {
    if !(c_max > 0.0 && c_max.is_finite()) {
        return Err(Error::arg("c_max", format!("must be positive, got {c_max}")));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::arg("epsilon", format!("must be positive, got {epsilon}")));
    }
    if epsilon > c_max {
        return Err(Error::arg(
            "epsilon",
            format!("must not exceed c_max = {c_max}, got {epsilon}"),
        ));
    }
    // Multiples of eps strictly below c_max; the slack keeps c_max itself out
    // when c_max / eps is integral up to rounding.
    let count = ((c_max / epsilon) - 1e-9).ceil().max(1.0) as usize;
    let values = (0..count).map(|i| i as f64 * epsilon).collect();
    Ok(CapGrid {
        epsilon,
        c_max,
        values,
    })
}

fn check_hypothesis(v: &WeightDistribution, f: &RewardFunction) -> Result<()> {
    f.check_dim(v.dim())
}

/// Images `f(v_i, x)` of the hypothesis atoms.
fn images(v: &WeightDistribution, f: &RewardFunction, x: &[f64]) -> Vec<f64> {
    v.atoms().iter().map(|a| f.eval_unchecked(a, x)).collect()
}

/// `E_V max{c, f(v, x)}` for every cap, given the atom images.
fn capped_expectations(images: &[f64], weights: &[f64], grid: &CapGrid) -> Vec<f64> {
    grid.values
        .iter()
        .map(|&c| {
            images
                .iter()
                .zip(weights)
                .map(|(r, w)| w * r.max(c))
                .sum()
        })
        .collect()
}

fn loss_from_expectations(expect: &[f64], y: f64, grid: &CapGrid) -> f64 {
    expect
        .iter()
        .zip(&grid.values)
        .map(|(e, &c)| {
            let diff = e - y.max(c);
            diff * diff
        })
        .sum()
}

/// Capped squared loss of `v` on one sample.
pub fn sample_loss(
    v: &WeightDistribution,
    sample: &LabeledSample,
    f: &RewardFunction,
    grid: &CapGrid,
) -> Result<f64> {
    check_hypothesis(v, f)?;
    f.check_dim(sample.context.len())?;
    let img = images(v, f, &sample.context);
    let expect = capped_expectations(&img, v.weights(), grid);
    Ok(loss_from_expectations(&expect, sample.label, grid))
}

/// Mean capped squared loss over `samples`, summed in sample order.
pub fn empirical_loss(
    v: &WeightDistribution,
    samples: &[LabeledSample],
    f: &RewardFunction,
    grid: &CapGrid,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    check_hypothesis(v, f)?;
    let mut total = 0.0;
    for s in samples {
        f.check_dim(s.context.len())?;
        let img = images(v, f, &s.context);
        let expect = capped_expectations(&img, v.weights(), grid);
        total += loss_from_expectations(&expect, s.label, grid);
    }
    Ok(total / samples.len() as f64)
}

/// `L^x(V')`: the expected capped squared loss of `hypothesis` when labels
/// are generated from `truth` at context `x`. Exact, since `truth` is
/// discrete.
pub fn true_loss_at_context(
    hypothesis: &WeightDistribution,
    truth: &WeightDistribution,
    f: &RewardFunction,
    x: &[f64],
    grid: &CapGrid,
) -> Result<f64> {
    check_hypothesis(hypothesis, f)?;
    check_hypothesis(truth, f)?;
    f.check_dim(x.len())?;
    let img = images(hypothesis, f, x);
    let expect = capped_expectations(&img, hypothesis.weights(), grid);
    Ok(truth
        .atoms()
        .iter()
        .zip(truth.weights())
        .map(|(v, w)| w * loss_from_expectations(&expect, f.eval_unchecked(v, x), grid))
        .sum())
}

/// Squared capped-expectation gap `(E_{V'} max{c, f} - E_{V*} max{c, f})^2`
/// for every cap. Sums to `L^x(V') - L^x(V*)`.
pub fn loss_gap_decomposition(
    hypothesis: &WeightDistribution,
    truth: &WeightDistribution,
    f: &RewardFunction,
    x: &[f64],
    grid: &CapGrid,
) -> Result<Vec<f64>> {
    check_hypothesis(hypothesis, f)?;
    check_hypothesis(truth, f)?;
    f.check_dim(x.len())?;
    let ours = capped_expectations(&images(hypothesis, f, x), hypothesis.weights(), grid);
    let theirs = capped_expectations(&images(truth, f, x), truth.weights(), grid);
    Ok(ours
        .iter()
        .zip(&theirs)
        .map(|(a, b)| (a - b) * (a - b))
        .collect())
}

/// A subgradient of [`empirical_loss`] with respect to the atom coordinates
/// of a uniform-weight hypothesis, as a `k x d` matrix.
///
/// At a kink (`f(v_i, x) == c`) the cap-active branch is taken.
pub fn loss_subgradient(
    v: &WeightDistribution,
    samples: &[LabeledSample],
    f: &RewardFunction,
    grid: &CapGrid,
) -> Result<Vec<Vec<f64>>> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    check_hypothesis(v, f)?;
    if !v.is_uniform() {
        let target = 1.0 / v.len() as f64;
        let (index, &weight) = v
            .weights()
            .iter()
            .enumerate()
            .find(|(_, w)| (**w - target).abs() > 1e-12)
            .expect("non-uniform weight exists");
        return Err(Error::NonUniformWeights { index, weight });
    }
    for s in samples {
        f.check_dim(s.context.len())?;
    }
    let mut grad = vec![vec![0.0; v.dim()]; v.len()];
    accumulate_subgradient(v.atoms(), samples, f, grid, &mut grad);
    Ok(grad)
}

/// Shared kernel for [`loss_subgradient`] and the learner. Overwrites
/// `grad` with the mean subgradient; returns the empirical loss at `atoms`.
pub(crate) fn accumulate_subgradient(
    atoms: &[Vec<f64>],
    samples: &[LabeledSample],
    f: &RewardFunction,
    grid: &CapGrid,
    grad: &mut [Vec<f64>],
) -> f64 {
    let k = atoms.len();
    let d = f.dim;
    let inv_k = 1.0 / k as f64;
    let weights = vec![inv_k; k];
    for row in grad.iter_mut() {
        row.iter_mut().for_each(|g| *g = 0.0);
    }
    let mut img = vec![0.0; k];
    let mut fgrad = vec![vec![0.0; d]; k];
    // Per-atom multiplier sum_c 2 (E - max{c, y}) / k * 1{f_i >= c}.
    let mut scale = vec![0.0; k];
    let mut total = 0.0;

    for s in samples {
        for (i, a) in atoms.iter().enumerate() {
            img[i] = f.eval_unchecked(a, &s.context);
            f.grad_v(a, &s.context, &mut fgrad[i]);
        }
        scale.iter_mut().for_each(|x| *x = 0.0);
        for &c in &grid.values {
            let e: f64 = img.iter().zip(&weights).map(|(r, w)| w * r.max(c)).sum();
            let resid = e - s.label.max(c);
            total += resid * resid;
            let coeff = 2.0 * resid * inv_k;
            for (sc, &r) in scale.iter_mut().zip(&img) {
                if r >= c {
                    *sc += coeff;
                }
            }
        }
        for i in 0..k {
            if scale[i] != 0.0 {
                for (g, fg) in grad[i].iter_mut().zip(&fgrad[i]) {
                    *g += scale[i] * fg;
                }
            }
        }
    }
    let m = samples.len() as f64;
    for row in grad.iter_mut() {
        row.iter_mut().for_each(|g| *g /= m);
    }
    total / m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(x: f64, y: f64) -> LabeledSample {
        LabeledSample {
            context: vec![x],
            label: y,
        }
    }

    fn coin() -> WeightDistribution {
        WeightDistribution::uniform(vec![vec![0.0], vec![1.0]]).unwrap()
    }

    #[test]
    fn grid_examples() {
        assert_eq!(cap_grid(1.0, 0.25).unwrap().values(), &[0.0, 0.25, 0.5, 0.75]);
        assert_eq!(cap_grid(1.0, 1.0).unwrap().values(), &[0.0]);
        let g = cap_grid(1.0, 0.3).unwrap();
        assert_eq!(g.len(), 4);
        assert!((g.values()[3] - 0.9).abs() < 1e-15);
        assert_eq!(cap_grid(1.0, 0.1).unwrap().len(), 10);
        assert!(cap_grid(0.0, 0.1).is_err());
        assert!(cap_grid(1.0, -0.1).is_err());
        assert!(cap_grid(1.0, 2.0).is_err());
    }

    #[test]
    fn sample_loss_examples() {
        let f = RewardFunction::linear(1).unwrap();
        let grid = cap_grid(1.0, 0.5).unwrap();
        let v = WeightDistribution::point(vec![0.4]).unwrap();
        assert_eq!(sample_loss(&v, &sample(1.0, 0.4), &f, &grid).unwrap(), 0.0);

        let l = sample_loss(&coin(), &sample(1.0, 0.5), &f, &grid).unwrap();
        assert!((l - 0.0625).abs() < 1e-15);
        let l = sample_loss(&coin(), &sample(1.0, 1.0), &f, &grid).unwrap();
        assert!((l - 0.3125).abs() < 1e-15);
        assert!(sample_loss(&coin(), &sample_2d(), &f, &grid).is_err());
    }

    fn sample_2d() -> LabeledSample {
        LabeledSample {
            context: vec![1.0, 1.0],
            label: 0.5,
        }
    }

    #[test]
    fn empirical_loss_examples() {
        let f = RewardFunction::linear(1).unwrap();
        let grid = cap_grid(1.0, 0.5).unwrap();
        let s = vec![sample(1.0, 0.5), sample(1.0, 1.0)];
        assert!((empirical_loss(&coin(), &s, &f, &grid).unwrap() - 0.1875).abs() < 1e-15);
        let copies = vec![sample(1.0, 1.0); 7];
        assert!((empirical_loss(&coin(), &copies, &f, &grid).unwrap() - 0.3125).abs() < 1e-15);
        assert!(matches!(
            empirical_loss(&coin(), &[], &f, &grid),
            Err(Error::EmptySamples)
        ));
    }

    #[test]
    fn true_loss_examples() {
        let f = RewardFunction::linear(1).unwrap();
        let grid = cap_grid(1.0, 0.5).unwrap();
        let p = WeightDistribution::point(vec![0.3]).unwrap();
        assert_eq!(true_loss_at_context(&p, &p, &f, &[0.7], &grid).unwrap(), 0.0);
        let l = true_loss_at_context(&coin(), &coin(), &f, &[1.0], &grid).unwrap();
        assert!((l - 0.3125).abs() < 1e-15);
        let half = WeightDistribution::point(vec![0.5]).unwrap();
        let l = true_loss_at_context(&half, &coin(), &f, &[1.0], &grid).unwrap();
        assert!((l - 0.375).abs() < 1e-15);
    }

    #[test]
    fn gap_decomposition_examples() {
        let f = RewardFunction::linear(1).unwrap();
        let grid = cap_grid(1.0, 0.5).unwrap();
        let half = WeightDistribution::point(vec![0.5]).unwrap();
        let gaps = loss_gap_decomposition(&half, &coin(), &f, &[1.0], &grid).unwrap();
        assert_eq!(gaps.len(), 2);
        assert!(gaps[0].abs() < 1e-15);
        assert!((gaps[1] - 0.0625).abs() < 1e-15);
        let same = loss_gap_decomposition(&coin(), &coin(), &f, &[1.0], &grid).unwrap();
        assert!(same.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn subgradient_vanishes_at_smooth_minimum() {
        let f = RewardFunction::linear(1).unwrap();
        let grid = cap_grid(1.0, 0.25).unwrap();
        let v = WeightDistribution::point(vec![0.6]).unwrap();
        let s = vec![sample(1.0, 0.6), sample(0.5, 0.3)];
        let g = loss_subgradient(&v, &s, &f, &grid).unwrap();
        assert!(g[0][0].abs() < 1e-15);
    }

    #[test]
    fn subgradient_rejects_non_uniform() {
        let f = RewardFunction::linear(1).unwrap();
        let grid = cap_grid(1.0, 0.5).unwrap();
        let v = WeightDistribution::new(vec![vec![0.1], vec![0.2]], vec![0.3, 0.7]).unwrap();
        assert!(matches!(
            loss_subgradient(&v, &[sample(1.0, 0.5)], &f, &grid),
            Err(Error::NonUniformWeights { .. })
        ));
    }

    // The loss is not convex along segments in general: at y = 0.75 with
    // caps {0, 0.5}, the c = 0.5 term adds a concave kink at v = 0.5.
    #[test]
    fn sample_loss_is_not_convex_in_general() {
        let f = RewardFunction::linear(1).unwrap();
        let grid = cap_grid(1.0, 0.5).unwrap();
        let s = sample(1.0, 0.75);
        let at = |v: f64| {
            sample_loss(&WeightDistribution::point(vec![v]).unwrap(), &s, &f, &grid).unwrap()
        };
        let mid = at(0.5);
        let avg = 0.5 * (at(0.4) + at(0.6));
        assert!((mid - 0.125).abs() < 1e-12);
        assert!((avg - 0.115).abs() < 1e-12);
        assert!(mid > avg + 1e-3);
    }
}
