//! Regularized empirical risk minimization over uniform-weight hypotheses.
//!
//! The hypothesis class is every uniform distribution on exactly `k` vectors
//! of `[0,1]^d`, viewed as a point of `[0,1]^{k d}`. [`learn`] minimizes
//! the empirical capped squared loss plus `lambda * ||V||^2` by projected
//! subgradient descent and keeps the best iterate it has seen.
//!
//! The module also carries the closed-form constants the guarantees are
//! stated in: the loss Lipschitz bound, the regularization weight, the
//! sample-size calculators and the support-size heuristic.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{accumulate_subgradient, cap_grid};
use crate::model::{LabeledSample, RewardFunction, WeightDistribution};

fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::arg(name, format!("must be positive, got {value}")))
    }
}

/// Lipschitz constant of the capped squared loss on uniform `k`-atom
/// hypotheses: `2 c_max^2 xi / (eps sqrt(k))`.
pub fn lipschitz_bound(c_max: f64, epsilon: f64, xi: f64, k: usize) -> Result<f64> {
    require_positive("c_max", c_max)?;
    require_positive("epsilon", epsilon)?;
    require_positive("xi", xi)?;
    if k == 0 {
        return Err(Error::arg("k", "must be positive"));
    }
    Ok(2.0 * c_max * c_max * xi / (epsilon * (k as f64).sqrt()))
}

/// `sqrt(2 rho^2 / (B^2 m))`.
pub fn regularization_lambda(rho: f64, b: f64, m: usize) -> Result<f64> {
    if rho.is_nan() || rho < 0.0 {
        return Err(Error::arg("rho", format!("must be non-negative, got {rho}")));
    }
    require_positive("B", b)?;
    if m == 0 {
        return Err(Error::arg("m", "must be at least 1"));
    }
    Ok((2.0 * rho * rho / (b * b * m as f64)).sqrt())
}

/// Ceiling that ignores float noise in the last few ulps, saturating at
/// `u128::MAX`.
fn ceil_count(x: f64) -> u128 {
    let y = (x * (1.0 - 1e-12)).ceil();
    if y >= u128::MAX as f64 {
        u128::MAX
    } else {
        y.max(0.0) as u128
    }
}

/// Samples sufficient for `L^x(V') <= L^x(V*) + 2 eps` with probability
/// `1 - delta`: `ceil(32 d xi^2 c_max^4 / (eps^4 delta^2))`.
pub fn required_samples_loss(d: usize, xi: f64, c_max: f64, epsilon: f64, delta: f64) -> u128 {
    let d = d as f64;
    ceil_count(32.0 * d * xi * xi * c_max.powi(4) / (epsilon.powi(4) * delta * delta))
}

/// Samples sufficient for capped-expectation error `sqrt(eps') + eps'` at
/// `eps' = eps^2`, i.e. [`required_samples_loss`] evaluated at `eps^2`.
pub fn required_samples_capped(d: usize, xi: f64, c_max: f64, epsilon: f64, delta: f64) -> u128 {
    required_samples_loss(d, xi, c_max, epsilon * epsilon, delta)
}

/// Samples sufficient for Lévy distance `eps`: the Lévy bound needs a
/// capped-expectation error of `eps^2 / 2`, which the loss bound delivers at
/// accuracy `(eps^2 / 2)^2`.
pub fn required_samples_levy(d: usize, xi: f64, c_max: f64, epsilon: f64, delta: f64) -> u128 {
    let half_sq = epsilon * epsilon / 2.0;
    required_samples_loss(d, xi, c_max, half_sq * half_sq, delta)
}

/// Support size for which a uniform distribution approximates any weight
/// distribution to within `eps` in true loss:
/// `ceil(2 (c^3 / eps^2) (d ln(d c) + (d + 1) ln(2 / eps)))`, at least 1.
pub fn support_size_heuristic(d: usize, c_max: f64, epsilon: f64) -> usize {
    let df = d as f64;
    let value = 2.0 * c_max.powi(3) / (epsilon * epsilon)
        * (df * (df * c_max).ln() + (df + 1.0) * (2.0 / epsilon).ln());
    if value.is_nan() || value <= 1.0 {
        1
    } else {
        (value * (1.0 - 1e-12)).ceil() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    /// `eta_t = eta0`.
    Constant,
    /// `eta_t = eta0 / sqrt(t)`.
    InvSqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterateSelection {
    /// Iterate with the lowest recorded regularized objective.
    Best,
    /// Average of all iterates.
    Average,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    /// Support size of the hypothesis.
    pub k: usize,
    /// Cap-grid step.
    pub epsilon: f64,
    pub iterations: usize,
    #[serde(default = "default_schedule")]
    pub step_schedule: StepSchedule,
    /// Base step size. Defaults to `B / rho` for the `InvSqrt` schedule and
    /// `B / (rho sqrt(T))` for the constant one.
    #[serde(default)]
    pub eta0: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub lambda_override: Option<f64>,
    #[serde(default = "default_selection")]
    pub selection: IterateSelection,
}

fn default_schedule() -> StepSchedule {
    StepSchedule::InvSqrt
}

fn default_selection() -> IterateSelection {
    IterateSelection::Best
}

impl LearnerConfig {
    pub fn new(k: usize, epsilon: f64, iterations: usize) -> Self {
        Self {
            k,
            epsilon,
            iterations,
            step_schedule: default_schedule(),
            eta0: None,
            seed: 0,
            lambda_override: None,
            selection: default_selection(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::arg("k", "must be at least 1"));
        }
        if self.iterations == 0 {
            return Err(Error::arg("iterations", "must be at least 1"));
        }
        require_positive("epsilon", self.epsilon)?;
        if let Some(eta) = self.eta0 {
            require_positive("eta0", eta)?;
        }
        if let Some(l) = self.lambda_override {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::arg("lambda_override", format!("must be >= 0, got {l}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnResult {
    pub learned: WeightDistribution,
    /// `(iteration, regularized objective)`; iteration 0 is the
    /// initialization.
    pub objective_trajectory: Vec<(usize, f64)>,
    pub selected_iteration: Option<usize>,
    pub selected_objective: f64,
    pub lambda_used: f64,
    pub rho_used: f64,
    pub eta0_used: f64,
}

impl LearnResult {
    pub fn best_recorded(&self) -> f64 {
        self.objective_trajectory
            .iter()
            .map(|(_, o)| *o)
            .fold(f64::INFINITY, f64::min)
    }
}

fn regularized(loss: f64, lambda: f64, atoms: &[Vec<f64>]) -> f64 {
    let norm_sq: f64 = atoms.iter().flatten().map(|c| c * c).sum();
    loss + lambda * norm_sq
}

/// Projected subgradient descent on `empirical_loss + lambda ||V||^2` over
/// `[0,1]^{k d}` with uniform weights `1/k`.
pub fn learn(
    samples: &[LabeledSample],
    f: &RewardFunction,
    cfg: &LearnerConfig,
) -> Result<LearnResult> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    for s in samples {
        f.check_dim(s.context.len())?;
    }
    let grid = cap_grid(f.c_max, cfg.epsilon)?;
    let k = cfg.k;
    let d = f.dim;
    let rho = lipschitz_bound(f.c_max, cfg.epsilon, f.xi, k)?;
    let b = ((k * d) as f64).sqrt();
    let lambda = match cfg.lambda_override {
        Some(l) => l,
        None => regularization_lambda(rho, b, samples.len())?,
    };
    let t_total = cfg.iterations;
    let eta0 = cfg.eta0.unwrap_or(match cfg.step_schedule {
        StepSchedule::InvSqrt => b / rho,
        StepSchedule::Constant => b / (rho * (t_total as f64).sqrt()),
    });

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = WeightDistribution::random_uniform(k, d, &mut rng)?;
    let mut atoms: Vec<Vec<f64>> = init.atoms().to_vec();
    let mut grad = vec![vec![0.0; d]; k];
    let mut trajectory = Vec::with_capacity(t_total + 1);
    let mut best_atoms = atoms.clone();
    let mut best_obj = f64::INFINITY;
    let mut best_iter = 0;
    let mut sum_atoms = vec![vec![0.0; d]; k];

    for t in 0..=t_total {
        let loss = accumulate_subgradient(&atoms, samples, f, &grid, &mut grad);
        let obj = regularized(loss, lambda, &atoms);
        trajectory.push((t, obj));
        if obj < best_obj {
            best_obj = obj;
            best_iter = t;
            best_atoms.clone_from(&atoms);
        }
        for (acc, a) in sum_atoms.iter_mut().zip(&atoms) {
            acc.iter_mut().zip(a).for_each(|(s, x)| *s += x);
        }
        if t == t_total {
            break;
        }
        let eta = match cfg.step_schedule {
            StepSchedule::Constant => eta0,
            StepSchedule::InvSqrt => eta0 / ((t + 1) as f64).sqrt(),
        };
        for (a, g) in atoms.iter_mut().zip(&grad) {
            for (x, gx) in a.iter_mut().zip(g) {
                *x = (*x - eta * (gx + 2.0 * lambda * *x)).clamp(0.0, 1.0);
            }
        }
    }

    let (learned_atoms, selected_iteration, selected_objective) = match cfg.selection {
        IterateSelection::Best => (best_atoms, Some(best_iter), best_obj),
        IterateSelection::Average => {
            let count = (t_total + 1) as f64;
            let avg: Vec<Vec<f64>> = sum_atoms
                .into_iter()
                .map(|a| a.into_iter().map(|x| (x / count).clamp(0.0, 1.0)).collect())
                .collect();
            let loss = accumulate_subgradient(&avg, samples, f, &grid, &mut grad);
            let obj = regularized(loss, lambda, &avg);
            (avg, None, obj)
        }
    };

    Ok(LearnResult {
        learned: WeightDistribution::uniform(learned_atoms)?,
        objective_trajectory: trajectory,
        selected_iteration,
        selected_objective,
        lambda_used: lambda,
        rho_used: rho,
        eta0_used: eta0,
    })
}
