//! Pandora's box with fair caps.
//!
//! Each box hides a reward drawn from its distribution and costs `o_i` to
//! open. The fair cap `sigma_i` solves `E[max{0, r_i - sigma_i}] = o_i`;
//! boxes are opened in decreasing cap order while the best reward seen is
//! strictly below the next cap. The walk-away value is 0.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::value_dist::DiscreteValueDistribution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PandoraBox {
    pub dist: DiscreteValueDistribution,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PandoraInstance {
    pub boxes: Vec<PandoraBox>,
}

impl PandoraInstance {
    pub fn new(dists: Vec<DiscreteValueDistribution>, costs: &[f64]) -> Result<Self> {
        if dists.len() != costs.len() {
            return Err(Error::LengthMismatch {
                what: "distributions vs opening costs",
                left: dists.len(),
                right: costs.len(),
            });
        }
        if let Some(&o) = costs.iter().find(|o| !(**o >= 0.0 && o.is_finite())) {
            return Err(Error::arg("cost", format!("opening costs must be >= 0, got {o}")));
        }
        Ok(Self {
            boxes: dists
                .into_iter()
                .zip(costs)
                .map(|(dist, &cost)| PandoraBox { dist, cost })
                .collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Number of joint outcomes, saturating.
    pub fn outcome_count(&self) -> u64 {
        self.boxes
            .iter()
            .fold(1u64, |acc, b| acc.saturating_mul(b.dist.len() as u64))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PandoraPolicy {
    pub fair_caps: Vec<f64>,
    /// Box indices by decreasing cap, ties to the lower index.
    pub visit_order: Vec<usize>,
}

impl PandoraPolicy {
    /// Policy that visits boxes by decreasing `caps`.
    pub fn from_caps(caps: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..caps.len()).collect();
        order.sort_by(|&a, &b| caps[b].total_cmp(&caps[a]));
        Self {
            fair_caps: caps,
            visit_order: order,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.fair_caps.len() != n || self.visit_order.len() != n {
            return Err(Error::LengthMismatch {
                what: "policy vs boxes",
                left: self.fair_caps.len(),
                right: n,
            });
        }
        let mut seen = vec![false; n];
        for &i in &self.visit_order {
            if i >= n || seen[i] {
                return Err(Error::arg("visit_order", "must be a permutation"));
            }
            seen[i] = true;
        }
        Ok(())
    }
}

/// Solves `sum_i w_i max{0, a_i - sigma} = o` for `sigma`.
///
/// Returns the largest atom for `o = 0`; below the smallest atom the
/// left-hand side is `E[r] - sigma`, so large costs give `E[r] - o`, which
/// may be negative.
pub fn fair_cap(d: &DiscreteValueDistribution, o: f64) -> Result<f64> {
    if !(o >= 0.0 && o.is_finite()) {
        return Err(Error::arg("o", format!("opening cost must be >= 0, got {o}")));
    }
    if o == 0.0 {
        return Ok(d.max_atom());
    }
    let atoms = d.atoms();
    let weights = d.weights();
    // Walk segments [a_{j-1}, a_j] from the top. On that segment only atoms
    // a_j.. contribute: g(sigma) = upper_mass_value - sigma * upper_mass.
    let mut upper_mass = 0.0;
    let mut upper_value = 0.0;
    for j in (0..atoms.len()).rev() {
        upper_mass += weights[j];
        upper_value += weights[j] * atoms[j];
        let left = if j == 0 { f64::NEG_INFINITY } else { atoms[j - 1] };
        let g_left = if j == 0 {
            f64::INFINITY
        } else {
            upper_value - left * upper_mass
        };
        if o <= g_left {
            return Ok((upper_value - o) / upper_mass);
        }
    }
    unreachable!("the lowest segment is unbounded")
}

/// Fair caps and visiting order for every box.
pub fn weitzman_policy(inst: &PandoraInstance) -> Result<PandoraPolicy> {
    let caps = inst
        .boxes
        .iter()
        .map(|b| fair_cap(&b.dist, b.cost))
        .collect::<Result<Vec<_>>>()?;
    Ok(PandoraPolicy::from_caps(caps))
}

/// Limits for [`evaluate_pandora`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalBudget {
    /// Largest joint outcome count evaluated exactly.
    pub exact_budget: u64,
    /// Monte Carlo draws beyond the exact budget.
    pub mc_draws: usize,
}

impl Default for EvalBudget {
    fn default() -> Self {
        Self {
            exact_budget: 1_000_000,
            mc_draws: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PandoraEvaluation {
    pub value: f64,
    pub exact: bool,
    /// Standard error of the Monte Carlo estimate; `None` when exact.
    pub std_error: Option<f64>,
}

fn exact_value(inst: &PandoraInstance, policy: &PandoraPolicy, pos: usize, best: f64) -> f64 {
    let Some(&i) = policy.visit_order.get(pos) else {
        return best;
    };
    if best >= policy.fair_caps[i] {
        return best;
    }
    let b = &inst.boxes[i];
    let cont: f64 = b
        .dist
        .iter()
        .map(|(a, w)| w * exact_value(inst, policy, pos + 1, best.max(a)))
        .sum();
    cont - b.cost
}

fn simulate<R: Rng + ?Sized>(inst: &PandoraInstance, policy: &PandoraPolicy, rng: &mut R) -> f64 {
    let mut best: f64 = 0.0;
    let mut paid = 0.0;
    for &i in &policy.visit_order {
        if best >= policy.fair_caps[i] {
            break;
        }
        paid += inst.boxes[i].cost;
        best = best.max(inst.boxes[i].dist.sample(rng));
    }
    best - paid
}

/// Expected net reward (best opened value minus costs paid) of running
/// `policy` on `inst`.
///
/// Exact when the joint outcome count fits `budget.exact_budget`, seeded
/// Monte Carlo otherwise.
pub fn evaluate_pandora<R: Rng + ?Sized>(
    inst: &PandoraInstance,
    policy: &PandoraPolicy,
    budget: &EvalBudget,
    rng: &mut R,
) -> Result<PandoraEvaluation> {
    policy.validate(inst.len())?;
    if inst.outcome_count() <= budget.exact_budget {
        return Ok(PandoraEvaluation {
            value: exact_value(inst, policy, 0, 0.0),
            exact: true,
            std_error: None,
        });
    }
    let n = budget.mc_draws.max(2);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        let r = simulate(inst, policy, rng);
        sum += r;
        sum_sq += r * r;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    Ok(PandoraEvaluation {
        value: mean,
        exact: false,
        std_error: Some((var / nf).sqrt()),
    })
}
