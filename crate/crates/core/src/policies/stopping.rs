//! Optimal stopping with backward-induction thresholds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::value_dist::DiscreteValueDistribution;

/// Accept reward `i` iff `r_i >= thresholds[i]`; the last threshold is 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingPolicy {
    pub thresholds: Vec<f64>,
}

/// `tau_n = 0`, `tau_i = E[max{tau_{i+1}, r_{i+1}}]`.
pub fn stopping_thresholds(dists: &[DiscreteValueDistribution]) -> Result<StoppingPolicy> {
    if dists.is_empty() {
        return Err(Error::arg("dists", "at least one distribution required"));
    }
    let n = dists.len();
    let mut thresholds = vec![0.0; n];
    for i in (0..n - 1).rev() {
        thresholds[i] = dists[i + 1].capped_expectation(thresholds[i + 1]);
    }
    Ok(StoppingPolicy { thresholds })
}

/// Expected accepted reward of a threshold policy, by backward evaluation.
/// Falling through every threshold yields 0.
pub fn evaluate_stopping(dists: &[DiscreteValueDistribution], policy: &StoppingPolicy) -> Result<f64> {
    if dists.len() != policy.thresholds.len() {
        return Err(Error::LengthMismatch {
            what: "distributions vs thresholds",
            left: dists.len(),
            right: policy.thresholds.len(),
        });
    }
    let mut after = 0.0;
    for (d, &tau) in dists.iter().zip(&policy.thresholds).rev() {
        after = d
            .iter()
            .map(|(a, w)| w * if a >= tau { a } else { after })
            .sum();
    }
    Ok(after)
}
