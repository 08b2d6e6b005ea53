//! Optimal policies for pricing, Pandora's box and optimal stopping, with
//! exact evaluators and checks for strong monotonicity and stability.

mod pandora;
mod revenue;
mod stopping;

pub use pandora::{
    evaluate_pandora, fair_cap, weitzman_policy, EvalBudget, PandoraBox, PandoraEvaluation,
    PandoraInstance, PandoraPolicy,
};
pub use revenue::{optimal_price, revenue, PricePolicy};
pub use stopping::{evaluate_stopping, stopping_thresholds, StoppingPolicy};

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::levy_distance;
use crate::value_dist::DiscreteValueDistribution;

/// Slack used when comparing policy values.
pub const VALUE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Revenue,
    Pandora,
    Stopping,
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemKind::Revenue => "revenue",
            ProblemKind::Pandora => "pandora",
            ProblemKind::Stopping => "stopping",
        })
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "revenue" => Ok(ProblemKind::Revenue),
            "pandora" => Ok(ProblemKind::Pandora),
            "stopping" => Ok(ProblemKind::Stopping),
            other => Err(Error::arg(
                "problem",
                format!("unknown problem `{other}` (expected revenue, pandora or stopping)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    Price(PricePolicy),
    Pandora(PandoraPolicy),
    Stopping(StoppingPolicy),
}

/// Expected reward of a policy, with the Monte Carlo flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyValue {
    pub value: f64,
    pub exact: bool,
    pub std_error: Option<f64>,
}

impl PolicyValue {
    fn exact(value: f64) -> Self {
        Self {
            value,
            exact: true,
            std_error: None,
        }
    }
}

/// `gamma` for which each problem is `gamma`-stable.
///
/// Stopping uses `8n`: a Lévy distance of `eps / 4` costs at most `2n eps`.
pub fn stability_gamma(problem: ProblemKind, n: usize, c_max: f64) -> f64 {
    match problem {
        ProblemKind::Revenue => c_max + 1.0,
        ProblemKind::Pandora => 4.0 * n as f64,
        ProblemKind::Stopping => 8.0 * n as f64,
    }
}

fn single(dists: &[DiscreteValueDistribution]) -> Result<&DiscreteValueDistribution> {
    match dists {
        [d] => Ok(d),
        _ => Err(Error::arg(
            "dists",
            format!("revenue expects exactly one distribution, got {}", dists.len()),
        )),
    }
}

fn pandora_instance(dists: &[DiscreteValueDistribution], costs: Option<&[f64]>) -> Result<PandoraInstance> {
    PandoraInstance::new(dists.to_vec(), costs.ok_or(Error::MissingCosts)?)
}

/// Optimal policy for `dists`.
pub fn optimal_policy(
    problem: ProblemKind,
    dists: &[DiscreteValueDistribution],
    costs: Option<&[f64]>,
) -> Result<PolicySpec> {
    Ok(match problem {
        ProblemKind::Revenue => PolicySpec::Price(PricePolicy {
            price: optimal_price(single(dists)?).0,
        }),
        ProblemKind::Pandora => PolicySpec::Pandora(weitzman_policy(&pandora_instance(dists, costs)?)?),
        ProblemKind::Stopping => PolicySpec::Stopping(stopping_thresholds(dists)?),
    })
}

/// Expected reward of running `policy` when rewards follow `dists`.
pub fn evaluate_policy<R: Rng + ?Sized>(
    problem: ProblemKind,
    policy: &PolicySpec,
    dists: &[DiscreteValueDistribution],
    costs: Option<&[f64]>,
    budget: &EvalBudget,
    rng: &mut R,
) -> Result<PolicyValue> {
    match (problem, policy) {
        (ProblemKind::Revenue, PolicySpec::Price(p)) => Ok(PolicyValue::exact(revenue(single(dists)?, p.price))),
        (ProblemKind::Pandora, PolicySpec::Pandora(p)) => {
            let e = evaluate_pandora(&pandora_instance(dists, costs)?, p, budget, rng)?;
            Ok(PolicyValue {
                value: e.value,
                exact: e.exact,
                std_error: e.std_error,
            })
        }
        (ProblemKind::Stopping, PolicySpec::Stopping(p)) => Ok(PolicyValue::exact(evaluate_stopping(dists, p)?)),
        _ => Err(Error::arg("policy", format!("policy does not match problem {problem}"))),
    }
}

/// Optimal policy computed on the `eps`-shifted learned distributions.
pub fn deploy_learned(
    problem: ProblemKind,
    learned: &[DiscreteValueDistribution],
    eps: f64,
    costs: Option<&[f64]>,
) -> Result<PolicySpec> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::arg("eps", format!("must be >= 0, got {eps}")));
    }
    let shifted = learned
        .iter()
        .map(|d| d.shift_plus_eps(eps))
        .collect::<Result<Vec<_>>>()?;
    optimal_policy(problem, &shifted, costs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    /// Reward on `D` of the policy optimal for `D'`.
    pub lhs: f64,
    /// Optimal reward on `D'`.
    pub rhs: f64,
    pub exact: bool,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Largest Lévy distance over the pairs.
    pub eps: f64,
    pub opt_d: f64,
    pub opt_dp: f64,
    /// `gamma * eps`.
    pub bound: f64,
    pub exact: bool,
    /// Both `opt_d >= opt_dp - bound` and the reverse.
    pub holds: bool,
}

fn check_pairs(d: &[DiscreteValueDistribution], dp: &[DiscreteValueDistribution]) -> Result<()> {
    if d.len() != dp.len() {
        return Err(Error::LengthMismatch {
            what: "D vs D'",
            left: d.len(),
            right: dp.len(),
        });
    }
    Ok(())
}

fn optimal_value(
    problem: ProblemKind,
    dists: &[DiscreteValueDistribution],
    costs: Option<&[f64]>,
    rng: &mut ChaCha8Rng,
) -> Result<PolicyValue> {
    let pol = optimal_policy(problem, dists, costs)?;
    evaluate_policy(problem, &pol, dists, costs, &EvalBudget::default(), rng)
}

/// Checks that running the optimal policy of `dp` on `d` earns at least the
/// optimum of `dp`. Each `d[i]` must dominate `dp[i]`.
pub fn check_strong_monotonicity(
    problem: ProblemKind,
    d: &[DiscreteValueDistribution],
    dp: &[DiscreteValueDistribution],
    costs: Option<&[f64]>,
) -> Result<MonotonicityReport> {
    check_pairs(d, dp)?;
    for (index, (a, b)) in d.iter().zip(dp).enumerate() {
        if let Some(z) = a.dominance_violation(b, VALUE_TOL) {
            return Err(Error::DominanceViolated { index, z });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pol = optimal_policy(problem, dp, costs)?;
    let budget = EvalBudget::default();
    let lhs = evaluate_policy(problem, &pol, d, costs, &budget, &mut rng)?;
    let rhs = evaluate_policy(problem, &pol, dp, costs, &budget, &mut rng)?;
    Ok(MonotonicityReport {
        lhs: lhs.value,
        rhs: rhs.value,
        exact: lhs.exact && rhs.exact,
        holds: lhs.value >= rhs.value - VALUE_TOL,
    })
}

/// Checks `|OPT(D) - OPT(D')| <= gamma * max_i d_L(D_i, D'_i)`.
pub fn check_stability(
    problem: ProblemKind,
    d: &[DiscreteValueDistribution],
    dp: &[DiscreteValueDistribution],
    gamma: f64,
    costs: Option<&[f64]>,
) -> Result<StabilityReport> {
    check_pairs(d, dp)?;
    let eps = d
        .iter()
        .zip(dp)
        .map(|(a, b)| levy_distance(a, b))
        .fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let opt_d = optimal_value(problem, d, costs, &mut rng)?;
    let opt_dp = optimal_value(problem, dp, costs, &mut rng)?;
    let bound = gamma * eps;
    Ok(StabilityReport {
        eps,
        opt_d: opt_d.value,
        opt_dp: opt_dp.value,
        bound,
        exact: opt_d.exact && opt_dp.exact,
        holds: (opt_d.value - opt_dp.value).abs() <= bound + VALUE_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(a: f64) -> DiscreteValueDistribution {
        DiscreteValueDistribution::point(a, 1.0).unwrap()
    }

    #[test]
    fn deploy_examples() {
        let learned = [point(0.5)];
        assert_eq!(
            deploy_learned(ProblemKind::Revenue, &learned, 0.0, None).unwrap(),
            PolicySpec::Price(PricePolicy { price: 0.5 })
        );
        match deploy_learned(ProblemKind::Revenue, &learned, 0.1, None).unwrap() {
            PolicySpec::Price(p) => assert!((p.price - 0.4).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        let ds = vec![
            DiscreteValueDistribution::uniform(vec![0.0, 1.0], 1.0).unwrap(),
            DiscreteValueDistribution::uniform(vec![0.2, 0.7], 1.0).unwrap(),
        ];
        assert_eq!(
            deploy_learned(ProblemKind::Stopping, &ds, 0.0, None).unwrap(),
            PolicySpec::Stopping(stopping_thresholds(&ds).unwrap())
        );
        assert!(matches!(
            deploy_learned(ProblemKind::Pandora, &ds, 0.0, None),
            Err(Error::MissingCosts)
        ));
        assert!(deploy_learned(ProblemKind::Revenue, &ds, 0.0, None).is_err());
        assert!(deploy_learned(ProblemKind::Revenue, &learned, -0.1, None).is_err());
    }

    #[test]
    fn monotonicity_identity_and_point_masses() {
        let ds = vec![point(0.3), point(0.8), point(0.5)];
        for problem in [ProblemKind::Pandora, ProblemKind::Stopping] {
            let costs = [0.05, 0.1, 0.0];
            let r = check_strong_monotonicity(problem, &ds, &ds, Some(&costs)).unwrap();
            assert!(r.holds && (r.lhs - r.rhs).abs() < 1e-15);
        }
        // Point masses shifted down by eps: thresholds of D' are (0.7, 0.4, 0),
        // so on D' the first reward 0.2 is rejected, 0.7 accepted. On D the
        // same thresholds accept 0.8 at the second step.
        let eps = 0.1;
        let dp: Vec<_> = [0.3, 0.8, 0.5].iter().map(|a| point(a - eps)).collect();
        let r = check_strong_monotonicity(ProblemKind::Stopping, &ds, &dp, None).unwrap();
        assert!((r.rhs - 0.7).abs() < 1e-12 && (r.lhs - 0.8).abs() < 1e-12);
        assert!(r.holds);
        assert!(matches!(
            check_strong_monotonicity(ProblemKind::Stopping, &dp, &ds, None),
            Err(Error::DominanceViolated { index: 0, .. })
        ));
    }

    #[test]
    fn stability_examples() {
        let d = vec![DiscreteValueDistribution::uniform(vec![0.1, 0.5, 0.9], 1.0).unwrap()];
        let r = check_stability(ProblemKind::Revenue, &d, &d, 2.0, None).unwrap();
        assert!(r.holds && r.eps == 0.0 && r.bound == 0.0 && r.opt_d == r.opt_dp);

        let ds = vec![
            DiscreteValueDistribution::uniform(vec![0.1, 0.6], 1.0).unwrap(),
            DiscreteValueDistribution::uniform(vec![0.3, 0.9], 1.0).unwrap(),
        ];
        let dp: Vec<_> = ds.iter().map(|d| d.shift_plus_eps(0.05).unwrap()).collect();
        let costs = [0.05, 0.1];
        let r = check_stability(ProblemKind::Pandora, &ds, &dp, stability_gamma(ProblemKind::Pandora, 2, 1.0), Some(&costs)).unwrap();
        assert!(r.holds, "{r:?}");
    }

    #[test]
    fn problem_names_round_trip() {
        for p in [ProblemKind::Revenue, ProblemKind::Pandora, ProblemKind::Stopping] {
            assert_eq!(p.to_string().parse::<ProblemKind>().unwrap(), p);
        }
        assert!("auction".parse::<ProblemKind>().is_err());
    }
}
