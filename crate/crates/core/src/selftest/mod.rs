//! The acceptance suite: twelve numbered checks with fixed seeds.
//!
//! Shared by the `acceptance` test target and `ctxval selftest`.

pub mod gen;
pub mod oracles;

use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::harness::{canonical_json, run_pipeline, ExperimentConfig, ProblemConfig};
use crate::learner::{
    lipschitz_bound, required_samples_capped, required_samples_levy, required_samples_loss,
    LearnerConfig,
};
use crate::loss::{cap_grid, empirical_loss, loss_gap_decomposition, loss_subgradient, true_loss_at_context};
use crate::metrics::{capped_gap_sup, levy_distance, levy_distance_oracle, wasserstein_distance};
use crate::model::{
    ContextDistribution, InstanceSpec, LabeledSample, RewardFunction, WeightDistribution,
};
use crate::policies::{
    check_stability, check_strong_monotonicity, evaluate_pandora, evaluate_stopping, fair_cap,
    optimal_price, revenue, stability_gamma, stopping_thresholds, weitzman_policy, EvalBudget,
    PandoraInstance, PandoraPolicy, ProblemKind, StoppingPolicy,
};
use crate::value_dist::DiscreteValueDistribution;

/// Lattice step of the brute-force Lévy oracle.
pub const LEVY_ORACLE_STEP: f64 = 0.0025;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed_secs: f64,
    pub time_limit_secs: Option<f64>,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let limit = self
            .time_limit_secs
            .map_or(String::new(), |l| format!(", limit {l:.0}s"));
        write!(
            f,
            "[{}] {:>2} {} ({:.2}s{limit}): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed_secs,
            self.detail
        )
    }
}

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

type Check = fn() -> Result<Outcome>;

const CRITERIA: [(u8, &str, Option<u64>, Check); 12] = [
    (1, "variance identity", Some(1), c1_identity),
    (2, "loss-gap decomposition", Some(10), c2_decomposition),
    (3, "subgradient vs finite differences", Some(30), c3_subgradient),
    (4, "levy bridge to capped gap", Some(30), c4_levy_bridge),
    (5, "wasserstein vs levy", None, c5_wasserstein),
    (6, "levy exactness", None, c6_levy_oracle),
    (7, "policy optimality oracles", Some(300), c7_policy_oracles),
    (8, "monotonicity and stability", None, c8_monotone_stable),
    (9, "reward transfer bounds", None, c9_transfer),
    (10, "scaled learning trend", Some(600), c10_learning_trend),
    (11, "sample-size calculators", None, c11_calculators),
    (12, "pipeline determinism", None, c12_determinism),
];

pub fn criterion_ids() -> impl Iterator<Item = u8> {
    CRITERIA.iter().map(|c| c.0)
}

/// Runs one criterion; `None` for an unknown id.
pub fn run_criterion(id: u8) -> Option<CriterionResult> {
    let &(id, name, limit, check) = CRITERIA.iter().find(|c| c.0 == id)?;
    let start = Instant::now();
    let outcome = check().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
    let elapsed = start.elapsed();
    let within = limit.is_none_or(|l| elapsed <= Duration::from_secs(l));
    let detail = if within {
        outcome.detail
    } else {
        format!("{} (over the time limit)", outcome.detail)
    };
    Some(CriterionResult {
        id,
        name,
        passed: outcome.passed && within,
        detail,
        elapsed_secs: elapsed.as_secs_f64(),
        time_limit_secs: limit.map(|l| l as f64),
    })
}

pub fn run_all() -> Vec<CriterionResult> {
    criterion_ids().filter_map(run_criterion).collect()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn c1_identity() -> Result<Outcome> {
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let z = r.random_range(-1.0..2.0);
        let zp = r.random_range(-1.0..2.0);
        let n = r.random_range(1..=6);
        let ys: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..2.0)).collect();
        let raw: Vec<f64> = (0..n).map(|_| r.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let ws: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mean: f64 = ys.iter().zip(&ws).map(|(y, w)| y * w).sum();
        let lhs = (z - mean).powi(2) - (zp - mean).powi(2);
        let rhs: f64 = ys
            .iter()
            .zip(&ws)
            .map(|(y, w)| w * ((z - y).powi(2) - (zp - y).powi(2)))
            .sum();
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(Outcome::new(worst <= 1e-12, format!("max |lhs - rhs| = {worst:.2e} over 10000 triples (tol 1e-12)")))
}

fn c2_decomposition() -> Result<Outcome> {
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let d = r.random_range(1..=3);
        let f = gen::random_reward(&mut r, d);
        let vp = gen::random_weights(&mut r, 5, d);
        let vs = gen::random_weights(&mut r, 5, d);
        let x = gen::random_point(&mut r, d);
        let eps = f.c_max / r.random_range(1..=12) as f64;
        let grid = cap_grid(f.c_max, eps)?;
        let gap: f64 = loss_gap_decomposition(&vp, &vs, &f, &x, &grid)?.iter().sum();
        let diff = true_loss_at_context(&vp, &vs, &f, &x, &grid)? - true_loss_at_context(&vs, &vs, &f, &x, &grid)?;
        worst = worst.max((gap - diff).abs());
    }
    Ok(Outcome::new(worst <= 1e-9, format!("max deviation {worst:.2e} over 1000 instances (tol 1e-9)")))
}

fn c3_subgradient() -> Result<Outcome> {
    const H: f64 = 1e-6;
    let mut r = rng(3);
    let mut worst_rel: f64 = 0.0;
    let mut worst_norm_excess = f64::NEG_INFINITY;
    let mut done = 0;
    let mut skipped = 0;
    while done < 100 {
        let d = r.random_range(1..=3);
        let k = r.random_range(1..=4);
        let f = RewardFunction::linear(d)?;
        let eps = f.c_max / r.random_range(1..=8) as f64;
        let grid = cap_grid(f.c_max, eps)?;
        let v = WeightDistribution::uniform((0..k).map(|_| gen::random_point(&mut r, d)).collect())?;
        let samples: Vec<LabeledSample> = (0..5)
            .map(|_| LabeledSample {
                context: gen::random_point(&mut r, d),
                label: r.random::<f64>() * f.c_max,
            })
            .collect();
        // Finite differences are only meaningful away from the kinks.
        let near_kink = samples.iter().any(|s| {
            v.atoms().iter().any(|a| {
                let img = f.eval(a, &s.context).unwrap_or(0.0);
                grid.values().iter().any(|c| (img - c).abs() < 1e-4)
            })
        });
        if near_kink {
            skipped += 1;
            continue;
        }
        let g = loss_subgradient(&v, &samples, &f, &grid)?;
        let mut num = 0.0;
        let mut den: f64 = 0.0;
        for i in 0..k {
            for j in 0..d {
                let at = |delta: f64| -> Result<f64> {
                    let mut atoms = v.atoms().to_vec();
                    atoms[i][j] += delta;
                    empirical_loss(&WeightDistribution::uniform(atoms)?, &samples, &f, &grid)
                };
                let fd = (at(H)? - at(-H)?) / (2.0 * H);
                num += (g[i][j] - fd).powi(2);
                den = den.max(g[i][j].abs()).max(fd.abs());
            }
        }
        let rel = if den < 1e-12 { 0.0 } else { num.sqrt() / den };
        worst_rel = worst_rel.max(rel);
        let norm = g.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
        let rho = lipschitz_bound(f.c_max, eps, f.xi, k)?;
        worst_norm_excess = worst_norm_excess.max(norm - rho);
        done += 1;
    }
    Ok(Outcome::new(
        worst_rel <= 1e-5 && worst_norm_excess <= 1e-9,
        format!(
            "max relative error {worst_rel:.2e} (tol 1e-5), max norm - rho {worst_norm_excess:.3} (tol 1e-9), {skipped} near-kink draws skipped"
        ),
    ))
}

fn random_pairs(seed: u64, count: usize) -> Vec<(DiscreteValueDistribution, DiscreteValueDistribution)> {
    let mut r = rng(seed);
    (0..count).map(|_| gen::random_pair(&mut r, 6)).collect()
}

fn c4_levy_bridge() -> Result<Outcome> {
    let mut worst = f64::NEG_INFINITY;
    for (d, dp) in random_pairs(4, 1000) {
        let bound = (2.0 * capped_gap_sup(&d, &dp, 1e-3)).sqrt();
        worst = worst.max(levy_distance(&d, &dp) - bound);
    }
    Ok(Outcome::new(
        worst <= 1e-6,
        format!("max levy - sqrt(2 gap) = {worst:.3e} over 1000 pairs (tol 1e-6)"),
    ))
}

fn c5_wasserstein() -> Result<Outcome> {
    let mut worst = f64::NEG_INFINITY;
    for (d, dp) in random_pairs(4, 1000) {
        worst = worst.max(wasserstein_distance(&d, &dp) - 4.0 * levy_distance(&d, &dp));
    }
    Ok(Outcome::new(
        worst <= 1e-9,
        format!("max d_W - 4 d_L = {worst:.3e} over 1000 pairs (tol 1e-9)"),
    ))
}

fn c6_levy_oracle() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for (d, dp) in random_pairs(4, 1000) {
        let exact = levy_distance(&d, &dp);
        let oracle = levy_distance_oracle(&d, &dp, LEVY_ORACLE_STEP);
        worst = worst.max((exact - oracle).abs());
    }
    let p0 = DiscreteValueDistribution::point(0.0, 1.0)?;
    let p3 = DiscreteValueDistribution::point(0.3, 1.0)?;
    let coin = DiscreteValueDistribution::uniform(vec![0.0, 1.0], 1.0)?;
    let h1 = (levy_distance(&p0, &p3) - 0.3).abs();
    let h2 = (levy_distance(&p0, &coin) - 0.5).abs();
    let tol = 2.0 * LEVY_ORACLE_STEP;
    Ok(Outcome::new(
        worst <= tol && h1 <= 1e-6 && h2 <= 1e-6,
        format!("max |exact - oracle| = {worst:.4} (tol {tol}), hand values off by {h1:.1e} and {h2:.1e} (tol 1e-6)"),
    ))
}

fn c7_policy_oracles() -> Result<Outcome> {
    let mut r = rng(7);
    let budget = EvalBudget::default();
    let mut failures = Vec::new();
    let mut price_gap = f64::NEG_INFINITY;
    let mut enum_err: f64 = 0.0;
    let mut pandora_gap = f64::NEG_INFINITY;
    let mut stopping_gap = f64::NEG_INFINITY;

    for _ in 0..200 {
        let d = gen::random_dist(&mut r, 5, 1.0);
        let (_, best) = optimal_price(&d);
        let (_, grid_best) = oracles::grid_best_revenue(&d, 1e-3);
        price_gap = price_gap.max(grid_best - best);
        for i in 0..=1000 {
            let p = i as f64 * 1e-3;
            enum_err = enum_err.max((revenue(&d, p) - oracles::price_revenue(&d, p)).abs());
        }
    }
    if price_gap > 1e-12 {
        failures.push(format!("a grid price beats the optimal price by {price_gap:.2e}"));
    }

    for _ in 0..200 {
        let n = r.random_range(1..=4);
        let dists: Vec<_> = (0..n).map(|_| gen::random_dist(&mut r, 5, 1.0)).collect();
        let costs = gen::random_costs(&mut r, n, 1.0);
        let inst = PandoraInstance::new(dists.clone(), &costs)?;
        let pol = weitzman_policy(&inst)?;
        let best = evaluate_pandora(&inst, &pol, &budget, &mut r)?.value;
        enum_err = enum_err.max((best - oracles::pandora_value(&dists, &costs, &pol.fair_caps)).abs());
        for t in 0..1000 {
            let caps: Vec<f64> = (0..n).map(|_| r.random_range(-0.5..1.5)).collect();
            let alt = PandoraPolicy::from_caps(caps.clone());
            let v = evaluate_pandora(&inst, &alt, &budget, &mut r)?.value;
            pandora_gap = pandora_gap.max(v - best);
            if t < 10 {
                enum_err = enum_err.max((v - oracles::pandora_value(&dists, &costs, &caps)).abs());
            }
        }
    }
    if pandora_gap > 1e-9 {
        failures.push(format!("a random cap vector beats the fair caps by {pandora_gap:.2e}"));
    }

    for _ in 0..200 {
        let n = r.random_range(1..=4);
        let dists: Vec<_> = (0..n).map(|_| gen::random_dist(&mut r, 5, 1.0)).collect();
        let pol = stopping_thresholds(&dists)?;
        let best = evaluate_stopping(&dists, &pol)?;
        enum_err = enum_err.max((best - oracles::stopping_value(&dists, &pol.thresholds)).abs());
        for t in 0..1000 {
            let thresholds: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.1)).collect();
            let v = evaluate_stopping(&dists, &StoppingPolicy { thresholds: thresholds.clone() })?;
            stopping_gap = stopping_gap.max(v - best);
            if t < 10 {
                enum_err = enum_err.max((v - oracles::stopping_value(&dists, &thresholds)).abs());
            }
        }
    }
    if stopping_gap > 1e-9 {
        failures.push(format!("random thresholds beat backward induction by {stopping_gap:.2e}"));
    }
    if enum_err > 1e-9 {
        failures.push(format!("evaluators differ from brute force by {enum_err:.2e}"));
    }
    let detail = format!(
        "best challenger margins: price {price_gap:.2e}, pandora {pandora_gap:.2e}, stopping {stopping_gap:.2e}; max brute-force deviation {enum_err:.1e}"
    );
    Ok(Outcome::new(
        failures.is_empty(),
        if failures.is_empty() { detail } else { format!("{}; {detail}", failures.join("; ")) },
    ))
}

fn c8_monotone_stable() -> Result<Outcome> {
    let mut r = rng(8);
    let mut violations = Vec::new();
    let mut trials = 0;
    for problem in [ProblemKind::Revenue, ProblemKind::Pandora, ProblemKind::Stopping] {
        for eps in [0.01, 0.05, 0.1] {
            let mut mono = 0;
            let mut stab = 0;
            for _ in 0..1000 {
                let n = if problem == ProblemKind::Revenue { 1 } else { r.random_range(1..=3) };
                let d: Vec<_> = (0..n).map(|_| gen::random_dist(&mut r, 4, 1.0)).collect();
                let dp = d.iter().map(|x| x.shift_plus_eps(eps)).collect::<Result<Vec<_>>>()?;
                let costs = gen::random_costs(&mut r, n, 1.0);
                let costs = (problem == ProblemKind::Pandora).then_some(costs.as_slice());
                let m = check_strong_monotonicity(problem, &d, &dp, costs)?;
                if m.lhs < m.rhs - 1e-6 {
                    mono += 1;
                }
                let gamma = stability_gamma(problem, n, 1.0);
                let s = check_stability(problem, &d, &dp, gamma, costs)?;
                if (s.opt_d - s.opt_dp).abs() > s.bound + 1e-6 {
                    stab += 1;
                }
                trials += 1;
            }
            if mono + stab > 0 {
                violations.push(format!("{problem} eps={eps}: {mono} monotonicity, {stab} stability"));
            }
        }
    }
    Ok(Outcome::new(
        violations.is_empty(),
        if violations.is_empty() {
            format!("{trials} trials, no violations")
        } else {
            violations.join("; ")
        },
    ))
}

fn c9_transfer() -> Result<Outcome> {
    let mut r = rng(9);
    let budget = EvalBudget::default();
    let (mut stop_worst, mut cap_worst, mut cost_worst) = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for _ in 0..500 {
        let n = r.random_range(1..=4);
        let d: Vec<_> = (0..n).map(|_| gen::random_dist(&mut r, 4, 1.0)).collect();
        let scale = r.random_range(0.001..0.2);
        let dp: Vec<_> = d.iter().map(|x| gen::perturb(&mut r, x, scale)).collect();
        let eps = d
            .iter()
            .zip(&dp)
            .map(|(a, b)| capped_gap_sup(a, b, 1e-3))
            .fold(0.0, f64::max);
        let slack = n as f64 * eps + 1e-6;
        let tp = stopping_thresholds(&dp)?;
        let t = stopping_thresholds(&d)?;
        let on_d = evaluate_stopping(&d, &tp)?;
        let on_dp = evaluate_stopping(&dp, &tp)?;
        let opt_d = evaluate_stopping(&d, &t)?;
        stop_worst = stop_worst.max(on_dp - slack - on_d).max(opt_d - slack - on_dp);
    }
    for _ in 0..500 {
        let d = gen::random_dist(&mut r, 5, 1.0);
        let scale = r.random_range(0.001..0.2);
        let dp = gen::perturb(&mut r, &d, scale);
        let eps = capped_gap_sup(&d, &dp, 1e-3);
        let o = r.random_range(0.0..0.6);
        let sigma = fair_cap(&dp, o)?;
        let g: f64 = d.iter().map(|(a, w)| w * (a - sigma).max(0.0)).sum();
        cap_worst = cap_worst.max((g - o).abs() - eps - 1e-6);
    }
    for _ in 0..500 {
        let n = r.random_range(1..=4);
        let d: Vec<_> = (0..n).map(|_| gen::random_dist(&mut r, 5, 1.0)).collect();
        let o = gen::random_costs(&mut r, n, 1.0);
        let op: Vec<f64> = o.iter().map(|c| (c + r.random_range(-0.1..0.1)).clamp(0.0, 1.0)).collect();
        let drift: f64 = o.iter().zip(&op).map(|(a, b)| (a - b).abs()).sum();
        let inst = PandoraInstance::new(d.clone(), &o)?;
        let inst_p = PandoraInstance::new(d, &op)?;
        let v = evaluate_pandora(&inst, &weitzman_policy(&inst)?, &budget, &mut r)?.value;
        let vp = evaluate_pandora(&inst_p, &weitzman_policy(&inst_p)?, &budget, &mut r)?.value;
        cost_worst = cost_worst.max(v - drift - 1e-9 - vp);
    }
    Ok(Outcome::new(
        stop_worst <= 0.0 && cap_worst <= 0.0 && cost_worst <= 0.0,
        format!(
            "worst excess over bound: stopping {stop_worst:.2e}, fair-cap cost {cap_worst:.2e}, perturbed costs {cost_worst:.2e} (500 trials each)"
        ),
    ))
}

/// The fixed instance of the learning-trend check: `d = 2`, linear reward,
/// three atoms, contexts uniform on a 4 x 4 lattice.
pub fn trend_instance() -> Result<InstanceSpec> {
    let truth = WeightDistribution::new(
        vec![vec![0.15, 0.8], vec![0.6, 0.3], vec![0.9, 0.95]],
        vec![0.3, 0.45, 0.25],
    )?;
    InstanceSpec::new(
        ContextDistribution::product_uniform(2, 1.0 / 3.0)?,
        RewardFunction::linear(2)?,
        vec![truth],
        0,
    )
}

/// Config of the learning-trend check at sample size `m`.
pub fn trend_config(m: usize, seed: u64) -> Result<ExperimentConfig> {
    let mut learner = LearnerConfig::new(8, 0.25, 300);
    learner.seed = seed;
    let mut cfg = ExperimentConfig::new(trend_instance()?, m, learner, 16);
    cfg.seed = seed;
    cfg.problem = ProblemConfig::Revenue;
    Ok(cfg)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn c10_learning_trend() -> Result<Outcome> {
    let mut stats = Vec::new();
    for m in [100, 5000] {
        let mut gaps = Vec::new();
        let mut levys = Vec::new();
        for seed in 0..10 {
            let rep = run_pipeline(&trend_config(m, seed)?)?;
            gaps.push(rep.aggregates.loss_gap.mean);
            levys.push(rep.aggregates.levy.mean);
        }
        stats.push((median(gaps), median(levys)));
    }
    let mut planted = trend_config(100, 0)?;
    planted.plant_truth = true;
    let rep = run_pipeline(&planted)?;
    let planted_zero = rep.records.iter().all(|r| {
        r.loss_gap == 0.0
            && r.capped_gap_sup == 0.0
            && r.levy == 0.0
            && r.policy.as_ref().is_some_and(|p| p.regret == 0.0)
    });
    let (small, large) = (stats[0], stats[1]);
    Ok(Outcome::new(
        large.0 < small.0 && large.1 < small.1 && planted_zero,
        format!(
            "median mean loss gap {:.4e} (m=100) vs {:.4e} (m=5000); median mean levy {:.4} vs {:.4}; planted truth all zero: {planted_zero}",
            small.0, large.0, small.1, large.1
        ),
    ))
}

fn c11_calculators() -> Result<Outcome> {
    let base = required_samples_loss(1, 1.0, 1.0, 0.5, 0.5);
    let mut monotone = true;
    let grid = [0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9];
    type Calc = fn(usize, f64, f64, f64, f64) -> u128;
    let calcs: [Calc; 3] = [required_samples_loss, required_samples_capped, required_samples_levy];
    for calc in calcs {
        for (i, &e) in grid.iter().enumerate() {
            for (j, &dl) in grid.iter().enumerate() {
                let here = calc(2, 1.5, 1.0, e, dl);
                if let Some(&e2) = grid.get(i + 1) {
                    monotone &= calc(2, 1.5, 1.0, e2, dl) <= here;
                }
                if let Some(&d2) = grid.get(j + 1) {
                    monotone &= calc(2, 1.5, 1.0, e, d2) <= here;
                }
            }
        }
    }
    Ok(Outcome::new(
        base == 2048 && monotone,
        format!("(1,1,1,0.5,0.5) -> {base} (expected 2048); non-increasing in eps and delta: {monotone}"),
    ))
}

fn c12_determinism() -> Result<Outcome> {
    let mut cfg = trend_config(200, 12)?;
    cfg.learner.iterations = 50;
    cfg.problem = ProblemConfig::Pandora { costs: vec![0.1] };
    let a = canonical_json(&run_pipeline(&cfg)?.without_timestamp())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| crate::Error::Config(e.to_string()))?;
    let b = pool.install(|| run_pipeline(&cfg))?;
    let b = canonical_json(&b.without_timestamp())?;
    Ok(Outcome::new(
        a == b,
        format!("{} report bytes, identical across runs and thread counts: {}", a.len(), a == b),
    ))
}
