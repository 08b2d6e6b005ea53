//! Experiment pipeline: sample, learn, evaluate per context, aggregate.

mod io;

pub use io::{
    canonical_json, content_digest, dump_samples, json_hash, load_samples, parse_instance,
    parse_json, read_json, write_instance, write_json,
};

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{learn, LearnerConfig};
use crate::loss::{cap_grid, loss_gap_decomposition, CapGrid};
use crate::metrics::{capped_gap_sup, levy_distance};
use crate::model::{
    draw_samples, induced_value_distribution, ContextDistribution, InstanceSpec, RewardFunction,
    WeightDistribution,
};
use crate::policies::{deploy_learned, evaluate_policy, optimal_policy, EvalBudget, ProblemKind};

/// Grid step passed to [`capped_gap_sup`] on top of the exact breakpoints.
const GAP_RESOLUTION: f64 = 1e-3;

// RNG stream ids; the index of the distribution or context goes in the low bits.
const STREAM_SAMPLES: u64 = 1 << 32;
const STREAM_CONTEXTS: u64 = 2 << 32;
const STREAM_EVAL: u64 = 3 << 32;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemConfig {
    #[default]
    None,
    Revenue,
    Pandora {
        costs: Vec<f64>,
    },
    Stopping,
}

impl ProblemConfig {
    pub fn kind(&self) -> Option<ProblemKind> {
        match self {
            ProblemConfig::None => None,
            ProblemConfig::Revenue => Some(ProblemKind::Revenue),
            ProblemConfig::Pandora { .. } => Some(ProblemKind::Pandora),
            ProblemConfig::Stopping => Some(ProblemKind::Stopping),
        }
    }

    pub fn costs(&self) -> Option<&[f64]> {
        match self {
            ProblemConfig::Pandora { costs } => Some(costs),
            _ => None,
        }
    }
}

fn default_levy_target() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Inline instance; exactly one of `instance` and `instance_path`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceSpec>,
    /// Relative paths are resolved against the config file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_path: Option<PathBuf>,
    /// Samples per distribution.
    pub m: usize,
    pub learner: LearnerConfig,
    #[serde(default)]
    pub problem: ProblemConfig,
    pub eval_contexts: usize,
    #[serde(default)]
    pub deploy_eps: f64,
    #[serde(default = "default_levy_target")]
    pub levy_target: f64,
    #[serde(default)]
    pub budget: EvalBudgetConfig,
    #[serde(default)]
    pub seed: u64,
    /// Skip learning and use the true weight distributions as hypotheses.
    #[serde(default)]
    pub plant_truth: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// Serde-friendly mirror of [`EvalBudget`] with defaults per field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalBudgetConfig {
    #[serde(default = "default_exact_budget")]
    pub exact_budget: u64,
    #[serde(default = "default_mc_draws")]
    pub mc_draws: usize,
}

fn default_exact_budget() -> u64 {
    EvalBudget::default().exact_budget
}

fn default_mc_draws() -> usize {
    EvalBudget::default().mc_draws
}

impl Default for EvalBudgetConfig {
    fn default() -> Self {
        let b = EvalBudget::default();
        Self {
            exact_budget: b.exact_budget,
            mc_draws: b.mc_draws,
        }
    }
}

impl From<EvalBudgetConfig> for EvalBudget {
    fn from(b: EvalBudgetConfig) -> Self {
        EvalBudget {
            exact_budget: b.exact_budget,
            mc_draws: b.mc_draws,
        }
    }
}

impl ExperimentConfig {
    pub fn new(instance: InstanceSpec, m: usize, learner: LearnerConfig, eval_contexts: usize) -> Self {
        Self {
            instance: Some(instance),
            instance_path: None,
            m,
            learner,
            problem: ProblemConfig::None,
            eval_contexts,
            deploy_eps: 0.0,
            levy_target: default_levy_target(),
            budget: EvalBudgetConfig::default(),
            seed: 0,
            plant_truth: false,
            output: None,
        }
    }

    /// Reads a config and inlines the instance it points to.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = read_json(path)?;
        if let Some(p) = cfg.instance_path.take() {
            if cfg.instance.is_some() {
                return Err(Error::Config("give either `instance` or `instance_path`, not both".into()));
            }
            let p = match path.parent() {
                Some(dir) if p.is_relative() => dir.join(p),
                _ => p,
            };
            cfg.instance = Some(parse_instance(&p)?);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn instance(&self) -> Result<&InstanceSpec> {
        self.instance
            .as_ref()
            .ok_or_else(|| Error::Config("no instance given (set `instance` or `instance_path`)".into()))
    }

    pub fn validate(&self) -> Result<()> {
        let inst = self.instance()?;
        inst.validate()?;
        if self.m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        if self.eval_contexts == 0 {
            return Err(Error::Config("eval_contexts must be at least 1".into()));
        }
        if !(self.deploy_eps >= 0.0 && self.deploy_eps.is_finite()) {
            return Err(Error::Config(format!("deploy_eps must be >= 0, got {}", self.deploy_eps)));
        }
        if self.levy_target.is_nan() || self.levy_target < 0.0 {
            return Err(Error::Config(format!("levy_target must be >= 0, got {}", self.levy_target)));
        }
        self.learner.validate()?;
        match &self.problem {
            ProblemConfig::Revenue if inst.n != 1 => {
                return Err(Error::Config(format!(
                    "revenue needs exactly one distribution, instance has {}",
                    inst.n
                )))
            }
            ProblemConfig::Pandora { costs } => {
                if costs.len() != inst.n {
                    return Err(Error::Config(format!(
                        "pandora needs {} opening costs, got {}",
                        inst.n,
                        costs.len()
                    )));
                }
                if costs.iter().any(|o| !(*o >= 0.0 && *o <= inst.reward.c_max)) {
                    return Err(Error::Config("opening costs must lie in [0, c_max]".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionMetrics {
    pub loss_gap: f64,
    pub capped_gap_sup: f64,
    pub levy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyOutcome {
    pub value_learned: f64,
    pub value_optimal: f64,
    pub regret: f64,
    /// False when either value came from Monte Carlo.
    pub exact: bool,
}

/// Metrics at one evaluation context. The scalar gaps are maxima over the
/// distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextRecord {
    pub index: usize,
    pub context: Vec<f64>,
    pub loss_gap: f64,
    pub capped_gap_sup: f64,
    pub levy: f64,
    pub per_distribution: Vec<DistributionMetrics>,
    pub policy: Option<PolicyOutcome>,
}

/// Everything [`per_context_eval`] needs besides the distributions.
#[derive(Debug, Clone, Copy)]
pub struct EvalSettings<'a> {
    pub grid: &'a CapGrid,
    pub problem: Option<ProblemKind>,
    pub costs: Option<&'a [f64]>,
    pub deploy_eps: f64,
    pub budget: EvalBudget,
    /// Seeds the Monte Carlo fallback.
    pub seed: u64,
}

/// Gap metrics and policy regret at context `x`.
pub fn per_context_eval(
    vstar: &[WeightDistribution],
    vlearned: &[WeightDistribution],
    f: &RewardFunction,
    x: &[f64],
    settings: &EvalSettings<'_>,
) -> Result<ContextRecord> {
    if vstar.len() != vlearned.len() {
        return Err(Error::LengthMismatch {
            what: "true vs learned distributions",
            left: vstar.len(),
            right: vlearned.len(),
        });
    }
    let mut per = Vec::with_capacity(vstar.len());
    let mut truth_d = Vec::with_capacity(vstar.len());
    let mut learned_d = Vec::with_capacity(vstar.len());
    for (vs, vl) in vstar.iter().zip(vlearned) {
        let loss_gap = loss_gap_decomposition(vl, vs, f, x, settings.grid)?.iter().sum();
        let dt = induced_value_distribution(vs, f, x)?;
        let dl = induced_value_distribution(vl, f, x)?;
        per.push(DistributionMetrics {
            loss_gap,
            capped_gap_sup: capped_gap_sup(&dt, &dl, GAP_RESOLUTION),
            levy: levy_distance(&dt, &dl),
        });
        truth_d.push(dt);
        learned_d.push(dl);
    }
    let policy = match settings.problem {
        None => None,
        Some(problem) => {
            let mut rng = rng_for(settings.seed, STREAM_EVAL);
            let deployed = deploy_learned(problem, &learned_d, settings.deploy_eps, settings.costs)?;
            let best = optimal_policy(problem, &truth_d, settings.costs)?;
            let vl = evaluate_policy(problem, &deployed, &truth_d, settings.costs, &settings.budget, &mut rng)?;
            let vo = evaluate_policy(problem, &best, &truth_d, settings.costs, &settings.budget, &mut rng)?;
            Some(PolicyOutcome {
                value_learned: vl.value,
                value_optimal: vo.value,
                regret: vo.value - vl.value,
                exact: vl.exact && vo.exact,
            })
        }
    };
    let max = |g: fn(&DistributionMetrics) -> f64| per.iter().map(g).fold(0.0, f64::max);
    Ok(ContextRecord {
        index: 0,
        context: x.to_vec(),
        loss_gap: max(|p| p.loss_gap),
        capped_gap_sup: max(|p| p.capped_gap_sup),
        levy: max(|p| p.levy),
        per_distribution: per,
        policy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub mean: f64,
    /// Nearest-rank 90th percentile.
    pub p90: f64,
}

impl Summary {
    /// `None` for an empty slice.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        };
        let rank = ((0.9 * n as f64).ceil() as usize).clamp(1, n);
        Some(Self {
            median,
            mean: v.iter().sum::<f64>() / n as f64,
            p90: v[rank - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub loss_gap: Summary,
    pub capped_gap_sup: Summary,
    pub levy: Summary,
    pub regret: Option<Summary>,
    pub levy_target: f64,
    /// Fraction of contexts whose Lévy distance is at most `levy_target`.
    pub fraction_levy_within_target: f64,
    /// Fraction of contexts whose policy values were computed exactly.
    pub exact_fraction: Option<f64>,
}

pub fn aggregate(records: &[ContextRecord], levy_target: f64) -> Result<Aggregates> {
    let col = |g: fn(&ContextRecord) -> f64| records.iter().map(g).collect::<Vec<_>>();
    let summary = |v: Vec<f64>| Summary::of(&v).ok_or_else(|| Error::Config("no evaluation contexts".into()));
    let policies: Vec<&PolicyOutcome> = records.iter().filter_map(|r| r.policy.as_ref()).collect();
    let n = records.len() as f64;
    Ok(Aggregates {
        loss_gap: summary(col(|r| r.loss_gap))?,
        capped_gap_sup: summary(col(|r| r.capped_gap_sup))?,
        levy: summary(col(|r| r.levy))?,
        regret: Summary::of(&policies.iter().map(|p| p.regret).collect::<Vec<_>>()),
        levy_target,
        fraction_levy_within_target: records.iter().filter(|r| r.levy <= levy_target).count() as f64 / n,
        exact_fraction: (!policies.is_empty())
            .then(|| policies.iter().filter(|p| p.exact).count() as f64 / policies.len() as f64),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the canonical config JSON (instance inlined).
    pub config_hash: String,
    pub seed: u64,
    /// Git-style digest of the canonical config JSON.
    pub input_digest: String,
    /// Unix seconds; not part of any digest.
    pub timestamp: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedSummary {
    pub distribution: WeightDistribution,
    /// Regularized objective of the selected iterate; `None` when planted.
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub problem: Option<ProblemKind>,
    pub m: usize,
    pub learned: Vec<LearnedSummary>,
    pub records: Vec<ContextRecord>,
    pub aggregates: Aggregates,
    /// Reward evaluations that fell outside `[0, c_max]` and were clamped.
    pub clamp_events: u64,
    pub provenance: Provenance,
}

impl EvaluationReport {
    /// The report without its timestamp, for reproducibility comparisons.
    pub fn without_timestamp(&self) -> Self {
        let mut r = self.clone();
        r.provenance.timestamp = None;
        r
    }
}

/// Learns one hypothesis per distribution.
pub fn learn_all(cfg: &ExperimentConfig) -> Result<Vec<LearnedSummary>> {
    let inst = cfg.instance()?;
    let f = &inst.reward;
    if cfg.plant_truth {
        return Ok(inst
            .weights
            .iter()
            .map(|w| LearnedSummary {
                distribution: w.clone(),
                objective: None,
            })
            .collect());
    }
    inst.weights
        .par_iter()
        .enumerate()
        .map(|(i, w)| {
            let mut rng = rng_for(cfg.seed, STREAM_SAMPLES | i as u64);
            let samples = draw_samples(w, &inst.context, f, cfg.m, &mut rng)?;
            let mut lc = cfg.learner.clone();
            lc.seed = lc.seed.wrapping_add(cfg.seed).wrapping_add(i as u64);
            let res = learn(&samples, f, &lc)?;
            log::debug!("distribution {i}: objective {:.6}", res.selected_objective);
            Ok(LearnedSummary {
                distribution: res.learned,
                objective: Some(res.selected_objective),
            })
        })
        .collect()
}

/// Fresh evaluation contexts, independent of the training samples.
pub fn eval_contexts(contexts: &ContextDistribution, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_for(seed, STREAM_CONTEXTS);
    (0..count).map(|_| contexts.sample(&mut rng)).collect()
}

/// Evaluates learned hypotheses against the instance at fresh contexts.
pub fn evaluate_learned(
    cfg: &ExperimentConfig,
    learned: Vec<LearnedSummary>,
) -> Result<EvaluationReport> {
    cfg.validate()?;
    let inst = cfg.instance()?;
    let f = &inst.reward;
    let clamps_before = f.clamp_events();
    let grid = cap_grid(f.c_max, cfg.learner.epsilon)?;
    let hyps: Vec<WeightDistribution> = learned.iter().map(|l| l.distribution.clone()).collect();
    let contexts = eval_contexts(&inst.context, cfg.eval_contexts, cfg.seed);
    let records = contexts
        .par_iter()
        .enumerate()
        .map(|(j, x)| {
            let settings = EvalSettings {
                grid: &grid,
                problem: cfg.problem.kind(),
                costs: cfg.problem.costs(),
                deploy_eps: cfg.deploy_eps,
                budget: cfg.budget.into(),
                seed: cfg.seed ^ ((j as u64) << 16),
            };
            let mut rec = per_context_eval(&inst.weights, &hyps, f, x, &settings)?;
            rec.index = j;
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    let aggregates = aggregate(&records, cfg.levy_target)?;
    let mut inputs = cfg.clone();
    inputs.output = None;
    let canonical = canonical_json(&inputs)?;
    Ok(EvaluationReport {
        problem: cfg.problem.kind(),
        m: cfg.m,
        learned,
        records,
        aggregates,
        clamp_events: f.clamp_events() - clamps_before,
        provenance: Provenance {
            config_hash: json_hash(&inputs)?,
            seed: cfg.seed,
            input_digest: content_digest(canonical.as_bytes()),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs()),
        },
    })
}

/// Samples, learns and evaluates.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<EvaluationReport> {
    cfg.validate()?;
    let learned = learn_all(cfg)?;
    evaluate_learned(cfg, learned)
}

/// Writes `report.json` and `records.csv` into `dir`.
pub fn write_report(report: &EvaluationReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(report, &dir.join("report.json"))?;
    write_records_csv(&report.records, &dir.join("records.csv"))
}

pub fn write_records_csv(records: &[ContextRecord], path: &Path) -> Result<()> {
    let csv_err = |row: usize, e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        row,
        reason: e.to_string(),
    };
    let d = records.first().map_or(0, |r| r.context.len());
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(0, e))?;
    let mut header = vec!["index".to_string()];
    header.extend((1..=d).map(|i| format!("x_{i}")));
    header.extend(
        ["loss_gap", "capped_gap_sup", "levy", "value_learned", "value_optimal", "regret", "exact"]
            .map(String::from),
    );
    w.write_record(&header).map_err(|e| csv_err(0, e))?;
    for (row, r) in records.iter().enumerate() {
        let mut fields = vec![r.index.to_string()];
        fields.extend(r.context.iter().map(f64::to_string));
        fields.extend([r.loss_gap, r.capped_gap_sup, r.levy].map(|v| v.to_string()));
        match &r.policy {
            Some(p) => {
                fields.extend([p.value_learned, p.value_optimal, p.regret].map(|v| v.to_string()));
                fields.push(p.exact.to_string());
            }
            None => fields.extend(std::iter::repeat_n(String::new(), 4)),
        }
        w.write_record(&fields).map_err(|e| csv_err(row + 1, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Parameters for a random instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub n: usize,
    pub dim: usize,
    /// Atoms per weight distribution.
    pub atoms: usize,
    #[serde(default)]
    pub reward: GeneratedReward,
    /// Step of the uniform context lattice.
    pub context_step: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratedReward {
    #[default]
    Linear,
    Gate,
}

/// Random instance with uniform-weight atoms drawn from `[0,1]^d`.
pub fn generate_instance(g: &GenerateConfig) -> Result<InstanceSpec> {
    if g.n == 0 || g.atoms == 0 {
        return Err(Error::Config("n and atoms must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
    let weights = (0..g.n)
        .map(|_| WeightDistribution::random_uniform(g.atoms, g.dim, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let reward = match g.reward {
        GeneratedReward::Linear => RewardFunction::linear(g.dim)?,
        GeneratedReward::Gate => RewardFunction::gate(g.dim)?,
    };
    InstanceSpec::new(ContextDistribution::product_uniform(g.dim, g.context_step)?, reward, weights, g.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub source: String,
    pub input_digest: String,
    pub m: usize,
    pub aggregates: Aggregates,
}

/// Several runs side by side, with medians across runs of each run's mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedReport {
    pub runs: Vec<RunEntry>,
    pub median_mean_loss_gap: f64,
    pub median_mean_levy: f64,
    pub median_mean_regret: Option<f64>,
}

pub fn combine_reports(reports: &[(String, EvaluationReport)]) -> Result<CombinedReport> {
    if reports.is_empty() {
        return Err(Error::Config("no reports to combine".into()));
    }
    let median = |v: Vec<f64>| Summary::of(&v).map(|s| s.median);
    let regrets: Vec<f64> = reports
        .iter()
        .filter_map(|(_, r)| r.aggregates.regret.map(|s| s.mean))
        .collect();
    Ok(CombinedReport {
        runs: reports
            .iter()
            .map(|(source, r)| RunEntry {
                source: source.clone(),
                input_digest: r.provenance.input_digest.clone(),
                m: r.m,
                aggregates: r.aggregates.clone(),
            })
            .collect(),
        median_mean_loss_gap: median(reports.iter().map(|(_, r)| r.aggregates.loss_gap.mean).collect())
            .unwrap_or(0.0),
        median_mean_levy: median(reports.iter().map(|(_, r)| r.aggregates.levy.mean).collect())
            .unwrap_or(0.0),
        median_mean_regret: median(regrets),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_dim_instance(truth: WeightDistribution) -> InstanceSpec {
        InstanceSpec::new(
            ContextDistribution::point(vec![1.0]).unwrap(),
            RewardFunction::linear(1).unwrap(),
            vec![truth],
            0,
        )
        .unwrap()
    }

    #[test]
    fn per_context_examples() {
        let f = RewardFunction::linear(1).unwrap();
        let truth = vec![WeightDistribution::uniform(vec![vec![0.0], vec![1.0]]).unwrap()];
        let learned = vec![WeightDistribution::point(vec![0.5]).unwrap()];
        let grid = cap_grid(1.0, 0.5).unwrap();
        let settings = EvalSettings {
            grid: &grid,
            problem: Some(ProblemKind::Revenue),
            costs: None,
            deploy_eps: 0.0,
            budget: EvalBudget::default(),
            seed: 0,
        };
        let r = per_context_eval(&truth, &learned, &f, &[1.0], &settings).unwrap();
        assert!((r.loss_gap - 0.0625).abs() < 1e-12);
        assert!((r.capped_gap_sup - 0.25).abs() < 1e-12);
        assert!((r.levy - 0.5).abs() < 1e-6);
        let p = r.policy.unwrap();
        assert!((p.value_learned - 0.25).abs() < 1e-12);
        assert!((p.value_optimal - 0.5).abs() < 1e-12);
        assert!((p.regret - 0.25).abs() < 1e-12 && p.exact);

        let same = per_context_eval(&truth, &truth, &f, &[1.0], &settings).unwrap();
        assert_eq!((same.loss_gap, same.capped_gap_sup, same.levy), (0.0, 0.0, 0.0));
        assert_eq!(same.policy.unwrap().regret, 0.0);
        assert!(per_context_eval(&truth, &[], &f, &[1.0], &settings).is_err());
        assert!(per_context_eval(&truth, &learned, &f, &[1.0, 0.0], &settings).is_err());
    }

    #[test]
    fn smallest_run_is_populated() {
        let inst = one_dim_instance(WeightDistribution::uniform(vec![vec![0.2], vec![0.7]]).unwrap());
        let cfg = ExperimentConfig::new(inst, 1, LearnerConfig::new(2, 0.25, 10), 1);
        let r = run_pipeline(&cfg).unwrap();
        assert_eq!(r.records.len(), 1);
        assert!(r.records[0].policy.is_none() && r.aggregates.regret.is_none());
        assert_eq!(r.learned.len(), 1);
        assert_eq!(r.provenance.input_digest.len(), 64);
    }

    #[test]
    fn planted_truth_has_zero_gaps() {
        let inst = one_dim_instance(WeightDistribution::uniform(vec![vec![0.2], vec![0.7]]).unwrap());
        let mut cfg = ExperimentConfig::new(inst, 5, LearnerConfig::new(2, 0.25, 10), 4);
        cfg.plant_truth = true;
        cfg.problem = ProblemConfig::Revenue;
        let r = run_pipeline(&cfg).unwrap();
        for rec in &r.records {
            assert_eq!((rec.loss_gap, rec.levy), (0.0, 0.0));
            assert_eq!(rec.policy.as_ref().unwrap().regret, 0.0);
        }
    }

    #[test]
    fn summary_statistics() {
        let s = Summary::of(&[5.0, 1.0, 3.0, 2.0, 4.0, 6.0, 7.0, 8.0, 9.0, 10.0]).unwrap();
        assert_eq!((s.median, s.mean, s.p90), (5.5, 5.5, 9.0));
        let s = Summary::of(&[2.0]).unwrap();
        assert_eq!((s.median, s.mean, s.p90), (2.0, 2.0, 2.0));
        assert!(Summary::of(&[]).is_none());
    }

    #[test]
    fn config_validation() {
        let inst = one_dim_instance(WeightDistribution::point(vec![0.5]).unwrap());
        let base = ExperimentConfig::new(inst, 3, LearnerConfig::new(1, 0.5, 5), 2);
        let mut c = base.clone();
        c.m = 0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.eval_contexts = 0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.problem = ProblemConfig::Pandora { costs: vec![] };
        assert!(c.validate().is_err());
        let mut c = base;
        c.instance = None;
        assert!(c.validate().is_err());
    }
}
