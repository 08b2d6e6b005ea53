use std::fs;

use ctxval::harness::{
    aggregate, canonical_json, content_digest, parse_instance, run_pipeline, write_instance,
    ExperimentConfig, ProblemConfig,
};
use ctxval::learner::LearnerConfig;
use ctxval::model::{ContextDistribution, InstanceSpec, RewardFunction, WeightDistribution};
use ctxval::selftest::trend_config;
use ctxval::Error;

fn instance(n: usize) -> InstanceSpec {
    let weights = (0..n)
        .map(|i| {
            let s = i as f64 * 0.1;
            WeightDistribution::new(vec![vec![0.2 + s, 0.7], vec![0.9, 0.1 + s]], vec![0.4, 0.6]).unwrap()
        })
        .collect();
    InstanceSpec::new(
        ContextDistribution::product_uniform(2, 0.5).unwrap(),
        RewardFunction::linear(2).unwrap(),
        weights,
        7,
    )
    .unwrap()
}

#[test]
fn instance_round_trip_keeps_digest() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("instance.json");
    let spec = instance(2);
    write_instance(&spec, &path).unwrap();
    let back = parse_instance(&path).unwrap();
    assert_eq!(back, spec);
    let a = canonical_json(&spec).unwrap();
    assert_eq!(a, fs::read_to_string(&path).unwrap());
    assert_eq!(content_digest(a.as_bytes()), content_digest(canonical_json(&back).unwrap().as_bytes()));
}

#[test]
fn malformed_instance_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let mut v: serde_json::Value = serde_json::from_str(&canonical_json(&instance(1)).unwrap()).unwrap();
    v["reward"]["c_max"] = serde_json::json!("big");
    fs::write(&path, v.to_string()).unwrap();
    let err = parse_instance(&path).unwrap_err();
    assert!(matches!(err, Error::Json { .. }));
    assert!(err.to_string().contains("c_max") || err.to_string().contains("string"), "{err}");

    fs::write(&path, r#"{"n": 1, "context": {"kind": "product_uniform", "dim": 2, "step": 0.5}}"#).unwrap();
    let err = parse_instance(&path).unwrap_err().to_string();
    assert!(err.contains("missing field `reward`"), "{err}");
}

#[test]
fn aggregates_agree_with_records() {
    let mut cfg = ExperimentConfig::new(instance(3), 80, LearnerConfig::new(3, 0.25, 40), 30);
    cfg.problem = ProblemConfig::Stopping;
    cfg.levy_target = 0.3;
    let rep = run_pipeline(&cfg).unwrap();
    let within = rep.records.iter().filter(|r| r.levy <= 0.3).count() as f64 / 30.0;
    assert_eq!(rep.aggregates.fraction_levy_within_target, within);
    assert_eq!(aggregate(&rep.records, 0.3).unwrap(), rep.aggregates);
    for r in &rep.records {
        let p = r.policy.as_ref().unwrap();
        assert!(p.exact);
        assert!(p.regret >= -1e-9, "negative regret {}", p.regret);
        let max_levy = r.per_distribution.iter().map(|d| d.levy).fold(0.0, f64::max);
        assert_eq!(r.levy, max_levy);
    }
}

#[test]
fn pandora_regret_is_nonnegative_when_exact() {
    let mut cfg = ExperimentConfig::new(instance(3), 60, LearnerConfig::new(2, 0.5, 30), 20);
    cfg.problem = ProblemConfig::Pandora { costs: vec![0.05, 0.2, 0.1] };
    cfg.deploy_eps = 0.05;
    let rep = run_pipeline(&cfg).unwrap();
    assert_eq!(rep.aggregates.exact_fraction, Some(1.0));
    assert!(rep.records.iter().all(|r| r.policy.as_ref().unwrap().regret >= -1e-9));
}

#[test]
fn monte_carlo_rows_are_flagged() {
    let mut cfg = ExperimentConfig::new(instance(2), 40, LearnerConfig::new(2, 0.5, 10), 3);
    cfg.problem = ProblemConfig::Pandora { costs: vec![0.05, 0.1] };
    cfg.budget.exact_budget = 1;
    cfg.budget.mc_draws = 2000;
    let rep = run_pipeline(&cfg).unwrap();
    assert!(rep.records.iter().all(|r| !r.policy.as_ref().unwrap().exact));
    assert_eq!(rep.aggregates.exact_fraction, Some(0.0));
}

#[test]
fn identical_configs_give_identical_reports() {
    let cfg = trend_config(150, 3).unwrap();
    let a = run_pipeline(&cfg).unwrap();
    let b = run_pipeline(&cfg).unwrap();
    assert_eq!(
        canonical_json(&a.without_timestamp()).unwrap(),
        canonical_json(&b.without_timestamp()).unwrap()
    );
    assert_eq!(a.provenance.input_digest, b.provenance.input_digest);
    let mut other = cfg.clone();
    other.seed = 4;
    assert_ne!(run_pipeline(&other).unwrap().provenance.input_digest, a.provenance.input_digest);
}

#[test]
fn planted_truth_reports_zero_gaps() {
    let mut cfg = ExperimentConfig::new(instance(2), 1, LearnerConfig::new(2, 0.25, 1), 10);
    cfg.plant_truth = true;
    cfg.problem = ProblemConfig::Stopping;
    let rep = run_pipeline(&cfg).unwrap();
    for r in &rep.records {
        assert_eq!((r.loss_gap, r.capped_gap_sup, r.levy), (0.0, 0.0, 0.0));
        assert_eq!(r.policy.as_ref().unwrap().regret, 0.0);
    }
}

#[test]
fn config_file_resolves_instance_path() {
    let dir = tempfile::tempdir().unwrap();
    write_instance(&instance(1), &dir.path().join("inst.json")).unwrap();
    let cfg_path = dir.path().join("exp.json");
    fs::write(
        &cfg_path,
        r#"{"instance_path": "inst.json", "m": 10, "learner": {"k": 2, "epsilon": 0.5, "iterations": 5},
            "problem": {"kind": "revenue"}, "eval_contexts": 2}"#,
    )
    .unwrap();
    let cfg = ExperimentConfig::load(&cfg_path).unwrap();
    assert_eq!(cfg.instance().unwrap(), &instance(1));
    fs::write(&cfg_path, r#"{"instance_path": "inst.json", "m": 10, "eval_contexts": 2, "bogus": 1}"#).unwrap();
    assert!(ExperimentConfig::load(&cfg_path).is_err());
}
