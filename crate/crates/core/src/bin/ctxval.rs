use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ctxval::harness::{
    combine_reports, dump_samples, evaluate_learned, generate_instance, learn_all, load_samples,
    parse_instance, read_json, write_instance, write_json, write_report, EvalBudgetConfig,
    EvaluationReport, ExperimentConfig, GenerateConfig, LearnedSummary, ProblemConfig,
};
use ctxval::learner::learn;
use ctxval::model::draw_samples;
use ctxval::selftest;
use ctxval::{Error, Result};

#[derive(Parser)]
#[command(name = "ctxval", version, about = "Learn contextual value distributions and evaluate policies built on them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Output directory.
    #[arg(long, env = "CTXVAL_OUT", default_value = "out")]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random instance to <out>/instance.json.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Generator config (JSON); the flags below are used without one.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 3)]
        atoms: usize,
        #[arg(long, default_value_t = 0.25)]
        context_step: f64,
    },
    /// Draw labeled samples into <out>/samples_<i>.csv.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Instance JSON.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 100)]
        m: usize,
    },
    /// Learn one hypothesis per distribution into <out>/learned.json.
    Learn {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Use these sample files (one per distribution) instead of sampling.
        #[arg(long)]
        samples: Vec<PathBuf>,
    },
    /// Evaluate at fresh contexts; writes <out>/report.json and records.csv.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Previously learned hypotheses; learned from scratch when absent.
        #[arg(long)]
        learned: Option<PathBuf>,
    },
    /// Combine several report.json files into <out>/combined.json.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
    /// Run the acceptance suite.
    Selftest {
        /// Run only these criteria.
        #[arg(long)]
        only: Vec<u8>,
    },
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    m: Option<usize>,
    /// revenue, pandora, stopping or none. Pandora takes costs from the config.
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    deploy_eps: Option<f64>,
    #[arg(long)]
    exact_budget: Option<u64>,
}

impl ExperimentArgs {
    fn load(&self, seed: Option<u64>) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        if let Some(m) = self.m {
            cfg.m = m;
        }
        if let Some(e) = self.deploy_eps {
            cfg.deploy_eps = e;
        }
        if let Some(b) = self.exact_budget {
            cfg.budget = EvalBudgetConfig {
                exact_budget: b,
                ..cfg.budget
            };
        }
        if let Some(p) = &self.problem {
            cfg.problem = match p.as_str() {
                "none" => ProblemConfig::None,
                "revenue" => ProblemConfig::Revenue,
                "stopping" => ProblemConfig::Stopping,
                "pandora" => match &cfg.problem {
                    ProblemConfig::Pandora { costs } => ProblemConfig::Pandora { costs: costs.clone() },
                    _ => return Err(Error::MissingCosts),
                },
                other => {
                    return Err(Error::InvalidArgument {
                        name: "problem",
                        reason: format!("unknown problem `{other}` (expected revenue, pandora, stopping or none)"),
                    })
                }
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn learned_from_samples(cfg: &ExperimentConfig, paths: &[PathBuf]) -> Result<Vec<LearnedSummary>> {
    let inst = cfg.instance()?;
    if paths.len() != inst.n {
        return Err(Error::LengthMismatch {
            what: "sample files vs distributions",
            left: paths.len(),
            right: inst.n,
        });
    }
    paths
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let s = load_samples(p)?;
            let mut lc = cfg.learner.clone();
            lc.seed = lc.seed.wrapping_add(cfg.seed).wrapping_add(i as u64);
            let res = learn(&s, &inst.reward, &lc)?;
            Ok(LearnedSummary {
                distribution: res.learned,
                objective: Some(res.selected_objective),
            })
        })
        .collect()
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate {
            common,
            config,
            n,
            dim,
            atoms,
            context_step,
        } => {
            let mut g = match config {
                Some(p) => read_json::<GenerateConfig>(&p)?,
                None => GenerateConfig {
                    n,
                    dim,
                    atoms,
                    reward: Default::default(),
                    context_step,
                    seed: 0,
                },
            };
            if let Some(s) = common.seed {
                g.seed = s;
            }
            let path = common.out.join("instance.json");
            write_instance(&generate_instance(&g)?, &path)?;
            announce(&path);
        }
        Command::Sample { common, config, m } => {
            let inst = parse_instance(&config)?;
            let seed = common.seed.unwrap_or(inst.seed);
            for (i, w) in inst.weights.iter().enumerate() {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let s = draw_samples(w, &inst.context, &inst.reward, m, &mut rng)?;
                let path = common.out.join(format!("samples_{i}.csv"));
                dump_samples(&s, &path)?;
                announce(&path);
            }
        }
        Command::Learn { common, exp, samples } => {
            let cfg = exp.load(common.seed)?;
            let learned = if samples.is_empty() {
                learn_all(&cfg)?
            } else {
                learned_from_samples(&cfg, &samples)?
            };
            let path = common.out.join("learned.json");
            write_json(&learned, &path)?;
            announce(&path);
        }
        Command::Evaluate { common, exp, learned } => {
            let cfg = exp.load(common.seed)?;
            let learned = match learned {
                Some(p) => read_json::<Vec<LearnedSummary>>(&p)?,
                None => learn_all(&cfg)?,
            };
            let report = evaluate_learned(&cfg, learned)?;
            let dir = cfg.output.clone().unwrap_or(common.out);
            write_report(&report, &dir)?;
            let a = &report.aggregates;
            println!(
                "loss gap median {:.4e}, levy median {:.4}, levy <= {} on {:.1}% of contexts",
                a.loss_gap.median,
                a.levy.median,
                a.levy_target,
                100.0 * a.fraction_levy_within_target
            );
            if let Some(r) = a.regret {
                println!("regret median {:.4e}, mean {:.4e}, p90 {:.4e}", r.median, r.mean, r.p90);
            }
            announce(&dir.join("report.json"));
        }
        Command::Report { common, reports } => {
            let loaded = reports
                .iter()
                .map(|p| Ok((p.display().to_string(), read_json::<EvaluationReport>(p)?)))
                .collect::<Result<Vec<_>>>()?;
            let combined = combine_reports(&loaded)?;
            let path = common.out.join("combined.json");
            write_json(&combined, &path)?;
            println!(
                "{} runs: median mean loss gap {:.4e}, median mean levy {:.4}",
                combined.runs.len(),
                combined.median_mean_loss_gap,
                combined.median_mean_levy
            );
            announce(&path);
        }
        Command::Selftest { only } => {
            let ids: Vec<u8> = if only.is_empty() {
                selftest::criterion_ids().collect()
            } else {
                only
            };
            let mut ok = true;
            for id in ids {
                match selftest::run_criterion(id) {
                    Some(r) => {
                        println!("{r}");
                        ok &= r.passed;
                    }
                    None => {
                        return Err(Error::InvalidArgument {
                            name: "only",
                            reason: format!("no criterion {id}"),
                        })
                    }
                }
            }
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
