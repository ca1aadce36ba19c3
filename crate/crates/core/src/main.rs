use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cegmix::ahc::{ahc_cluster, exact_partition_search};
use cegmix::conjugate::ConjugatePrior;
use cegmix::data::{Dataset, HoldingData, TransitionData};
use cegmix::metrics::{nmi, rand_index};
use cegmix::mixture::{ComponentPrior, Family, MixtureData};
use cegmix::partition::Partition;
use cegmix::search::{select_clusters, MixturePriors, SearchConfig};
use cegmix::simlab::{
    generate_edge_dataset, generate_situation_dataset, run_experiment, write_outputs, ExperimentConfig,
    ScenarioConfig, ScenarioFamily,
};
use cegmix::tree::{build_ceg, tree_to_dot, TreeDocument};
use cegmix::Result;

#[derive(Parser)]
#[command(name = "cegmix", version, about = "Model selection for chain event graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Binomial,
    Weibull,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and its true partition.
    Simulate(SimulateArgs),
    /// Greedy conjugate clustering of situations.
    FitAhc(FitAhcArgs),
    /// Mixture model search over the number of components.
    FitMixture(FitMixtureArgs),
    /// Compare a predicted partition with the truth.
    Score {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Run a suite of simulated scenarios.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render a staged tree, or its chain event graph, as Graphviz DOT.
    Dot {
        /// JSON with `root`, `edges` as [from, to, label] and optional `staging`.
        #[arg(long)]
        tree: PathBuf,
        /// Emit the staged tree instead of the CEG.
        #[arg(long)]
        staged_tree: bool,
    },
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long, default_value_t = 50)]
    units: usize,
    #[arg(long, default_value_t = 2)]
    stages: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    obs: Option<usize>,
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    min_per_stage: Option<usize>,
    /// Dataset CSV path.
    #[arg(long)]
    data: PathBuf,
    /// Truth partition JSON path.
    #[arg(long)]
    truth: PathBuf,
}

#[derive(Args)]
struct FitAhcArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Score every set partition instead (at most 10 units).
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitMixtureArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// Known Weibull scale.
    #[arg(long, default_value_t = 50.0)]
    scale: f64,
    #[arg(long, default_value_t = 10)]
    k_max: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    chains: usize,
    #[arg(long, default_value_t = 1000)]
    warmup: usize,
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    /// Weibull shape prior as `shape,rate`.
    #[arg(long, value_parser = parse_pair)]
    shape_prior: Option<(f64, f64)>,
    /// Write per-fit draws (constrained scale) into this directory.
    #[arg(long)]
    save_draws: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected two comma-separated numbers")?;
    Ok((a.trim().parse().map_err(|e| format!("{e}"))?, b.trim().parse().map_err(|e| format!("{e}"))?))
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}")?;
        }
    }
    Ok(())
}

fn read_dataset(path: &Path, family: FamilyArg) -> Result<Dataset> {
    let reader = BufReader::new(File::open(path)?);
    Ok(match family {
        FamilyArg::Binomial => TransitionData::read_csv(reader)?.into(),
        FamilyArg::Weibull => HoldingData::read_csv(reader)?.into(),
    })
}

fn read_partition(path: &Path) -> Result<Partition> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => {
            let family = match a.family {
                FamilyArg::Binomial => ScenarioFamily::Binomial,
                FamilyArg::Weibull => ScenarioFamily::WeibullKnownScale,
            };
            let base = ScenarioConfig::default();
            let cfg = ScenarioConfig {
                family,
                units: a.units,
                stages: a.stages,
                seed: a.seed,
                trials_per_situation: a.trials.unwrap_or(base.trials_per_situation),
                obs_per_edge: a.obs.unwrap_or(base.obs_per_edge),
                scale: a.scale.unwrap_or(base.scale),
                min_units_per_stage: a.min_per_stage,
                ..base
            };
            let (data, truth): (Dataset, Partition) = match family {
                ScenarioFamily::Binomial => {
                    let (d, t) = generate_situation_dataset(&cfg)?;
                    (d.into(), t)
                }
                ScenarioFamily::WeibullKnownScale => {
                    let (d, t) = generate_edge_dataset(&cfg)?;
                    (d.into(), t)
                }
            };
            data.write_csv_file(&a.data)?;
            emit(&truth, Some(&a.truth))
        }
        Command::FitAhc(a) => {
            let data = read_dataset(&a.data, FamilyArg::Binomial)?;
            let prior = ConjugatePrior::BetaBinomial { alpha: a.alpha, beta: a.beta };
            prior.validate()?;
            if a.exact {
                emit(&exact_partition_search(&data, &prior)?, a.out.as_deref())
            } else {
                emit(&ahc_cluster(&data, &prior)?, a.out.as_deref())
            }
        }
        Command::FitMixture(a) => {
            let data = read_dataset(&a.data, a.family)?;
            let mut config = SearchConfig { k_max: a.k_max, ..Default::default() };
            config.sampler.seed = a.seed;
            config.sampler.chains = a.chains;
            config.sampler.warmup = a.warmup;
            config.sampler.samples = a.samples;
            config.bridge.seed = a.seed;
            let result = match (&data, a.family) {
                (Dataset::Transitions(d), FamilyArg::Binomial) => select_clusters(
                    MixtureData::Situations(d),
                    Family::Binomial,
                    &MixturePriors::binomial(),
                    &config,
                    a.save_draws.as_deref(),
                )?,
                (Dataset::Holding(d), FamilyArg::Weibull) => {
                    let mut priors = MixturePriors::weibull();
                    if let Some((shape, rate)) = a.shape_prior {
                        priors.component_prior = ComponentPrior::Gamma { shape, rate };
                    }
                    select_clusters(
                        MixtureData::Edges(d),
                        Family::WeibullKnownScale { scale: a.scale },
                        &priors,
                        &config,
                        a.save_draws.as_deref(),
                    )?
                }
                _ => unreachable!("dataset kind follows the family flag"),
            };
            emit(&result, a.out.as_deref())
        }
        Command::Score { pred, truth } => {
            let (p, t) = (read_partition(&pred)?, read_partition(&truth)?);
            #[derive(Serialize)]
            struct Scores {
                nmi: f64,
                rand: f64,
            }
            emit(&Scores { nmi: nmi(&p, &t)?, rand: rand_index(&p, &t)? }, None)
        }
        Command::Experiment { config, out, jobs, seed } => {
            let mut cfg = ExperimentConfig::from_json(&std::fs::read_to_string(&config)?)?;
            if let Some(j) = jobs {
                cfg.jobs = j;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let result = run_experiment(&cfg)?;
            write_outputs(&cfg, &result, &out)?;
            eprintln!(
                "{} trials ({} failed) in {:.1}s, outputs in {}",
                result.records.len(),
                result.records.iter().filter(|r| r.error.is_some()).count(),
                result.seconds,
                out.display()
            );
            Ok(())
        }
        Command::Dot { tree, staged_tree } => {
            let doc = TreeDocument::from_json(&std::fs::read_to_string(&tree)?)?;
            let (t, staging) = doc.build()?;
            let dot = if staged_tree { tree_to_dot(&t, Some(&staging)) } else { build_ceg(&t, &staging)?.to_dot() };
            print!("{dot}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
