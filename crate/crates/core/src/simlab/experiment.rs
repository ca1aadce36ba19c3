use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_edge_dataset, generate_situation_dataset, ScenarioConfig, ScenarioFamily};
use crate::ahc::ahc_cluster;
use crate::conjugate::ConjugatePrior;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{nmi, rand_index};
use crate::partition::Partition;
use crate::rng::mix_seed;
use crate::search::{select_edge_clusters, select_situation_clusters, MixturePriors, SearchConfig, SearchResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ahc,
    Mixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub jobs: usize,
    pub methods: Vec<Method>,
    pub search: SearchConfig,
    pub ahc_prior: ConjugatePrior,
    pub binomial_priors: MixturePriors,
    pub weibull_priors: MixturePriors,
    pub scenarios: Vec<ScenarioConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            jobs: 4,
            methods: vec![Method::Ahc, Method::Mixture],
            search: SearchConfig::default(),
            ahc_prior: ConjugatePrior::DEFAULT_BINOMIAL,
            binomial_priors: MixturePriors::binomial(),
            weibull_priors: MixturePriors::weibull(),
            scenarios: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.jobs == 0 {
            return Err(Error::InvalidConfig("jobs must be positive".into()));
        }
        self.search.sampler.validate()?;
        self.ahc_prior.validate()?;
        for s in &self.scenarios {
            s.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub scenario: String,
    pub family: ScenarioFamily,
    pub units: usize,
    pub stages: usize,
    pub replicate: usize,
    pub method: Method,
    pub seconds: f64,
    pub k: Option<usize>,
    pub nmi: Option<f64>,
    pub rand: Option<f64>,
    pub conv_prop_1_01: Option<f64>,
    pub conv_prop_1_10: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub units: usize,
    pub stages: usize,
    pub trials: usize,
    pub failures: usize,
    pub seconds: f64,
    pub k: f64,
    pub nmi: f64,
    pub rand: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub scenario: String,
    pub family: ScenarioFamily,
    pub units: usize,
    pub stages: usize,
    pub trials: usize,
    pub prop_1_01: f64,
    pub prop_1_10: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub records: Vec<TrialRecord>,
    /// AHC on situations.
    pub table1: Vec<SummaryRow>,
    /// Mixtures on situations.
    pub table2: Vec<SummaryRow>,
    /// Mixtures on edges.
    pub table3: Vec<SummaryRow>,
    pub convergence: Vec<ConvergenceRow>,
    pub seconds: f64,
}

struct Outcome {
    k: usize,
    predicted: Partition,
    conv: Option<(f64, f64)>,
}

fn from_search(r: SearchResult) -> Outcome {
    Outcome {
        k: r.k_selected,
        predicted: r.partition,
        conv: Some((r.convergence.below_1_01, r.convergence.below_1_10)),
    }
}

fn run_trial(cfg: &ExperimentConfig, idx: usize, scenario: &ScenarioConfig, replicate: usize) -> Vec<TrialRecord> {
    let trial_seed = mix_seed(&[cfg.seed, scenario.seed, idx as u64, replicate as u64]);
    let gen_cfg = ScenarioConfig { seed: trial_seed, ..scenario.clone() };
    let record = |method, seconds, outcome: Result<(Outcome, Partition)>| {
        let mut r = TrialRecord {
            scenario: scenario.label(),
            family: scenario.family,
            units: scenario.units,
            stages: scenario.stages,
            replicate,
            method,
            seconds,
            k: None,
            nmi: None,
            rand: None,
            conv_prop_1_01: None,
            conv_prop_1_10: None,
            error: None,
        };
        let scored = outcome.and_then(|(o, truth)| {
            Ok((nmi(&o.predicted, &truth)?, rand_index(&o.predicted, &truth)?, o))
        });
        match scored {
            Ok((n, ri, o)) => {
                r.k = Some(o.k);
                r.nmi = Some(n);
                r.rand = Some(ri);
                if let Some((a, b)) = o.conv {
                    r.conv_prop_1_01 = Some(a);
                    r.conv_prop_1_10 = Some(b);
                }
            }
            Err(e) => r.error = Some(e.to_string()),
        }
        r
    };

    let mut search = cfg.search;
    search.sampler.seed = mix_seed(&[trial_seed, 1]);
    search.bridge.seed = mix_seed(&[trial_seed, 2]);
    let mut out = Vec::new();
    let mut methods = cfg.methods.clone();
    methods.sort();
    methods.dedup();
    match scenario.family {
        ScenarioFamily::Binomial => {
            let generated = generate_situation_dataset(&gen_cfg).map_err(|e| e.to_string());
            for &m in &methods {
                let start = Instant::now();
                let result = generated.clone().map_err(Error::InfeasibleConfig).and_then(|(data, truth)| {
                    let o = match m {
                        Method::Ahc => {
                            let r = ahc_cluster(&Dataset::Transitions(data), &cfg.ahc_prior)?;
                            Outcome { k: r.partition.k(), predicted: r.partition, conv: None }
                        }
                        Method::Mixture => from_search(select_situation_clusters(&data, &cfg.binomial_priors, &search)?),
                    };
                    Ok((o, truth))
                });
                out.push(record(m, start.elapsed().as_secs_f64(), result));
            }
        }
        ScenarioFamily::WeibullKnownScale => {
            // AHC needs a known shape, which is what is being clustered here.
            if methods.contains(&Method::Mixture) {
                let start = Instant::now();
                let result = generate_edge_dataset(&gen_cfg).and_then(|(data, truth)| {
                    let r = select_edge_clusters(&data, scenario.scale, &cfg.weibull_priors, &search)?;
                    Ok((from_search(r), truth))
                });
                out.push(record(Method::Mixture, start.elapsed().as_secs_f64(), result));
            }
        }
    }
    out
}

fn summarize(records: &[TrialRecord], family: ScenarioFamily, method: Method) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(usize, usize, String), Vec<&TrialRecord>> = BTreeMap::new();
    let mut order = Vec::new();
    for r in records.iter().filter(|r| r.family == family && r.method == method) {
        let key = (r.units, r.stages, r.scenario.clone());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let rows = &groups[&key];
            let ok: Vec<&&TrialRecord> = rows.iter().filter(|r| r.error.is_none()).collect();
            let mean = |f: &dyn Fn(&TrialRecord) -> f64| {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
                }
            };
            SummaryRow {
                scenario: key.2.clone(),
                units: key.0,
                stages: key.1,
                trials: ok.len(),
                failures: rows.len() - ok.len(),
                seconds: mean(&|r| r.seconds),
                k: mean(&|r| r.k.unwrap_or(0) as f64),
                nmi: mean(&|r| r.nmi.unwrap_or(0.0)),
                rand: mean(&|r| r.rand.unwrap_or(0.0)),
            }
        })
        .collect()
}

fn convergence_rows(records: &[TrialRecord]) -> Vec<ConvergenceRow> {
    let mut order: Vec<(String, ScenarioFamily, usize, usize)> = Vec::new();
    for r in records.iter().filter(|r| r.conv_prop_1_01.is_some()) {
        let key = (r.scenario.clone(), r.family, r.units, r.stages);
        if !order.contains(&key) {
            order.push(key);
        }
    }
    order
        .into_iter()
        .map(|(scenario, family, units, stages)| {
            let rows: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.scenario == scenario && r.conv_prop_1_01.is_some())
                .collect();
            let n = rows.len() as f64;
            ConvergenceRow {
                prop_1_01: rows.iter().map(|r| r.conv_prop_1_01.unwrap()).sum::<f64>() / n,
                prop_1_10: rows.iter().map(|r| r.conv_prop_1_10.unwrap()).sum::<f64>() / n,
                trials: rows.len(),
                scenario,
                family,
                units,
                stages,
            }
        })
        .collect()
}

/// Runs every scenario × replicate × method. Trial failures are recorded,
/// never propagated.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let tasks: Vec<(usize, &ScenarioConfig, usize)> = cfg
        .scenarios
        .iter()
        .enumerate()
        .flat_map(|(i, s)| (0..s.replicates).map(move |r| (i, s, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let records: Vec<TrialRecord> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(i, s, r)| run_trial(cfg, i, s, r))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    });
    Ok(ExperimentOutput {
        table1: summarize(&records, ScenarioFamily::Binomial, Method::Ahc),
        table2: summarize(&records, ScenarioFamily::Binomial, Method::Mixture),
        table3: summarize(&records, ScenarioFamily::WeibullKnownScale, Method::Mixture),
        convergence: convergence_rows(&records),
        records,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a ExperimentConfig,
    trial_seeds: Vec<TrialSeed>,
    trials: usize,
    failures: usize,
    seconds: f64,
}

#[derive(Serialize)]
struct TrialSeed {
    scenario: String,
    replicate: usize,
    seed: u64,
}

/// Writes trials.csv, the summary tables, convergence.csv and manifest.json.
pub fn write_outputs(cfg: &ExperimentConfig, out: &ExperimentOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    const TRIAL: &[&str] = &[
        "scenario", "family", "units", "stages", "replicate", "method", "seconds", "k", "nmi", "rand",
        "conv_prop_1_01", "conv_prop_1_10", "error",
    ];
    const SUMMARY: &[&str] = &["scenario", "units", "stages", "trials", "failures", "seconds", "k", "nmi", "rand"];
    const CONV: &[&str] = &["scenario", "family", "units", "stages", "trials", "prop_1_01", "prop_1_10"];
    write_rows(&dir.join("trials.csv"), &out.records, TRIAL)?;
    write_rows(&dir.join("summary_table1.csv"), &out.table1, SUMMARY)?;
    write_rows(&dir.join("summary_table2.csv"), &out.table2, SUMMARY)?;
    write_rows(&dir.join("summary_table3.csv"), &out.table3, SUMMARY)?;
    write_rows(&dir.join("convergence.csv"), &out.convergence, CONV)?;
    let trial_seeds = cfg
        .scenarios
        .iter()
        .enumerate()
        .flat_map(|(i, s)| {
            (0..s.replicates).map(move |r| TrialSeed {
                scenario: s.label(),
                replicate: r,
                seed: mix_seed(&[cfg.seed, s.seed, i as u64, r as u64]),
            })
        })
        .collect();
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        trial_seeds,
        trials: out.records.len(),
        failures: out.records.iter().filter(|r| r.error.is_some()).count(),
        seconds: out.seconds,
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}
