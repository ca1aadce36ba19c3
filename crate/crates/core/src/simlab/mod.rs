//! Synthetic scenarios with known stage structure, and experiment runs over them.

mod experiment;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Weibull};
use serde::{Deserialize, Serialize};

pub use experiment::{
    run_experiment, write_outputs, ConvergenceRow, ExperimentConfig, ExperimentOutput, Method, SummaryRow,
    TrialRecord,
};

use crate::data::{BinomialCounts, EdgeTimes, HoldingData, TransitionData};
use crate::error::{Error, Result};
use crate::partition::Partition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioFamily {
    /// Situations with Binomial transition counts.
    Binomial,
    /// Edges with Weibull holding times of known scale.
    WeibullKnownScale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Label used in outputs; derived from the other fields when empty.
    pub id: String,
    pub family: ScenarioFamily,
    pub units: usize,
    pub stages: usize,
    pub replicates: usize,
    pub trials_per_situation: u64,
    pub obs_per_edge: usize,
    pub scale: f64,
    /// Defaults to 2 for situations and 5 for edges.
    pub min_units_per_stage: Option<usize>,
    pub separation: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            id: String::new(),
            family: ScenarioFamily::Binomial,
            units: 50,
            stages: 2,
            replicates: 50,
            trials_per_situation: 1000,
            obs_per_edge: 30,
            scale: 50.0,
            min_units_per_stage: None,
            separation: 0.05,
            seed: 0,
        }
    }
}

pub const PROBABILITY_RANGE: (f64, f64) = (0.1, 0.9);
pub const SHAPE_RANGE: (f64, f64) = (0.5, 4.0);

impl ScenarioConfig {
    pub fn situations(units: usize, stages: usize) -> Self {
        Self { units, stages, ..Default::default() }
    }

    pub fn edges(units: usize, stages: usize) -> Self {
        Self { family: ScenarioFamily::WeibullKnownScale, units, stages, ..Default::default() }
    }

    pub fn label(&self) -> String {
        if !self.id.is_empty() {
            return self.id.clone();
        }
        let f = match self.family {
            ScenarioFamily::Binomial => "situations",
            ScenarioFamily::WeibullKnownScale => "edges",
        };
        format!("{f}-{}x{}", self.units, self.stages)
    }

    pub fn min_per_stage(&self) -> usize {
        self.min_units_per_stage.unwrap_or(match self.family {
            ScenarioFamily::Binomial => 2,
            ScenarioFamily::WeibullKnownScale => 5,
        })
    }

    /// Stage parameters: success probabilities or Weibull shapes.
    pub fn stage_parameters(&self) -> Vec<f64> {
        let s = self.stages;
        let frac = |i: usize| if s == 1 { 0.5 } else { i as f64 / (s - 1) as f64 };
        match self.family {
            ScenarioFamily::Binomial => {
                let (lo, hi) = PROBABILITY_RANGE;
                (0..s).map(|i| lo + (hi - lo) * frac(i)).collect()
            }
            ScenarioFamily::WeibullKnownScale => {
                let (lo, hi) = (SHAPE_RANGE.0.ln(), SHAPE_RANGE.1.ln());
                (0..s).map(|i| (lo + (hi - lo) * frac(i)).exp()).collect()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InfeasibleConfig(m));
        if self.stages == 0 {
            return bad("need at least one stage".into());
        }
        let min = self.min_per_stage();
        if self.stages * min > self.units {
            return bad(format!("{} stages of at least {min} do not fit in {} units", self.stages, self.units));
        }
        if !(self.separation > 0.0) {
            return bad("separation must be positive".into());
        }
        let params = self.stage_parameters();
        if params.windows(2).any(|w| w[1] - w[0] < self.separation) {
            return bad(format!("{} stages are closer than separation {}", self.stages, self.separation));
        }
        match self.family {
            ScenarioFamily::Binomial if self.trials_per_situation == 0 => bad("trials per situation must be positive".into()),
            ScenarioFamily::WeibullKnownScale if self.obs_per_edge == 0 => bad("observations per edge must be positive".into()),
            ScenarioFamily::WeibullKnownScale if !(self.scale > 0.0 && self.scale.is_finite()) => {
                bad("scale must be positive".into())
            }
            _ => Ok(()),
        }
    }

    /// Stage index of each unit: sizes uniform over compositions respecting
    /// the minimum, then shuffled.
    fn stage_assignment(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let s = self.stages;
        let min = self.min_per_stage();
        let free = self.units - s * min;
        // Stars and bars: choose s - 1 bar slots among free + s - 1.
        let mut bars: Vec<usize> = index::sample(rng, free + s - 1, s - 1).into_vec();
        bars.sort_unstable();
        let mut sizes = Vec::with_capacity(s);
        let mut prev = 0;
        for (i, &b) in bars.iter().enumerate() {
            sizes.push(b - prev - if i == 0 { 0 } else { 1 } + min);
            prev = b;
        }
        let used_stars: usize = sizes.iter().map(|x| x - min).sum();
        sizes.push(free - used_stars + min);
        let mut labels: Vec<usize> = sizes.iter().enumerate().flat_map(|(i, &n)| std::iter::repeat(i).take(n)).collect();
        labels.shuffle(rng);
        labels
    }
}

fn truth(prefix: &str, labels: &[usize]) -> Result<Partition> {
    let ids = (1..=labels.len()).map(|i| format!("{prefix}{i}")).collect();
    Partition::from_labels(ids, labels)
}

pub fn generate_situation_dataset(cfg: &ScenarioConfig) -> Result<(TransitionData, Partition)> {
    if cfg.family != ScenarioFamily::Binomial {
        return Err(Error::InfeasibleConfig("scenario does not describe situations".into()));
    }
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let labels = cfg.stage_assignment(&mut rng);
    let theta = cfg.stage_parameters();
    let units = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let d = Binomial::new(cfg.trials_per_situation, theta[l]).expect("valid probability");
            BinomialCounts::new(format!("s{}", i + 1), rng.sample(d), cfg.trials_per_situation)
        })
        .collect();
    Ok((TransitionData::new(units)?, truth("s", &labels)?))
}

pub fn generate_edge_dataset(cfg: &ScenarioConfig) -> Result<(HoldingData, Partition)> {
    if cfg.family != ScenarioFamily::WeibullKnownScale {
        return Err(Error::InfeasibleConfig("scenario does not describe edges".into()));
    }
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let labels = cfg.stage_assignment(&mut rng);
    let shapes = cfg.stage_parameters();
    let edges = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let d = Weibull::new(cfg.scale, shapes[l]).expect("valid Weibull");
            // Guard against underflow to zero for very small shapes.
            let times = (0..cfg.obs_per_edge).map(|_| rng.sample(d).max(f64::MIN_POSITIVE)).collect();
            EdgeTimes::new(format!("e{}", i + 1), times)
        })
        .collect();
    Ok((HoldingData::new(edges)?, truth("e", &labels)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_parameter_endpoints() {
        assert_eq!(ScenarioConfig::situations(50, 2).stage_parameters(), vec![0.1, 0.9]);
        let s = ScenarioConfig::edges(50, 2).stage_parameters();
        assert!((s[0] - 0.5).abs() < 1e-12 && (s[1] - 4.0).abs() < 1e-12);
        let s = ScenarioConfig::edges(50, 3).stage_parameters();
        assert!((s[1] / s[0] - s[2] / s[1]).abs() < 1e-12);
    }

    #[test]
    fn only_feasible_composition() {
        for seed in 0..20 {
            let cfg = ScenarioConfig { seed, ..ScenarioConfig::situations(4, 2) };
            let (_, t) = generate_situation_dataset(&cfg).unwrap();
            assert!(t.blocks().iter().all(|b| b.len() == 2));
        }
    }

    #[test]
    fn truth_respects_minimum_sizes() {
        for seed in 0..50 {
            let cfg = ScenarioConfig { seed, ..ScenarioConfig::edges(60, 7) };
            let (d, t) = generate_edge_dataset(&cfg).unwrap();
            assert_eq!(t.k(), 7);
            assert!(t.blocks().iter().all(|b| b.len() >= 5));
            assert!(d.edges().iter().all(|e| e.times.len() == 30 && e.times.iter().all(|&h| h > 0.0)));
        }
    }

    #[test]
    fn compositions_are_uniform() {
        // units = 6, stages = 2, min = 2: sizes (2,4), (3,3), (4,2) each with probability 1/3.
        let mut counts = [0usize; 3];
        for seed in 0..3000 {
            let cfg = ScenarioConfig { seed, ..ScenarioConfig::situations(6, 2) };
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let labels = cfg.stage_assignment(&mut rng);
            counts[labels.iter().filter(|&&l| l == 0).count() - 2] += 1;
        }
        for c in counts {
            assert!((c as f64 - 1000.0).abs() < 100.0, "{counts:?}");
        }
    }

    #[test]
    fn infeasible_configs_are_rejected() {
        assert!(ScenarioConfig::situations(5, 3).validate().is_err());
        assert!(ScenarioConfig::edges(50, 11).validate().is_err());
        assert!(ScenarioConfig { separation: 0.5, ..ScenarioConfig::situations(50, 3) }.validate().is_err());
        assert!(generate_edge_dataset(&ScenarioConfig::situations(10, 2)).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = ScenarioConfig { seed: 77, ..ScenarioConfig::situations(30, 3) };
        let (a, ta) = generate_situation_dataset(&cfg).unwrap();
        let (b, tb) = generate_situation_dataset(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
    }
}
