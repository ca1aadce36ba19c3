//! Closed-form log evidence of pooled clusters under conjugate priors.
//!
//! The score of a partition is the sum of per-block evidences, so transition
//! and holding-time scores never interact and blocks can be scored alone.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, HoldingData, TransitionData};
use crate::error::{Error, Result};
use crate::math::{ln_beta, ln_gamma};
use crate::partition::Partition;

/// Conjugate prior for one cluster's parameter.
///
/// `GammaWeibullKnownShape` puts a Gamma(`prior_shape`, `prior_rate`) prior on
/// the Weibull rate `τ = λ^{-shape}`, with the Weibull shape itself known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConjugatePrior {
    BetaBinomial { alpha: f64, beta: f64 },
    GammaWeibullKnownShape { shape: f64, prior_shape: f64, prior_rate: f64 },
}

impl ConjugatePrior {
    pub const DEFAULT_BINOMIAL: ConjugatePrior =
        ConjugatePrior::BetaBinomial { alpha: 1.0, beta: 1.0 };

    pub fn weibull_known_shape(shape: f64) -> Self {
        ConjugatePrior::GammaWeibullKnownShape { shape, prior_shape: 1.0, prior_rate: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x > 0.0 && x.is_finite();
        let fine = match *self {
            ConjugatePrior::BetaBinomial { alpha, beta } => ok(alpha) && ok(beta),
            ConjugatePrior::GammaWeibullKnownShape { shape, prior_shape, prior_rate } => {
                ok(shape) && ok(prior_shape) && ok(prior_rate)
            }
        };
        if fine {
            Ok(())
        } else {
            Err(Error::InvalidPrior(format!("{self:?}")))
        }
    }

    /// Log evidence of one block's pooled statistics.
    pub fn log_evidence(&self, stats: &BlockStats) -> f64 {
        match (*self, *stats) {
            (ConjugatePrior::BetaBinomial { alpha, beta }, BlockStats::Binomial { successes, trials }) => {
                let (s, f) = (successes as f64, (trials - successes) as f64);
                ln_beta(alpha + s, beta + f) - ln_beta(alpha, beta)
            }
            (
                ConjugatePrior::GammaWeibullKnownShape { prior_shape: a, prior_rate: b, .. },
                BlockStats::Weibull { n, sum_pow, log_jacobian },
            ) => {
                if n == 0 {
                    return 0.0;
                }
                let n = n as f64;
                log_jacobian + a * b.ln() - ln_gamma(a) + ln_gamma(a + n) - (a + n) * (b + sum_pow).ln()
            }
            _ => f64::NAN,
        }
    }
}

/// Pooled sufficient statistics of a cluster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockStats {
    Binomial { successes: u64, trials: u64 },
    /// `n` times, `Σ h^k`, and `Σ log(k h^{k-1})` for known shape `k`.
    Weibull { n: usize, sum_pow: f64, log_jacobian: f64 },
}

impl BlockStats {
    pub fn merge(&self, other: &BlockStats) -> BlockStats {
        match (*self, *other) {
            (
                BlockStats::Binomial { successes: s1, trials: n1 },
                BlockStats::Binomial { successes: s2, trials: n2 },
            ) => BlockStats::Binomial { successes: s1 + s2, trials: n1 + n2 },
            (
                BlockStats::Weibull { n: n1, sum_pow: p1, log_jacobian: j1 },
                BlockStats::Weibull { n: n2, sum_pow: p2, log_jacobian: j2 },
            ) => BlockStats::Weibull { n: n1 + n2, sum_pow: p1 + p2, log_jacobian: j1 + j2 },
            _ => panic!("cannot merge statistics of different families"),
        }
    }
}

pub fn log_marginal_binomial(successes: u64, trials: u64, alpha: f64, beta: f64) -> Result<f64> {
    let prior = ConjugatePrior::BetaBinomial { alpha, beta };
    prior.validate()?;
    if successes > trials {
        return Err(Error::InvalidCounts { unit: "cluster".into(), successes, trials });
    }
    Ok(prior.log_evidence(&BlockStats::Binomial { successes, trials }))
}

pub fn log_marginal_weibull_known_shape(times: &[f64], prior: &ConjugatePrior) -> Result<f64> {
    prior.validate()?;
    let ConjugatePrior::GammaWeibullKnownShape { shape, .. } = *prior else {
        return Err(Error::InvalidPrior("expected a Gamma-Weibull prior".into()));
    };
    let stats = weibull_stats("cluster", times, shape)?;
    Ok(prior.log_evidence(&stats))
}

fn weibull_stats(id: &str, times: &[f64], shape: f64) -> Result<BlockStats> {
    let mut sum_pow = 0.0;
    let mut log_jacobian = 0.0;
    for &h in times {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::NonPositiveTime { unit: id.to_string(), value: h });
        }
        sum_pow += h.powf(shape);
        log_jacobian += shape.ln() + (shape - 1.0) * h.ln();
    }
    Ok(BlockStats::Weibull { n: times.len(), sum_pow, log_jacobian })
}

/// Per-unit statistics for `data` under `prior`.
pub fn unit_stats(data: &Dataset, prior: &ConjugatePrior) -> Result<Vec<BlockStats>> {
    prior.validate()?;
    match (data, prior) {
        (Dataset::Transitions(d), ConjugatePrior::BetaBinomial { .. }) => Ok(transition_stats(d)),
        (Dataset::Holding(d), ConjugatePrior::GammaWeibullKnownShape { shape, .. }) => {
            holding_stats(d, *shape)
        }
        _ => Err(Error::InvalidPrior("prior family does not match the data".into())),
    }
}

fn transition_stats(d: &TransitionData) -> Vec<BlockStats> {
    d.units()
        .iter()
        .map(|u| BlockStats::Binomial { successes: u.successes, trials: u.trials })
        .collect()
}

fn holding_stats(d: &HoldingData, shape: f64) -> Result<Vec<BlockStats>> {
    d.edges().iter().map(|e| weibull_stats(&e.id, &e.times, shape)).collect()
}

/// Pools unit statistics per block of `partition`.
pub fn block_stats(partition: &Partition, units: &[BlockStats]) -> Result<Vec<BlockStats>> {
    if partition.len() != units.len() {
        return Err(Error::PartitionMismatch { expected: units.len(), found: partition.len() });
    }
    Ok(partition
        .blocks()
        .iter()
        .map(|members| {
            members[1..].iter().fold(units[members[0]], |acc, &m| acc.merge(&units[m]))
        })
        .collect())
}

/// Sum over blocks of the closed-form block evidence.
pub fn score_partition(partition: &Partition, data: &Dataset, prior: &ConjugatePrior) -> Result<f64> {
    if partition.len() != data.len() {
        return Err(Error::PartitionMismatch { expected: data.len(), found: partition.len() });
    }
    if partition.units() != data.ids().as_slice() {
        return Err(Error::UnitSetMismatch);
    }
    let stats = unit_stats(data, prior)?;
    Ok(block_stats(partition, &stats)?.iter().map(|b| prior.log_evidence(b)).sum())
}
