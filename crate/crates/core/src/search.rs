//! Top-down search over the number of mixture components.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bridge::{bridge_mixture, BridgeConfig};
use crate::data::{HoldingData, TransitionData};
use crate::error::{Error, Result};
use crate::mixture::{allocate, Allocation, ComponentPrior, Family, MixtureData, MixtureParams, MixtureSpec};
use crate::partition::Partition;
use crate::rng::mix_seed;
use crate::sampler::{
    convergence_report, posterior_mean_params, run_chains, write_draws_csv, ConvergenceReport, SamplerConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixturePriors {
    pub weight_concentration: f64,
    pub component_prior: ComponentPrior,
    pub ordered: bool,
}

impl MixturePriors {
    pub fn binomial() -> Self {
        Self { weight_concentration: 1.0, component_prior: MixtureSpec::DEFAULT_BETA, ordered: true }
    }

    pub fn weibull() -> Self {
        Self { weight_concentration: 1.0, component_prior: MixtureSpec::DEFAULT_SHAPE_PRIOR, ordered: true }
    }

    pub fn spec(&self, k: usize, family: Family) -> MixtureSpec {
        MixtureSpec {
            k,
            family,
            weight_concentration: self.weight_concentration,
            component_prior: self.component_prior,
            ordered: self.ordered,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub k_max: usize,
    pub sampler: SamplerConfig,
    pub bridge: BridgeConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { k_max: 10, sampler: SamplerConfig::default(), bridge: BridgeConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub k: usize,
    pub log_ml: f64,
    pub converged: bool,
    pub accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct TopDown<T> {
    pub k_selected: usize,
    pub selected: T,
    pub trace: Vec<TraceEntry>,
    /// Outputs of every successful fit, in order of k.
    pub fits: Vec<(usize, T)>,
}

/// Fits k = 2, 3, ... while the score does not decrease. `fit` returns the
/// score, whether its estimate converged, and an output kept per fit.
pub fn top_down_search<T: Clone>(
    k_max: usize,
    mut fit: impl FnMut(usize) -> Result<(f64, bool, T)>,
) -> Result<TopDown<T>> {
    if k_max < 2 {
        return Err(Error::InvalidConfig(format!("k_max must be at least 2, got {k_max}")));
    }
    let mut score = f64::NEG_INFINITY;
    let mut trace = Vec::new();
    let mut fits = Vec::new();
    let mut best: Option<(usize, T)> = None;
    for k in 2..=k_max {
        match fit(k) {
            Ok((s, converged, out)) => {
                let accepted = s >= score;
                trace.push(TraceEntry { k, log_ml: s, converged, accepted, error: None });
                fits.push((k, out.clone()));
                if !accepted {
                    break;
                }
                score = s;
                best = Some((k, out));
            }
            Err(e) if k == 2 => return Err(Error::SearchAborted(e.to_string())),
            Err(e) => {
                trace.push(TraceEntry {
                    k,
                    log_ml: f64::NAN,
                    converged: false,
                    accepted: false,
                    error: Some(e.to_string()),
                });
                break;
            }
        }
    }
    let (k_selected, selected) = best.expect("k = 2 is always accepted");
    Ok(TopDown { k_selected, selected, trace, fits })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSummary {
    pub k: usize,
    pub params: MixtureParams,
    pub convergence: ConvergenceReport,
    pub divergences: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchResult {
    pub k_selected: usize,
    pub partition: Partition,
    pub allocation: Allocation,
    pub params: MixtureParams,
    pub convergence: ConvergenceReport,
    pub score_trace: Vec<TraceEntry>,
    pub fits: Vec<FitSummary>,
    pub seconds: f64,
}

/// Runs the search for either family. When `draws_dir` is set, every fit's
/// constrained draws are written there as `k{K}_chain{C}.csv`.
pub fn select_clusters(
    data: MixtureData<'_>,
    family: Family,
    priors: &MixturePriors,
    config: &SearchConfig,
    draws_dir: Option<&Path>,
) -> Result<SearchResult> {
    if data.len() < 2 {
        return Err(Error::TooFewUnits { needed: 2, found: data.len() });
    }
    let start = Instant::now();
    let outcome = top_down_search(config.k_max, |k| {
        let t0 = Instant::now();
        let spec = priors.spec(k, family);
        let seed = mix_seed(&[config.sampler.seed, k as u64]);
        let sampler = SamplerConfig { seed, ..config.sampler };
        let draws = run_chains(&spec, data, &sampler)?;
        if let Some(dir) = draws_dir {
            write_draws_csv(&draws, &spec, dir, &format!("k{k}"))?;
        }
        let params = posterior_mean_params(&draws, &spec)?;
        let convergence = convergence_report(&draws, &spec)?;
        let bridge = BridgeConfig { seed: mix_seed(&[config.bridge.seed, k as u64]), ..config.bridge };
        let estimate = bridge_mixture(&spec, data, &draws, &bridge)?;
        let summary = FitSummary {
            k,
            params,
            convergence,
            divergences: draws.divergences(),
            seconds: t0.elapsed().as_secs_f64(),
        };
        Ok((estimate.log_ml, estimate.converged, summary))
    })?;
    let chosen = outcome.selected;
    let allocation = allocate(family, data, &chosen.params)?;
    let partition = Partition::from_labels(data.ids(), &allocation.labels)?;
    Ok(SearchResult {
        k_selected: outcome.k_selected,
        partition,
        allocation,
        params: chosen.params.clone(),
        convergence: chosen.convergence.clone(),
        score_trace: outcome.trace,
        fits: outcome.fits.into_iter().map(|(_, f)| f).collect(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Clusters situations with Binomial mixtures of increasing size.
pub fn select_situation_clusters(
    data: &TransitionData,
    priors: &MixturePriors,
    config: &SearchConfig,
) -> Result<SearchResult> {
    select_clusters(MixtureData::Situations(data), Family::Binomial, priors, config, None)
}

/// Clusters edges with Weibull mixtures of known scale.
pub fn select_edge_clusters(
    data: &HoldingData,
    scale: f64,
    priors: &MixturePriors,
    config: &SearchConfig,
) -> Result<SearchResult> {
    select_clusters(MixtureData::Edges(data), Family::WeibullKnownScale { scale }, priors, config, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stops_at_first_decrease() {
        let mut calls = Vec::new();
        let r = top_down_search(10, |k| {
            calls.push(k);
            Ok(([-10.0, -11.0][k - 2], true, k))
        })
        .unwrap();
        assert_eq!(r.k_selected, 2);
        assert_eq!(calls, vec![2, 3]);
        assert_eq!(r.trace.len(), 2);
        assert!(!r.trace[1].accepted);
    }

    #[test]
    fn equal_scores_are_accepted() {
        let r = top_down_search(10, |k| Ok(([-5.0, -5.0, -6.0][k - 2], true, ()))).unwrap();
        assert_eq!(r.k_selected, 3);
    }

    #[test]
    fn cap_limits_the_search() {
        let mut n = 0;
        let r = top_down_search(2, |_| {
            n += 1;
            Ok((0.0, true, ()))
        })
        .unwrap();
        assert_eq!((r.k_selected, n), (2, 1));
        let r = top_down_search(4, |k| Ok((k as f64, true, k))).unwrap();
        assert_eq!(r.k_selected, 4);
        assert!(top_down_search(1, |_| Ok((0.0, true, ()))).is_err());
    }

    #[test]
    fn failures_abort_or_reject() {
        let e = top_down_search(5, |_| -> Result<(f64, bool, ())> { Err(Error::NonFiniteDensity { chain: 0 }) });
        assert!(matches!(e, Err(Error::SearchAborted(_))));
        let r = top_down_search(5, |k| {
            if k == 3 {
                Err(Error::DivergencePersistent { rate: 0.5 })
            } else {
                Ok((1.0, true, k))
            }
        })
        .unwrap();
        assert_eq!(r.k_selected, 2);
        assert!(r.trace[1].error.is_some());
    }

    #[test]
    fn identical_edges_share_a_component() {
        let times = vec![3.0, 10.0, 44.0, 61.0, 20.0];
        let mut rows = vec![times.clone(), times];
        rows.extend((0..4).map(|i| vec![49.0 + i as f64, 50.5, 51.0, 48.5 - i as f64, 50.0]));
        let data = HoldingData::from_times(rows).unwrap();
        let cfg = SearchConfig {
            k_max: 3,
            sampler: SamplerConfig { warmup: 300, samples: 500, ..Default::default() },
            ..Default::default()
        };
        let r = select_edge_clusters(&data, 50.0, &MixturePriors::weibull(), &cfg).unwrap();
        assert_eq!(r.partition.labels()[0], r.partition.labels()[1]);
        assert_eq!(r.allocation.probabilities[0], r.allocation.probabilities[1]);
        assert_eq!(r.params.k(), r.k_selected);
    }
}
