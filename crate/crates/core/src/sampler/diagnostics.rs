//! Rank-normalized split-R̂.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::PosteriorDraws;
use crate::error::{Error, Result};
use crate::mixture::MixtureSpec;

/// Split-R̂ of one scalar quantity: the larger of the bulk and folded
/// rank-normalized values. Constant input gives 1.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<f64> {
    let m = chains.iter().map(Vec::len).min().unwrap_or(0);
    if chains.len() < 2 || m < 4 {
        return Err(Error::InsufficientDraws { needed: 4, found: m });
    }
    let half = m / 2;
    let mut splits: Vec<Vec<f64>> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        splits.push(c[..half].to_vec());
        splits.push(c[m - half..m].to_vec());
    }
    if splits.iter().flatten().any(|v| !v.is_finite()) {
        return Ok(f64::INFINITY);
    }
    let bulk = basic_rhat(&rank_normalize(&splits));
    let pooled: Vec<f64> = splits.iter().flatten().copied().collect();
    let med = median(&pooled);
    let folded: Vec<Vec<f64>> = splits.iter().map(|s| s.iter().map(|v| (v - med).abs()).collect()).collect();
    let tail = basic_rhat(&rank_normalize(&folded));
    Ok(bulk.max(tail))
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Replaces values by normal scores of their pooled ranks, ties averaged.
fn rank_normalize(splits: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut idx: Vec<(f64, usize, usize)> = Vec::new();
    for (c, s) in splits.iter().enumerate() {
        for (i, &v) in s.iter().enumerate() {
            idx.push((v, c, i));
        }
    }
    idx.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total = idx.len() as f64;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut out: Vec<Vec<f64>> = splits.iter().map(|s| vec![0.0; s.len()]).collect();
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && idx[end].0 == idx[start].0 {
            end += 1;
        }
        // One-based average rank of the tie group.
        let rank = (start + end + 1) as f64 / 2.0;
        let z = normal.inverse_cdf((rank - 0.375) / (total + 0.25));
        for &(_, c, i) in &idx[start..end] {
            out[c][i] = z;
        }
        start = end;
    }
    out
}

fn basic_rhat(splits: &[Vec<f64>]) -> f64 {
    let n = splits[0].len() as f64;
    let means: Vec<f64> = splits.iter().map(|s| crate::math::mean(s)).collect();
    let w = splits.iter().map(|s| crate::math::variance(s)).sum::<f64>() / splits.len() as f64;
    if !(w > 0.0) {
        return 1.0;
    }
    let b = n * crate::math::variance(&means);
    let var_plus = (n - 1.0) / n * w + b / n;
    (var_plus / w).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub weight_rhat: Vec<f64>,
    pub component_rhat: Vec<f64>,
    /// Share of component parameters with R̂ < 1.01.
    pub below_1_01: f64,
    /// Share of component parameters with R̂ < 1.10.
    pub below_1_10: f64,
    pub weight_below_1_01: f64,
    pub weight_below_1_10: f64,
}

fn share_below(values: &[f64], bound: f64) -> f64 {
    if values.is_empty() {
        return 1.0;
    }
    values.iter().filter(|&&r| r < bound).count() as f64 / values.len() as f64
}

/// Split-R̂ of the constrained weights and components of a mixture fit.
pub fn convergence_report(draws: &PosteriorDraws, spec: &MixtureSpec) -> Result<ConvergenceReport> {
    let t = spec.transform();
    if draws.dim != t.dim() {
        return Err(Error::DimensionMismatch { expected: t.dim(), found: draws.dim });
    }
    let k = spec.k;
    let mut weights = vec![vec![Vec::with_capacity(draws.samples); draws.n_chains()]; k];
    let mut comps = weights.clone();
    for c in 0..draws.n_chains() {
        for x in draws.chain_draws(c) {
            let d = t.forward(x);
            for j in 0..k {
                weights[j][c].push(d.log_weights[j].exp());
                comps[j][c].push(d.components[j]);
            }
        }
    }
    let weight_rhat: Vec<f64> = weights.iter().map(|w| split_rhat(w)).collect::<Result<_>>()?;
    let component_rhat: Vec<f64> = comps.iter().map(|w| split_rhat(w)).collect::<Result<_>>()?;
    Ok(ConvergenceReport {
        below_1_01: share_below(&component_rhat, 1.01),
        below_1_10: share_below(&component_rhat, 1.10),
        weight_below_1_01: share_below(&weight_rhat, 1.01),
        weight_below_1_10: share_below(&weight_rhat, 1.10),
        weight_rhat,
        component_rhat,
    })
}
