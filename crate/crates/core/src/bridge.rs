//! Bridge sampling estimates of log marginal likelihoods from posterior draws.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{log_add_exp, log_sum_exp};
use crate::mixture::{MixtureData, MixturePosterior, MixtureSpec};
use crate::rng::stream_rng;
use crate::sampler::{LogDensity, PosteriorDraws};

const PROPOSAL_STREAM: u64 = 0xb51d_6e00;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalHalf {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BridgeConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
    /// Half of each chain used to fit the proposal; the other half bridges.
    pub proposal_half: ProposalHalf,
    pub folds: usize,
    pub min_draws: usize,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 1000,
            seed: 1,
            proposal_half: ProposalHalf::First,
            folds: 10,
            min_draws: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianProposal {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub ridge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeEstimate {
    pub log_ml: f64,
    pub iterations: usize,
    pub converged: bool,
    pub relative_change: f64,
    /// Standard error from the spread of per-fold estimates.
    pub mc_error: f64,
    pub proposal: GaussianProposal,
}

struct Proposal {
    mean: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    log_norm: f64,
}

impl Proposal {
    fn fit(points: &[&[f64]]) -> Result<(Self, GaussianProposal)> {
        let d = points[0].len();
        let n = points.len() as f64;
        let mut mean = DVector::zeros(d);
        for p in points {
            mean += DVector::from_column_slice(p);
        }
        mean /= n;
        let mut cov = DMatrix::zeros(d, d);
        for p in points {
            let c = DVector::from_column_slice(p) - &mean;
            cov += &c * c.transpose();
        }
        cov /= n - 1.0;
        let mut ridge = 0.0;
        let chol = match Cholesky::new(cov.clone()) {
            Some(c) => c,
            None => {
                let scale = cov.trace() / d as f64;
                if !(scale > f64::MIN_POSITIVE) {
                    return Err(Error::ProposalDegenerate);
                }
                ridge = 1e-6 * scale;
                let reg = &cov + DMatrix::identity(d, d) * ridge;
                Cholesky::new(reg).ok_or(Error::ProposalDegenerate)?
            }
        };
        let l = chol.l();
        if (0..d).any(|i| !(l[(i, i)] > 0.0) || !l[(i, i)].is_finite()) {
            return Err(Error::ProposalDegenerate);
        }
        let log_det_half: f64 = (0..d).map(|i| l[(i, i)].ln()).sum();
        let log_norm = -0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() - log_det_half;
        let meta = GaussianProposal {
            mean: mean.iter().copied().collect(),
            covariance: (0..d).map(|i| (0..d).map(|j| cov[(i, j)] + if i == j { ridge } else { 0.0 }).collect()).collect(),
            ridge,
        };
        Ok((Self { mean, chol, log_norm }, meta))
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let c = DVector::from_column_slice(x) - &self.mean;
        let z = self.chol.l().solve_lower_triangular(&c).expect("non-singular factor");
        self.log_norm - 0.5 * z.norm_squared()
    }

    fn draw(&self, rng: &mut impl Rng) -> Vec<f64> {
        let d = self.mean.len();
        let e = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        (&self.mean + self.chol.l() * e).iter().copied().collect()
    }
}

struct Iteration {
    log_ml: f64,
    iterations: usize,
    converged: bool,
    relative_change: f64,
}

/// Meng–Wong fixed point for the optimal bridge function, in log space.
/// `l1` holds log(q/g) at posterior draws, `l2` at proposal draws.
fn iterate(l1: &[f64], l2: &[f64], tolerance: f64, max_iterations: usize) -> Iteration {
    let (n1, n2) = (l1.len() as f64, l2.len() as f64);
    let ls1 = (n1 / (n1 + n2)).ln();
    let ls2 = (n2 / (n1 + n2)).ln();
    let mut sorted = l1.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut lr = sorted[sorted.len() / 2];
    let mut num = vec![0.0; l2.len()];
    let mut den = vec![0.0; l1.len()];
    let mut relative_change = f64::INFINITY;
    for it in 1..=max_iterations {
        for (o, &l) in num.iter_mut().zip(l2) {
            *o = if l == f64::NEG_INFINITY { l } else { l - log_add_exp(ls1 + l, ls2 + lr) };
        }
        for (o, &l) in den.iter_mut().zip(l1) {
            *o = -log_add_exp(ls1 + l, ls2 + lr);
        }
        let next = (log_sum_exp(&num) - n2.ln()) - (log_sum_exp(&den) - n1.ln());
        relative_change = (1.0 - (lr - next).exp()).abs();
        lr = next;
        if !lr.is_finite() {
            break;
        }
        if relative_change < tolerance {
            return Iteration { log_ml: lr, iterations: it, converged: true, relative_change };
        }
    }
    Iteration { log_ml: lr, iterations: max_iterations, converged: false, relative_change }
}

fn finite_or_neg_inf(v: f64) -> f64 {
    if v.is_nan() || v == f64::INFINITY {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Estimates log ∫ q(x) dx for the unnormalized density `target` sampled by `draws`.
pub fn bridge_log_ml<T: LogDensity + Sync>(
    target: &T,
    draws: &PosteriorDraws,
    config: &BridgeConfig,
) -> Result<BridgeEstimate> {
    let total = draws.total_draws();
    if total < config.min_draws.max(4) {
        return Err(Error::InsufficientDraws { needed: config.min_draws.max(4), found: total });
    }
    if draws.dim != target.dim() {
        return Err(Error::DimensionMismatch { expected: target.dim(), found: draws.dim });
    }
    let half = draws.samples / 2;
    let mut first: Vec<&[f64]> = Vec::new();
    let mut second: Vec<&[f64]> = Vec::new();
    for c in 0..draws.n_chains() {
        for (i, x) in draws.chain_draws(c).enumerate() {
            if i < half {
                first.push(x);
            } else {
                second.push(x);
            }
        }
    }
    let (fit_set, bridge_set) = match config.proposal_half {
        ProposalHalf::First => (first, second),
        ProposalHalf::Second => (second, first),
    };
    let (proposal, meta) = Proposal::fit(&fit_set)?;

    let mut rng = stream_rng(config.seed, PROPOSAL_STREAM);
    let fresh: Vec<Vec<f64>> = (0..bridge_set.len()).map(|_| proposal.draw(&mut rng)).collect();
    let l1: Vec<f64> = bridge_set
        .par_iter()
        .map(|x| finite_or_neg_inf(target.log_density(x)) - proposal.log_density(x))
        .collect();
    let l2: Vec<f64> = fresh
        .par_iter()
        .map(|x| finite_or_neg_inf(target.log_density(x)) - proposal.log_density(x))
        .collect();
    if l1.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteDensity { chain: 0 });
    }

    let main = iterate(&l1, &l2, config.tolerance, config.max_iterations);
    let folds = config.folds.min(l1.len());
    let mc_error = if folds >= 2 {
        let estimates: Vec<f64> = (0..folds)
            .map(|f| {
                let pick = |v: &[f64]| v.iter().skip(f).step_by(folds).copied().collect::<Vec<_>>();
                iterate(&pick(&l1), &pick(&l2), config.tolerance, config.max_iterations).log_ml
            })
            .collect();
        // Each fold holds 1/folds of the draws, so the spread is scaled back to the full set.
        crate::math::variance(&estimates).sqrt() / (folds as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(BridgeEstimate {
        log_ml: main.log_ml,
        iterations: main.iterations,
        converged: main.converged,
        relative_change: main.relative_change,
        mc_error,
        proposal: meta,
    })
}

/// Bridge estimate of the log evidence of a fitted mixture.
pub fn bridge_mixture(
    spec: &MixtureSpec,
    data: MixtureData<'_>,
    draws: &PosteriorDraws,
    config: &BridgeConfig,
) -> Result<BridgeEstimate> {
    let post = MixturePosterior::new(*spec, data)?;
    bridge_log_ml(&post, draws, config)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub best: usize,
    /// Indices of inputs whose iteration did not converge.
    pub unconverged: Vec<usize>,
}

/// Index of the largest log evidence; ties go to the earlier, smaller model.
pub fn compare_models(scores: &[BridgeEstimate]) -> Result<Comparison> {
    if scores.is_empty() {
        return Err(Error::Empty("model scores"));
    }
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.log_ml > scores[best].log_ml {
            best = i;
        }
    }
    let unconverged = scores.iter().enumerate().filter(|(_, s)| !s.converged).map(|(i, _)| i).collect();
    Ok(Comparison { best, unconverged })
}
