//! Multi-chain HMC over an unconstrained parameter space.

mod diagnostics;
mod hmc;

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use diagnostics::{convergence_report, split_rhat, ConvergenceReport};

use crate::error::{Error, Result};
use crate::mixture::{MixtureData, MixtureParams, MixturePosterior, MixtureSpec};
use crate::rng::stream_rng;

/// An unnormalized log density on R^d.
pub trait LogDensity {
    fn dim(&self) -> usize;
    fn log_density(&self, x: &[f64]) -> f64;
}

pub trait GradientTarget: LogDensity {
    /// Writes the gradient into `grad` and returns the log density.
    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub chains: usize,
    pub warmup: usize,
    pub samples: usize,
    pub seed: u64,
    /// Integration time per transition, before jitter.
    pub path_length: f64,
    pub max_leapfrog: usize,
    pub target_accept: f64,
    /// Post-warmup divergence rate above which sampling fails.
    pub max_divergence_rate: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            warmup: 1000,
            samples: 2000,
            seed: 1,
            path_length: 2.0,
            max_leapfrog: 512,
            target_accept: 0.8,
            max_divergence_rate: 0.2,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.samples == 0 {
            return Err(Error::InvalidConfig("need at least one chain and one sample".into()));
        }
        if !(self.path_length > 0.0) || self.max_leapfrog == 0 {
            return Err(Error::InvalidConfig("path length and leapfrog cap must be positive".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidConfig("target acceptance must be in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainDraws {
    /// Row-major `samples × dim` unconstrained draws.
    pub values: Vec<f64>,
    pub accept_rate: f64,
    pub divergences: usize,
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
    pub leapfrog_steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub dim: usize,
    pub samples: usize,
    pub chains: Vec<ChainDraws>,
    /// Split-R̂ per unconstrained coordinate; empty when not computable.
    pub rhat: Vec<f64>,
    pub seed: u64,
}

impl PosteriorDraws {
    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn total_draws(&self) -> usize {
        self.samples * self.chains.len()
    }

    pub fn draw(&self, chain: usize, i: usize) -> &[f64] {
        &self.chains[chain].values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn chain_draws(&self, chain: usize) -> impl Iterator<Item = &[f64]> + '_ {
        self.chains[chain].values.chunks_exact(self.dim.max(1))
    }

    /// All draws, chain by chain.
    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.chains.len()).flat_map(move |c| self.chain_draws(c))
    }

    /// Coordinate `j` of every draw, one vector per chain.
    pub fn coordinate(&self, j: usize) -> Vec<Vec<f64>> {
        (0..self.chains.len()).map(|c| self.chain_draws(c).map(|x| x[j]).collect()).collect()
    }

    pub fn divergences(&self) -> usize {
        self.chains.iter().map(|c| c.divergences).sum()
    }

    pub fn divergence_rate(&self) -> f64 {
        self.divergences() as f64 / self.total_draws().max(1) as f64
    }

    pub fn mean_accept(&self) -> f64 {
        self.chains.iter().map(|c| c.accept_rate).sum::<f64>() / self.chains.len().max(1) as f64
    }
}

/// Samples `target` with one chain per initial point, in parallel.
pub fn sample<T: GradientTarget + Sync>(
    target: &T,
    inits: &[Vec<f64>],
    config: &SamplerConfig,
) -> Result<PosteriorDraws> {
    config.validate()?;
    if inits.len() != config.chains {
        return Err(Error::DimensionMismatch { expected: config.chains, found: inits.len() });
    }
    let dim = target.dim();
    if let Some(bad) = inits.iter().find(|x| x.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: bad.len() });
    }
    let chains: Vec<ChainDraws> = (0..config.chains)
        .into_par_iter()
        .map(|c| {
            let rng = stream_rng(config.seed, c as u64);
            hmc::Chain::new(target, inits[c].clone(), config, c, rng)?.run(config)
        })
        .collect::<Result<_>>()?;
    let mut draws = PosteriorDraws { dim, samples: config.samples, chains, rhat: Vec::new(), seed: config.seed };
    let rate = draws.divergence_rate();
    if rate > config.max_divergence_rate {
        return Err(Error::DivergencePersistent { rate });
    }
    if draws.n_chains() >= 2 && draws.samples >= 4 {
        draws.rhat = (0..dim).map(|j| split_rhat(&draws.coordinate(j))).collect::<Result<_>>()?;
    }
    Ok(draws)
}

/// Runs HMC on a mixture posterior from data-driven starting points.
pub fn run_chains(spec: &MixtureSpec, data: MixtureData<'_>, config: &SamplerConfig) -> Result<PosteriorDraws> {
    let post = MixturePosterior::new(*spec, data)?;
    let inits = post.initial_points(config.chains, config.seed);
    sample(&post, &inits, config)
}

/// Average of the constrained draws, weights renormalized.
pub fn posterior_mean_params(draws: &PosteriorDraws, spec: &MixtureSpec) -> Result<MixtureParams> {
    if draws.total_draws() == 0 {
        return Err(Error::Empty("posterior draws"));
    }
    let t = spec.transform();
    if draws.dim != t.dim() {
        return Err(Error::DimensionMismatch { expected: t.dim(), found: draws.dim });
    }
    let k = spec.k;
    let mut w = vec![0.0; k];
    let mut c = vec![0.0; k];
    for x in draws.iter() {
        let d = t.forward(x);
        for j in 0..k {
            w[j] += d.log_weights[j].exp();
            c[j] += d.components[j];
        }
    }
    let n = draws.total_draws() as f64;
    c.iter_mut().for_each(|v| *v /= n);
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    Ok(MixtureParams { weights: w, components: c })
}

/// Writes one CSV per chain with constrained draws: weights, then components.
pub fn write_draws_csv(draws: &PosteriorDraws, spec: &MixtureSpec, dir: &Path, prefix: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let t = spec.transform();
    for c in 0..draws.n_chains() {
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{prefix}_chain{}.csv", c + 1)))?);
        write!(f, "iter")?;
        for j in 0..2 * spec.k {
            write!(f, ",param_{}", j + 1)?;
        }
        writeln!(f)?;
        for (i, x) in draws.chain_draws(c).enumerate() {
            let d = t.forward(x);
            write!(f, "{}", i + 1)?;
            for v in d.log_weights.iter().map(|l| l.exp()).chain(d.components.iter().copied()) {
                write!(f, ",{v}")?;
            }
            writeln!(f)?;
        }
        f.flush()?;
    }
    Ok(())
}
