//! Finite mixtures with the component indicators summed out.
//!
//! Two families are supported: a Binomial mixture over situations, and a
//! Weibull (known scale, unknown shape) mixture over edges in which every
//! observation of one edge belongs to the same component.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{HoldingData, TransitionData};
use crate::error::{Error, Result};
use crate::math::{ln_beta, ln_choose, ln_gamma, log_sigmoid, log_sum_exp, logit, sigmoid};
use crate::rng::stream_rng;
use crate::sampler::{GradientTarget, LogDensity};
use crate::transform::{ComponentLink, Decoded, Transform};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Binomial,
    WeibullKnownScale { scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComponentPrior {
    Beta { alpha: f64, beta: f64 },
    /// Gamma with the given shape and rate.
    Gamma { shape: f64, rate: f64 },
}

impl ComponentPrior {
    fn log_density_natural(&self, c: f64, value: f64) -> (f64, f64) {
        match *self {
            ComponentPrior::Beta { alpha, beta } => (
                (alpha - 1.0) * log_sigmoid(c) + (beta - 1.0) * log_sigmoid(-c) - ln_beta(alpha, beta),
                (alpha - 1.0) * (1.0 - value) - (beta - 1.0) * value,
            ),
            ComponentPrior::Gamma { shape, rate } => (
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * c - rate * value,
                (shape - 1.0) - rate * value,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub k: usize,
    pub family: Family,
    /// Symmetric Dirichlet concentration on the weights.
    pub weight_concentration: f64,
    pub component_prior: ComponentPrior,
    pub ordered: bool,
}

impl MixtureSpec {
    pub const DEFAULT_BETA: ComponentPrior = ComponentPrior::Beta { alpha: 1.0, beta: 1.0 };
    pub const DEFAULT_SHAPE_PRIOR: ComponentPrior = ComponentPrior::Gamma { shape: 1.0, rate: 0.1 };

    pub fn binomial(k: usize) -> Self {
        Self {
            k,
            family: Family::Binomial,
            weight_concentration: 1.0,
            component_prior: Self::DEFAULT_BETA,
            ordered: true,
        }
    }

    pub fn weibull(k: usize, scale: f64) -> Self {
        Self {
            k,
            family: Family::WeibullKnownScale { scale },
            weight_concentration: 1.0,
            component_prior: Self::DEFAULT_SHAPE_PRIOR,
            ordered: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if self.k == 0 {
            return Err(Error::InvalidConfig("mixture needs at least one component".into()));
        }
        if !pos(self.weight_concentration) {
            return Err(Error::InvalidPrior("weight concentration must be positive".into()));
        }
        match (self.family, self.component_prior) {
            (Family::Binomial, ComponentPrior::Beta { alpha, beta }) if pos(alpha) && pos(beta) => Ok(()),
            (Family::WeibullKnownScale { scale }, ComponentPrior::Gamma { shape, rate })
                if pos(shape) && pos(rate) =>
            {
                if pos(scale) {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig(format!("Weibull scale must be positive, got {scale}")))
                }
            }
            _ => Err(Error::InvalidPrior(format!("{:?} for {:?}", self.component_prior, self.family))),
        }
    }

    pub fn transform(&self) -> Transform {
        let link = match self.family {
            Family::Binomial => ComponentLink::Logit,
            Family::WeibullKnownScale { .. } => ComponentLink::Log,
        };
        Transform { k: self.k, link, ordered: self.ordered }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub weights: Vec<f64>,
    /// Success probabilities or Weibull shapes.
    pub components: Vec<f64>,
}

impl MixtureParams {
    pub fn new(weights: Vec<f64>, components: Vec<f64>) -> Result<Self> {
        if weights.len() != components.len() || weights.is_empty() {
            return Err(Error::DimensionMismatch { expected: weights.len(), found: components.len() });
        }
        if weights.iter().any(|&w| !(w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::ConstraintViolation("weights must lie on the simplex".into()));
        }
        Ok(Self { weights, components })
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn is_ordered(&self) -> bool {
        self.components.windows(2).all(|w| w[0] < w[1])
    }
}

/// Data bound to a mixture.
#[derive(Debug, Clone, Copy)]
pub enum MixtureData<'a> {
    Situations(&'a TransitionData),
    Edges(&'a HoldingData),
}

impl MixtureData<'_> {
    pub fn len(&self) -> usize {
        match self {
            MixtureData::Situations(d) => d.len(),
            MixtureData::Edges(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ids(&self) -> Vec<String> {
        match self {
            MixtureData::Situations(d) => d.ids(),
            MixtureData::Edges(d) => d.ids(),
        }
    }
}

/// Per-unit quantities precomputed for fast density evaluation.
#[derive(Debug, Clone)]
enum Prepared {
    Binomial {
        successes: Vec<f64>,
        trials: Vec<f64>,
        ln_choose: Vec<f64>,
    },
    Weibull {
        log_scale: f64,
        counts: Vec<f64>,
        /// Σ_j log(h_ij / λ) per edge.
        sum_log_ratio: Vec<f64>,
        offsets: Vec<usize>,
        log_ratio: Vec<f64>,
    },
}

impl Prepared {
    fn binomial(d: &TransitionData) -> Self {
        let u = d.units();
        Prepared::Binomial {
            successes: u.iter().map(|u| u.successes as f64).collect(),
            trials: u.iter().map(|u| u.trials as f64).collect(),
            ln_choose: u.iter().map(|u| ln_choose(u.trials, u.successes)).collect(),
        }
    }

    fn weibull(d: &HoldingData, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidConfig(format!("Weibull scale must be positive, got {scale}")));
        }
        let log_scale = scale.ln();
        let mut offsets = vec![0];
        let mut log_ratio = Vec::new();
        let mut counts = Vec::new();
        let mut sum_log_ratio = Vec::new();
        for e in d.edges() {
            let mut s = 0.0;
            for &h in &e.times {
                if !(h > 0.0) {
                    return Err(Error::NonPositiveTime { unit: e.id.clone(), value: h });
                }
                let l = h.ln() - log_scale;
                log_ratio.push(l);
                s += l;
            }
            offsets.push(log_ratio.len());
            counts.push(e.times.len() as f64);
            sum_log_ratio.push(s);
        }
        Ok(Prepared::Weibull { log_scale, counts, sum_log_ratio, offsets, log_ratio })
    }

    fn for_spec(spec: &MixtureSpec, data: MixtureData<'_>) -> Result<Self> {
        match (spec.family, data) {
            (Family::Binomial, MixtureData::Situations(d)) => Ok(Self::binomial(d)),
            (Family::WeibullKnownScale { scale }, MixtureData::Edges(d)) => Self::weibull(d, scale),
            _ => Err(Error::ConstraintViolation("mixture family does not match the data".into())),
        }
    }

    fn n_units(&self) -> usize {
        match self {
            Prepared::Binomial { trials, .. } => trials.len(),
            Prepared::Weibull { counts, .. } => counts.len(),
        }
    }

    /// Log likelihood of unit `i` under one component and its derivative with
    /// respect to the component's natural coordinate `c`.
    #[inline]
    fn unit_term(&self, i: usize, c: f64, value: f64) -> (f64, f64) {
        match self {
            Prepared::Binomial { successes, trials, ln_choose } => {
                let (y, n) = (successes[i], trials[i]);
                let ll = ln_choose[i] + y * log_sigmoid(c) + (n - y) * log_sigmoid(-c);
                (ll, y - n * value)
            }
            Prepared::Weibull { log_scale, counts, sum_log_ratio, offsets, log_ratio } => {
                let n = counts[i];
                let shape = value;
                let mut pow_sum = 0.0;
                let mut weighted = 0.0;
                for &l in &log_ratio[offsets[i]..offsets[i + 1]] {
                    let p = (shape * l).exp();
                    pow_sum += p;
                    weighted += l * p;
                }
                let ll = n * (c - log_scale) + (shape - 1.0) * sum_log_ratio[i] - pow_sum;
                (ll, n + shape * sum_log_ratio[i] - shape * weighted)
            }
        }
    }

    /// Mixture log likelihood. When `grads` is given, accumulates derivatives
    /// with respect to the log weights and the natural coordinates.
    fn log_likelihood(
        &self,
        log_weights: &[f64],
        natural: &[f64],
        values: &[f64],
        mut grads: Option<(&mut [f64], &mut [f64])>,
    ) -> f64 {
        let k = log_weights.len();
        let mut terms = vec![0.0; k];
        let mut derivs = vec![0.0; k];
        let mut total = 0.0;
        for i in 0..self.n_units() {
            for j in 0..k {
                let (ll, d) = self.unit_term(i, natural[j], values[j]);
                terms[j] = log_weights[j] + ll;
                derivs[j] = d;
            }
            let lse = log_sum_exp(&terms);
            total += lse;
            if let Some((gw, gc)) = grads.as_mut() {
                if lse.is_finite() {
                    for j in 0..k {
                        let r = (terms[j] - lse).exp();
                        // A component with zero responsibility may carry an infinite derivative.
                        if r > 0.0 {
                            gw[j] += r;
                            gc[j] += r * derivs[j];
                        }
                    }
                }
            }
        }
        total
    }

    /// Posterior membership probabilities per unit.
    fn responsibilities(&self, log_weights: &[f64], natural: &[f64], values: &[f64]) -> Vec<Vec<f64>> {
        let k = log_weights.len();
        (0..self.n_units())
            .map(|i| {
                let terms: Vec<f64> =
                    (0..k).map(|j| log_weights[j] + self.unit_term(i, natural[j], values[j]).0).collect();
                let lse = log_sum_exp(&terms);
                let mut row: Vec<f64> = terms.iter().map(|t| (t - lse).exp()).collect();
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|r| *r /= s);
                row
            })
            .collect()
    }
}

fn natural_coords(family: Family, components: &[f64]) -> Vec<f64> {
    components
        .iter()
        .map(|&c| match family {
            Family::Binomial => logit(c),
            Family::WeibullKnownScale { .. } => c.ln(),
        })
        .collect()
}

fn check_components(family: Family, params: &MixtureParams) -> Result<()> {
    let ok = params.components.iter().all(|&c| match family {
        Family::Binomial => c > 0.0 && c < 1.0,
        Family::WeibullKnownScale { .. } => c > 0.0 && c.is_finite(),
    });
    if ok {
        Ok(())
    } else {
        Err(Error::ConstraintViolation(format!("components {:?} out of range", params.components)))
    }
}

fn eval_constrained(family: Family, prepared: &Prepared, params: &MixtureParams) -> Result<f64> {
    check_components(family, params)?;
    let log_w: Vec<f64> = params.weights.iter().map(|w| w.ln()).collect();
    let natural = natural_coords(family, &params.components);
    Ok(prepared.log_likelihood(&log_w, &natural, &params.components, None))
}

pub fn log_likelihood_situations(params: &MixtureParams, data: &TransitionData) -> Result<f64> {
    eval_constrained(Family::Binomial, &Prepared::binomial(data), params)
}

pub fn log_likelihood_edges(params: &MixtureParams, data: &HoldingData, scale: f64) -> Result<f64> {
    eval_constrained(Family::WeibullKnownScale { scale }, &Prepared::weibull(data, scale)?, params)
}

/// Unnormalized log posterior on the unconstrained space, evaluated at the
/// image of `params`: likelihood, priors, and transform Jacobian.
pub fn log_posterior(params: &MixtureParams, data: MixtureData<'_>, spec: &MixtureSpec) -> Result<f64> {
    if params.k() != spec.k {
        return Err(Error::DimensionMismatch { expected: spec.k, found: params.k() });
    }
    let post = MixturePosterior::new(*spec, data)?;
    let x = spec.transform().unconstrain(&params.weights, &params.components)?;
    Ok(post.log_density(&x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// `probabilities[i][k]` = posterior probability that unit `i` is in component `k`.
    pub probabilities: Vec<Vec<f64>>,
    /// Row argmax, ties to the lowest component index.
    pub labels: Vec<usize>,
}

fn allocate_prepared(family: Family, prepared: &Prepared, params: &MixtureParams) -> Result<Allocation> {
    check_components(family, params)?;
    let log_w: Vec<f64> = params.weights.iter().map(|w| w.ln()).collect();
    let natural = natural_coords(family, &params.components);
    let probabilities = prepared.responsibilities(&log_w, &natural, &params.components);
    let labels = probabilities
        .iter()
        .map(|row| {
            let mut best = 0;
            for (j, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect();
    Ok(Allocation { probabilities, labels })
}

pub fn allocate_situations(params: &MixtureParams, data: &TransitionData) -> Result<Allocation> {
    allocate_prepared(Family::Binomial, &Prepared::binomial(data), params)
}

pub fn allocate_edges(params: &MixtureParams, data: &HoldingData, scale: f64) -> Result<Allocation> {
    allocate_prepared(Family::WeibullKnownScale { scale }, &Prepared::weibull(data, scale)?, params)
}

/// Allocation for either family, checking that family and data agree.
pub fn allocate(family: Family, data: MixtureData<'_>, params: &MixtureParams) -> Result<Allocation> {
    let spec = MixtureSpec { k: params.k(), family, ..MixtureSpec::binomial(params.k()) };
    allocate_prepared(family, &Prepared::for_spec(&spec, data)?, params)
}

/// A mixture posterior on the unconstrained space, ready for sampling.
#[derive(Debug, Clone)]
pub struct MixturePosterior {
    spec: MixtureSpec,
    transform: Transform,
    prepared: Prepared,
    /// Per-unit initial component estimates on the natural scale.
    unit_estimates: Vec<f64>,
    constant: f64,
}

impl MixturePosterior {
    pub fn new(spec: MixtureSpec, data: MixtureData<'_>) -> Result<Self> {
        spec.validate()?;
        let prepared = Prepared::for_spec(&spec, data)?;
        let k = spec.k as f64;
        let alpha = spec.weight_concentration;
        // The ordered prior is the density of order statistics: k! Π p(c_j).
        let order_term = if spec.ordered { ln_gamma(k + 1.0) } else { 0.0 };
        let constant = ln_gamma(k * alpha) - k * ln_gamma(alpha) + order_term;
        let unit_estimates = unit_estimates(&spec, data);
        Ok(Self { spec, transform: spec.transform(), prepared, unit_estimates, constant })
    }

    pub fn spec(&self) -> &MixtureSpec {
        &self.spec
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    pub fn constrain(&self, x: &[f64]) -> MixtureParams {
        let d = self.transform.forward(x);
        MixtureParams { weights: d.weights(), components: d.components }
    }

    fn evaluate(&self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let k = self.spec.k;
        let d: Decoded = self.transform.forward(x);
        let alpha = self.spec.weight_concentration;
        let mut g_w = vec![0.0; k];
        let mut g_c = vec![0.0; k];
        let want_grad = grad.is_some();
        let ll = self.prepared.log_likelihood(
            &d.log_weights,
            &d.natural,
            &d.components,
            want_grad.then_some((&mut g_w[..], &mut g_c[..])),
        );
        let mut lp = ll + self.constant + d.log_jacobian;
        for j in 0..k {
            lp += (alpha - 1.0) * d.log_weights[j];
            let (p, dp) = self.spec.component_prior.log_density_natural(d.natural[j], d.components[j]);
            lp += p;
            g_w[j] += alpha - 1.0;
            g_c[j] += dp;
        }
        if let Some(grad) = grad {
            grad.iter_mut().for_each(|g| *g = 0.0);
            self.transform.backward(&d, &g_w, &g_c, grad);
        }
        if lp.is_nan() {
            f64::NEG_INFINITY
        } else {
            lp
        }
    }

    /// Starting points for `chains` chains: uniform weights, components at
    /// quantiles of jittered per-unit estimates.
    pub fn initial_points(&self, chains: usize, seed: u64) -> Vec<Vec<f64>> {
        let k = self.spec.k;
        (0..chains)
            .map(|c| {
                let mut rng = stream_rng(seed, 10_000 + c as u64);
                let mut est: Vec<f64> = if self.unit_estimates.is_empty() {
                    (0..k).map(|j| self.prior_quantile((j as f64 + 0.5) / k as f64)).collect()
                } else {
                    self.unit_estimates.clone()
                };
                for e in est.iter_mut() {
                    *e += 0.3 * rng.sample::<f64, _>(StandardNormal);
                }
                est.sort_by(f64::total_cmp);
                let mut natural: Vec<f64> = (0..k)
                    .map(|j| {
                        let q = (j as f64 + 0.5) / k as f64;
                        est[((q * est.len() as f64) as usize).min(est.len() - 1)]
                    })
                    .collect();
                if self.spec.ordered {
                    for j in 1..k {
                        if natural[j] <= natural[j - 1] + 1e-2 {
                            natural[j] = natural[j - 1] + 1e-2;
                        }
                    }
                }
                let components: Vec<f64> = natural
                    .iter()
                    .map(|&c| match self.transform.link {
                        ComponentLink::Logit => sigmoid(c).clamp(1e-9, 1.0 - 1e-9),
                        ComponentLink::Log => c.exp(),
                    })
                    .collect();
                let weights = vec![1.0 / k as f64; k];
                self.transform
                    .unconstrain(&weights, &components)
                    .unwrap_or_else(|_| vec![0.0; self.transform.dim()])
            })
            .collect()
    }

    fn prior_quantile(&self, q: f64) -> f64 {
        match self.spec.component_prior {
            ComponentPrior::Beta { .. } => logit(q.clamp(0.05, 0.95)),
            ComponentPrior::Gamma { shape, rate } => ((shape / rate) * (0.5 + q)).ln(),
        }
    }
}

fn unit_estimates(spec: &MixtureSpec, data: MixtureData<'_>) -> Vec<f64> {
    match data {
        MixtureData::Situations(d) => d
            .units()
            .iter()
            .map(|u| logit((u.successes as f64 + 0.5) / (u.trials as f64 + 1.0)))
            .collect(),
        MixtureData::Edges(d) => {
            let fallback = match spec.component_prior {
                ComponentPrior::Gamma { shape, rate } => shape / rate,
                ComponentPrior::Beta { .. } => 1.0,
            };
            d.edges()
                .iter()
                .map(|e| {
                    // log of a Weibull variable has standard deviation π / (√6 · shape).
                    let logs: Vec<f64> = e.times.iter().map(|t| t.ln()).collect();
                    let sd = crate::math::variance(&logs).sqrt();
                    let shape = if logs.len() >= 2 && sd > 0.0 {
                        std::f64::consts::PI / (6f64.sqrt() * sd)
                    } else {
                        fallback
                    };
                    shape.clamp(0.05, 50.0).ln()
                })
                .collect()
        }
    }
}

impl LogDensity for MixturePosterior {
    fn dim(&self) -> usize {
        self.transform.dim()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.evaluate(x, None)
    }
}

impl GradientTarget for MixturePosterior {
    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.evaluate(x, Some(grad))
    }
}
