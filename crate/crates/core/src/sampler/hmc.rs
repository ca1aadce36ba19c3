//! Hamiltonian Monte Carlo with a jittered fixed path length, dual-averaging
//! step size adaptation and a windowed diagonal metric.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ChainDraws, GradientTarget, SamplerConfig};
use crate::error::{Error, Result};

const DIVERGENCE_THRESHOLD: f64 = 1000.0;

struct DualAveraging {
    mu: f64,
    h_bar: f64,
    x_bar: f64,
    count: f64,
    target: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(eps: f64, target: f64) -> Self {
        Self { mu: (10.0 * eps).ln(), h_bar: 0.0, x_bar: 0.0, count: 0.0, target }
    }

    /// Returns the next step size.
    fn update(&mut self, accept_stat: f64) -> f64 {
        self.count += 1.0;
        let eta = 1.0 / (self.count + Self::T0);
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target - accept_stat);
        let log_eps = self.mu - self.count.sqrt() / Self::GAMMA * self.h_bar;
        let w = self.count.powf(-Self::KAPPA);
        self.x_bar = w * log_eps + (1.0 - w) * self.x_bar;
        log_eps.exp()
    }

    fn final_step_size(&self) -> f64 {
        self.x_bar.exp()
    }
}

#[derive(Default)]
struct Welford {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn push(&mut self, x: &[f64]) {
        if self.mean.is_empty() {
            self.mean = vec![0.0; x.len()];
            self.m2 = vec![0.0; x.len()];
        }
        self.n += 1.0;
        for (i, &v) in x.iter().enumerate() {
            let d = v - self.mean[i];
            self.mean[i] += d / self.n;
            self.m2[i] += d * (v - self.mean[i]);
        }
    }

    /// Sample variances shrunk towards a small constant.
    fn regularized_variance(&self) -> Vec<f64> {
        let n = self.n;
        self.m2
            .iter()
            .map(|m| {
                let var = m / (n - 1.0);
                (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
            })
            .collect()
    }
}

/// Slow adaptation windows as `(start, end)` iteration ranges.
pub(crate) fn adaptation_windows(warmup: usize) -> Vec<(usize, usize)> {
    if warmup < 20 {
        return Vec::new();
    }
    let (mut init, mut term, mut base) = (75, 50, 25);
    if init + term + base > warmup {
        init = (0.15 * warmup as f64) as usize;
        term = (0.1 * warmup as f64) as usize;
        base = warmup - init - term;
    }
    let end_slow = warmup - term;
    let mut out = Vec::new();
    let (mut start, mut size) = (init, base);
    while start < end_slow {
        let mut end = start + size;
        if end + 2 * size > end_slow {
            end = end_slow;
        }
        out.push((start, end));
        start = end;
        size *= 2;
    }
    out
}

pub(crate) struct Chain<'a, T: GradientTarget> {
    target: &'a T,
    x: Vec<f64>,
    grad: Vec<f64>,
    lp: f64,
    inv_metric: Vec<f64>,
    eps: f64,
    path_length: f64,
    max_steps: usize,
    rng: ChaCha8Rng,
    scratch_p: Vec<f64>,
}

struct Transition {
    accept_stat: f64,
    divergent: bool,
    steps: usize,
}

impl<'a, T: GradientTarget> Chain<'a, T> {
    pub(crate) fn new(
        target: &'a T,
        init: Vec<f64>,
        config: &SamplerConfig,
        chain: usize,
        mut rng: ChaCha8Rng,
    ) -> Result<Self> {
        let d = target.dim();
        let mut grad = vec![0.0; d];
        let mut x = init;
        let mut lp = target.log_density_grad(&x, &mut grad);
        let mut tries = 0;
        while !(lp.is_finite() && grad.iter().all(|g| g.is_finite())) {
            tries += 1;
            if tries > 100 {
                return Err(Error::NonFiniteDensity { chain });
            }
            x = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            lp = target.log_density_grad(&x, &mut grad);
        }
        Ok(Self {
            target,
            x,
            grad,
            lp,
            inv_metric: vec![1.0; d],
            eps: 1.0,
            path_length: config.path_length,
            max_steps: config.max_leapfrog,
            rng,
            scratch_p: vec![0.0; d],
        })
    }

    fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * p.iter().zip(&self.inv_metric).map(|(p, m)| p * p * m).sum::<f64>()
    }

    fn draw_momentum(&mut self) {
        for i in 0..self.x.len() {
            let z: f64 = self.rng.sample(StandardNormal);
            self.scratch_p[i] = z / self.inv_metric[i].sqrt();
        }
    }

    /// Runs `steps` leapfrog steps from the current state. Returns the end
    /// point, its gradient and log density, and the final momentum.
    fn leapfrog(&self, eps: f64, steps: usize, p0: &[f64]) -> (Vec<f64>, Vec<f64>, f64, Vec<f64>) {
        let mut x = self.x.clone();
        let mut g = self.grad.clone();
        let mut p = p0.to_vec();
        let mut lp = self.lp;
        for _ in 0..steps {
            for i in 0..x.len() {
                p[i] += 0.5 * eps * g[i];
                x[i] += eps * self.inv_metric[i] * p[i];
            }
            lp = self.target.log_density_grad(&x, &mut g);
            if !lp.is_finite() {
                return (x, g, f64::NEG_INFINITY, p);
            }
            for i in 0..x.len() {
                p[i] += 0.5 * eps * g[i];
            }
        }
        (x, g, lp, p)
    }

    fn transition(&mut self) -> Transition {
        self.draw_momentum();
        let p0 = self.scratch_p.clone();
        let h0 = -self.lp + self.kinetic(&p0);
        let jitter: f64 = self.rng.random_range(0.5..1.5);
        let steps = ((self.path_length * jitter / self.eps).round() as usize).clamp(1, self.max_steps);
        let (x, g, lp, p) = self.leapfrog(self.eps, steps, &p0);
        let h1 = -lp + self.kinetic(&p);
        let delta = h1 - h0;
        let divergent = !delta.is_finite() || delta > DIVERGENCE_THRESHOLD;
        let accept_stat = if divergent { 0.0 } else { (-delta).exp().min(1.0) };
        let u: f64 = self.rng.random();
        if !divergent && u < accept_stat && g.iter().all(|v| v.is_finite()) {
            self.x = x;
            self.grad = g;
            self.lp = lp;
        }
        Transition { accept_stat, divergent, steps }
    }

    /// Doubles or halves the step size until the one-step acceptance
    /// probability crosses 0.8.
    fn find_reasonable_step_size(&mut self) {
        let mut eps = self.eps;
        self.draw_momentum();
        let p0 = self.scratch_p.clone();
        let h0 = -self.lp + self.kinetic(&p0);
        let log_accept = |c: &Self, eps: f64| {
            let (_, _, lp, p) = c.leapfrog(eps, 1, &p0);
            let h = -lp + c.kinetic(&p);
            let d = h0 - h;
            if d.is_nan() {
                f64::NEG_INFINITY
            } else {
                d
            }
        };
        let threshold = 0.8f64.ln();
        let up = log_accept(self, eps) > threshold;
        for _ in 0..100 {
            let next = if up { eps * 2.0 } else { eps * 0.5 };
            let crossed = (log_accept(self, next) > threshold) != up;
            if crossed || !(1e-10..=1e7).contains(&next) {
                eps = if up { eps } else { next };
                break;
            }
            eps = next;
        }
        self.eps = eps.clamp(1e-10, 1e7);
    }

    pub(crate) fn run(mut self, config: &SamplerConfig) -> Result<ChainDraws> {
        let d = self.x.len();
        self.find_reasonable_step_size();
        let mut da = DualAveraging::new(self.eps, config.target_accept);
        let windows = adaptation_windows(config.warmup);
        let mut window = 0;
        let mut welford = Welford::default();

        for it in 0..config.warmup {
            let t = self.transition();
            self.eps = da.update(t.accept_stat);
            if let Some(&(start, end)) = windows.get(window) {
                if it >= start && it < end {
                    welford.push(&self.x);
                }
                if it + 1 == end {
                    self.inv_metric = welford.regularized_variance();
                    welford = Welford::default();
                    window += 1;
                    self.find_reasonable_step_size();
                    da = DualAveraging::new(self.eps, config.target_accept);
                }
            }
        }
        if config.warmup > 0 {
            self.eps = da.final_step_size();
        }

        let mut values = Vec::with_capacity(config.samples * d);
        let mut accept_sum = 0.0;
        let mut divergences = 0;
        let mut leapfrog_steps = 0;
        for _ in 0..config.samples {
            let t = self.transition();
            accept_sum += t.accept_stat;
            divergences += t.divergent as usize;
            leapfrog_steps += t.steps;
            values.extend_from_slice(&self.x);
        }
        Ok(ChainDraws {
            values,
            accept_rate: accept_sum / config.samples.max(1) as f64,
            divergences,
            step_size: self.eps,
            inv_metric: self.inv_metric,
            leapfrog_steps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_windows_match_stan_layout() {
        let w = adaptation_windows(1000);
        assert_eq!(w, vec![(75, 100), (100, 150), (150, 250), (250, 450), (450, 950)]);
    }

    #[test]
    fn short_warmup_windows_cover_the_slow_phase() {
        let w = adaptation_windows(100);
        assert_eq!(w.first().unwrap().0, 15);
        assert_eq!(w.last().unwrap().1, 90);
        assert!(adaptation_windows(10).is_empty());
    }

    #[test]
    fn dual_averaging_moves_towards_target() {
        let mut da = DualAveraging::new(1.0, 0.8);
        let mut eps = 1.0;
        for _ in 0..50 {
            eps = da.update(0.2);
        }
        assert!(eps < 1.0);
    }
}
