//! Bijection between mixture parameters and an unconstrained real vector.
//!
//! Layout: `k - 1` stick-breaking coordinates for the weights, then `k`
//! component coordinates. A component's natural coordinate `c` is the logit
//! of a probability or the log of a Weibull shape; when ordered, `c` is
//! encoded as `c_1 = u_1`, `c_j = c_{j-1} + exp(u_j)`.

use crate::error::{Error, Result};
use crate::math::{log_sigmoid, logit, sigmoid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentLink {
    /// Probabilities in (0, 1).
    Logit,
    /// Positive reals.
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transform {
    pub k: usize,
    pub link: ComponentLink,
    pub ordered: bool,
}

/// Forward pass, kept for the gradient.
#[derive(Debug, Clone)]
pub struct Decoded {
    pub log_weights: Vec<f64>,
    /// Natural component coordinates (logit or log scale).
    pub natural: Vec<f64>,
    /// Components on their constrained scale.
    pub components: Vec<f64>,
    pub log_jacobian: f64,
    stick: Vec<f64>,
}

impl Decoded {
    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }
}

impl Transform {
    pub fn dim(&self) -> usize {
        2 * self.k - 1
    }

    fn stick_offset(&self, j: usize) -> f64 {
        ((self.k - 1 - j) as f64).ln()
    }

    pub fn forward(&self, x: &[f64]) -> Decoded {
        debug_assert_eq!(x.len(), self.dim());
        let k = self.k;
        let (wx, cx) = x.split_at(k - 1);

        let mut log_weights = Vec::with_capacity(k);
        let mut stick = Vec::with_capacity(k - 1);
        let mut log_jacobian = 0.0;
        let mut rest = 0.0;
        for (j, &y) in wx.iter().enumerate() {
            let t = y - self.stick_offset(j);
            log_weights.push(rest + log_sigmoid(t));
            log_jacobian += log_sigmoid(t) + log_sigmoid(-t) + rest;
            rest += log_sigmoid(-t);
            stick.push(t);
        }
        log_weights.push(rest);

        let mut natural = Vec::with_capacity(k);
        for (j, &u) in cx.iter().enumerate() {
            let c = if self.ordered && j > 0 {
                log_jacobian += u;
                natural[j - 1] + u.exp()
            } else {
                u
            };
            natural.push(c);
        }
        let components = natural
            .iter()
            .map(|&c| match self.link {
                ComponentLink::Logit => {
                    log_jacobian += log_sigmoid(c) + log_sigmoid(-c);
                    sigmoid(c)
                }
                ComponentLink::Log => {
                    log_jacobian += c;
                    c.exp()
                }
            })
            .collect();
        Decoded { log_weights, natural, components, log_jacobian, stick }
    }

    /// Adds to `grad` the gradient of `f(x) + log|J(x)|`, given the gradient of
    /// `f` with respect to the log weights and the natural coordinates.
    pub fn backward(&self, d: &Decoded, g_log_weights: &[f64], g_natural: &[f64], grad: &mut [f64]) {
        let k = self.k;
        let (gw, gc) = grad.split_at_mut(k - 1);

        // Stick-breaking in log space: log w_j = ρ_j + log σ(t_j), ρ_{j+1} = ρ_j + log σ(-t_j).
        let mut g_rest = g_log_weights[k - 1];
        for j in (0..k - 1).rev() {
            let t = d.stick[j];
            let (s, sn) = (sigmoid(t), sigmoid(-t));
            gw[j] += g_log_weights[j] * sn - g_rest * s + sn - s;
            g_rest += g_log_weights[j] + 1.0;
        }

        let mut g_nat: Vec<f64> = g_natural.to_vec();
        for (j, g) in g_nat.iter_mut().enumerate() {
            *g += match self.link {
                ComponentLink::Logit => 1.0 - 2.0 * d.components[j],
                ComponentLink::Log => 1.0,
            };
        }
        if self.ordered {
            let mut tail = 0.0;
            for j in (0..k).rev() {
                tail += g_nat[j];
                if j == 0 {
                    gc[0] += tail;
                } else {
                    let u = (d.natural[j] - d.natural[j - 1]).ln();
                    gc[j] += tail * u.exp() + 1.0;
                }
            }
        } else {
            for j in 0..k {
                gc[j] += g_nat[j];
            }
        }
    }

    pub fn unconstrain(&self, weights: &[f64], components: &[f64]) -> Result<Vec<f64>> {
        let k = self.k;
        if weights.len() != k || components.len() != k {
            return Err(Error::DimensionMismatch { expected: k, found: weights.len().min(components.len()) });
        }
        if weights.iter().any(|&w| !(w > 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::ConstraintViolation("weights must be a positive simplex".into()));
        }
        let mut x = Vec::with_capacity(self.dim());
        let mut rest = 1.0;
        for j in 0..k - 1 {
            let z = (weights[j] / rest).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
            x.push(logit(z) + self.stick_offset(j));
            rest -= weights[j];
        }
        let natural: Vec<f64> = components
            .iter()
            .map(|&c| match self.link {
                ComponentLink::Logit if c > 0.0 && c < 1.0 => Ok(logit(c)),
                ComponentLink::Log if c > 0.0 && c.is_finite() => Ok(c.ln()),
                _ => Err(Error::ConstraintViolation(format!("component value {c} out of range"))),
            })
            .collect::<Result<_>>()?;
        for j in 0..k {
            if self.ordered && j > 0 {
                let gap = natural[j] - natural[j - 1];
                if !(gap > 0.0) {
                    return Err(Error::ConstraintViolation("components must be strictly increasing".into()));
                }
                x.push(gap.ln());
            } else {
                x.push(natural[j]);
            }
        }
        Ok(x)
    }
}
