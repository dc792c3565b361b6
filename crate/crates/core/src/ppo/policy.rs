use rand::Rng;

use super::config::SIGMA_FLOOR;
use crate::autodiff::{Mlp, Tape, Tensor, Var};
use crate::error::{shape_err, Result};
use crate::gaussian::DiagGaussian;
use crate::numeric::LN_SQRT_2PI;

/// Anything that maps a state to a diagonal-Gaussian action distribution.
pub trait ActionPolicy {
    fn distribution(&self, state: &[f64]) -> Result<DiagGaussian>;
}

/// Actor with an MLP mean head and a state-independent, trainable `log σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    mean: Mlp,
    log_std: Tensor,
}

/// Handles for a policy recorded on a tape.
#[derive(Debug, Clone)]
pub struct PolicyVars {
    pub mean: Vec<Var>,
    pub log_std: Var,
}

impl PolicyVars {
    pub fn all(&self) -> Vec<Var> {
        let mut v = self.mean.clone();
        v.push(self.log_std);
        v
    }
}

/// `(B, A)` mean and standard-deviation nodes of a batch evaluation.
#[derive(Debug, Clone, Copy)]
pub struct GaussianNodes {
    pub mu: Var,
    pub sigma: Var,
}

impl GaussianPolicy {
    /// `hidden` tanh layers between `state_dim` and `action_dim`. The output
    /// layer starts scaled by 0.01 so initial means sit near zero.
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        init_log_std: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut widths = vec![state_dim];
        widths.extend_from_slice(hidden);
        widths.push(action_dim);
        let mut mean = Mlp::new(&widths, rng)?;
        mean.scale_output_layer(0.01);
        Ok(Self {
            mean,
            log_std: Tensor::filled(&[action_dim], init_log_std),
        })
    }

    pub fn from_parts(mean: Mlp, log_std: Tensor) -> Result<Self> {
        if log_std.shape() != [mean.output_width()] {
            return Err(shape_err("GaussianPolicy", "log_std length must equal the action width"));
        }
        Ok(Self { mean, log_std })
    }

    pub fn mean_net(&self) -> &Mlp {
        &self.mean
    }

    pub fn log_std(&self) -> &Tensor {
        &self.log_std
    }

    pub fn state_dim(&self) -> usize {
        self.mean.input_width()
    }

    pub fn action_dim(&self) -> usize {
        self.mean.output_width()
    }

    /// Flat parameter list: mean-network parameters followed by `log σ`.
    pub fn params(&self) -> Vec<&Tensor> {
        self.mean.params().iter().chain(std::iter::once(&self.log_std)).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.mean
            .params_mut()
            .iter_mut()
            .chain(std::iter::once(&mut self.log_std))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.mean.param_count() + self.log_std.len()
    }

    /// Clamped standard deviations and the number of entries the floor hit.
    pub fn sigma(&self) -> (Vec<f64>, usize) {
        let mut clamped = 0;
        let s = self
            .log_std
            .data()
            .iter()
            .map(|l| {
                let v = l.exp();
                if v > SIGMA_FLOOR {
                    v
                } else {
                    clamped += 1;
                    SIGMA_FLOOR
                }
            })
            .collect();
        (s, clamped)
    }

    /// Means and standard deviations for a `(B, S)` batch of states.
    pub fn batch_moments(&self, states: &Tensor) -> Result<(Tensor, Tensor)> {
        let mu = self.mean.forward(states)?;
        let rows = mu.shape()[0];
        let (sigma, _) = self.sigma();
        let mut data = Vec::with_capacity(rows * sigma.len());
        for _ in 0..rows {
            data.extend_from_slice(&sigma);
        }
        let sigma = Tensor::new(mu.shape().to_vec(), data)?;
        Ok((mu, sigma))
    }

    pub fn register(&self, tape: &mut Tape) -> PolicyVars {
        PolicyVars {
            mean: self.mean.register(tape),
            log_std: tape.param(self.log_std.clone()),
        }
    }

    /// Records the batch evaluation `μ(s)`, `σ = max(exp(log σ), floor)`.
    pub fn forward_on(&self, tape: &mut Tape, vars: &PolicyVars, states: &Tensor) -> Result<GaussianNodes> {
        let x = tape.constant(states.clone());
        let mu = self.mean.forward_on(tape, &vars.mean, x)?;
        let rows = tape.value(mu).shape()[0];
        let ls = tape.broadcast_rows(vars.log_std, rows)?;
        let sigma = tape.exp(ls);
        let sigma = tape.clamp_min(sigma, SIGMA_FLOOR);
        Ok(GaussianNodes { mu, sigma })
    }
}

impl ActionPolicy for GaussianPolicy {
    fn distribution(&self, state: &[f64]) -> Result<DiagGaussian> {
        let mu = self.mean.forward(&Tensor::vector(state.to_vec())?)?;
        DiagGaussian::new(mu.into_data(), self.sigma().0)
    }
}

/// Per-row diagonal-Gaussian log-density of constant `actions` `(B, A)`,
/// giving a `(B)` node.
pub fn log_prob_on_tape(tape: &mut Tape, dist: GaussianNodes, actions: &Tensor) -> Result<Var> {
    let a = tape.constant(actions.clone());
    let centered = tape.sub(a, dist.mu)?;
    let z = tape.div(centered, dist.sigma)?;
    let z2 = tape.square(z);
    let half_z2 = tape.scale(z2, 0.5);
    let log_sigma = tape.ln(dist.sigma);
    let per_dim = tape.add(log_sigma, half_z2)?;
    let per_dim = tape.shift(per_dim, LN_SQRT_2PI);
    let per_dim = tape.neg(per_dim);
    tape.sum_rows(per_dim)
}

/// Per-row `D_KL(old ‖ new)` with the old policy held constant, as a `(B)`
/// node.
pub fn kl_on_tape(tape: &mut Tape, old_mu: &Tensor, old_sigma: &Tensor, new: GaussianNodes) -> Result<Var> {
    let om = tape.constant(old_mu.clone());
    let os = tape.constant(old_sigma.clone());
    // ln(σn/σo) + (σo² + (μo − μn)²) / (2σn²) − ½
    let log_ratio = {
        let ln_new = tape.ln(new.sigma);
        let ln_old = tape.ln(os);
        tape.sub(ln_new, ln_old)?
    };
    let d = tape.sub(om, new.mu)?;
    let d2 = tape.square(d);
    let os2 = tape.square(os);
    let num = tape.add(os2, d2)?;
    let ns2 = tape.square(new.sigma);
    let den = tape.scale(ns2, 2.0);
    let frac = tape.div(num, den)?;
    let per_dim = tape.add(log_ratio, frac)?;
    let per_dim = tape.shift(per_dim, -0.5);
    tape.sum_rows(per_dim)
}
