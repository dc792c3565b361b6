//! The three surrogate objectives (all to be maximized) and the adaptive
//! KL-coefficient rule.

use super::batch::UpdateBatch;
use super::policy::{kl_on_tape, log_prob_on_tape, GaussianNodes, GaussianPolicy};
use crate::autodiff::{Tape, Tensor, Var};
use crate::correntropy::{cim_penalty_draws, Kernel};
use crate::error::Result;

/// Importance ratios `ρ = exp(log π_new − log π_old)` as a `(B)` node.
pub fn ratio(tape: &mut Tape, batch: &UpdateBatch, new: GaussianNodes) -> Result<Var> {
    let lp = log_prob_on_tape(tape, new, &batch.actions)?;
    let old = tape.constant(batch.old_log_probs.clone());
    let diff = tape.sub(lp, old)?;
    Ok(tape.exp(diff))
}

/// `mean(ρ Â)`.
pub fn surrogate_plain(tape: &mut Tape, batch: &UpdateBatch, new: GaussianNodes) -> Result<Var> {
    let rho = ratio(tape, batch, new)?;
    let adv = tape.constant(batch.advantages.clone());
    let weighted = tape.mul(rho, adv)?;
    Ok(tape.mean(weighted))
}

/// `mean(min(ρ Â, clip(ρ, 1 − ε, 1 + ε) Â))`.
pub fn surrogate_clip(tape: &mut Tape, batch: &UpdateBatch, new: GaussianNodes, eps: f64) -> Result<Var> {
    let rho = ratio(tape, batch, new)?;
    let adv = tape.constant(batch.advantages.clone());
    let unclipped = tape.mul(rho, adv)?;
    let clipped = tape.clamp(rho, 1.0 - eps, 1.0 + eps);
    let clipped = tape.mul(clipped, adv)?;
    let m = tape.min(unclipped, clipped)?;
    Ok(tape.mean(m))
}

/// `mean(ρ Â) − β · mean_s D_KL(π_old(·|s) ‖ π_new(·|s))`.
pub fn surrogate_kl(tape: &mut Tape, batch: &UpdateBatch, new: GaussianNodes, beta: f64) -> Result<Var> {
    let gain = surrogate_plain(tape, batch, new)?;
    let kl = kl_on_tape(tape, &batch.old_mu, &batch.old_sigma, new)?;
    let kl = tape.mean(kl);
    let penalty = tape.scale(kl, beta);
    tape.sub(gain, penalty)
}

/// `mean(ρ Â) − α · CIM(π_old, π_new)` with CIM estimated from paired
/// reparameterized samples sharing `noises`.
pub fn surrogate_cim(
    tape: &mut Tape,
    batch: &UpdateBatch,
    new: GaussianNodes,
    alpha: f64,
    kernel: &Kernel,
    noises: &[Tensor],
) -> Result<Var> {
    let gain = surrogate_plain(tape, batch, new)?;
    let cim = cim_penalty_draws(tape, kernel, &batch.old_mu, &batch.old_sigma, new.mu, new.sigma, noises)?;
    let penalty = tape.scale(cim, alpha);
    tape.sub(gain, penalty)
}

/// Halve `β` when the measured KL falls below `d_targ / 1.5`, double it above
/// `d_targ × 1.5`, otherwise keep it.
pub fn adaptive_beta_update(beta: f64, d: f64, d_targ: f64) -> f64 {
    if d < d_targ / 1.5 {
        beta / 2.0
    } else if d > d_targ * 1.5 {
        beta * 2.0
    } else {
        beta
    }
}

/// Which objective to evaluate, with its parameters.
#[derive(Debug, Clone)]
pub enum Objective<'a> {
    Plain,
    Clip { eps: f64 },
    Kl { beta: f64 },
    Cim { alpha: f64, kernel: Kernel, noises: &'a [Tensor] },
}

impl Objective<'_> {
    pub fn record(&self, tape: &mut Tape, batch: &UpdateBatch, new: GaussianNodes) -> Result<Var> {
        match self {
            Objective::Plain => surrogate_plain(tape, batch, new),
            Objective::Clip { eps } => surrogate_clip(tape, batch, new, *eps),
            Objective::Kl { beta } => surrogate_kl(tape, batch, new, *beta),
            Objective::Cim { alpha, kernel, noises } => surrogate_cim(tape, batch, new, *alpha, kernel, noises),
        }
    }
}

/// Objective value and its gradient with respect to every policy parameter,
/// in [`GaussianPolicy::params`] order.
pub fn objective_and_grad(policy: &GaussianPolicy, batch: &UpdateBatch, objective: &Objective) -> Result<(f64, Vec<Tensor>)> {
    let mut tape = Tape::new();
    let vars = policy.register(&mut tape);
    let nodes = policy.forward_on(&mut tape, &vars, &batch.states)?;
    let out = objective.record(&mut tape, batch, nodes)?;
    let value = tape.value(out).data()[0];
    let grads = tape.backward(out)?;
    Ok((value, vars.all().into_iter().map(|v| grads.wrt(v)).collect()))
}

/// Objective value only.
pub fn objective_value(policy: &GaussianPolicy, batch: &UpdateBatch, objective: &Objective) -> Result<f64> {
    let mut tape = Tape::new();
    let vars = policy.register(&mut tape);
    let nodes = policy.forward_on(&mut tape, &vars, &batch.states)?;
    let out = objective.record(&mut tape, batch, nodes)?;
    Ok(tape.value(out).data()[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_rule_branches() {
        assert_eq!(adaptive_beta_update(0.5, 0.05, 0.1), 0.25);
        assert_eq!(adaptive_beta_update(0.5, 0.2, 0.1), 1.0);
        assert_eq!(adaptive_beta_update(0.5, 0.1, 0.1), 0.5);
        // Band edges belong to the dead zone.
        assert_eq!(adaptive_beta_update(0.5, 0.1 / 1.5, 0.1), 0.5);
        assert_eq!(adaptive_beta_update(0.5, 0.1 * 1.5, 0.1), 0.5);
    }
}
