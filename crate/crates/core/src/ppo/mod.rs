//! PPO with three penalty mechanisms: the clipped ratio, an adaptive KL
//! penalty, and a CIM penalty.

mod batch;
mod config;
mod objective;
mod policy;
mod train;

pub use batch::{compute_advantages, discounted_returns, normalize, Trajectory, UpdateBatch, ADVANTAGE_STD_FLOOR};
pub use config::{PenaltyConfig, SigmaMode, Variant, SIGMA_FLOOR};
pub use objective::{
    adaptive_beta_update, objective_and_grad, objective_value, ratio, surrogate_cim, surrogate_clip, surrogate_kl,
    surrogate_plain, Objective,
};
pub use policy::{kl_on_tape, log_prob_on_tape, ActionPolicy, GaussianNodes, GaussianPolicy, PolicyVars};
pub use train::{train, IterationRecord, RunLog, RunningStats, Trainer, UpdateStats};
