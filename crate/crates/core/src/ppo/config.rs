use std::fmt;
use std::str::FromStr;

use crate::correntropy::{Kernel, KernelFamily};
use crate::error::{invalid, Error, Result};

/// Which penalty shapes the actor objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Clip,
    AdaptiveKl,
    Cim,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Clip, Variant::AdaptiveKl, Variant::Cim];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Clip => "clip",
            Variant::AdaptiveKl => "kl",
            Variant::Cim => "cim",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "clip" => Ok(Variant::Clip),
            "kl" => Ok(Variant::AdaptiveKl),
            "cim" => Ok(Variant::Cim),
            other => Err(invalid(format!("unknown algo '{other}' (expected clip|kl|cim)"))),
        }
    }
}

/// How the CIM kernel bandwidth is chosen each update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaMode {
    Fixed,
    /// Silverman's rule on the old policy's sampled actions.
    Silverman,
}

impl SigmaMode {
    pub fn name(self) -> &'static str {
        match self {
            SigmaMode::Fixed => "fixed",
            SigmaMode::Silverman => "silverman",
        }
    }
}

impl FromStr for SigmaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fixed" => Ok(SigmaMode::Fixed),
            "silverman" => Ok(SigmaMode::Silverman),
            other => Err(invalid(format!("unknown sigma mode '{other}' (expected fixed|silverman)"))),
        }
    }
}

/// Full training configuration. Defaults follow the published
/// hyperparameter table; the remaining knobs are documented inline.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyConfig {
    pub variant: Variant,
    /// Clip range ε.
    pub clip_eps: f64,
    /// Initial KL coefficient β.
    pub beta_init: f64,
    /// KL target for the adaptive controller.
    pub d_targ: f64,
    /// CIM weight α.
    pub alpha: f64,
    pub kernel: KernelFamily,
    pub bandwidth: f64,
    pub sigma_mode: SigmaMode,
    /// Noise draws per state when estimating CIM.
    pub cim_draws: usize,
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Transitions per policy update.
    pub batch_size: usize,
    pub actor_steps: usize,
    pub critic_steps: usize,
    /// Episodes that must finish before an iteration ends.
    pub episodes_per_iteration: usize,
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
    /// Standardize rewards with running mean and std before computing
    /// returns. Keeps critic targets at unit scale.
    pub normalize_rewards: bool,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Clip,
            clip_eps: 0.2,
            beta_init: 0.5,
            d_targ: 0.1,
            alpha: 1.0,
            kernel: KernelFamily::Gaussian,
            bandwidth: 1.0,
            sigma_mode: SigmaMode::Fixed,
            cim_draws: 1,
            gamma: 0.9,
            actor_lr: 1e-4,
            critic_lr: 2e-4,
            batch_size: 32,
            actor_steps: 10,
            critic_steps: 10,
            episodes_per_iteration: 5,
            hidden: vec![64],
            init_log_std: 0.0,
            normalize_rewards: true,
        }
    }
}

/// Lower clamp applied to policy standard deviations.
pub const SIGMA_FLOOR: f64 = 1e-4;

impl PenaltyConfig {
    pub fn for_variant(variant: Variant) -> Self {
        Self {
            variant,
            ..Self::default()
        }
    }

    /// Checks ranges. `β`, `α` may be zero and `ε` infinite, which switches
    /// the corresponding penalty off.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        if self.clip_eps.is_nan() || self.clip_eps <= 0.0 {
            return Err(invalid(format!("clip_eps must be positive, got {}", self.clip_eps)));
        }
        if !(self.beta_init >= 0.0 && self.beta_init.is_finite()) {
            return Err(invalid(format!("beta must be >= 0, got {}", self.beta_init)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(invalid(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        positive("d_targ", self.d_targ)?;
        positive("bandwidth", self.bandwidth)?;
        positive("actor_lr", self.actor_lr)?;
        positive("critic_lr", self.critic_lr)?;
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(invalid(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("actor_steps", self.actor_steps),
            ("critic_steps", self.critic_steps),
            ("episodes_per_iteration", self.episodes_per_iteration),
            ("cim_draws", self.cim_draws),
        ] {
            if v == 0 {
                return Err(invalid(format!("{name} must be >= 1")));
            }
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(invalid(format!("hidden widths must be positive, got {:?}", self.hidden)));
        }
        if !self.init_log_std.is_finite() {
            return Err(invalid("init_log_std must be finite"));
        }
        Ok(())
    }

    pub fn kernel(&self) -> Result<Kernel> {
        Kernel::new(self.kernel, self.bandwidth)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_hyperparameter_table() {
        let c = PenaltyConfig::default();
        assert_eq!(c.d_targ, 0.1);
        assert_eq!(c.beta_init, 0.5);
        assert_eq!(c.clip_eps, 0.2);
        assert_eq!(c.alpha, 1.0);
        assert_eq!(c.gamma, 0.9);
        assert_eq!(c.actor_lr, 1e-4);
        assert_eq!(c.critic_lr, 2e-4);
        assert_eq!(c.batch_size, 32);
        assert_eq!((c.actor_steps, c.critic_steps), (10, 10));
        c.validate().unwrap();
    }

    #[test]
    fn validation_catches_bad_values() {
        let bad = [
            PenaltyConfig { gamma: 1.5, ..Default::default() },
            PenaltyConfig { batch_size: 0, ..Default::default() },
            PenaltyConfig { clip_eps: f64::NAN, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
        let off = PenaltyConfig {
            clip_eps: f64::INFINITY,
            beta_init: 0.0,
            alpha: 0.0,
            ..Default::default()
        };
        off.validate().unwrap();
    }

    #[test]
    fn variant_names() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("trpo".parse::<Variant>().is_err());
    }
}
