//! Native continuous-control environments behind one [`Env`] contract.

mod pendulum;
mod pointmass;
mod rollout;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::RngCore;

use crate::error::{invalid, Error, Result};

pub use pendulum::Pendulum;
pub use pointmass::PointMass;
pub use rollout::{rollout, Collector};

/// Static description of an environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub name: &'static str,
    pub state_dim: usize,
    pub action_dim: usize,
    /// `(low, high)` per action dimension.
    pub action_bounds: Vec<(f64, f64)>,
    pub max_steps: usize,
}

impl EnvSpec {
    /// Clamps each action component into its bounds.
    pub fn clamp_action(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .zip(&self.action_bounds)
            .map(|(&a, &(lo, hi))| a.clamp(lo, hi))
            .collect()
    }
}

/// Outcome of a single environment transition.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: BTreeMap<&'static str, f64>,
}

/// A single-owner simulator.
pub trait Env {
    fn spec(&self) -> &EnvSpec;

    /// Starts a new episode and returns the initial observation.
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;

    /// Advances one step. Actions outside the bounds are clamped.
    fn step(&mut self, action: &[f64]) -> Result<StepResult>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    Pendulum,
    PointMass,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Pendulum => "pendulum",
            EnvKind::PointMass => "pointmass",
        }
    }

    pub fn make(self) -> Box<dyn Env + Send> {
        match self {
            EnvKind::Pendulum => Box::new(Pendulum::new()),
            EnvKind::PointMass => Box::new(PointMass::new()),
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pendulum" => Ok(EnvKind::Pendulum),
            "pointmass" => Ok(EnvKind::PointMass),
            other => Err(invalid(format!("unknown env '{other}' (expected pendulum|pointmass)"))),
        }
    }
}

fn check_action(spec: &EnvSpec, action: &[f64]) -> Result<()> {
    if action.len() != spec.action_dim {
        return Err(crate::error::shape_err(
            "env step",
            format!("{} expects {} action values, got {}", spec.name, spec.action_dim, action.len()),
        ));
    }
    if action.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("env action"));
    }
    Ok(())
}
