use std::collections::BTreeMap;

use rand::{Rng, RngCore};

use super::{check_action, Env, EnvSpec, StepResult};
use crate::error::{Error, Result};

pub const DT: f64 = 0.1;
pub const EPISODE_STEPS: usize = 100;

/// One-dimensional point mass pushed towards the origin. Observation is
/// `(x, v)`.
#[derive(Debug, Clone)]
pub struct PointMass {
    spec: EnvSpec,
    x: f64,
    v: f64,
    steps: usize,
}

impl Default for PointMass {
    fn default() -> Self {
        Self::new()
    }
}

impl PointMass {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "pointmass",
                state_dim: 2,
                action_dim: 1,
                action_bounds: vec![(-1.0, 1.0)],
                max_steps: EPISODE_STEPS,
            },
            x: 0.0,
            v: 0.0,
            steps: 0,
        }
    }

    pub fn set_state(&mut self, x: f64, v: f64) -> Result<()> {
        if !(x.is_finite() && v.is_finite()) {
            return Err(Error::NonFinite("pointmass state"));
        }
        self.x = x;
        self.v = v;
        self.steps = 0;
        Ok(())
    }
}

impl Env for PointMass {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.x = rng.random_range(-1.0..1.0);
        self.v = 0.0;
        self.steps = 0;
        vec![self.x, self.v]
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        check_action(&self.spec, action)?;
        if !(self.x.is_finite() && self.v.is_finite()) {
            return Err(Error::NonFinite("pointmass state"));
        }
        let f = action[0].clamp(-1.0, 1.0);
        let reward = -self.x * self.x - 0.01 * f * f;
        self.v += DT * f;
        self.x += DT * self.v;
        self.steps += 1;
        let mut info = BTreeMap::new();
        info.insert("action_clamped", f64::from(f != action[0]));
        Ok(StepResult {
            next_state: vec![self.x, self.v],
            reward,
            done: self.steps >= self.spec.max_steps,
            info,
        })
    }
}
