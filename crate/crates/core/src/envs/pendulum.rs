use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, RngCore};

use super::{check_action, Env, EnvSpec, StepResult};
use crate::error::{Error, Result};

pub const GRAVITY: f64 = 10.0;
pub const MASS: f64 = 1.0;
pub const LENGTH: f64 = 1.0;
pub const DT: f64 = 0.05;
pub const MAX_SPEED: f64 = 8.0;
pub const MAX_TORQUE: f64 = 2.0;
pub const EPISODE_STEPS: usize = 200;

/// Wraps an angle into `[-π, π)`.
pub fn angle_normalize(theta: f64) -> f64 {
    (theta + PI).rem_euclid(2.0 * PI) - PI
}

/// Torque-limited pendulum swing-up. `θ = 0` is upright; the observation is
/// `(cos θ, sin θ, θ̇)`.
#[derive(Debug, Clone)]
pub struct Pendulum {
    spec: EnvSpec,
    theta: f64,
    theta_dot: f64,
    steps: usize,
}

impl Default for Pendulum {
    fn default() -> Self {
        Self::new()
    }
}

impl Pendulum {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "pendulum",
                state_dim: 3,
                action_dim: 1,
                action_bounds: vec![(-MAX_TORQUE, MAX_TORQUE)],
                max_steps: EPISODE_STEPS,
            },
            theta: 0.0,
            theta_dot: 0.0,
            steps: 0,
        }
    }

    /// Places the pendulum at an explicit physical state.
    pub fn set_state(&mut self, theta: f64, theta_dot: f64) -> Result<()> {
        if !(theta.is_finite() && theta_dot.is_finite()) {
            return Err(Error::NonFinite("pendulum state"));
        }
        self.theta = theta;
        self.theta_dot = theta_dot;
        self.steps = 0;
        Ok(())
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn theta_dot(&self) -> f64 {
        self.theta_dot
    }

    pub fn observation(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }

    /// `½ θ̇² + (3g / 2l) cos θ`, conserved by the unforced continuous dynamics.
    pub fn energy(&self) -> f64 {
        0.5 * self.theta_dot * self.theta_dot + 1.5 * GRAVITY / LENGTH * self.theta.cos()
    }
}

impl Env for Pendulum {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.theta = rng.random_range(-PI..PI);
        self.theta_dot = rng.random_range(-1.0..1.0);
        self.steps = 0;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        check_action(&self.spec, action)?;
        if !(self.theta.is_finite() && self.theta_dot.is_finite()) {
            return Err(Error::NonFinite("pendulum state"));
        }
        let u = action[0].clamp(-MAX_TORQUE, MAX_TORQUE);
        let th = angle_normalize(self.theta);
        let reward = -(th * th + 0.1 * self.theta_dot * self.theta_dot + 0.001 * u * u);

        let accel = 3.0 * GRAVITY / (2.0 * LENGTH) * self.theta.sin() + 3.0 / (MASS * LENGTH * LENGTH) * u;
        let raw_speed = self.theta_dot + accel * DT;
        let speed = raw_speed.clamp(-MAX_SPEED, MAX_SPEED);
        self.theta = angle_normalize(self.theta + speed * DT);
        self.theta_dot = speed;
        self.steps += 1;

        let mut info = BTreeMap::new();
        info.insert("action_clamped", f64::from(u != action[0]));
        info.insert("speed_clamped", f64::from(speed != raw_speed));
        Ok(StepResult {
            next_state: self.observation(),
            reward,
            done: self.steps >= self.spec.max_steps,
            info,
        })
    }
}
