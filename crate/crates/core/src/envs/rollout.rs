use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::Env;
use crate::error::{invalid, Result};
use crate::ppo::{ActionPolicy, Trajectory};

/// Draws `a ~ π(·|s)`, returning the unclamped action and its log-density.
fn act(policy: &dyn ActionPolicy, state: &[f64], rng: &mut dyn RngCore) -> Result<(Vec<f64>, f64)> {
    let dist = policy.distribution(state)?;
    let noise: Vec<f64> = (0..dist.dim()).map(|_| StandardNormal.sample(rng)).collect();
    let action = dist.sample(&noise)?;
    let log_prob = dist.log_prob(&action)?;
    Ok((action, log_prob))
}

/// Runs one episode from a fresh reset until `done` or `horizon` steps.
///
/// Sampled actions are clamped to the environment bounds before stepping;
/// the stored action and log-probability are those of the unclamped draw.
pub fn rollout(
    env: &mut dyn Env,
    policy: &dyn ActionPolicy,
    horizon: usize,
    rng: &mut dyn RngCore,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(invalid("rollout horizon must be >= 1"));
    }
    let mut state = env.reset(rng);
    let mut traj = Trajectory::default();
    let mut ret = 0.0;
    for _ in 0..horizon {
        let (action, log_prob) = act(policy, &state, rng)?;
        let clamped = env.spec().clamp_action(&action);
        let step = env.step(&clamped)?;
        ret += step.reward;
        traj.push(state, action, step.reward, log_prob, step.done);
        state = step.next_state;
        if step.done {
            traj.episode_returns.push(ret);
            break;
        }
    }
    traj.last_state = state;
    Ok(traj)
}

/// Steps an environment across calls, so that a batch may end mid-episode
/// and the next batch picks up where it stopped.
pub struct Collector {
    env: Box<dyn Env + Send>,
    state: Option<Vec<f64>>,
    episode_return: f64,
    total_steps: u64,
}

impl Collector {
    pub fn new(env: Box<dyn Env + Send>) -> Self {
        Self {
            env,
            state: None,
            episode_return: 0.0,
            total_steps: 0,
        }
    }

    pub fn env(&self) -> &dyn Env {
        self.env.as_ref()
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    /// Collects exactly `steps` transitions, resetting the environment
    /// whenever an episode finishes. Episode boundaries are marked by the
    /// `done` flags and finished episodes are reported in `episode_returns`.
    pub fn collect(&mut self, policy: &dyn ActionPolicy, steps: usize, rng: &mut dyn RngCore) -> Result<Trajectory> {
        if steps == 0 {
            return Err(invalid("collect needs steps >= 1"));
        }
        let mut traj = Trajectory::default();
        let mut state = self.state.take();
        for _ in 0..steps {
            let s = match state.take() {
                Some(s) => s,
                None => {
                    self.episode_return = 0.0;
                    self.env.reset(rng)
                }
            };
            let (action, log_prob) = act(policy, &s, rng)?;
            let clamped = self.env.spec().clamp_action(&action);
            let step = self.env.step(&clamped)?;
            self.total_steps += 1;
            self.episode_return += step.reward;
            traj.push(s, action, step.reward, log_prob, step.done);
            traj.last_state = step.next_state.clone();
            if step.done {
                traj.episode_returns.push(self.episode_return);
            } else {
                state = Some(step.next_state);
            }
        }
        self.state = state;
        Ok(traj)
    }
}
