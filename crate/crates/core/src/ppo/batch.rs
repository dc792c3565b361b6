use crate::autodiff::{Mlp, Tensor};
use crate::error::{invalid, Result};

pub const ADVANTAGE_STD_FLOOR: f64 = 1e-8;

/// A run of consecutive transitions. Episode boundaries inside it are marked
/// by `dones`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    /// Unclamped sampled actions.
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    /// Behaviour-policy log-densities of `actions`.
    pub log_probs: Vec<f64>,
    pub dones: Vec<bool>,
    /// Observation after the final transition.
    pub last_state: Vec<f64>,
    /// Returns of the episodes that finished inside this trajectory.
    pub episode_returns: Vec<f64>,
    pub returns: Vec<f64>,
    pub values: Vec<f64>,
    pub advantages: Vec<f64>,
}

impl Trajectory {
    pub fn push(&mut self, state: Vec<f64>, action: Vec<f64>, reward: f64, log_prob: f64, done: bool) {
        self.states.push(state);
        self.actions.push(action);
        self.rewards.push(reward);
        self.log_probs.push(log_prob);
        self.dones.push(done);
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Discounted returns-to-go, computed backwards and reset at `done` flags.
/// `bootstrap` stands in for the value after the last transition when that
/// transition is not terminal.
pub fn discounted_returns(rewards: &[f64], dones: &[bool], bootstrap: f64, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut next = bootstrap;
    for t in (0..rewards.len()).rev() {
        if dones[t] {
            next = 0.0;
        }
        next = rewards[t] + gamma * next;
        out[t] = next;
    }
    out
}

/// Shifts and scales to mean 0 and standard deviation 1; a standard deviation
/// below the floor is replaced by the floor.
pub fn normalize(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let n = xs.len() as f64;
    // Shifted by the first element so that identical inputs give exact zeros.
    let x0 = xs[0];
    let mean = x0 + xs.iter().map(|x| x - x0).sum::<f64>() / n;
    let std = (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
    let scale = std.max(ADVANTAGE_STD_FLOOR);
    for x in xs.iter_mut() {
        *x = (*x - mean) / scale;
    }
}

/// Fills `returns`, `values` and batch-normalized `advantages = G − V(s)`.
pub fn compute_advantages(mut traj: Trajectory, critic: &Mlp, gamma: f64) -> Result<Trajectory> {
    if traj.is_empty() {
        return Err(invalid("cannot compute advantages of an empty trajectory"));
    }
    let bootstrap = if *traj.dones.last().unwrap() {
        0.0
    } else {
        critic.forward(&Tensor::vector(traj.last_state.clone())?)?.data()[0]
    };
    traj.returns = discounted_returns(&traj.rewards, &traj.dones, bootstrap, gamma);
    let states = Tensor::from_rows(&traj.states)?;
    traj.values = critic.forward(&states)?.into_data();
    let mut adv: Vec<f64> = traj.returns.iter().zip(&traj.values).map(|(g, v)| g - v).collect();
    normalize(&mut adv);
    traj.advantages = adv;
    Ok(traj)
}

/// Tensors for one policy update: the batch plus the frozen old policy.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateBatch {
    /// `(B, S)`.
    pub states: Tensor,
    /// `(B, A)`.
    pub actions: Tensor,
    /// `(B)`.
    pub old_log_probs: Tensor,
    /// `(B)`.
    pub advantages: Tensor,
    /// `(B, A)` old-policy means.
    pub old_mu: Tensor,
    /// `(B, A)` old-policy standard deviations.
    pub old_sigma: Tensor,
}

impl UpdateBatch {
    pub fn len(&self) -> usize {
        self.states.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn action_dim(&self) -> usize {
        self.actions.shape()[1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn returns_by_hand() {
        let g = discounted_returns(&[1.0, 1.0, 1.0], &[false, false, true], 123.0, 0.9);
        let expected = [2.71, 1.9, 1.0];
        for (a, b) in g.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn returns_reset_at_done_and_bootstrap_at_cut() {
        let g = discounted_returns(&[1.0, 2.0, 3.0], &[true, false, false], 10.0, 0.5);
        assert_eq!(g, vec![1.0, 2.0 + 0.5 * (3.0 + 0.5 * 10.0), 3.0 + 5.0]);
    }

    #[test]
    fn zero_critic_zero_reward_gives_zero_advantage() {
        let params = vec![Tensor::zeros(&[2, 1]), Tensor::zeros(&[1])];
        let critic = Mlp::from_params(&[2, 1], params).unwrap();
        let mut t = Trajectory::default();
        for _ in 0..4 {
            t.push(vec![0.3, 0.1], vec![0.0], 0.0, 0.0, false);
        }
        t.last_state = vec![0.0, 0.0];
        let t = compute_advantages(t, &critic, 0.9).unwrap();
        assert!(t.advantages.iter().all(|&a| a == 0.0));
        assert!(t.returns.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn normalization() {
        let mut xs = vec![0.1; 32];
        normalize(&mut xs);
        assert!(xs.iter().all(|&x| x == 0.0));
        let mut xs = vec![0.0; 5];
        normalize(&mut xs);
        assert!(xs.iter().all(|&x| x == 0.0));
        let mut xs = vec![1.0, 2.0, 3.0, 4.0];
        normalize(&mut xs);
        let m: f64 = xs.iter().sum::<f64>() / 4.0;
        let v: f64 = xs.iter().map(|x| x * x).sum::<f64>() / 4.0;
        assert!(m.abs() < 1e-15 && (v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_trajectory_is_an_error() {
        let critic = Mlp::from_params(&[1, 1], vec![Tensor::zeros(&[1, 1]), Tensor::zeros(&[1])]).unwrap();
        assert!(compute_advantages(Trajectory::default(), &critic, 0.9).is_err());
    }
}
