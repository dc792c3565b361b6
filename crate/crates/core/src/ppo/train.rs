use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::batch::{compute_advantages, Trajectory, UpdateBatch, ADVANTAGE_STD_FLOOR};
use super::config::{PenaltyConfig, SigmaMode, Variant};
use super::objective::{adaptive_beta_update, Objective};
use super::policy::{ActionPolicy, GaussianPolicy};
use crate::autodiff::{Mlp, Optimizer, StepOutcome, Tape, Tensor};
use crate::correntropy::{cim_penalty_draws, silverman_bandwidth, Kernel};
use crate::envs::{Collector, Env, EnvKind};
use crate::error::{invalid, Result};
use crate::gaussian::kl_closed_form;

/// Summary of one training iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Mean return of the episodes finished during this iteration.
    pub mean_return: f64,
    /// Clip fraction, measured KL, or CIM depending on the variant; averaged
    /// over the iteration's updates.
    pub penalty_value: f64,
    /// KL coefficient after the iteration (zero for other variants).
    pub beta: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
    /// Cumulative environment steps.
    pub env_steps: u64,
    pub wall_time_s: f64,
    pub nonfinite_grad_count: usize,
    pub sigma_clamp_count: usize,
    pub updates: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub records: Vec<IterationRecord>,
}

impl RunLog {
    /// Mean of `mean_return` over the last `n` records.
    pub fn tail_mean_return(&self, n: usize) -> f64 {
        let tail = &self.records[self.records.len().saturating_sub(n)..];
        tail.iter().map(|r| r.mean_return).sum::<f64>() / tail.len() as f64
    }

    /// Mean of `mean_return` over the first `n` records.
    pub fn head_mean_return(&self, n: usize) -> f64 {
        let head = &self.records[..n.min(self.records.len())];
        head.iter().map(|r| r.mean_return).sum::<f64>() / head.len() as f64
    }
}

/// Diagnostics of a single policy update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub penalty_value: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub nonfinite: usize,
    pub sigma_clamped: usize,
}

/// Actor-critic learner for one seed and one environment.
pub struct Trainer {
    config: PenaltyConfig,
    policy: GaussianPolicy,
    critic: Mlp,
    actor_opt: Optimizer,
    critic_opt: Optimizer,
    collector: Collector,
    rng: ChaCha8Rng,
    beta: f64,
    iteration: usize,
    started: Instant,
    reward_stats: RunningStats,
}

/// Welford running mean and variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2 / self.count as f64).sqrt()
        }
    }
}

impl Trainer {
    pub fn new(config: PenaltyConfig, env: Box<dyn Env + Send>, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s_dim, a_dim) = (env.spec().state_dim, env.spec().action_dim);
        let policy = GaussianPolicy::new(s_dim, a_dim, &config.hidden, config.init_log_std, &mut rng)?;
        let mut widths = vec![s_dim];
        widths.extend_from_slice(&config.hidden);
        widths.push(1);
        let critic = Mlp::new(&widths, &mut rng)?;
        Ok(Self {
            actor_opt: Optimizer::adam(config.actor_lr)?,
            critic_opt: Optimizer::adam(config.critic_lr)?,
            beta: config.beta_init,
            config,
            policy,
            critic,
            collector: Collector::new(env),
            rng,
            iteration: 0,
            started: Instant::now(),
            reward_stats: RunningStats::default(),
        })
    }

    pub fn for_env(config: PenaltyConfig, env: EnvKind, seed: u64) -> Result<Self> {
        Self::new(config, env.make(), seed)
    }

    pub fn policy(&self) -> &GaussianPolicy {
        &self.policy
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn config(&self) -> &PenaltyConfig {
        &self.config
    }

    /// Snapshots the current policy as the behaviour policy for `traj`.
    pub fn build_batch(&self, traj: &Trajectory) -> Result<UpdateBatch> {
        let states = Tensor::from_rows(&traj.states)?;
        let (old_mu, old_sigma) = self.policy.batch_moments(&states)?;
        Ok(UpdateBatch {
            actions: Tensor::from_rows(&traj.actions)?,
            old_log_probs: Tensor::vector(traj.log_probs.clone())?,
            advantages: Tensor::vector(traj.advantages.clone())?,
            states,
            old_mu,
            old_sigma,
        })
    }

    /// The variant's surrogate at the current `β`. `noises` only matters
    /// for CIM.
    pub fn objective<'a>(&self, kernel: Kernel, noises: &'a [Tensor]) -> Objective<'a> {
        match self.config.variant {
            Variant::Clip => Objective::Clip { eps: self.config.clip_eps },
            Variant::AdaptiveKl => Objective::Kl { beta: self.beta },
            Variant::Cim => Objective::Cim {
                alpha: self.config.alpha,
                kernel,
                noises,
            },
        }
    }

    fn draw_noise(&mut self, rows: usize, cols: usize) -> Tensor {
        let data: Vec<f64> = (0..rows * cols).map(|_| self.rng.sample(StandardNormal)).collect();
        Tensor::new(vec![rows, cols], data).expect("standard normal draws are finite")
    }

    fn fit_critic(&mut self, traj: &Trajectory) -> Result<(f64, usize)> {
        let states = Tensor::from_rows(&traj.states)?;
        let targets = Tensor::new(vec![traj.len(), 1], traj.returns.clone())?;
        let mut loss_sum = 0.0;
        let mut nonfinite = 0;
        for _ in 0..self.config.critic_steps {
            let mut tape = Tape::new();
            let vars = self.critic.register(&mut tape);
            let x = tape.constant(states.clone());
            let v = self.critic.forward_on(&mut tape, &vars, x)?;
            let g = tape.constant(targets.clone());
            let err = tape.sub(v, g)?;
            let sq = tape.square(err);
            let loss = tape.mean(sq);
            loss_sum += tape.value(loss).data()[0];
            let grads = tape.backward(loss)?;
            let grads: Vec<Tensor> = vars.iter().map(|&p| grads.wrt(p)).collect();
            if self.critic_opt.step(self.critic.params_mut().iter_mut(), &grads)? == StepOutcome::SkippedNonFinite {
                nonfinite += 1;
            }
        }
        Ok((loss_sum / self.config.critic_steps as f64, nonfinite))
    }

    /// One policy update on `traj`: advantages, critic regression, then
    /// `actor_steps` gradient-ascent steps on the variant's surrogate.
    pub fn update(&mut self, mut traj: Trajectory) -> Result<UpdateStats> {
        if self.config.normalize_rewards {
            for &r in &traj.rewards {
                self.reward_stats.push(r);
            }
            let (m, s) = (self.reward_stats.mean(), self.reward_stats.std().max(ADVANTAGE_STD_FLOOR));
            for r in traj.rewards.iter_mut() {
                *r = (*r - m) / s;
            }
        }
        let traj = compute_advantages(traj, &self.critic, self.config.gamma)?;
        let (critic_loss, mut nonfinite) = self.fit_critic(&traj)?;
        let batch = self.build_batch(&traj)?;
        let (rows, a_dim) = (batch.len(), batch.action_dim());

        let mut kernel = self.config.kernel()?;
        if self.config.variant == Variant::Cim && self.config.sigma_mode == SigmaMode::Silverman {
            let noise = self.draw_noise(rows, a_dim);
            let samples: Vec<f64> = batch
                .old_mu
                .data()
                .iter()
                .zip(batch.old_sigma.data())
                .zip(noise.data())
                .map(|((m, s), e)| m + s * e)
                .collect();
            let bw = if samples.len() >= 2 { silverman_bandwidth(&samples)? } else { 1.0 };
            kernel = Kernel::new(kernel.family(), bw)?;
        }

        let mut actor_loss = 0.0;
        let mut last_noises: Vec<Tensor> = Vec::new();
        for _ in 0..self.config.actor_steps {
            let noises: Vec<Tensor> = if self.config.variant == Variant::Cim {
                (0..self.config.cim_draws).map(|_| self.draw_noise(rows, a_dim)).collect()
            } else {
                Vec::new()
            };
            let objective = self.objective(kernel, &noises);
            let (value, grads) = super::objective::objective_and_grad(&self.policy, &batch, &objective)?;
            actor_loss -= value;
            // Ascent on the surrogate is descent on its negation.
            let neg: Vec<Tensor> = grads
                .into_iter()
                .map(|g| {
                    let shape = g.shape().to_vec();
                    Tensor::from_parts(shape, g.into_data().into_iter().map(|v| -v).collect())
                })
                .collect();
            if self.actor_opt.step(self.policy.params_mut(), &neg)? == StepOutcome::SkippedNonFinite {
                nonfinite += 1;
            }
            last_noises = noises;
        }
        actor_loss /= self.config.actor_steps as f64;

        let (_, sigma_clamped) = self.policy.sigma();
        if sigma_clamped > 0 {
            log::warn!("policy sigma clamped at floor in {sigma_clamped} dimension(s)");
        }

        let penalty_value = match self.config.variant {
            Variant::Clip => self.clip_fraction(&batch)?,
            Variant::AdaptiveKl => {
                let d = self.mean_kl(&batch)?;
                self.beta = adaptive_beta_update(self.beta, d, self.config.d_targ);
                d
            }
            Variant::Cim => {
                let mut tape = Tape::new();
                let vars = self.policy.register(&mut tape);
                let nodes = self.policy.forward_on(&mut tape, &vars, &batch.states)?;
                let c = cim_penalty_draws(
                    &mut tape,
                    &kernel,
                    &batch.old_mu,
                    &batch.old_sigma,
                    nodes.mu,
                    nodes.sigma,
                    &last_noises,
                )?;
                tape.value(c).data()[0]
            }
        };

        Ok(UpdateStats {
            penalty_value,
            actor_loss,
            critic_loss,
            nonfinite,
            sigma_clamped,
        })
    }

    /// Mean closed-form `D_KL(π_old ‖ π_new)` over the batch states.
    pub fn mean_kl(&self, batch: &UpdateBatch) -> Result<f64> {
        let mut total = 0.0;
        for b in 0..batch.len() {
            let old = crate::gaussian::DiagGaussian::new(batch.old_mu.row(b).to_vec(), batch.old_sigma.row(b).to_vec())?;
            let new = self.policy.distribution(batch.states.row(b))?;
            total += kl_closed_form(&old, &new)?;
        }
        Ok(total / batch.len() as f64)
    }

    fn clip_fraction(&self, batch: &UpdateBatch) -> Result<f64> {
        let eps = self.config.clip_eps;
        let mut clipped = 0usize;
        for b in 0..batch.len() {
            let lp = self.policy.distribution(batch.states.row(b))?.log_prob(batch.actions.row(b))?;
            let rho = (lp - batch.old_log_probs.data()[b]).exp();
            if (rho - 1.0).abs() > eps {
                clipped += 1;
            }
        }
        Ok(clipped as f64 / batch.len() as f64)
    }

    /// Runs updates on consecutive `batch_size`-transition batches until
    /// `episodes_per_iteration` episodes have finished. A batch may straddle
    /// an episode boundary, and an iteration may end mid-episode.
    pub fn run_iteration(&mut self) -> Result<IterationRecord> {
        let mut returns = Vec::new();
        let mut stats = Vec::new();
        while returns.len() < self.config.episodes_per_iteration {
            let traj = self.collector.collect(&self.policy, self.config.batch_size, &mut self.rng)?;
            returns.extend_from_slice(&traj.episode_returns);
            stats.push(self.update(traj)?);
        }
        let n = stats.len() as f64;
        let record = IterationRecord {
            iteration: self.iteration,
            mean_return: returns.iter().sum::<f64>() / returns.len() as f64,
            penalty_value: stats.iter().map(|s| s.penalty_value).sum::<f64>() / n,
            beta: if self.config.variant == Variant::AdaptiveKl { self.beta } else { 0.0 },
            actor_loss: stats.iter().map(|s| s.actor_loss).sum::<f64>() / n,
            critic_loss: stats.iter().map(|s| s.critic_loss).sum::<f64>() / n,
            env_steps: self.collector.total_steps(),
            wall_time_s: self.started.elapsed().as_secs_f64(),
            nonfinite_grad_count: stats.iter().map(|s| s.nonfinite).sum(),
            sigma_clamp_count: stats.iter().map(|s| s.sigma_clamped).sum(),
            updates: stats.len(),
        };
        self.iteration += 1;
        Ok(record)
    }

    /// Runs `iterations` iterations, handing each record to `on_record` as it
    /// is produced.
    pub fn run<F>(&mut self, iterations: usize, mut on_record: F) -> Result<RunLog>
    where
        F: FnMut(&IterationRecord) -> Result<()>,
    {
        if iterations == 0 {
            return Err(invalid("iterations must be >= 1"));
        }
        let mut log = RunLog::default();
        for _ in 0..iterations {
            let rec = self.run_iteration()?;
            on_record(&rec)?;
            log.records.push(rec);
        }
        Ok(log)
    }
}

/// Trains a fresh learner on `env` with `seed` for `iterations` iterations.
pub fn train(config: &PenaltyConfig, env: EnvKind, seed: u64, iterations: usize) -> Result<RunLog> {
    Trainer::for_env(config.clone(), env, seed)?.run(iterations, |_| Ok(()))
}

