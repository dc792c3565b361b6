//! Flat `key = value` run configuration.
//!
//! Files hold one assignment per line; blank lines and lines starting with
//! `#` or `;` are skipped. Command-line flags are layered on top of the file
//! through the same keys, so both paths share one parser.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rl_lab_core::correntropy::KernelFamily;
use rl_lab_core::envs::EnvKind;
use rl_lab_core::ppo::{PenaltyConfig, SigmaMode, Variant};

use crate::error::{usage, CliResult};

pub const DEFAULT_ITERATIONS: usize = 2000;

/// Every key a config file or flag overlay may set, in save order.
pub const KEYS: &[&str] = &[
    "algo",
    "env",
    "seeds",
    "iterations",
    "out",
    "clip_eps",
    "beta",
    "d_targ",
    "alpha",
    "kernel",
    "bandwidth",
    "sigma_mode",
    "cim_draws",
    "gamma",
    "actor_lr",
    "critic_lr",
    "batch_size",
    "actor_steps",
    "critic_steps",
    "episodes_per_iteration",
    "hidden",
    "init_log_std",
    "normalize_rewards",
];

/// Key/value assignments before interpretation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut raw = RawConfig::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if line.starts_with('[') {
                return Err(usage(format!("line {}: sections are not supported", no + 1)));
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(usage(format!("line {}: expected key = value, got '{line}'", no + 1)));
            };
            let key = k.trim();
            if raw.entries.contains_key(key) {
                return Err(usage(format!("line {}: duplicate key '{key}'", no + 1)));
            }
            raw.set(key, v.trim())?;
        }
        Ok(raw)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    }

    /// Sets `key`, overwriting any earlier value. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        if !KEYS.contains(&key) {
            return Err(usage(format!("unknown config key '{key}'")));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }
}

/// A fully resolved training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvKind,
    pub seeds: Vec<u64>,
    pub iterations: usize,
    pub out: Option<PathBuf>,
    /// Carries the algorithm as `penalty.variant`.
    pub penalty: PenaltyConfig,
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> CliResult<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| usage(format!("bad value for {key}: '{v}' ({e})")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> CliResult<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect::<CliResult<Vec<T>>>()?;
    if items.is_empty() {
        return Err(usage(format!("{key} must list at least one value")));
    }
    Ok(items)
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> CliResult<Self> {
        let algo: Variant = match raw.get("algo") {
            Some(v) => parse_value("algo", v)?,
            None => return Err(usage("missing required --algo (clip|kl|cim)")),
        };
        let mut p = PenaltyConfig::for_variant(algo);
        let mut cfg = RunConfig {
            env: EnvKind::Pendulum,
            seeds: vec![0],
            iterations: DEFAULT_ITERATIONS,
            out: None,
            penalty: PenaltyConfig::default(),
        };
        for (key, v) in &raw.entries {
            let v = v.as_str();
            match key.as_str() {
                "algo" => {}
                "env" => cfg.env = parse_value(key, v)?,
                "seeds" => cfg.seeds = parse_list(key, v)?,
                "iterations" => cfg.iterations = parse_value(key, v)?,
                "out" => cfg.out = Some(PathBuf::from(v)),
                "clip_eps" => p.clip_eps = parse_value(key, v)?,
                "beta" => p.beta_init = parse_value(key, v)?,
                "d_targ" => p.d_targ = parse_value(key, v)?,
                "alpha" => p.alpha = parse_value(key, v)?,
                "kernel" => p.kernel = parse_value::<KernelFamily>(key, v)?,
                "bandwidth" => p.bandwidth = parse_value(key, v)?,
                "sigma_mode" => p.sigma_mode = parse_value::<SigmaMode>(key, v)?,
                "cim_draws" => p.cim_draws = parse_value(key, v)?,
                "gamma" => p.gamma = parse_value(key, v)?,
                "actor_lr" => p.actor_lr = parse_value(key, v)?,
                "critic_lr" => p.critic_lr = parse_value(key, v)?,
                "batch_size" => p.batch_size = parse_value(key, v)?,
                "actor_steps" => p.actor_steps = parse_value(key, v)?,
                "critic_steps" => p.critic_steps = parse_value(key, v)?,
                "episodes_per_iteration" => p.episodes_per_iteration = parse_value(key, v)?,
                "hidden" => p.hidden = parse_list(key, v)?,
                "init_log_std" => p.init_log_std = parse_value(key, v)?,
                "normalize_rewards" => p.normalize_rewards = parse_value(key, v)?,
                other => return Err(usage(format!("unknown config key '{other}'"))),
            }
        }
        cfg.penalty = p;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.iterations == 0 {
            return Err(usage("iterations must be >= 1"));
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return Err(usage(format!("duplicate seed in {:?}", self.seeds)));
        }
        self.penalty.validate().map_err(|e| usage(e.to_string()))
    }

    pub fn algo(&self) -> Variant {
        self.penalty.variant
    }

    /// Serializes every key. Floats use the shortest round-trip form, so
    /// loading the text back gives an identical config.
    pub fn to_ini(&self) -> String {
        let p = &self.penalty;
        let mut s = String::from("# rl-lab run configuration\n");
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("algo", p.variant.to_string());
        kv("env", self.env.to_string());
        kv("seeds", join(&self.seeds));
        kv("iterations", self.iterations.to_string());
        if let Some(out) = &self.out {
            kv("out", out.display().to_string());
        }
        kv("clip_eps", p.clip_eps.to_string());
        kv("beta", p.beta_init.to_string());
        kv("d_targ", p.d_targ.to_string());
        kv("alpha", p.alpha.to_string());
        kv("kernel", p.kernel.to_string());
        kv("bandwidth", p.bandwidth.to_string());
        kv("sigma_mode", p.sigma_mode.name().to_string());
        kv("cim_draws", p.cim_draws.to_string());
        kv("gamma", p.gamma.to_string());
        kv("actor_lr", p.actor_lr.to_string());
        kv("critic_lr", p.critic_lr.to_string());
        kv("batch_size", p.batch_size.to_string());
        kv("actor_steps", p.actor_steps.to_string());
        kv("critic_steps", p.critic_steps.to_string());
        kv("episodes_per_iteration", p.episodes_per_iteration.to_string());
        kv("hidden", join(&p.hidden));
        kv("init_log_std", p.init_log_std.to_string());
        kv("normalize_rewards", p.normalize_rewards.to_string());
        s
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_ini())?;
        Ok(())
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        Self::from_raw(&RawConfig::load(path)?)
    }

    /// Output directory: explicit flag, then `RL_LAB_OUT`, then the config
    /// file's `out`, then `runs`.
    pub fn resolve_out(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(f) = flag {
            return f.to_path_buf();
        }
        if let Some(env) = std::env::var_os("RL_LAB_OUT").filter(|v| !v.is_empty()) {
            return PathBuf::from(env);
        }
        self.out.clone().unwrap_or_else(|| PathBuf::from("runs"))
    }
}
