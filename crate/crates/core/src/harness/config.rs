use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::ddpg::DdpgConfig;
use crate::envs::{EnvParams, EnvRegistry};
use crate::error::{Error, Result};
use crate::policies::PolicyRegistry;

/// Every knob of one training run. Loaded from defaults, then an optional
/// `key = value` file, then command-line overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: String,
    pub policy: String,
    pub seed: u64,
    pub episodes: usize,
    pub env_params: EnvParams,
    pub ddpg: DdpgConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: "pendulum".into(),
            policy: "vn".into(),
            seed: 0,
            episodes: 200,
            env_params: EnvParams::default(),
            ddpg: DdpgConfig::default(),
        }
    }
}

/// Keys accepted by [`ExperimentConfig::set`], in echo order.
pub const KEYS: &[&str] = &[
    "env",
    "policy",
    "seed",
    "episodes",
    "horizon",
    "delta",
    "theta_bar",
    "gamma",
    "tau",
    "actor_lr",
    "critic_lr",
    "batch_size",
    "buffer_capacity",
    "warmup",
    "hidden",
    "noise_std",
    "pn_noise_std",
    "noise_decay",
    "penalty",
    "reward_scale",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value for {key}: {value:?}")))
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let d = &mut self.ddpg;
        match key {
            "env" => self.env = value.to_string(),
            "policy" => self.policy = value.to_string(),
            "seed" => self.seed = parse(key, value)?,
            "episodes" => self.episodes = parse(key, value)?,
            "horizon" => self.env_params.horizon = parse(key, value)?,
            "delta" => self.env_params.delta = parse(key, value)?,
            "theta_bar" => self.env_params.theta_bar = parse(key, value)?,
            "gamma" => d.gamma = parse(key, value)?,
            "tau" => d.tau = parse(key, value)?,
            "actor_lr" => d.actor_lr = parse(key, value)?,
            "critic_lr" => d.critic_lr = parse(key, value)?,
            "batch_size" => d.batch_size = parse(key, value)?,
            "buffer_capacity" => d.buffer_capacity = parse(key, value)?,
            "warmup" => d.warmup = parse(key, value)?,
            "hidden" => {
                d.hidden = value
                    .split(',')
                    .map(|v| parse(key, v.trim()))
                    .collect::<Result<_>>()?
            }
            "noise_std" => d.noise_std = parse(key, value)?,
            "pn_noise_std" => d.pn_noise_std = parse(key, value)?,
            "noise_decay" => d.noise_decay = parse(key, value)?,
            "penalty" => d.penalty = parse(key, value)?,
            "reward_scale" => {
                d.reward_scale = match value {
                    "auto" => None,
                    v => Some(parse(key, v)?),
                }
            }
            _ => return Err(Error::Config(format!("unknown key: {key}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let d = &self.ddpg;
        Some(match key {
            "env" => self.env.clone(),
            "policy" => self.policy.clone(),
            "seed" => self.seed.to_string(),
            "episodes" => self.episodes.to_string(),
            "horizon" => self.env_params.horizon.to_string(),
            "delta" => self.env_params.delta.to_string(),
            "theta_bar" => self.env_params.theta_bar.to_string(),
            "gamma" => d.gamma.to_string(),
            "tau" => d.tau.to_string(),
            "actor_lr" => d.actor_lr.to_string(),
            "critic_lr" => d.critic_lr.to_string(),
            "batch_size" => d.batch_size.to_string(),
            "buffer_capacity" => d.buffer_capacity.to_string(),
            "warmup" => d.warmup.to_string(),
            "hidden" => d
                .hidden
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(","),
            "noise_std" => d.noise_std.to_string(),
            "pn_noise_std" => d.pn_noise_std.to_string(),
            "noise_decay" => d.noise_decay.to_string(),
            "penalty" => d.penalty.to_string(),
            "reward_scale" => d
                .reward_scale
                .map_or_else(|| "auto".to_string(), |k| k.to_string()),
            _ => return None,
        })
    }

    /// Applies `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes < 1 {
            return Err(Error::Config("episodes must be at least 1".into()));
        }
        if !(self.env_params.theta_bar > 0.0) {
            return Err(Error::Config("theta_bar must be positive".into()));
        }
        if !(self.env_params.delta > 0.0) || self.env_params.horizon < 1 {
            return Err(Error::Config("need delta > 0 and horizon >= 1".into()));
        }
        if !EnvRegistry::default().names().any(|n| n == self.env) {
            return Err(Error::Config(format!("unknown env: {}", self.env)));
        }
        if !PolicyRegistry::default().contains(&self.policy) {
            return Err(Error::Config(format!("unknown policy: {}", self.policy)));
        }
        self.ddpg.validate()
    }

    /// Fully resolved `key = value` listing, one line per key.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("known key"));
        }
        out
    }

    /// Default run directory name for this configuration.
    pub fn run_name(&self) -> String {
        let mut name = format!("{}_{}_s{}", self.env, self.policy, self.seed);
        if self.env == "hovercraft" {
            name.push_str(&format!("_tb{}", self.env_params.theta_bar));
        }
        name
    }

    pub fn default_out(&self) -> PathBuf {
        PathBuf::from("runs").join(self.run_name())
    }
}
