use std::path::{Path, PathBuf};

use crate::agents::AgentConfig;
use crate::envs::ENV_NAMES;
use crate::error::{Error, Result};

/// One training study: an agent, an environment and a list of run seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Agent name as accepted by [`AgentConfig::preset`].
    pub algo: String,
    pub env: String,
    /// Total environment steps `T` per run.
    pub total_steps: u64,
    pub seeds: Vec<u64>,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub agent: AgentConfig,
    pub out_dir: Option<PathBuf>,
    /// Plot-only exponential smoothing factor.
    pub smoothing: f64,
}

impl ExperimentConfig {
    /// Desk-scale defaults: hidden [64, 64], 100k steps, evaluation every
    /// 2,500 steps over 10 episodes, seeds 0, 1, 2.
    pub fn desk(algo: &str, env: &str) -> Result<Self> {
        let mut agent = AgentConfig::preset(algo)?;
        agent.hidden = vec![64, 64];
        Ok(Self {
            algo: algo.to_string(),
            env: env.to_string(),
            total_steps: 100_000,
            seeds: vec![0, 1, 2],
            eval_interval: 2_500,
            eval_episodes: 10,
            agent,
            out_dir: None,
            smoothing: 0.6,
        })
    }

    /// Full-size defaults: hidden [256, 256], 10⁶ steps, evaluation every
    /// 5,000 steps over 10 episodes, five seeds.
    pub fn full(algo: &str, env: &str) -> Result<Self> {
        Ok(Self {
            total_steps: 1_000_000,
            seeds: vec![0, 1, 2, 3, 4],
            eval_interval: 5_000,
            agent: AgentConfig::preset(algo)?,
            ..Self::desk(algo, env)?
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        if !ENV_NAMES.contains(&self.env.as_str()) {
            return Err(Error::config(format!(
                "unknown environment `{}`; expected one of {}",
                self.env,
                ENV_NAMES.join(", ")
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        if self.eval_interval == 0 || self.eval_episodes == 0 {
            return Err(Error::config("evaluation interval and episode count must be positive"));
        }
        if self.total_steps < self.eval_interval {
            return Err(Error::config(format!(
                "total steps {} below the evaluation interval {}",
                self.total_steps, self.eval_interval
            )));
        }
        if !(0.0..1.0).contains(&self.smoothing) {
            return Err(Error::config("smoothing factor must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Applies one `key = value` setting. Keys follow the hyper-parameter
    /// table names in snake case.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let a = &mut self.agent;
        match key {
            "algo" | "algorithm" => {
                let hidden = a.hidden.clone();
                *a = AgentConfig::preset(value)?;
                a.hidden = hidden;
                self.algo = value.to_string();
            }
            "env" | "environment" => self.env = value.to_string(),
            "steps" | "total_steps" => self.total_steps = parse(key, value)?,
            "seeds" => self.seeds = parse_list(key, value)?,
            "eval_interval" => self.eval_interval = parse(key, value)?,
            "eval_episodes" => self.eval_episodes = parse(key, value)?,
            "out" | "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            "smoothing" => self.smoothing = parse(key, value)?,
            "discount" | "gamma" => a.gamma = parse(key, value)?,
            "target_update_rate" | "eta" => a.eta = parse(key, value)?,
            "policy_delay" | "delayed_policy_update" => a.policy_delay = parse(key, value)?,
            "exploration_noise" => a.exploration_noise = parse(key, value)?,
            "target_policy_noise" | "target_noise" => a.target_noise = parse(key, value)?,
            "target_noise_clip" | "noise_clip" => a.noise_clip = parse(key, value)?,
            "dropout_probability" | "dropout_p" | "p" => a.dropout_p = parse(key, value)?,
            "batch_size" => a.batch_size = parse(key, value)?,
            "buffer_size" | "replay_buffer_size" => a.buffer_capacity = parse(key, value)?,
            "random_start_steps" | "start_steps" => a.random_start_steps = parse(key, value)?,
            "hidden" | "hidden_sizes" => a.hidden = parse_list(key, value)?,
            "actor_lr" | "actor_learning_rate" => a.actor_lr = parse(key, value)?,
            "critic_lr" | "critic_learning_rate" => a.critic_lr = parse(key, value)?,
            "alpha_lr" | "alpha_learning_rate" => a.alpha_lr = parse(key, value)?,
            "target_entropy" => a.target_entropy = Some(parse(key, value)?),
            "fixed_alpha_value" | "alpha" => a.fixed_alpha_value = parse(key, value)?,
            "grad_clip" => a.grad_clip = Some(parse(key, value)?),
            "toggle" | "toggles" => {
                for t in value.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                    a.apply_toggle(t)?;
                }
            }
            _ => return Err(Error::config(format!("unknown setting `{key}`"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` file. Blank lines and `#` comments are
    /// skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value, got `{line}`", n + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .replace('_', "")
        .parse()
        .map_err(|_| Error::Parse(format!("cannot parse `{value}` for `{key}`")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .trim_matches(|c| c == '[' || c == ']')
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}
