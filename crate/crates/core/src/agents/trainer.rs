use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::agent::Agent;
use crate::envs::Env;
use crate::error::Result;
use crate::replay::{ReplayBuffer, Transition};

/// What one call to [`Trainer::train_step`] did.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    /// Value of `t` before the step.
    pub step: u64,
    pub critic_loss: Option<f64>,
    pub policy_loss: Option<f64>,
    pub alpha_loss: Option<f64>,
    /// Return of an episode that ended on this step.
    pub episode_return: Option<f64>,
}

impl StepReport {
    pub fn updated_critic(&self) -> bool {
        self.critic_loss.is_some()
    }

    pub fn updated_actor(&self) -> bool {
        self.policy_loss.is_some()
    }
}

/// Couples an agent with its environment, replay buffer and random streams.
pub struct Trainer {
    pub agent: Agent,
    env: Box<dyn Env>,
    pub buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    mask_rng: ChaCha8Rng,
    obs: Vec<f64>,
    episode_return: f64,
}

impl Trainer {
    /// `env` should already be seeded; it is reset here.
    pub fn new(agent: Agent, mut env: Box<dyn Env>, rng: ChaCha8Rng, mask_rng: ChaCha8Rng) -> Result<Self> {
        let spec = env.spec().clone();
        let buffer = ReplayBuffer::new(agent.config().buffer_capacity, spec.state_dim, spec.action_dim)?;
        let obs = env.reset();
        Ok(Self {
            agent,
            env,
            buffer,
            rng,
            mask_rng,
            obs,
            episode_return: 0.0,
        })
    }

    pub fn env(&self) -> &dyn Env {
        self.env.as_ref()
    }

    /// One environment interaction and, once past the random-start phase,
    /// one critic update plus the delayed actor update.
    pub fn train_step(&mut self) -> Result<StepReport> {
        let t = self.agent.step();
        let cfg = self.agent.config().clone();
        let action = if t < cfg.random_start_steps {
            let spec = self.env.spec();
            (0..spec.action_dim)
                .map(|j| self.rng.random_range(spec.action_low[j]..=spec.action_high[j]))
                .collect()
        } else {
            self.agent.act(&self.obs, &mut self.rng, true)?
        };
        let out = self.env.step(&action)?;
        self.buffer.push(Transition {
            state: std::mem::take(&mut self.obs),
            action,
            reward: out.reward,
            next_state: out.observation.clone(),
            terminal: out.terminal,
        })?;
        self.episode_return += out.reward;

        let mut report = StepReport {
            step: t,
            ..StepReport::default()
        };
        if out.done || out.terminal {
            report.episode_return = Some(self.episode_return);
            self.episode_return = 0.0;
            self.obs = self.env.reset();
        } else {
            self.obs = out.observation;
        }

        if t >= cfg.random_start_steps && self.buffer.len() >= cfg.batch_size {
            let batch = self.buffer.sample(cfg.batch_size, &mut self.rng)?;
            let critic = self.agent.critic_update(&batch, &mut self.rng, &mut self.mask_rng)?;
            report.critic_loss = Some(critic.loss);
            if self.agent.actor_due(t) {
                let actor = self.agent.actor_update(&batch, &mut self.rng)?;
                report.policy_loss = Some(actor.policy_loss);
                report.alpha_loss = actor.alpha_loss;
            }
        }
        self.agent.advance();
        Ok(report)
    }
}
