use ndarray::{concatenate, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use super::config::{AgentConfig, Family};
use super::losses::{self, SquashedSample};
use crate::dropout::{DropoutMask, DropoutSpec};
use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::numerics::{
    clip_grad_norm, soft_update, AdamState, BoundMlp, HeadKind, MlpParams, ParamGrads, ParamSet, Tape, Var,
};
use crate::replay::Batch;

/// An online critic, its target and its optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Critic {
    pub online: MlpParams,
    pub target: MlpParams,
    optimizer: AdamState,
}

impl Critic {
    fn new(online: MlpParams, lr: f64) -> Self {
        Self {
            target: online.clone(),
            optimizer: AdamState::new(&online, lr),
            online,
        }
    }

    pub fn optimizer(&self) -> &AdamState {
        &self.optimizer
    }
}

/// Randomness consumed by one critic update, drawn up front so that the loss
/// can be rebuilt exactly (for finite differences, say).
#[derive(Debug, Clone, PartialEq)]
pub struct CriticInputs {
    /// Shared critic mask, `None` when the critic runs unmasked.
    pub mask: Option<DropoutMask>,
    /// Clipped smoothing noise in tanh units (DDPG family, zero when
    /// smoothing is off) or standard-normal policy noise (SAC family).
    pub noise: Array2<f64>,
}

/// A recorded critic loss together with the bound networks.
pub struct CriticGraph {
    pub tape: Tape,
    pub loss: Var,
    pub online: Vec<BoundMlp>,
    pub targets: Vec<BoundMlp>,
    /// The Bellman target `y`, `n x 1`.
    pub target_values: Var,
}

/// A recorded policy loss.
pub struct ActorGraph {
    pub tape: Tape,
    pub loss: Var,
    pub actor: BoundMlp,
    /// Log-density of the reparameterized actions (SAC family only).
    pub log_prob: Option<Var>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticReport {
    pub loss: f64,
    pub mean_target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActorReport {
    pub policy_loss: f64,
    pub alpha_loss: Option<f64>,
}

/// Every learnable quantity of an actor-critic agent plus its step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    config: AgentConfig,
    spec: EnvSpec,
    actor: MlpParams,
    actor_target: Option<MlpParams>,
    actor_optimizer: AdamState,
    critics: Vec<Critic>,
    log_alpha: Array2<f64>,
    alpha_optimizer: AdamState,
    dropout: Option<DropoutSpec>,
    scale: Array2<f64>,
    center: Array2<f64>,
    step: u64,
}

/// The agent state under its descriptive name.
pub type ActorCriticState = Agent;

impl Agent {
    /// Fresh networks for `spec`. The actor is drawn first, then each critic.
    pub fn new<R: Rng + ?Sized>(config: AgentConfig, spec: &EnvSpec, rng: &mut R) -> Result<Self> {
        config.validate()?;
        spec.validate()?;
        let head = match config.family {
            Family::Ddpg => HeadKind::Tanh,
            Family::Sac => HeadKind::Gaussian,
        };
        let mut actor_sizes = vec![spec.state_dim];
        actor_sizes.extend(&config.hidden);
        actor_sizes.push(spec.action_dim);
        let actor = MlpParams::init(&actor_sizes, head, rng)?;

        let mut critic_sizes = vec![spec.state_dim + spec.action_dim];
        critic_sizes.extend(&config.hidden);
        critic_sizes.push(1);
        let n_critics = if config.use_cdq { 2 } else { 1 };
        let critics = (0..n_critics)
            .map(|_| MlpParams::init(&critic_sizes, HeadKind::Linear, rng).map(|c| Critic::new(c, config.critic_lr)))
            .collect::<Result<Vec<_>>>()?;

        let log_alpha = Array2::from_elem((1, 1), config.fixed_alpha_value.ln());
        let row = |v: Vec<f64>| Array2::from_shape_vec((1, v.len()), v).expect("row shape");
        Ok(Self {
            actor_target: (config.family == Family::Ddpg).then(|| actor.clone()),
            actor_optimizer: AdamState::new(&actor, config.actor_lr),
            alpha_optimizer: AdamState::new(&log_alpha, config.alpha_lr),
            dropout: config.critic_dropout(),
            scale: row(spec.action_scale()),
            center: row(spec.action_center()),
            spec: spec.clone(),
            actor,
            critics,
            log_alpha,
            config,
            step: 0,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn env_spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn actor(&self) -> &MlpParams {
        &self.actor
    }

    pub fn actor_mut(&mut self) -> &mut MlpParams {
        &mut self.actor
    }

    pub fn actor_target(&self) -> Option<&MlpParams> {
        self.actor_target.as_ref()
    }

    pub fn critics(&self) -> &[Critic] {
        &self.critics
    }

    pub fn critics_mut(&mut self) -> &mut [Critic] {
        &mut self.critics
    }

    /// Current entropy temperature (SAC family).
    pub fn alpha(&self) -> f64 {
        self.log_alpha[[0, 0]].exp()
    }

    pub fn log_alpha(&self) -> f64 {
        self.log_alpha[[0, 0]]
    }

    pub fn set_log_alpha(&mut self, value: f64) {
        self.log_alpha[[0, 0]] = value;
    }

    /// Global environment-step counter `t`.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub(crate) fn advance(&mut self) {
        self.step += 1;
    }

    /// Whether the actor (and α, and the targets) update at step `t`.
    pub fn actor_due(&self, t: u64) -> bool {
        !self.config.use_delay || t.is_multiple_of(self.config.policy_delay)
    }

    /// Scalar parameters across actor, critics and all target copies.
    pub fn parameter_count(&self) -> usize {
        let mut total = self.actor.parameter_count();
        total += self.actor_target.as_ref().map_or(0, MlpParams::parameter_count);
        for c in &self.critics {
            total += c.online.parameter_count() + c.target.parameter_count();
        }
        total
    }

    /// Copy of every tensor the agent learns, in a fixed order, for
    /// trajectory comparisons.
    pub fn snapshot(&self) -> Vec<Array2<f64>> {
        let mut out: Vec<Array2<f64>> = self.actor.tensors().into_iter().cloned().collect();
        if let Some(t) = &self.actor_target {
            out.extend(t.tensors().into_iter().cloned());
        }
        for c in &self.critics {
            out.extend(c.online.tensors().into_iter().cloned());
            out.extend(c.target.tensors().into_iter().cloned());
        }
        out.push(self.log_alpha.clone());
        out
    }

    /// Action for `obs`: exploratory when `explore`, else the deterministic
    /// policy output.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R, explore: bool) -> Result<Vec<f64>> {
        match self.config.family {
            Family::Ddpg => select_action_ddpg(&self.actor, obs, self.config.exploration_noise, &self.spec, rng, explore),
            Family::Sac => select_action_sac(&self.actor, obs, &self.spec, rng, explore),
        }
    }

    /// Deterministic policy action, used for evaluation.
    pub fn greedy_action(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let out = self.actor.forward(obs)?;
        Ok(squash_to_bounds(&out, self.config.family, &self.spec))
    }

    /// Draws the critic-update randomness: policy or smoothing noise from
    /// `rng`, the mask from `mask_rng`.
    pub fn draw_critic_inputs<R: Rng + ?Sized, M: Rng + ?Sized>(
        &self,
        batch_size: usize,
        rng: &mut R,
        mask_rng: &mut M,
    ) -> Result<CriticInputs> {
        let shape = (batch_size, self.spec.action_dim);
        let noise = match self.config.family {
            Family::Ddpg if self.config.use_tps => {
                let (sd, c) = (self.config.target_noise, self.config.noise_clip);
                Array2::from_shape_fn(shape, |_| (sd * rng.sample::<f64, _>(StandardNormal)).clamp(-c, c))
            }
            Family::Ddpg => Array2::zeros(shape),
            Family::Sac => Array2::from_shape_fn(shape, |_| rng.sample::<f64, _>(StandardNormal)),
        };
        let mask = match &self.dropout {
            Some(spec) => Some(spec.sample_for(&self.critics[0].online, batch_size, mask_rng)?),
            None => None,
        };
        Ok(CriticInputs { mask, noise })
    }

    /// Smoothed target-policy actions `clip(π(s';φ') + scale·ε̃, bounds)`.
    fn smoothed_next_actions(&self, next_states: &Array2<f64>, noise: &Array2<f64>) -> Result<Array2<f64>> {
        let target = self
            .actor_target
            .as_ref()
            .ok_or_else(|| Error::Unsupported("agent has no target actor".into()))?;
        let mut a = target.forward_batch(next_states.view())?;
        if self.config.use_tps {
            a += noise;
        }
        let mut a = a * &self.scale + &self.center;
        for (j, mut col) in a.columns_mut().into_iter().enumerate() {
            let (lo, hi) = (self.spec.action_low[j], self.spec.action_high[j]);
            col.mapv_inplace(|v| v.clamp(lo, hi));
        }
        Ok(a)
    }

    /// Records the critic loss for `batch` with pre-drawn `inputs`. All
    /// online critics and their targets see the same mask.
    pub fn critic_graph(&self, batch: &Batch, inputs: &CriticInputs) -> Result<CriticGraph> {
        let n = batch.len();
        if inputs.noise.dim() != (n, self.spec.action_dim) {
            return Err(Error::config("critic noise does not match the batch"));
        }
        let mask = inputs.mask.as_ref();
        if let Some(m) = mask {
            m.check_against(&self.critics[0].online, n)?;
        }
        let mut tape = Tape::new();
        let online: Vec<BoundMlp> = self.critics.iter().map(|c| c.online.bind(&mut tape)).collect();
        let targets: Vec<BoundMlp> = self.critics.iter().map(|c| c.target.bind(&mut tape)).collect();

        let y = match self.config.family {
            Family::Ddpg => {
                let next_actions = self.smoothed_next_actions(&batch.next_states, &inputs.noise)?;
                let next = concatenate(Axis(1), &[batch.next_states.view(), next_actions.view()])
                    .expect("row counts agree");
                let x_next = tape.constant(next);
                let q_next = losses::min_q(&mut tape, &targets, x_next, mask);
                losses::td_target(&mut tape, q_next, &batch.rewards, &batch.terminals, self.config.gamma, None)
            }
            Family::Sac => {
                let actor = self.actor.bind_frozen(&mut tape);
                let s_next = tape.constant(batch.next_states.clone());
                let SquashedSample { actions, log_prob } =
                    losses::squashed_gaussian(&mut tape, &actor, s_next, &inputs.noise, &self.scale, &self.center);
                let x_next = tape.concat_cols(s_next, actions);
                let q_next = losses::min_q(&mut tape, &targets, x_next, mask);
                losses::td_target(
                    &mut tape,
                    q_next,
                    &batch.rewards,
                    &batch.terminals,
                    self.config.gamma,
                    Some((log_prob, self.alpha(), self.config.entropy_grouping)),
                )
            }
        };

        let x = concatenate(Axis(1), &[batch.states.view(), batch.actions.view()]).expect("row counts agree");
        let x = tape.constant(x);
        let mut loss = None;
        for critic in &online {
            let q = critic.forward(&mut tape, x, mask);
            let l = losses::td_loss(&mut tape, q, y);
            loss = Some(match loss {
                None => l,
                Some(acc) => tape.add(acc, l),
            });
        }
        Ok(CriticGraph {
            loss: loss.expect("at least one critic"),
            tape,
            online,
            targets,
            target_values: y,
        })
    }

    /// Records the policy loss. `noise` is the standard-normal draw for the
    /// SAC family and is ignored for DDPG.
    pub fn actor_graph(&self, batch: &Batch, noise: &Array2<f64>) -> Result<ActorGraph> {
        let mut tape = Tape::new();
        let actor = self.actor.bind(&mut tape);
        let states = tape.constant(batch.states.clone());
        let (loss, log_prob) = match self.config.family {
            Family::Ddpg => {
                let critic = self.critics[0].online.bind_frozen(&mut tape);
                let loss = losses::dpg_loss(&mut tape, &actor, &critic, states, &self.scale, &self.center);
                (loss, None)
            }
            Family::Sac => {
                if noise.dim() != (batch.len(), self.spec.action_dim) {
                    return Err(Error::config("policy noise does not match the batch"));
                }
                let critics: Vec<BoundMlp> = self.critics.iter().map(|c| c.online.bind_frozen(&mut tape)).collect();
                let sample = losses::squashed_gaussian(&mut tape, &actor, states, noise, &self.scale, &self.center);
                let loss = losses::soft_policy_loss(&mut tape, sample, &critics, states, self.alpha());
                (loss, Some(sample.log_prob))
            }
        };
        Ok(ActorGraph {
            tape,
            loss,
            actor,
            log_prob,
        })
    }

    fn clip(&self, grads: &mut ParamGrads) {
        if let Some(max) = self.config.grad_clip {
            clip_grad_norm(grads, max);
        }
    }

    fn apply_critic_graph(&mut self, graph: CriticGraph) -> Result<CriticReport> {
        let CriticGraph {
            tape,
            loss,
            online,
            target_values,
            ..
        } = graph;
        let mut grads = tape.backward(loss)?;
        for (critic, bound) in self.critics.iter_mut().zip(&online) {
            let mut g = bound.grads(&tape, &mut grads);
            if let Some(max) = self.config.grad_clip {
                clip_grad_norm(&mut g, max);
            }
            critic.optimizer.step(&mut critic.online, &g)?;
        }
        Ok(CriticReport {
            loss: tape.scalar(loss),
            mean_target: tape.value(target_values).mean().unwrap_or(0.0),
        })
    }

    fn require(&self, family: Family, what: &str) -> Result<()> {
        if self.config.family == family {
            Ok(())
        } else {
            Err(Error::Unsupported(format!("{what} on a {:?}-family agent", self.config.family)))
        }
    }

    /// Masked Bellman update for the deterministic family: one shared mask,
    /// optional smoothing and clipped double-Q, one Adam step on every critic.
    pub fn me_ddpg_critic_update<R: Rng + ?Sized, M: Rng + ?Sized>(
        &mut self,
        batch: &Batch,
        rng: &mut R,
        mask_rng: &mut M,
    ) -> Result<CriticReport> {
        self.require(Family::Ddpg, "me_ddpg_critic_update")?;
        let inputs = self.draw_critic_inputs(batch.len(), rng, mask_rng)?;
        let graph = self.critic_graph(batch, &inputs)?;
        self.apply_critic_graph(graph)
    }

    /// Soft Bellman update with a shared mask.
    pub fn me_sac_critic_update<R: Rng + ?Sized, M: Rng + ?Sized>(
        &mut self,
        batch: &Batch,
        rng: &mut R,
        mask_rng: &mut M,
    ) -> Result<CriticReport> {
        self.require(Family::Sac, "me_sac_critic_update")?;
        let inputs = self.draw_critic_inputs(batch.len(), rng, mask_rng)?;
        let graph = self.critic_graph(batch, &inputs)?;
        self.apply_critic_graph(graph)
    }

    /// Family-dispatched critic update.
    pub fn critic_update<R: Rng + ?Sized, M: Rng + ?Sized>(
        &mut self,
        batch: &Batch,
        rng: &mut R,
        mask_rng: &mut M,
    ) -> Result<CriticReport> {
        match self.config.family {
            Family::Ddpg => self.me_ddpg_critic_update(batch, rng, mask_rng),
            Family::Sac => self.me_sac_critic_update(batch, rng, mask_rng),
        }
    }

    /// Deterministic policy-gradient step through the unmasked first critic,
    /// then soft updates of every target. Returns the policy loss `−mean Q`.
    pub fn ddpg_actor_update(&mut self, batch: &Batch) -> Result<f64> {
        self.require(Family::Ddpg, "ddpg_actor_update")?;
        let ActorGraph { tape, loss, actor, .. } = self.actor_graph(batch, &Array2::zeros((0, 0)))?;
        let mut grads = tape.backward(loss)?;
        let mut g = actor.grads(&tape, &mut grads);
        self.clip(&mut g);
        self.actor_optimizer.step(&mut self.actor, &g)?;
        self.update_targets()?;
        Ok(tape.scalar(loss))
    }

    /// Reparameterized policy step, then (when learned) one temperature step
    /// on `log α`, then the critic target soft update.
    pub fn sac_actor_and_alpha_update<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> Result<ActorReport> {
        self.require(Family::Sac, "sac_actor_and_alpha_update")?;
        let noise = Array2::from_shape_fn((batch.len(), self.spec.action_dim), |_| rng.sample::<f64, _>(StandardNormal));
        let ActorGraph {
            tape,
            loss,
            actor,
            log_prob,
        } = self.actor_graph(batch, &noise)?;
        let mut grads = tape.backward(loss)?;
        let mut g = actor.grads(&tape, &mut grads);
        self.clip(&mut g);
        self.actor_optimizer.step(&mut self.actor, &g)?;

        let alpha_loss = if self.config.auto_entropy {
            let log_probs = tape.value(log_prob.expect("SAC graph carries log-probs")).clone();
            let target_entropy = self.config.target_entropy_for(self.spec.action_dim);
            let mut t = Tape::new();
            let la = t.param(self.log_alpha.clone());
            let l = losses::temperature_loss(&mut t, la, &log_probs, target_entropy);
            let g = t.backward(l)?.wrt(&t, la);
            self.alpha_optimizer.step(&mut self.log_alpha, &[g])?;
            Some(t.scalar(l))
        } else {
            None
        };
        self.update_targets()?;
        Ok(ActorReport {
            policy_loss: tape.scalar(loss),
            alpha_loss,
        })
    }

    /// Family-dispatched actor update.
    pub fn actor_update<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> Result<ActorReport> {
        match self.config.family {
            Family::Ddpg => Ok(ActorReport {
                policy_loss: self.ddpg_actor_update(batch)?,
                alpha_loss: None,
            }),
            Family::Sac => self.sac_actor_and_alpha_update(batch, rng),
        }
    }

    fn update_targets(&mut self) -> Result<()> {
        let eta = self.config.eta;
        for c in &mut self.critics {
            soft_update(&mut c.target, &c.online, eta)?;
        }
        if let Some(t) = &mut self.actor_target {
            soft_update(t, &self.actor, eta)?;
        }
        Ok(())
    }
}

fn squash_to_bounds(raw: &[f64], family: Family, spec: &EnvSpec) -> Vec<f64> {
    let scale = spec.action_scale();
    let center = spec.action_center();
    raw.iter()
        .enumerate()
        .map(|(j, &v)| {
            let t = match family {
                Family::Ddpg => v,
                Family::Sac => v.tanh(),
            };
            (center[j] + scale[j] * t).clamp(spec.action_low[j], spec.action_high[j])
        })
        .collect()
}

/// Deterministic tanh actor scaled to the bounds, plus `N(0, (σ·half-range)²)`
/// noise when `explore`, clipped back into the bounds.
pub fn select_action_ddpg<R: Rng + ?Sized>(
    actor: &MlpParams,
    obs: &[f64],
    sigma: f64,
    spec: &EnvSpec,
    rng: &mut R,
    explore: bool,
) -> Result<Vec<f64>> {
    let mut a = squash_to_bounds(&actor.forward(obs)?, Family::Ddpg, spec);
    if explore {
        let scale = spec.action_scale();
        for (j, v) in a.iter_mut().enumerate() {
            let noise: f64 = rng.sample(StandardNormal);
            *v = (*v + sigma * scale[j] * noise).clamp(spec.action_low[j], spec.action_high[j]);
        }
    }
    Ok(a)
}

/// `center + scale·tanh(μ + σ·ε)` when `explore`, `center + scale·tanh(μ)`
/// otherwise.
pub fn select_action_sac<R: Rng + ?Sized>(
    actor: &MlpParams,
    obs: &[f64],
    spec: &EnvSpec,
    rng: &mut R,
    explore: bool,
) -> Result<Vec<f64>> {
    let mut u = actor.forward(obs)?;
    if explore {
        let log_std = actor
            .log_std()
            .ok_or_else(|| Error::config("SAC actor needs a Gaussian head"))?;
        for (j, v) in u.iter_mut().enumerate() {
            let noise: f64 = rng.sample(StandardNormal);
            *v += log_std[[0, j]].exp() * noise;
        }
    }
    Ok(squash_to_bounds(&u, Family::Sac, spec))
}
