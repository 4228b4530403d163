use crate::dropout::{DropoutSpec, MaskSharing};
use crate::error::{Error, Result};

/// Which actor-critic skeleton an agent uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Deterministic tanh actor with a target actor.
    Ddpg,
    /// Squashed-Gaussian actor, entropy-regularized.
    Sac,
}

/// Where the entropy bonus sits in the soft Bellman target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyGrouping {
    /// `y = r + γ(1−d)(Q' − α log π)`: the soft value sits under the discount.
    UnderDiscount,
    /// `y = r + γ(1−d)Q' − α log π`.
    OutsideDiscount,
}

/// Hyper-parameters and ablation switches for one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub family: Family,
    pub gamma: f64,
    /// Target mixing coefficient η.
    pub eta: f64,
    /// Actor/target update interval d.
    pub policy_delay: u64,
    /// Exploration noise std σ, in units of the action half-range.
    pub exploration_noise: f64,
    /// Target policy smoothing std σ̃, in units of the action half-range.
    pub target_noise: f64,
    /// Clip c for the smoothing noise.
    pub noise_clip: f64,
    pub dropout_p: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub random_start_steps: u64,
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub alpha_lr: f64,
    /// `None` means `−dim(A)`.
    pub target_entropy: Option<f64>,
    pub use_dropout: bool,
    pub use_cdq: bool,
    pub use_tps: bool,
    pub use_delay: bool,
    pub auto_entropy: bool,
    /// α while `auto_entropy` is off; the starting α when it is on.
    pub fixed_alpha_value: f64,
    /// Critic activations that carry a mask; `None` masks every hidden one.
    pub masked_activations: Option<Vec<usize>>,
    pub mask_sharing: MaskSharing,
    pub entropy_grouping: EntropyGrouping,
    /// Global-norm gradient clip; off by default.
    pub grad_clip: Option<f64>,
}

impl AgentConfig {
    fn base(family: Family) -> Self {
        Self {
            family,
            gamma: 0.99,
            eta: 0.005,
            policy_delay: 2,
            exploration_noise: 0.2,
            target_noise: 0.2,
            noise_clip: 0.5,
            dropout_p: 0.1,
            batch_size: 256,
            buffer_capacity: 1_000_000,
            random_start_steps: 25_000,
            hidden: vec![256, 256],
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            alpha_lr: 1e-4,
            target_entropy: None,
            use_dropout: false,
            use_cdq: false,
            use_tps: false,
            use_delay: false,
            auto_entropy: false,
            fixed_alpha_value: 0.1,
            masked_activations: None,
            mask_sharing: MaskSharing::PerSample,
            entropy_grouping: EntropyGrouping::UnderDiscount,
            grad_clip: None,
        }
    }

    /// DDPG baseline: one critic, no smoothing, no delay.
    pub fn ddpg() -> Self {
        Self::base(Family::Ddpg)
    }

    /// DDPG with the consistent dropout critic, target policy smoothing and
    /// delayed actor updates.
    pub fn me_ddpg() -> Self {
        Self {
            use_dropout: true,
            use_tps: true,
            use_delay: true,
            ..Self::base(Family::Ddpg)
        }
    }

    /// Twin critics with clipped double-Q targets, smoothing and delay.
    pub fn td3() -> Self {
        Self {
            use_cdq: true,
            use_tps: true,
            use_delay: true,
            ..Self::base(Family::Ddpg)
        }
    }

    /// SAC baseline: twin critics, learned temperature, delayed updates.
    pub fn sac() -> Self {
        Self {
            use_cdq: true,
            use_delay: true,
            auto_entropy: true,
            ..Self::base(Family::Sac)
        }
    }

    /// SAC with a single consistent dropout critic and delayed updates.
    pub fn me_sac() -> Self {
        Self {
            use_dropout: true,
            use_delay: true,
            auto_entropy: true,
            ..Self::base(Family::Sac)
        }
    }

    /// Resolves an agent name, including the ablation variants.
    ///
    /// Accepted: `ddpg`, `me-ddpg`, `td3`, `sac`, `me-sac`, and the ablation
    /// labels `ME+CDQ`, `MED-DO`, `MED-DU`, `MED-TPS`, `MES+CDQ` (also
    /// spelled `MES+CQD`), `MES-DU`, `MES+FIXENT`. Matching ignores case.
    pub fn preset(name: &str) -> Result<Self> {
        let key = name.trim().to_ascii_lowercase();
        let mut cfg = match key.as_str() {
            "ddpg" => return Ok(Self::ddpg()),
            "td3" => return Ok(Self::td3()),
            "me-ddpg" | "med" | "me" => return Ok(Self::me_ddpg()),
            "sac" => return Ok(Self::sac()),
            "me-sac" | "mes" => return Ok(Self::me_sac()),
            k if k.starts_with("me-ddpg") => {
                return Self::me_ddpg().with_toggles_str(&k["me-ddpg".len()..], name)
            }
            k if k.starts_with("me-sac") => {
                return Self::me_sac().with_toggles_str(&k["me-sac".len()..], name)
            }
            k if k.starts_with("med") => (Self::me_ddpg(), &key[3..]),
            k if k.starts_with("mes") => (Self::me_sac(), &key[3..]),
            k if k.starts_with("me") => (Self::me_ddpg(), &key[2..]),
            _ => {
                return Err(Error::config(format!(
                    "unknown agent `{name}`; expected ddpg, me-ddpg, td3, sac, me-sac or an ablation label"
                )))
            }
        };
        let (base, rest) = (&mut cfg.0, cfg.1);
        base.clone().with_toggles_str(rest, name)
    }

    fn with_toggles_str(mut self, rest: &str, name: &str) -> Result<Self> {
        if rest.is_empty() {
            return Err(Error::config(format!("`{name}` names no toggle")));
        }
        let mut i = 0;
        let bytes = rest.as_bytes();
        while i < bytes.len() {
            let sign = bytes[i];
            if sign != b'+' && sign != b'-' {
                return Err(Error::config(format!("malformed toggle list in `{name}`")));
            }
            let end = rest[i + 1..]
                .find(['+', '-'])
                .map_or(rest.len(), |j| i + 1 + j);
            self.apply_toggle(&rest[i..end])?;
            i = end;
        }
        Ok(self)
    }

    /// Applies one `+name` / `-name` switch: `cdq`, `tps`, `du`, `do`, `fixent`.
    pub fn apply_toggle(&mut self, toggle: &str) -> Result<()> {
        let toggle = toggle.trim().to_ascii_lowercase();
        let (on, what) = match toggle.split_at_checked(1) {
            Some(("+", rest)) => (true, rest),
            Some(("-", rest)) => (false, rest),
            _ => return Err(Error::config(format!("toggle `{toggle}` must start with + or -"))),
        };
        match what {
            "cdq" | "cqd" => self.use_cdq = on,
            "tps" => self.use_tps = on,
            "du" => self.use_delay = on,
            "do" => self.use_dropout = on,
            "fixent" => self.auto_entropy = !on,
            other => return Err(Error::config(format!("unknown toggle `{other}`"))),
        }
        Ok(())
    }

    pub fn target_entropy_for(&self, action_dim: usize) -> f64 {
        self.target_entropy.unwrap_or(-(action_dim as f64))
    }

    /// Critic dropout settings, or `None` when the critic runs unmasked.
    pub fn critic_dropout(&self) -> Option<DropoutSpec> {
        if !self.use_dropout || self.dropout_p == 0.0 {
            return None;
        }
        Some(DropoutSpec {
            p: self.dropout_p,
            activations: self.masked_activations.clone(),
            sharing: self.mask_sharing,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("actor learning rate", self.actor_lr),
            ("critic learning rate", self.critic_lr),
            ("alpha learning rate", self.alpha_lr),
            ("fixed alpha", self.fixed_alpha_value),
        ];
        for (what, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{what} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config(format!("discount {} outside [0, 1]", self.gamma)));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::config(format!("eta {} outside (0, 1]", self.eta)));
        }
        if self.policy_delay == 0 {
            return Err(Error::config("policy delay must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::config(format!("dropout p {} outside [0, 1)", self.dropout_p)));
        }
        for (what, v) in [
            ("exploration noise", self.exploration_noise),
            ("target noise", self.target_noise),
            ("noise clip", self.noise_clip),
        ] {
            if !(v >= 0.0) {
                return Err(Error::config(format!("{what} must be non-negative, got {v}")));
            }
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return Err(Error::config("batch size and buffer capacity must be positive"));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::config("hidden widths must be positive"));
        }
        if let Some(clip) = self.grad_clip {
            if !(clip > 0.0) {
                return Err(Error::config("gradient clip must be positive"));
            }
        }
        Ok(())
    }
}

/// Ablation labels for the DDPG-style agent, with the preset each resolves to.
pub const DDPG_ABLATIONS: [&str; 6] = ["me-ddpg", "ME+CDQ", "MED-DO", "MED-DU", "MED-TPS", "ddpg"];
/// Ablation labels for the SAC-style agent.
pub const SAC_ABLATIONS: [&str; 5] = ["me-sac", "MES+CDQ", "MES-DU", "MES+FIXENT", "sac"];
