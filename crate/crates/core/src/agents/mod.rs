//! Actor-critic agents: DDPG-style and SAC-style skeletons, each optionally
//! running its critic through one shared dropout mask per update.

mod agent;
pub mod config;
pub mod losses;
mod trainer;

pub use agent::{
    select_action_ddpg, select_action_sac, ActorCriticState, ActorGraph, ActorReport, Agent, Critic,
    CriticGraph, CriticInputs, CriticReport,
};
pub use config::{AgentConfig, EntropyGrouping, Family, DDPG_ABLATIONS, SAC_ABLATIONS};
pub use trainer::{StepReport, Trainer};
