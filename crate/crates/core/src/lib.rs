//! Ensemble actor-critic learning with a single dropout critic.
//!
//! A critic trained under dropout behaves like an ensemble of subnetworks,
//! one per mask. Applying the *same* mask to the online critic and its target
//! inside every Bellman update keeps the two sides of the TD error consistent.
//! The crate builds DDPG- and SAC-style agents around that update, plus
//! the environments, replay store and experiment harness needed to study it.

pub mod agents;
pub mod analysis;
pub mod dropout;
pub mod envs;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod replay;

pub use error::{Error, Result};
