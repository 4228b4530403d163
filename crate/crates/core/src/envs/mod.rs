//! Seeded continuous-control environments.
//!
//! All environments run for a fixed horizon with no early termination, so
//! `done` is always a time limit and never a terminal state.

mod double_integrator;
pub mod lqr;
mod pendulum;
mod reacher;

pub use double_integrator::DoubleIntegrator;
pub use lqr::{optimal_lqr_return, riccati_residual, solve_discounted_riccati, LqrProblem, RiccatiSolution};
pub use pendulum::Pendulum;
pub use reacher::Reacher2d;

use crate::error::{Error, Result};

/// Names accepted by [`make_env`].
pub const ENV_NAMES: [&str; 3] = ["pendulum", "double-integrator", "reacher2d"];

/// Static description of an environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub name: &'static str,
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub horizon: usize,
    /// Per-step reward bounds, in words.
    pub reward_note: &'static str,
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        if self.action_low.len() != self.action_dim || self.action_high.len() != self.action_dim {
            return Err(Error::config("action bounds do not match the action dimension"));
        }
        if self
            .action_low
            .iter()
            .zip(&self.action_high)
            .any(|(lo, hi)| !(lo < hi))
        {
            return Err(Error::config("action bounds need low < high"));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon must be at least one step"));
        }
        Ok(())
    }

    /// Clips `action` into the box, rejecting NaN.
    pub fn clip_action(&self, action: &[f64]) -> Result<Vec<f64>> {
        if action.len() != self.action_dim {
            return Err(Error::config(format!(
                "{}: action has {} components, expected {}",
                self.name,
                action.len(),
                self.action_dim
            )));
        }
        if action.iter().any(|a| a.is_nan()) {
            return Err(Error::Numeric(format!("{}: NaN action {action:?}", self.name)));
        }
        Ok(action
            .iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .map(|(&a, (&lo, &hi))| a.clamp(lo, hi))
            .collect())
    }

    /// Half-width of the action box per dimension.
    pub fn action_scale(&self) -> Vec<f64> {
        self.action_low
            .iter()
            .zip(&self.action_high)
            .map(|(lo, hi)| 0.5 * (hi - lo))
            .collect()
    }

    /// Centre of the action box per dimension.
    pub fn action_center(&self) -> Vec<f64> {
        self.action_low
            .iter()
            .zip(&self.action_high)
            .map(|(lo, hi)| 0.5 * (hi + lo))
            .collect()
    }
}

/// Result of one environment transition.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub reward: f64,
    /// Episode over (the horizon was reached).
    pub done: bool,
    /// A genuine terminal state that should stop bootstrapping.
    pub terminal: bool,
}

pub trait Env: Send {
    fn spec(&self) -> &EnvSpec;

    /// Reseeds the reset-noise generator.
    fn seed(&mut self, seed: u64);

    /// Draws an initial state from the reset distribution and zeroes the step
    /// counter.
    fn reset(&mut self) -> Vec<f64>;

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome>;

    /// Current physical state.
    fn state(&self) -> Vec<f64>;

    /// Overwrites the physical state and zeroes the step counter.
    fn set_state(&mut self, state: &[f64]) -> Result<()>;

    fn observation(&self) -> Vec<f64>;

    fn steps_taken(&self) -> usize;

    /// Linear-quadratic description, for environments that have one.
    fn lqr(&self) -> Option<LqrProblem> {
        None
    }

    fn reset_seeded(&mut self, seed: u64) -> Vec<f64> {
        self.seed(seed);
        self.reset()
    }
}

/// Builds an environment by registry name.
pub fn make_env(name: &str) -> Result<Box<dyn Env>> {
    match name {
        "pendulum" => Ok(Box::new(Pendulum::new())),
        "double-integrator" => Ok(Box::new(DoubleIntegrator::new())),
        "reacher2d" => Ok(Box::new(Reacher2d::new())),
        other => Err(Error::config(format!(
            "unknown environment `{other}`; expected one of {ENV_NAMES:?}"
        ))),
    }
}

pub(crate) fn check_state(name: &str, state: &[f64], dim: usize) -> Result<()> {
    if state.len() != dim {
        return Err(Error::config(format!(
            "{name}: state has {} components, expected {dim}",
            state.len()
        )));
    }
    if state.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("{name}: non-finite state {state:?}")));
    }
    Ok(())
}

pub(crate) fn check_running(name: &str, steps: usize, horizon: usize) -> Result<()> {
    if steps >= horizon {
        return Err(Error::NotReady(format!(
            "{name}: episode reached its horizon of {horizon}; reset first"
        )));
    }
    Ok(())
}
