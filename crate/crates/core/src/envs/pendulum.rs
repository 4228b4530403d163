use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_running, check_state, Env, EnvSpec, StepOutcome};
use crate::error::Result;

const GRAVITY: f64 = 10.0;
const MASS: f64 = 1.0;
const LENGTH: f64 = 1.0;
const DT: f64 = 0.05;
const MAX_TORQUE: f64 = 2.0;
const HORIZON: usize = 200;

/// Torque-limited pendulum swing-up. `θ = 0` is upright, `θ = π` hangs down.
///
/// Observation `[cos θ, sin θ, θ̇]`; reward `−(wrap(θ)² + 0.1 θ̇² + 0.001 u²)`
/// evaluated at the pre-step state.
#[derive(Debug, Clone)]
pub struct Pendulum {
    spec: EnvSpec,
    theta: f64,
    theta_dot: f64,
    steps: usize,
    rng: ChaCha8Rng,
}

impl Pendulum {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "pendulum",
                state_dim: 3,
                action_dim: 1,
                action_low: vec![-MAX_TORQUE],
                action_high: vec![MAX_TORQUE],
                horizon: HORIZON,
                reward_note: "in [-(pi^2 + 0.1 w^2 + 0.004), 0]; |w| stays below 121 over one episode",
            },
            theta: PI,
            theta_dot: 0.0,
            steps: 0,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }
}

impl Default for Pendulum {
    fn default() -> Self {
        Self::new()
    }
}

/// Angle wrapped into `[-π, π)`.
pub(crate) fn wrap_angle(theta: f64) -> f64 {
    (theta + PI).rem_euclid(2.0 * PI) - PI
}

impl Env for Pendulum {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn seed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    fn reset(&mut self) -> Vec<f64> {
        self.theta = self.rng.random_range(-PI..=PI);
        self.theta_dot = self.rng.random_range(-1.0..=1.0);
        self.steps = 0;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        let u = self.spec.clip_action(action)?[0];
        check_running(self.spec.name, self.steps, self.spec.horizon)?;
        let angle = wrap_angle(self.theta);
        let reward = -(angle * angle + 0.1 * self.theta_dot * self.theta_dot + 0.001 * u * u);

        let accel = GRAVITY / LENGTH * self.theta.sin() + u / (MASS * LENGTH * LENGTH);
        self.theta_dot += DT * accel;
        self.theta += DT * self.theta_dot;
        self.steps += 1;

        Ok(StepOutcome {
            observation: self.observation(),
            reward,
            done: self.steps == self.spec.horizon,
            terminal: false,
        })
    }

    fn state(&self) -> Vec<f64> {
        vec![self.theta, self.theta_dot]
    }

    fn set_state(&mut self, state: &[f64]) -> Result<()> {
        check_state(self.spec.name, state, 2)?;
        self.theta = state[0];
        self.theta_dot = state[1];
        self.steps = 0;
        Ok(())
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }

    fn steps_taken(&self) -> usize {
        self.steps
    }
}
