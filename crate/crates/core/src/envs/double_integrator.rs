use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_running, check_state, Env, EnvSpec, LqrProblem, StepOutcome};
use crate::error::Result;

const DT: f64 = 0.05;
const MAX_FORCE: f64 = 1.0;
const CONTROL_COST: f64 = 0.1;
const HORIZON: usize = 200;

/// Unit-mass point on a line: `x' = x + dt·v`, `v' = v + dt·u`, reward
/// `−(x² + v² + 0.1u²)` at the pre-step state. Observation `[x, v]`.
#[derive(Debug, Clone)]
pub struct DoubleIntegrator {
    spec: EnvSpec,
    position: f64,
    velocity: f64,
    steps: usize,
    rng: ChaCha8Rng,
}

impl DoubleIntegrator {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "double-integrator",
                state_dim: 2,
                action_dim: 1,
                action_low: vec![-MAX_FORCE],
                action_high: vec![MAX_FORCE],
                horizon: HORIZON,
                reward_note: "non-positive; |x| <= 1 + 10.5 and |v| <= 11 over one episode",
            },
            position: 0.0,
            velocity: 0.0,
            steps: 0,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }
}

impl Default for DoubleIntegrator {
    fn default() -> Self {
        Self::new()
    }
}

impl Env for DoubleIntegrator {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn seed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    fn reset(&mut self) -> Vec<f64> {
        self.position = self.rng.random_range(-1.0..=1.0);
        self.velocity = self.rng.random_range(-1.0..=1.0);
        self.steps = 0;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        let u = self.spec.clip_action(action)?[0];
        check_running(self.spec.name, self.steps, self.spec.horizon)?;
        let (x, v) = (self.position, self.velocity);
        let reward = -(x * x + v * v + CONTROL_COST * u * u);
        self.position = x + DT * v;
        self.velocity = v + DT * u;
        self.steps += 1;
        Ok(StepOutcome {
            observation: self.observation(),
            reward,
            done: self.steps == self.spec.horizon,
            terminal: false,
        })
    }

    fn state(&self) -> Vec<f64> {
        vec![self.position, self.velocity]
    }

    fn set_state(&mut self, state: &[f64]) -> Result<()> {
        check_state(self.spec.name, state, 2)?;
        self.position = state[0];
        self.velocity = state[1];
        self.steps = 0;
        Ok(())
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.position, self.velocity]
    }

    fn steps_taken(&self) -> usize {
        self.steps
    }

    fn lqr(&self) -> Option<LqrProblem> {
        Some(LqrProblem {
            a: DMatrix::from_row_slice(2, 2, &[1.0, DT, 0.0, 1.0]),
            b: DMatrix::from_row_slice(2, 1, &[0.0, DT]),
            q: DMatrix::identity(2, 2),
            r: DMatrix::from_element(1, 1, CONTROL_COST),
            // Uniform on [-1, 1]² has second moment diag(1/3, 1/3).
            initial_second_moment: DMatrix::from_diagonal_element(2, 2, 1.0 / 3.0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_is_free() {
        let mut env = DoubleIntegrator::new();
        env.set_state(&[0.0, 0.0]).unwrap();
        let out = env.step(&[0.0]).unwrap();
        assert_eq!(out.reward, 0.0);
        assert_eq!(out.observation, vec![0.0, 0.0]);
    }

    #[test]
    fn euler_update_and_reward() {
        let mut env = DoubleIntegrator::new();
        env.set_state(&[0.5, -0.4]).unwrap();
        let out = env.step(&[0.8]).unwrap();
        assert_eq!(out.reward, -(0.25 + 0.16 + 0.1 * 0.64));
        assert_eq!(out.observation, vec![0.5 + DT * -0.4, -0.4 + DT * 0.8]);
    }

    #[test]
    fn reset_bounds() {
        let mut env = DoubleIntegrator::new();
        env.seed(9);
        let mut sq = [0.0; 2];
        let n = 10_000;
        for _ in 0..n {
            let obs = env.reset();
            assert!(obs.iter().all(|v| (-1.0..=1.0).contains(v)));
            sq[0] += obs[0] * obs[0] / n as f64;
            sq[1] += obs[1] * obs[1] / n as f64;
        }
        // E[x²] = 1/3 with sd ≈ 0.003 at this sample size.
        assert!((sq[0] - 1.0 / 3.0).abs() < 0.012);
        assert!((sq[1] - 1.0 / 3.0).abs() < 0.012);
    }
}
