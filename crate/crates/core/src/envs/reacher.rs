use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_running, check_state, Env, EnvSpec, StepOutcome};
use crate::error::Result;

const DT: f64 = 0.05;
const HORIZON: usize = 200;

/// Point in the plane steered by a velocity command toward a random goal.
///
/// State `[px, py, gx, gy]`; observation `[px, py, gx − px, gy − py]`;
/// reward is minus the distance to the goal after the move.
#[derive(Debug, Clone)]
pub struct Reacher2d {
    spec: EnvSpec,
    position: [f64; 2],
    goal: [f64; 2],
    steps: usize,
    rng: ChaCha8Rng,
}

impl Reacher2d {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "reacher2d",
                state_dim: 4,
                action_dim: 2,
                action_low: vec![-1.0, -1.0],
                action_high: vec![1.0, 1.0],
                horizon: HORIZON,
                reward_note: "in [-(2*sqrt(2) + 200*dt*sqrt(2)), 0]",
            },
            position: [0.0; 2],
            goal: [0.0; 2],
            steps: 0,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }

    fn distance(&self) -> f64 {
        (self.goal[0] - self.position[0]).hypot(self.goal[1] - self.position[1])
    }
}

impl Default for Reacher2d {
    fn default() -> Self {
        Self::new()
    }
}

impl Env for Reacher2d {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn seed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    fn reset(&mut self) -> Vec<f64> {
        for i in 0..2 {
            self.position[i] = self.rng.random_range(-1.0..=1.0);
        }
        for i in 0..2 {
            self.goal[i] = self.rng.random_range(-1.0..=1.0);
        }
        self.steps = 0;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        let u = self.spec.clip_action(action)?;
        check_running(self.spec.name, self.steps, self.spec.horizon)?;
        self.position[0] += DT * u[0];
        self.position[1] += DT * u[1];
        self.steps += 1;
        Ok(StepOutcome {
            observation: self.observation(),
            reward: -self.distance(),
            done: self.steps == self.spec.horizon,
            terminal: false,
        })
    }

    fn state(&self) -> Vec<f64> {
        vec![self.position[0], self.position[1], self.goal[0], self.goal[1]]
    }

    fn set_state(&mut self, state: &[f64]) -> Result<()> {
        check_state(self.spec.name, state, 4)?;
        self.position = [state[0], state[1]];
        self.goal = [state[2], state[3]];
        self.steps = 0;
        Ok(())
    }

    fn observation(&self) -> Vec<f64> {
        vec![
            self.position[0],
            self.position[1],
            self.goal[0] - self.position[0],
            self.goal[1] - self.position[1],
        ]
    }

    fn steps_taken(&self) -> usize {
        self.steps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heading_at_goal_improves_until_overshoot() {
        let mut env = Reacher2d::new();
        env.seed(5);
        for _ in 0..20 {
            let obs = env.reset();
            let mut prev = -env.distance();
            let mut overshoot = false;
            for _ in 0..env.spec.horizon {
                let obs_now = env.observation();
                let (dx, dy) = (obs_now[2], obs_now[3]);
                let norm = dx.hypot(dy);
                let out = env.step(&[dx / norm, dy / norm]).unwrap();
                if norm > DT {
                    assert!(out.reward > prev, "no progress at distance {norm}");
                } else {
                    overshoot = true;
                    break;
                }
                prev = out.reward;
            }
            assert!(overshoot, "goal never reached from {obs:?}");
        }
    }

    #[test]
    fn observation_layout() {
        let mut env = Reacher2d::new();
        env.set_state(&[0.1, 0.2, -0.3, 0.9]).unwrap();
        let obs = env.observation();
        assert_eq!(obs[..2], [0.1, 0.2]);
        assert!((obs[2] + 0.4).abs() < 1e-15 && (obs[3] - 0.7).abs() < 1e-15);
    }
}
