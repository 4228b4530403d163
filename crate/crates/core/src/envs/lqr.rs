//! Discounted discrete-time LQR, used as an analytic yardstick for the
//! double integrator.

use nalgebra::DMatrix;

use super::Env;
use crate::error::{Error, Result};

/// Dynamics `x' = A x + B u` with per-step cost `xᵀQx + uᵀRu` (reward is its
/// negation) and reset distribution with second moment `E[x₀x₀ᵀ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrProblem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub initial_second_moment: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    /// Cost-to-go matrix: the optimal value from `x` is `−xᵀPx`.
    pub p: DMatrix<f64>,
    /// Optimal feedback `u = −K x`.
    pub gain: DMatrix<f64>,
    pub iterations: usize,
}

impl LqrProblem {
    fn gain(&self, gamma: f64, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let bt = self.b.transpose();
        let s = &self.r + (&bt * p * &self.b) * gamma;
        let s_inv = s
            .try_inverse()
            .ok_or_else(|| Error::Numeric("R + γBᵀPB is singular".into()))?;
        Ok(s_inv * &bt * p * &self.a * gamma)
    }

    /// One application of the discounted Riccati map.
    pub fn riccati_map(&self, gamma: f64, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let at = self.a.transpose();
        let k = self.gain(gamma, p)?;
        Ok(&self.q + (&at * p * &self.a) * gamma - (&at * p * &self.b * k) * gamma)
    }

    /// Expected optimal return `−E[x₀ᵀPx₀] = −tr(P·E[x₀x₀ᵀ])`.
    pub fn expected_return(&self, p: &DMatrix<f64>) -> f64 {
        -(p * &self.initial_second_moment).trace()
    }
}

/// Fixed point of the discounted Riccati recursion, iterated from `P = 0`
/// until successive iterates differ by less than `tol` entrywise.
pub fn solve_discounted_riccati(problem: &LqrProblem, gamma: f64, tol: f64) -> Result<RiccatiSolution> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::config(format!("discount {gamma} outside (0, 1]")));
    }
    let n = problem.a.nrows();
    let mut p = DMatrix::zeros(n, n);
    for iterations in 1..=1_000_000 {
        let next = problem.riccati_map(gamma, &p)?;
        let change = (&next - &p).amax();
        p = next;
        if !change.is_finite() {
            return Err(Error::Numeric("Riccati iteration diverged".into()));
        }
        if change < tol {
            let gain = problem.gain(gamma, &p)?;
            return Ok(RiccatiSolution {
                p,
                gain,
                iterations,
            });
        }
    }
    Err(Error::Numeric("Riccati iteration did not converge".into()))
}

/// Largest entrywise gap between `P` and one Riccati update of it.
pub fn riccati_residual(problem: &LqrProblem, gamma: f64, p: &DMatrix<f64>) -> Result<f64> {
    Ok((problem.riccati_map(gamma, p)? - p).amax())
}

/// Expected discounted return of the unconstrained LQR-optimal policy from
/// the environment's reset distribution.
///
/// The optimal policy ignores action bounds, so for a bounded environment
/// this is an upper bound on what any admissible policy can collect.
pub fn optimal_lqr_return(env: &dyn Env, gamma: f64) -> Result<f64> {
    let problem = env.lqr().ok_or_else(|| {
        Error::Unsupported(format!("{} is not a linear-quadratic environment", env.spec().name))
    })?;
    let solution = solve_discounted_riccati(&problem, gamma, 1e-10)?;
    Ok(problem.expected_return(&solution.p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{DoubleIntegrator, Pendulum};

    #[test]
    fn fixed_point_has_small_residual() {
        let problem = DoubleIntegrator::new().lqr().unwrap();
        for gamma in [0.9, 0.99, 1.0] {
            let sol = solve_discounted_riccati(&problem, gamma, 1e-10).unwrap();
            assert!(riccati_residual(&problem, gamma, &sol.p).unwrap() < 1e-9);
            assert!(sol.p.symmetric_eigenvalues().iter().all(|&e| e > 0.0));
        }
    }

    #[test]
    fn zero_state_has_zero_value() {
        let problem = DoubleIntegrator::new().lqr().unwrap();
        let sol = solve_discounted_riccati(&problem, 0.99, 1e-10).unwrap();
        let x = nalgebra::DVector::zeros(2);
        assert_eq!((x.transpose() * &sol.p * &x)[(0, 0)], 0.0);

        let at_origin = LqrProblem {
            initial_second_moment: DMatrix::zeros(2, 2),
            ..problem
        };
        assert_eq!(at_origin.expected_return(&sol.p), 0.0);
    }

    #[test]
    fn value_matches_simulated_closed_loop() {
        // Roll the unconstrained closed loop long enough for γ^t to vanish.
        let problem = DoubleIntegrator::new().lqr().unwrap();
        let gamma = 0.99;
        let sol = solve_discounted_riccati(&problem, gamma, 1e-10).unwrap();
        let mut x = nalgebra::DVector::from_vec(vec![0.7, -0.3]);
        let x0 = x.clone();
        let mut total = 0.0;
        let mut discount = 1.0;
        for _ in 0..5000 {
            let u = -(&sol.gain * &x);
            let cost = (x.transpose() * &problem.q * &x)[(0, 0)] + (u.transpose() * &problem.r * &u)[(0, 0)];
            total -= discount * cost;
            discount *= gamma;
            x = &problem.a * &x + &problem.b * &u;
        }
        let predicted = -(x0.transpose() * &sol.p * &x0)[(0, 0)];
        assert!((total - predicted).abs() < 1e-8, "{total} vs {predicted}");
    }

    #[test]
    fn non_lqr_env_is_unsupported() {
        assert!(matches!(
            optimal_lqr_return(&Pendulum::new(), 0.99),
            Err(Error::Unsupported(_))
        ));
    }
}
