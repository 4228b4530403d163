use ndarray::{Array2, Zip};

use super::mlp::ParamSet;
use crate::error::{Error, Result};

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first: Vec<Array2<f64>>,
    second: Vec<Array2<f64>>,
    step: u64,
}

impl AdamState {
    /// Zeroed moments shaped like `params`, with β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn new<P: ParamSet + ?Sized>(params: &P, lr: f64) -> Self {
        let zeros: Vec<Array2<f64>> = params
            .tensors()
            .iter()
            .map(|t| Array2::zeros(t.dim()))
            .collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Array2<f64>] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Array2<f64>] {
        &self.second
    }

    /// One descent step on `params` along `grads`.
    pub fn step<P: ParamSet + ?Sized>(&mut self, params: &mut P, grads: &[Array2<f64>]) -> Result<()> {
        let mut tensors = params.tensors_mut();
        if tensors.len() != grads.len() || tensors.len() != self.first.len() {
            return Err(Error::config(format!(
                "adam: {} parameter tensors, {} gradients, {} moment slots",
                tensors.len(),
                grads.len(),
                self.first.len()
            )));
        }
        for (i, (t, g)) in tensors.iter().zip(grads).enumerate() {
            if t.dim() != g.dim() || t.dim() != self.first[i].dim() {
                return Err(Error::config(format!(
                    "adam: tensor {i} has shape {:?}, gradient {:?}",
                    t.dim(),
                    g.dim()
                )));
            }
        }

        self.step += 1;
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.eps, self.lr);
        let correction1 = 1.0 - b1.powf(self.step as f64);
        let correction2 = 1.0 - b2.powf(self.step as f64);
        for ((param, grad), (m, v)) in tensors
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            Zip::from(&mut **param)
                .and(grad)
                .and(m)
                .and(v)
                .for_each(|p, &g, m, v| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    let m_hat = *m / correction1;
                    let v_hat = *v / correction2;
                    *p -= lr * m_hat / (v_hat.sqrt() + eps);
                });
        }
        Ok(())
    }
}

/// Rescales `grads` in place so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [Array2<f64>], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .map(|g| g.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let factor = max_norm / norm;
        for g in grads.iter_mut() {
            g.mapv_inplace(|v| v * factor);
        }
    }
    norm
}
