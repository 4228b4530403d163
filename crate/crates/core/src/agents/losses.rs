//! Loss graphs shared by the agents, built on a [`Tape`] so that the same
//! code drives training and finite-difference checks.

use std::f64::consts::{LN_2, PI};

use ndarray::{Array1, Array2, Axis};

use super::config::EntropyGrouping;
use crate::dropout::DropoutMask;
use crate::numerics::{BoundMlp, Tape, Var};

/// Column vector `n x 1` from a slice of per-sample values.
pub fn column(values: &Array1<f64>) -> Array2<f64> {
    values.clone().insert_axis(Axis(1))
}

/// Maps a tanh-range action to environment units: `center + scale·a`.
pub fn to_env_units(tape: &mut Tape, normalized: Var, scale: &Array2<f64>, center: &Array2<f64>) -> Var {
    let scaled = tape.mul_const(normalized, scale.clone());
    tape.add_const(scaled, center)
}

/// Evaluates every critic in `critics` on `inputs` under the same `mask` and
/// returns their elementwise minimum (the single value when there is one).
pub fn min_q(tape: &mut Tape, critics: &[BoundMlp], inputs: Var, mask: Option<&DropoutMask>) -> Var {
    let mut q = critics[0].forward(tape, inputs, mask);
    for critic in &critics[1..] {
        let other = critic.forward(tape, inputs, mask);
        q = tape.minimum(q, other);
    }
    q
}

/// Bellman target `r + γ(1−d)·q_next`, optionally with the entropy bonus
/// `−α·log π`. Gradient never flows through the result.
pub fn td_target(
    tape: &mut Tape,
    q_next: Var,
    rewards: &Array1<f64>,
    terminals: &Array1<f64>,
    gamma: f64,
    entropy: Option<(Var, f64, EntropyGrouping)>,
) -> Var {
    let discount = column(&terminals.mapv(|d| gamma * (1.0 - d)));
    let mut soft = tape.detach(q_next);
    let mut outside = None;
    if let Some((log_prob, alpha, grouping)) = entropy {
        let bonus = tape.detach(log_prob);
        let bonus = tape.scale(bonus, -alpha);
        match grouping {
            EntropyGrouping::UnderDiscount => soft = tape.add(soft, bonus),
            EntropyGrouping::OutsideDiscount => outside = Some(bonus),
        }
    }
    let discounted = tape.mul_const(soft, discount);
    let mut y = tape.add_const(discounted, &column(rewards));
    if let Some(bonus) = outside {
        y = tape.add(y, bonus);
    }
    tape.detach(y)
}

/// `mean ½(q − y)²`.
pub fn td_loss(tape: &mut Tape, q: Var, y: Var) -> Var {
    let diff = tape.sub(q, y);
    let sq = tape.square(diff);
    let m = tape.mean(sq);
    tape.scale(m, 0.5)
}

/// Deterministic policy objective `−mean Q(s, π(s))` through an unmasked critic.
pub fn dpg_loss(
    tape: &mut Tape,
    actor: &BoundMlp,
    critic: &BoundMlp,
    states: Var,
    scale: &Array2<f64>,
    center: &Array2<f64>,
) -> Var {
    let a = actor.forward(tape, states, None);
    let a = to_env_units(tape, a, scale, center);
    let x = tape.concat_cols(states, a);
    let q = critic.forward(tape, x, None);
    let m = tape.mean(q);
    tape.scale(m, -1.0)
}

/// Reparameterized draw from a tanh-squashed Gaussian policy.
#[derive(Debug, Clone, Copy)]
pub struct SquashedSample {
    /// Actions in environment units, `n x dim(A)`.
    pub actions: Var,
    /// Log-density of `actions`, `n x 1`.
    pub log_prob: Var,
}

/// `a = center + scale·tanh(μ(s) + σ·ε)` with its log-density, including
/// the tanh and affine change-of-variables terms.
pub fn squashed_gaussian(
    tape: &mut Tape,
    actor: &BoundMlp,
    states: Var,
    noise: &Array2<f64>,
    scale: &Array2<f64>,
    center: &Array2<f64>,
) -> SquashedSample {
    let n = noise.nrows();
    let mean = actor.forward(tape, states, None);
    let log_std = actor.log_std(tape).expect("squashed_gaussian needs a Gaussian head");
    let log_std = tape.broadcast_rows(log_std, n);
    let std = tape.exp(log_std);
    let spread = tape.mul_const(std, noise.clone());
    let u = tape.add(mean, spread);
    let squashed = tape.tanh(u);
    let actions = to_env_units(tape, squashed, scale, center);

    // log(1 − tanh²u) = 2(ln 2 − u − softplus(−2u)), stable for large |u|.
    let neg2u = tape.scale(u, -2.0);
    let sp = tape.softplus(neg2u);
    let u_sp = tape.add(u, sp);
    let log_jac = tape.scale(u_sp, -2.0);
    let log_jac = tape.add_scalar(log_jac, 2.0 * LN_2);

    let scale_log = scale.mapv(f64::ln);
    let constant = noise.mapv(|e| -0.5 * e * e - 0.5 * (2.0 * PI).ln()) - &scale_log;
    let neg_log_std = tape.scale(log_std, -1.0);
    let gauss = tape.add_const(neg_log_std, &constant);
    let per_dim = tape.sub(gauss, log_jac);
    let log_prob = tape.sum_cols(per_dim);
    SquashedSample { actions, log_prob }
}

/// Soft policy objective `mean(α·log π(ã|s) − Q(s, ã))`, with the minimum
/// over `critics` taken unmasked.
pub fn soft_policy_loss(
    tape: &mut Tape,
    sample: SquashedSample,
    critics: &[BoundMlp],
    states: Var,
    alpha: f64,
) -> Var {
    let x = tape.concat_cols(states, sample.actions);
    let q = min_q(tape, critics, x, None);
    let weighted = tape.scale(sample.log_prob, alpha);
    let diff = tape.sub(weighted, q);
    tape.mean(diff)
}

/// Temperature objective `mean(−α·(log π + ℋ))` with `α = exp(log_alpha)`;
/// the log-probabilities enter as constants.
pub fn temperature_loss(tape: &mut Tape, log_alpha: Var, log_probs: &Array2<f64>, target_entropy: f64) -> Var {
    let alpha = tape.exp(log_alpha);
    let shifted = tape.constant(log_probs.mapv(|l| l + target_entropy));
    let prod = tape.mul_scalar_var(shifted, alpha);
    let m = tape.mean(prod);
    tape.scale(m, -1.0)
}
