//! Differentiable building blocks: the gradient tape, ReLU networks, Adam and
//! target-network mixing.

pub mod adam;
pub mod mlp;
pub mod tape;

pub use adam::{clip_grad_norm, AdamState};
pub use mlp::{
    parameter_count, soft_update, BoundMlp, Dense, Head, HeadKind, MlpParams, ParamGrads, ParamSet,
    LOG_STD_MAX, LOG_STD_MIN,
};
pub use tape::{Gradients, Tape, Var};

/// `mlp_forward` under its operational name.
pub fn mlp_forward(params: &MlpParams, input: &[f64]) -> crate::Result<Vec<f64>> {
    params.forward(input)
}
