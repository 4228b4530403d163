use ndarray::{Array2, ArrayView2};
use rand::Rng;

use super::tape::{add_row_in_place, Gradients, Tape, Var};
use crate::dropout::DropoutMask;
use crate::error::{Error, Result};

/// Lower clamp for the state-independent log standard deviation.
pub const LOG_STD_MIN: f64 = -20.0;
/// Upper clamp for the state-independent log standard deviation.
pub const LOG_STD_MAX: f64 = 2.0;

/// One affine layer. `weight` is `out x in`, `bias` is a `1 x out` row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array2<f64>,
}

impl Dense {
    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }
}

/// Output head of a network.
#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    /// Raw affine output (critics).
    Linear,
    /// `tanh` squashing (deterministic actors), range `(-1, 1)`.
    Tanh,
    /// Gaussian mean from the affine output plus a `1 x out` log-std row
    /// that does not depend on the input (stochastic actors).
    Gaussian { log_std: Array2<f64> },
}

/// Head shape requested at construction time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    Linear,
    Tanh,
    Gaussian,
}

/// Fully connected ReLU network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layers: Vec<Dense>,
    head: Head,
}

pub type ParamGrads = Vec<Array2<f64>>;

/// Anything Adam and the target-mixing rule can treat as a flat list of tensors.
pub trait ParamSet {
    fn tensors(&self) -> Vec<&Array2<f64>>;
    fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>>;
}

impl ParamSet for Array2<f64> {
    fn tensors(&self) -> Vec<&Array2<f64>> {
        vec![self]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        vec![self]
    }
}

impl MlpParams {
    /// Random network with layer widths `sizes = [in, h1, ..., out]`.
    ///
    /// Weights are uniform in `±1/sqrt(fan_in)`, biases start at zero and a
    /// Gaussian head starts with log-std zero.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], head: HeadKind, rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::config("a network needs at least input and output widths"));
        }
        if sizes.iter().any(|&w| w == 0) {
            return Err(Error::config(format!("zero-width layer in {sizes:?}")));
        }
        let layers = sizes
            .windows(2)
            .map(|pair| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let weight =
                    Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-bound..=bound));
                Dense {
                    weight,
                    bias: Array2::zeros((1, fan_out)),
                }
            })
            .collect();
        let out = sizes[sizes.len() - 1];
        let head = match head {
            HeadKind::Linear => Head::Linear,
            HeadKind::Tanh => Head::Tanh,
            HeadKind::Gaussian => Head::Gaussian {
                log_std: Array2::zeros((1, out)),
            },
        };
        Ok(Self { layers, head })
    }

    /// Builds a network from explicit layers, checking that widths chain and
    /// every entry is finite.
    pub fn from_layers(layers: Vec<Dense>, head: Head) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("a network needs at least one layer"));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.bias.dim() != (1, layer.out_dim()) {
                return Err(Error::config(format!(
                    "layer {i}: bias shape {:?} does not match {} outputs",
                    layer.bias.dim(),
                    layer.out_dim()
                )));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[1].in_dim() != pair[0].out_dim() {
                return Err(Error::config(format!(
                    "layer {} expects {} inputs but layer {i} produces {}",
                    i + 1,
                    pair[1].in_dim(),
                    pair[0].out_dim()
                )));
            }
        }
        let out = layers[layers.len() - 1].out_dim();
        if let Head::Gaussian { log_std } = &head {
            if log_std.dim() != (1, out) {
                return Err(Error::config("log-std row must match the output width"));
            }
        }
        let params = Self { layers, head };
        if params.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return Err(Error::config("network parameters must be finite"));
        }
        Ok(params)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn head(&self) -> &Head {
        &self.head
    }

    pub fn head_kind(&self) -> HeadKind {
        match self.head {
            Head::Linear => HeadKind::Linear,
            Head::Tanh => HeadKind::Tanh,
            Head::Gaussian { .. } => HeadKind::Gaussian,
        }
    }

    /// Clamped log-std row of a Gaussian head.
    pub fn log_std(&self) -> Option<Array2<f64>> {
        match &self.head {
            Head::Gaussian { log_std } => Some(log_std.mapv(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX))),
            _ => None,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Widths of the hidden activations, in order.
    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(Dense::out_dim)
            .collect()
    }

    /// Width of activation `index`: 0 is the input, `i` the output of layer `i`.
    pub fn activation_width(&self, index: usize) -> Option<usize> {
        if index == 0 {
            Some(self.input_dim())
        } else {
            self.layers.get(index - 1).map(Dense::out_dim)
        }
    }

    /// `[in, h1, ..., out]`.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Dense::out_dim))
            .collect()
    }

    pub fn same_architecture(&self, other: &MlpParams) -> bool {
        self.sizes() == other.sizes() && self.head_kind() == other.head_kind()
    }

    /// Scalar parameter count, including a Gaussian head's log-std row.
    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::config(e.to_string()))?;
        Ok(self.forward_batch(x)?.into_raw_vec_and_offset().0)
    }

    /// Batched forward pass, one sample per row.
    pub fn forward_batch(&self, input: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.forward_with(input, None)
    }

    pub(crate) fn forward_with(
        &self,
        input: ArrayView2<'_, f64>,
        mask: Option<&DropoutMask>,
    ) -> Result<Array2<f64>> {
        if input.ncols() != self.input_dim() {
            return Err(Error::config(format!(
                "input has {} features, network expects {}",
                input.ncols(),
                self.input_dim()
            )));
        }
        if let Some(mask) = mask {
            mask.check_against(self, input.nrows())?;
        }
        let last = self.layers.len() - 1;
        let mut h = input.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            if let Some(scaled) = mask.and_then(|m| m.scaled_for(i)) {
                h = h * &scaled;
            }
            h = h.dot(&layer.weight.t());
            add_row_in_place(&mut h, &layer.bias);
            if i < last {
                h.mapv_inplace(|v| v.max(0.0));
            }
        }
        if let Head::Tanh = self.head {
            h.mapv_inplace(f64::tanh);
        }
        Ok(h)
    }

    /// Records the parameters on `tape` as differentiable leaves.
    pub fn bind(&self, tape: &mut Tape) -> BoundMlp {
        self.bind_as(tape, true)
    }

    /// Records the parameters as constants: the network participates in the
    /// graph but receives no gradient.
    pub fn bind_frozen(&self, tape: &mut Tape) -> BoundMlp {
        self.bind_as(tape, false)
    }

    fn bind_as(&self, tape: &mut Tape, trainable: bool) -> BoundMlp {
        let mut leaf = |t: &Array2<f64>| {
            if trainable {
                tape.param(t.clone())
            } else {
                tape.constant(t.clone())
            }
        };
        let mut weights = Vec::with_capacity(self.layers.len());
        let mut biases = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            weights.push(leaf(&layer.weight));
            biases.push(leaf(&layer.bias));
        }
        let log_std = match &self.head {
            Head::Gaussian { log_std } => Some(leaf(log_std)),
            _ => None,
        };
        BoundMlp {
            weights,
            biases,
            log_std,
            head: self.head_kind(),
            sizes: self.sizes(),
        }
    }
}

impl ParamSet for MlpParams {
    /// Canonical order: `w1, b1, w2, b2, ..., [log_std]`.
    fn tensors(&self) -> Vec<&Array2<f64>> {
        let mut out: Vec<&Array2<f64>> = self
            .layers
            .iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect();
        if let Head::Gaussian { log_std } = &self.head {
            out.push(log_std);
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out: Vec<&mut Array2<f64>> = self
            .layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect();
        if let Head::Gaussian { log_std } = &mut self.head {
            out.push(log_std);
        }
        out
    }
}

/// A network whose parameters live on a [`Tape`].
#[derive(Debug, Clone)]
pub struct BoundMlp {
    weights: Vec<Var>,
    biases: Vec<Var>,
    log_std: Option<Var>,
    head: HeadKind,
    sizes: Vec<usize>,
}

impl BoundMlp {
    /// Forward pass recorded on the tape. For a Gaussian head this returns the
    /// mean; see [`BoundMlp::log_std`] for the spread.
    pub fn forward(&self, tape: &mut Tape, input: Var, mask: Option<&DropoutMask>) -> Var {
        let last = self.weights.len() - 1;
        let mut h = input;
        for i in 0..self.weights.len() {
            if let Some(scaled) = mask.and_then(|m| m.scaled_for(i)) {
                h = tape.mul_const(h, scaled);
            }
            h = tape.affine(h, self.weights[i], self.biases[i]);
            if i < last {
                h = tape.relu(h);
            }
        }
        if self.head == HeadKind::Tanh {
            h = tape.tanh(h);
        }
        h
    }

    /// Clamped log-std row (`1 x out`) of a Gaussian head.
    pub fn log_std(&self, tape: &mut Tape) -> Option<Var> {
        self.log_std
            .map(|raw| tape.clamp(raw, LOG_STD_MIN, LOG_STD_MAX))
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Leaves in canonical order (matches [`ParamSet::tensors`]).
    pub fn leaves(&self) -> Vec<Var> {
        let mut out: Vec<Var> = self
            .weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(&w, &b)| [w, b])
            .collect();
        out.extend(self.log_std);
        out
    }

    pub fn grads(&self, tape: &Tape, grads: &mut Gradients) -> ParamGrads {
        self.leaves()
            .into_iter()
            .map(|v| grads.take(tape, v))
            .collect()
    }
}

/// Total scalar parameters across `nets`.
pub fn parameter_count(nets: &[&MlpParams]) -> usize {
    nets.iter().map(|n| n.parameter_count()).sum()
}

/// `target ← η·online + (1 − η)·target`, for every parameter.
pub fn soft_update<P: ParamSet>(target: &mut P, online: &P, eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::config(format!("mixing coefficient {eta} outside (0, 1]")));
    }
    let online = online.tensors();
    let mut target = target.tensors_mut();
    if online.len() != target.len()
        || online.iter().zip(target.iter()).any(|(o, t)| o.dim() != t.dim())
    {
        return Err(Error::config("soft update between differently shaped networks"));
    }
    let keep = 1.0 - eta;
    for (t, o) in target.iter_mut().zip(online) {
        ndarray::Zip::from(&mut **t)
            .and(o)
            .for_each(|t, &o| *t = eta * o + keep * *t);
    }
    Ok(())
}
