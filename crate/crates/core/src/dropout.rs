//! Bernoulli unit masks with inverted scaling, and the paired forward pass
//! that feeds one mask to a critic and its target.
//!
//! Masks are indexed by *activation*: 0 is the network input and `i` is the
//! output of layer `i`. A mask on activation `i` multiplies that activation
//! by `m / (1 - p)` before it enters layer `i + 1`. The network output is
//! never masked.

use ndarray::{Array2, ArrayView2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::MlpParams;

/// How mask rows relate across a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskSharing {
    /// Every sample gets its own mask row.
    #[default]
    PerSample,
    /// One row, broadcast to every sample.
    SharedRow,
}

/// Dropout settings for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutSpec {
    pub p: f64,
    /// Activations that carry a mask; `None` means every hidden activation.
    pub activations: Option<Vec<usize>>,
    pub sharing: MaskSharing,
}

impl DropoutSpec {
    pub fn new(p: f64) -> Self {
        Self {
            p,
            activations: None,
            sharing: MaskSharing::PerSample,
        }
    }

    pub fn with_activations(mut self, activations: Vec<usize>) -> Self {
        self.activations = Some(activations);
        self
    }

    pub fn with_sharing(mut self, sharing: MaskSharing) -> Self {
        self.sharing = sharing;
        self
    }

    /// Draws a fresh mask shaped for `net` and a batch of `batch` rows.
    pub fn sample_for<R: Rng + ?Sized>(
        &self,
        net: &MlpParams,
        batch: usize,
        rng: &mut R,
    ) -> Result<DropoutMask> {
        let activations: Vec<usize> = match &self.activations {
            Some(list) => list.clone(),
            None => (1..net.layers().len()).collect(),
        };
        let mut targets = Vec::with_capacity(activations.len());
        for a in activations {
            if a >= net.layers().len() {
                return Err(Error::config(format!(
                    "activation {a} is the output or beyond; only inputs and hidden activations can be masked"
                )));
            }
            let width = net.activation_width(a).expect("checked above");
            targets.push((a, width));
        }
        DropoutMask::sample(batch, &targets, self.p, self.sharing, rng)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct LayerMask {
    activation: usize,
    keep: Array2<f64>,
}

/// Sampled keep-pattern for one gradient step.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    p: f64,
    scale: f64,
    batch: usize,
    layers: Vec<LayerMask>,
}

impl DropoutMask {
    /// Pushes a ones matrix of shape `rows x width` through a dropout layer
    /// for every `(activation, width)` target.
    pub fn sample<R: Rng + ?Sized>(
        batch: usize,
        targets: &[(usize, usize)],
        p: f64,
        sharing: MaskSharing,
        rng: &mut R,
    ) -> Result<Self> {
        check_probability(p)?;
        let rows = match sharing {
            MaskSharing::PerSample => batch,
            MaskSharing::SharedRow => 1,
        };
        let layers = targets
            .iter()
            .map(|&(activation, width)| {
                let keep = if p == 0.0 {
                    Array2::ones((rows, width))
                } else {
                    Array2::from_shape_fn((rows, width), |_| {
                        if rng.random::<f64>() < p {
                            0.0
                        } else {
                            1.0
                        }
                    })
                };
                LayerMask { activation, keep }
            })
            .collect();
        Ok(Self {
            p,
            scale: 1.0 / (1.0 - p),
            batch,
            layers,
        })
    }

    /// Mask with every unit kept, scale 1.
    pub fn identity(batch: usize, targets: &[(usize, usize)]) -> Self {
        Self {
            p: 0.0,
            scale: 1.0,
            batch,
            layers: targets
                .iter()
                .map(|&(activation, width)| LayerMask {
                    activation,
                    keep: Array2::ones((batch, width)),
                })
                .collect(),
        }
    }

    /// Hand-built mask. Each entry of `layers` is `(activation, keep)` with a
    /// 0/1 `keep` matrix of `batch` rows (or one shared row).
    pub fn from_parts(p: f64, batch: usize, layers: Vec<(usize, Array2<f64>)>) -> Result<Self> {
        check_probability(p)?;
        for (activation, keep) in &layers {
            if keep.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::config(format!(
                    "mask for activation {activation} has entries other than 0 and 1"
                )));
            }
            if p == 0.0 && keep.iter().any(|&v| v == 0.0) {
                return Err(Error::config("p = 0 requires an all-ones mask"));
            }
            if keep.nrows() != batch && keep.nrows() != 1 {
                return Err(Error::config(format!(
                    "mask for activation {activation} has {} rows, batch is {batch}",
                    keep.nrows()
                )));
            }
        }
        Ok(Self {
            p,
            scale: 1.0 / (1.0 - p),
            batch,
            layers: layers
                .into_iter()
                .map(|(activation, keep)| LayerMask { activation, keep })
                .collect(),
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn activations(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    /// 0/1 keep matrix for an activation.
    pub fn keep(&self, activation: usize) -> Option<&Array2<f64>> {
        self.layers
            .iter()
            .find(|l| l.activation == activation)
            .map(|l| &l.keep)
    }

    /// True when every unit is kept and nothing is rescaled.
    pub fn is_identity(&self) -> bool {
        self.scale == 1.0 && self.layers.iter().all(|l| l.keep.iter().all(|&v| v == 1.0))
    }

    /// Fraction of kept entries over all layers.
    pub fn keep_fraction(&self) -> f64 {
        let (kept, total) = self.layers.iter().fold((0.0, 0usize), |(k, n), l| {
            (k + l.keep.sum(), n + l.keep.len())
        });
        if total == 0 {
            1.0
        } else {
            kept / total as f64
        }
    }

    /// `keep / (1 - p)` for an activation, or `None` when it is untouched.
    pub(crate) fn scaled_for(&self, activation: usize) -> Option<Array2<f64>> {
        if self.p == 0.0 {
            return None;
        }
        let scale = self.scale;
        self.keep(activation).map(|k| k * scale)
    }

    pub(crate) fn check_against(&self, net: &MlpParams, batch: usize) -> Result<()> {
        for layer in &self.layers {
            if layer.activation >= net.layers().len() {
                return Err(Error::config(format!(
                    "mask targets activation {}, but the network output cannot be masked",
                    layer.activation
                )));
            }
            let width = net.activation_width(layer.activation).expect("checked above");
            if layer.keep.ncols() != width {
                return Err(Error::config(format!(
                    "mask for activation {} has width {}, network has {width}",
                    layer.activation,
                    layer.keep.ncols()
                )));
            }
            if layer.keep.nrows() != batch && layer.keep.nrows() != 1 {
                return Err(Error::config(format!(
                    "mask has {} rows for a batch of {batch}",
                    layer.keep.nrows()
                )));
            }
        }
        Ok(())
    }
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::config(format!(
            "drop probability {p} outside [0, 1)"
        )));
    }
    Ok(())
}

/// Masks for every hidden activation (`1..=layer_widths.len()`), one row per
/// sample.
pub fn sample_mask<R: Rng + ?Sized>(
    batch: usize,
    layer_widths: &[usize],
    p: f64,
    rng: &mut R,
) -> Result<DropoutMask> {
    let targets: Vec<(usize, usize)> = layer_widths
        .iter()
        .enumerate()
        .map(|(i, &w)| (i + 1, w))
        .collect();
    DropoutMask::sample(batch, &targets, p, MaskSharing::PerSample, rng)
}

/// Forward pass with `mask` applied to its activations.
pub fn masked_forward(
    params: &MlpParams,
    input: ArrayView2<'_, f64>,
    mask: &DropoutMask,
) -> Result<Array2<f64>> {
    params.forward_with(input, Some(mask))
}

/// Forwards an online network and its target under one shared mask.
pub fn consistent_pair_forward(
    online: &MlpParams,
    target: &MlpParams,
    inputs_online: ArrayView2<'_, f64>,
    inputs_target: ArrayView2<'_, f64>,
    mask: &DropoutMask,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if !online.same_architecture(target) {
        return Err(Error::config(format!(
            "online {:?} and target {:?} architectures differ",
            online.sizes(),
            target.sizes()
        )));
    }
    let q_online = online.forward_with(inputs_online, Some(mask))?;
    let q_target = target.forward_with(inputs_target, Some(mask))?;
    Ok((q_online, q_target))
}
