//! MC-dropout predictive estimates, and a numerical check that the
//! L2-regularized critic objective and the dropout deep-GP objective differ
//! only by an affine map.
//!
//! Both objectives score one dataset under one mask realization. Masks sit
//! on the input of every layer, so the drop probability of layer `i` is the
//! one applied to activation `i − 1`.

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dropout::{DropoutMask, DropoutSpec, MaskSharing};
use crate::error::{Error, Result};
use crate::numerics::{HeadKind, MlpParams};

/// Mean and spread of `K` masked forward passes.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveEstimate {
    pub mean: Vec<f64>,
    /// Unbiased sample variance; zero when `passes == 1`.
    pub variance: Vec<f64>,
    pub passes: usize,
}

/// Dropout on the input of every layer of `net`.
pub fn every_layer_input(net: &MlpParams, p: f64) -> DropoutSpec {
    DropoutSpec::new(p).with_activations((0..net.layers().len()).collect())
}

/// `K` forwards of one input, each under an independent mask on the input
/// of every layer.
pub fn mc_dropout_predict<R: Rng + ?Sized>(
    net: &MlpParams,
    input: &[f64],
    p: f64,
    passes: usize,
    rng: &mut R,
) -> Result<PredictiveEstimate> {
    mc_dropout_predict_with(net, input, &every_layer_input(net, p), passes, rng)
}

/// [`mc_dropout_predict`] with explicit mask placement.
pub fn mc_dropout_predict_with<R: Rng + ?Sized>(
    net: &MlpParams,
    input: &[f64],
    spec: &DropoutSpec,
    passes: usize,
    rng: &mut R,
) -> Result<PredictiveEstimate> {
    if passes == 0 {
        return Err(Error::config("need at least one forward pass"));
    }
    if spec.sharing != MaskSharing::PerSample {
        return Err(Error::config("MC passes need independent masks per pass"));
    }
    let rows = Array2::from_shape_fn((passes, input.len()), |(_, j)| input[j]);
    let mask = spec.sample_for(net, passes, rng)?;
    let out = net.forward_with(rows.view(), Some(&mask))?;
    let mean = out.mean_axis(ndarray::Axis(0)).expect("passes > 0");
    let variance = if passes == 1 {
        Array1::zeros(out.ncols())
    } else {
        out.var_axis(ndarray::Axis(0), 1.0)
    };
    Ok(PredictiveEstimate {
        mean: mean.to_vec(),
        variance: variance.to_vec(),
        passes,
    })
}

fn check_dataset(net: &MlpParams, inputs: ArrayView2<'_, f64>, targets: &[f64]) -> Result<()> {
    if net.output_dim() != 1 || net.head_kind() != HeadKind::Linear {
        return Err(Error::config("objectives expect a scalar linear-output network"));
    }
    if inputs.nrows() != targets.len() || targets.is_empty() {
        return Err(Error::config(format!(
            "{} inputs but {} targets",
            inputs.nrows(),
            targets.len()
        )));
    }
    Ok(())
}

fn squared_residuals(
    net: &MlpParams,
    inputs: ArrayView2<'_, f64>,
    targets: &[f64],
    mask: Option<&DropoutMask>,
) -> Result<Vec<f64>> {
    let q = net.forward_with(inputs, mask)?;
    Ok(targets.iter().enumerate().map(|(i, y)| (y - q[[i, 0]]).powi(2)).collect())
}

fn penalty(net: &MlpParams, lambda_w: &[f64], lambda_b: &[f64]) -> Result<f64> {
    let layers = net.layers();
    if lambda_w.len() != layers.len() || lambda_b.len() != layers.len() {
        return Err(Error::config(format!(
            "need one weight and one bias coefficient per layer ({})",
            layers.len()
        )));
    }
    Ok(layers
        .iter()
        .zip(lambda_w.iter().zip(lambda_b))
        .map(|(l, (lw, lb))| lw * l.weight.iter().map(|v| v * v).sum::<f64>() + lb * l.bias.iter().map(|v| v * v).sum::<f64>())
        .sum())
}

/// `mean ½(y − Q(x))² + Σᵢ λ_W(i)‖Wᵢ‖² + λ_b(i)‖bᵢ‖²`, with `Q` evaluated
/// under `mask` when given.
pub fn critic_objective(
    net: &MlpParams,
    inputs: ArrayView2<'_, f64>,
    targets: &[f64],
    lambda_w: &[f64],
    lambda_b: &[f64],
    mask: Option<&DropoutMask>,
) -> Result<f64> {
    check_dataset(net, inputs, targets)?;
    let sq = squared_residuals(net, inputs, targets, mask)?;
    let data = 0.5 * sq.iter().sum::<f64>() / sq.len() as f64;
    Ok(data + penalty(net, lambda_w, lambda_b)?)
}

/// Prior and likelihood constants of the deep-GP view of a dropout network.
#[derive(Debug, Clone, PartialEq)]
pub struct GpObjectiveConfig {
    /// Prior length scale `l`.
    pub length_scale: f64,
    /// Likelihood precision `ε`: `−log p(Q | x) = (ε/2)(Q − Q̂)² + const`.
    pub precision: f64,
    /// Drop probability on the input of each layer.
    pub drop_probs: Vec<f64>,
    /// Dataset size `N`.
    pub dataset_size: usize,
}

impl GpObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.length_scale > 0.0 && self.precision > 0.0 && self.dataset_size > 0) {
            return Err(Error::config("length scale, precision and dataset size must be positive"));
        }
        if self.drop_probs.iter().any(|p| !(0.0..1.0).contains(p)) {
            return Err(Error::config("drop probabilities must lie in [0, 1)"));
        }
        Ok(())
    }

    fn denom(&self) -> f64 {
        2.0 * self.dataset_size as f64 * self.precision
    }

    /// `λ_W(i) = pᵢ l² / (2Nε)`.
    pub fn lambda_w(&self) -> Vec<f64> {
        let l2 = self.length_scale * self.length_scale;
        self.drop_probs.iter().map(|p| p * l2 / self.denom()).collect()
    }

    /// `λ_b(i) = l² / (2Nε)`.
    pub fn lambda_b(&self) -> Vec<f64> {
        let l2 = self.length_scale * self.length_scale;
        vec![l2 / self.denom(); self.drop_probs.len()]
    }
}

/// Single-realization deep-GP objective
/// `(1/Nε)·[Σₙ −log p(Qₙ | xₙ; ω̂) + Σᵢ (pᵢl²/2)‖Wᵢ‖² + (l²/2)‖bᵢ‖²]`
/// with the Gaussian normalizing constant dropped.
pub fn gp_objective(
    net: &MlpParams,
    inputs: ArrayView2<'_, f64>,
    targets: &[f64],
    cfg: &GpObjectiveConfig,
    mask: Option<&DropoutMask>,
) -> Result<f64> {
    cfg.validate()?;
    check_dataset(net, inputs, targets)?;
    if cfg.dataset_size != targets.len() {
        return Err(Error::config(format!(
            "config says N = {}, dataset has {} rows",
            cfg.dataset_size,
            targets.len()
        )));
    }
    if cfg.drop_probs.len() != net.layers().len() {
        return Err(Error::config("need one drop probability per layer"));
    }
    let eps = cfg.precision;
    let l2 = cfg.length_scale * cfg.length_scale;
    let nll: f64 = squared_residuals(net, inputs, targets, mask)?
        .iter()
        .map(|r2| 0.5 * eps * r2)
        .sum();
    let prior: f64 = net
        .layers()
        .iter()
        .zip(&cfg.drop_probs)
        .map(|(l, p)| {
            0.5 * p * l2 * l.weight.iter().map(|v| v * v).sum::<f64>()
                + 0.5 * l2 * l.bias.iter().map(|v| v * v).sum::<f64>()
        })
        .sum();
    Ok((nll + prior) / (targets.len() as f64 * eps))
}

/// Settings for [`equivalence_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceCheck {
    /// Layer sizes, input first, ending in 1.
    pub sizes: Vec<usize>,
    pub p: f64,
    pub length_scale: f64,
    pub precision: f64,
    pub trials: usize,
    /// Multiplies every `λ_W` handed to the critic objective; anything but 1
    /// breaks the correspondence and serves as a control.
    pub lambda_w_factor: f64,
}

impl EquivalenceCheck {
    pub fn new(sizes: Vec<usize>, p: f64) -> Self {
        Self {
            sizes,
            p,
            length_scale: 1.0,
            precision: 0.05,
            trials: 5,
            lambda_w_factor: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub slope: f64,
    pub intercept: f64,
    /// Largest `|gp − (slope·critic + intercept)|` over the trials.
    pub max_residual: f64,
    pub critic_values: Vec<f64>,
    pub gp_values: Vec<f64>,
}

/// Least-squares `y ≈ a·x + b` and its largest absolute residual.
pub fn affine_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let residual = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - (slope * a + intercept)).abs())
        .fold(0.0, f64::max);
    (slope, intercept, residual)
}

/// Draws `trials` random networks of the given architecture, scores each
/// with both objectives under one shared mask realization, and fits an
/// affine map between the two score lists.
pub fn equivalence_check<R: Rng + ?Sized>(
    check: &EquivalenceCheck,
    inputs: ArrayView2<'_, f64>,
    targets: &[f64],
    rng: &mut R,
) -> Result<EquivalenceReport> {
    if check.trials < 2 {
        return Err(Error::config("an affine fit needs at least two trials"));
    }
    let layers = check.sizes.len().saturating_sub(1);
    let cfg = GpObjectiveConfig {
        length_scale: check.length_scale,
        precision: check.precision,
        drop_probs: vec![check.p; layers],
        dataset_size: targets.len(),
    };
    cfg.validate()?;
    let lambda_w: Vec<f64> = cfg.lambda_w().iter().map(|l| l * check.lambda_w_factor).collect();
    let lambda_b = cfg.lambda_b();

    let mut critic_values = Vec::with_capacity(check.trials);
    let mut gp_values = Vec::with_capacity(check.trials);
    for _ in 0..check.trials {
        let mut net = MlpParams::init(&check.sizes, HeadKind::Linear, rng)?;
        // Give biases some weight too; the default init zeroes them.
        for layer in net.layers_mut() {
            layer.bias.mapv_inplace(|_| rng.random_range(-1.0..1.0));
        }
        let mask = every_layer_input(&net, check.p).sample_for(&net, targets.len(), rng)?;
        critic_values.push(critic_objective(&net, inputs, targets, &lambda_w, &lambda_b, Some(&mask))?);
        gp_values.push(gp_objective(&net, inputs, targets, &cfg, Some(&mask))?);
    }
    let (slope, intercept, max_residual) = affine_fit(&critic_values, &gp_values);
    Ok(EquivalenceReport {
        slope,
        intercept,
        max_residual,
        critic_values,
        gp_values,
    })
}

/// One random architecture scored by [`architecture_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct ArchitectureResult {
    pub sizes: Vec<usize>,
    pub p: f64,
    pub report: EquivalenceReport,
    /// Residual of the same check with every `λ_W` doubled.
    pub control_residual: f64,
}

/// Runs [`equivalence_check`] on `count` random architectures (one or two
/// hidden layers of 2 to 12 units, p in [0.05, 0.5]) with random data, plus
/// a mis-specified control per architecture.
pub fn architecture_sweep<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Result<Vec<ArchitectureResult>> {
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let input = rng.random_range(1..=4);
        let depth = rng.random_range(1..=2);
        let mut sizes = vec![input];
        sizes.extend((0..depth).map(|_| rng.random_range(2..=12)));
        sizes.push(1);
        let p = rng.random_range(0.05..0.5);
        let n = rng.random_range(8..=24);
        let inputs = Array2::from_shape_fn((n, input), |_| rng.random_range(-2.0..2.0));
        let targets: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();

        let check = EquivalenceCheck::new(sizes.clone(), p);
        // Replaying the stream gives the control the same networks and masks.
        let stream = rng.next_u64();
        let report = equivalence_check(&check, inputs.view(), &targets, &mut ChaCha8Rng::seed_from_u64(stream))?;
        let control = EquivalenceCheck {
            lambda_w_factor: 2.0,
            ..check
        };
        let control_residual = equivalence_check(&control, inputs.view(), &targets, &mut ChaCha8Rng::seed_from_u64(stream))?.max_residual;
        out.push(ArchitectureResult {
            sizes,
            p,
            report,
            control_residual,
        });
    }
    Ok(out)
}
