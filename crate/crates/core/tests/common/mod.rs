//! Oracles shared by the integration tests. Everything here is written with
//! plain loops over `Vec`s so it shares no code path with the library.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use mepg::dropout::DropoutMask;
use mepg::envs::make_env;
use mepg::numerics::{HeadKind, MlpParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A dense layer copied out of an `MlpParams`: `weight[o][i]`, `bias[o]`.
#[derive(Clone, Debug)]
pub struct PlainLayer {
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

pub fn plain_layers(net: &MlpParams) -> Vec<PlainLayer> {
    net.layers()
        .iter()
        .map(|l| PlainLayer {
            weight: l.weight.rows().into_iter().map(|r| r.to_vec()).collect(),
            bias: l.bias.row(0).to_vec(),
        })
        .collect()
}

/// Plain ReLU forward, linear output.
pub fn plain_forward(layers: &[PlainLayer], x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    for (k, layer) in layers.iter().enumerate() {
        let mut z: Vec<f64> = layer
            .weight
            .iter()
            .zip(&layer.bias)
            .map(|(row, b)| row.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect();
        if k + 1 < layers.len() {
            for v in &mut z {
                *v = v.max(0.0);
            }
        }
        h = z;
    }
    h
}

/// The subnetwork one mask row selects: for every masked activation `a`,
/// dropped units are deleted (rows of layer `a − 1` when `a ≥ 1`, columns of
/// layer `a`), and the surviving columns of layer `a` are multiplied by
/// `1/(1 − p)`.
pub fn pruned_subnetwork(layers: &[PlainLayer], keep: &BTreeMap<usize, Vec<bool>>, p: f64) -> Vec<PlainLayer> {
    let scale = 1.0 / (1.0 - p);
    let mut out = layers.to_vec();
    for (&a, kept) in keep {
        let idx: Vec<usize> = (0..kept.len()).filter(|&j| kept[j]).collect();
        let next = &mut out[a];
        next.weight = next
            .weight
            .iter()
            .map(|row| idx.iter().map(|&j| row[j] * scale).collect())
            .collect();
        if a >= 1 {
            let prev = &mut out[a - 1];
            prev.weight = idx.iter().map(|&j| prev.weight[j].clone()).collect();
            prev.bias = idx.iter().map(|&j| prev.bias[j]).collect();
        }
    }
    out
}

/// Input row restricted to the units kept at activation 0, if masked.
pub fn pruned_input(x: &[f64], keep: &BTreeMap<usize, Vec<bool>>) -> Vec<f64> {
    match keep.get(&0) {
        Some(k) => x.iter().zip(k).filter(|(_, &kp)| kp).map(|(v, _)| *v).collect(),
        None => x.to_vec(),
    }
}

/// Keep pattern of one sample of `mask`.
pub fn mask_row(mask: &DropoutMask, row: usize) -> BTreeMap<usize, Vec<bool>> {
    mask.activations()
        .into_iter()
        .map(|a| {
            let k = mask.keep(a).unwrap();
            let r = if k.nrows() == 1 { 0 } else { row };
            (a, k.row(r).iter().map(|&v| v == 1.0).collect())
        })
        .collect()
}

/// Output of sample `row` through its own pruned subnetwork.
pub fn pruned_forward(net: &MlpParams, x: &[f64], mask: &DropoutMask, row: usize) -> Vec<f64> {
    let keep = mask_row(mask, row);
    let sub = pruned_subnetwork(&plain_layers(net), &keep, mask.p());
    plain_forward(&sub, &pruned_input(x, &keep))
}

/// Central difference of `f` at every entry reached by `get_set`.
pub fn central_differences(n: usize, h: f64, mut f: impl FnMut(usize, f64) -> f64) -> Vec<f64> {
    (0..n).map(|i| (f(i, h) - f(i, -h)) / (2.0 * h)).collect()
}

/// Largest entrywise `|a − b| / max(|a|, |b|, floor)`.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

pub fn random_net(sizes: &[usize], rng: &mut ChaCha8Rng) -> MlpParams {
    let mut net = MlpParams::init(sizes, HeadKind::Linear, rng).unwrap();
    for layer in net.layers_mut() {
        layer.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    }
    net
}

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join(name)
}

/// `key = value` pairs of a fixture file.
pub fn read_fixture(name: &str) -> BTreeMap<String, String> {
    let text = std::fs::read_to_string(fixture_path(name)).unwrap();
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            let (k, v) = l.split_once('=').unwrap();
            (k.trim().to_string(), v.trim().to_string())
        })
        .collect()
}

/// Undiscounted returns of `episodes` uniform-random-action episodes.
pub fn random_policy_returns(env_name: &str, episodes: usize, seed: u64) -> Vec<f64> {
    let mut env = make_env(env_name).unwrap();
    env.seed(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let spec = env.spec().clone();
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        env.reset();
        let mut total = 0.0;
        loop {
            let a: Vec<f64> = (0..spec.action_dim)
                .map(|j| rng.random_range(spec.action_low[j]..=spec.action_high[j]))
                .collect();
            let out = env.step(&a).unwrap();
            total += out.reward;
            if out.done || out.terminal {
                break;
            }
        }
        returns.push(total);
    }
    returns
}

/// Empirical quantile by the nearest-rank rule.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

/// Summary written to the fixture file: mean, population std, 99th percentile.
pub fn random_policy_summary(env_name: &str, episodes: usize, seed: u64) -> String {
    let r = random_policy_returns(env_name, episodes, seed);
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let std = (r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    format!(
        "{env_name}.episodes = {episodes}\n{env_name}.seed = {seed}\n{env_name}.mean = {mean}\n{env_name}.std = {std}\n{env_name}.p99 = {}\n",
        quantile(&r, 0.99)
    )
}
