//! Tape gradients of small ReLU networks against central differences.

mod common;

use common::{central_differences, max_relative_error};
use mepg::dropout::DropoutSpec;
use mepg::numerics::{HeadKind, MlpParams, ParamSet, Tape};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn loss_and_grads(net: &MlpParams, x: &Array2<f64>, weights: &Array2<f64>, mask: Option<&mepg::dropout::DropoutMask>) -> (f64, Vec<f64>) {
    let mut tape = Tape::new();
    let bound = net.bind(&mut tape);
    let input = tape.constant(x.clone());
    let out = bound.forward(&mut tape, input, mask);
    let sq = tape.square(out);
    let weighted = tape.mul_const(sq, weights.clone());
    let loss = tape.mean(weighted);
    let mut grads = tape.backward(loss).unwrap();
    let g = bound.grads(&tape, &mut grads).iter().flat_map(|t| t.iter().copied()).collect();
    (tape.scalar(loss), g)
}

fn nudge(net: &mut MlpParams, mut i: usize, delta: f64) {
    for t in net.tensors_mut() {
        if i < t.len() {
            *t.iter_mut().nth(i).unwrap() += delta;
            return;
        }
        i -= t.len();
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tape_matches_central_differences(
        seed in 0u64..1_000,
        depth in 1usize..=3,
        width in 2usize..=32,
        head in prop_oneof![Just(HeadKind::Linear), Just(HeadKind::Tanh)],
        masked in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![rng.random_range(1..=5)];
        sizes.extend(std::iter::repeat_n(width, depth - 1));
        sizes.push(rng.random_range(1..=3));
        let mut net = MlpParams::init(&sizes, head, &mut rng).unwrap();
        for t in net.tensors_mut() {
            t.mapv_inplace(|v| v + rng.random_range(-0.3..0.3));
        }
        let n = 5;
        let x = Array2::from_shape_fn((n, sizes[0]), |_| rng.random_range(-1.0..1.0));
        let w = Array2::from_shape_fn((n, *sizes.last().unwrap()), |_| rng.random_range(0.5..1.5));
        let mask = (masked && depth > 1).then(|| DropoutSpec::new(0.3).sample_for(&net, n, &mut rng).unwrap());

        let (_, analytic) = loss_and_grads(&net, &x, &w, mask.as_ref());
        let numeric = central_differences(analytic.len(), 1e-5, |i, h| {
            nudge(&mut net, i, h);
            let v = loss_and_grads(&net, &x, &w, mask.as_ref()).0;
            nudge(&mut net, i, -h);
            v
        });
        let err = max_relative_error(&analytic, &numeric, 1e-6);
        prop_assert!(err < 1e-4, "relative error {err} for {sizes:?}");
    }
}
