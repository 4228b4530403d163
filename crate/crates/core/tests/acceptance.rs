//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line;
//! run with `cargo test -p mepg --test acceptance -- --nocapture
//! --test-threads=1` to see them in order.

mod common;

use common::*;
use mepg::agents::losses::temperature_loss;
use mepg::agents::{Agent, AgentConfig, CriticInputs, Family, Trainer};
use mepg::analysis::{architecture_sweep, mc_dropout_predict};
use mepg::dropout::{consistent_pair_forward, DropoutSpec};
use mepg::envs::{make_env, optimal_lqr_return, DoubleIntegrator, EnvSpec};
use mepg::harness::run::{parameter_count_for, recompute_aggregate, run_seed, AGGREGATE_FILE};
use mepg::harness::{
    evaluate, normalize_sweep, run_experiment, smooth, top5_metric, top5_score, EvalRecord, EvalSeries,
    ExperimentConfig, SweepTable,
};
use mepg::numerics::{Dense, Head, MlpParams, ParamSet, Tape};
use mepg::replay::Batch;
use ndarray::{array, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, pass: bool, detail: &str) {
    println!("criterion {n}: {} | {detail}", if pass { "PASS" } else { "FAIL" });
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_batch(spec: &EnvSpec, n: usize, rng: &mut ChaCha8Rng) -> Batch {
    let s = spec.state_dim;
    let a = spec.action_dim;
    let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let states = Array2::from_shape_fn((n, s), |_| u(-1.5, 1.5));
    let actions = Array2::from_shape_fn((n, a), |(_, j)| u(spec.action_low[j], spec.action_high[j]));
    let rewards = Array1::from_shape_fn(n, |_| u(-2.0, 0.0));
    let next_states = Array2::from_shape_fn((n, s), |_| u(-1.5, 1.5));
    let terminals = Array1::from_shape_fn(n, |i| if i % 5 == 4 { 1.0 } else { 0.0 });
    Batch {
        states,
        actions,
        rewards,
        next_states,
        terminals,
    }
}

fn small(mut cfg: AgentConfig) -> AgentConfig {
    cfg.hidden = vec![16, 16];
    cfg.batch_size = 32;
    cfg.random_start_steps = 100;
    cfg
}

fn trainer(cfg: AgentConfig, env: &str, seed: u64) -> Trainer {
    let mut env = make_env(env).unwrap();
    env.seed(seed + 1000);
    let mut r = rng(seed);
    let agent = Agent::new(cfg, env.spec(), &mut r).unwrap();
    Trainer::new(agent, env, r, rng(seed + 1)).unwrap()
}

fn perturb<P: ParamSet>(net: &mut P, scale: f64, rng: &mut ChaCha8Rng) {
    for t in net.tensors_mut() {
        t.mapv_inplace(|v| v + scale * rng.random_range(-1.0..1.0));
    }
}

// ---------------------------------------------------------------------------
// 1. Parameter counts
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_parameter_counts() {
    // Millions, per (Ant, HalfCheetah, Hopper, Walker2D).
    let table: [(&str, [f64; 4]); 4] = [
        ("me-ddpg", [0.302, 0.297, 0.283, 0.293]),
        ("me-sac", [0.226, 0.223, 0.212, 0.220]),
        ("td3", [0.453, 0.446, 0.425, 0.440]),
        ("sac", [0.377, 0.372, 0.354, 0.367]),
    ];
    let dims = [(28, 8), (26, 6), (15, 3), (22, 6)];
    let mut worst: f64 = 0.0;
    let mut cells = Vec::new();
    for (algo, expected) in table {
        for ((s, a), want) in dims.iter().zip(expected) {
            let n = parameter_count_for(algo, *s, *a, &[256, 256]).unwrap();
            let got = (n as f64 / 1e3).round() / 1e3;
            worst = worst.max((got - want).abs());
            cells.push(format!("{algo}({s},{a})={n}"));
        }
    }
    let pass = worst < 1e-9;
    report(1, pass, &format!("16 cells, max |rounded − table| = {worst:.3}M; {}", cells[0]));
    assert!(pass, "{cells:?}");
}

// ---------------------------------------------------------------------------
// 2. Reduction identity at p = 0
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_zero_p_reduces_to_the_plain_agent() {
    let mut details = Vec::new();
    let mut pass = true;
    for name in ["me-ddpg", "me-sac"] {
        let mut masked = small(AgentConfig::preset(name).unwrap());
        masked.dropout_p = 0.0;
        let mut plain = masked.clone();
        plain.use_dropout = false;
        let mut a = trainer(masked, "pendulum", 5);
        let mut b = trainer(plain, "pendulum", 5);
        let mut first_diff = None;
        for step in 0..1000 {
            a.train_step().unwrap();
            b.train_step().unwrap();
            if first_diff.is_none() && a.agent.snapshot() != b.agent.snapshot() {
                first_diff = Some(step);
            }
        }
        let moved = a.agent.snapshot() != trainer(small(AgentConfig::preset(name).unwrap()), "pendulum", 5).agent.snapshot();
        pass &= first_diff.is_none() && moved;
        details.push(format!("{name}: first divergence {first_diff:?}, parameters moved {moved}"));
    }
    report(2, pass, &details.join("; "));
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 3. Consistent masks equal pruned subnetworks
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_masked_pairs_match_pruned_subnetworks() {
    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let depth = r.random_range(1..=3);
        let input = r.random_range(2..=6);
        let mut sizes = vec![input];
        sizes.extend((0..depth).map(|_| r.random_range(3..=16)));
        sizes.push(1);
        let online = random_net(&sizes, &mut r);
        let target = random_net(&sizes, &mut r);
        let n = r.random_range(1..=12);
        let p = [0.1, 0.3, 0.5, 0.8][trial % 4];
        let mask = DropoutSpec::new(p).sample_for(&online, n, &mut r).unwrap();
        let xs = Array2::from_shape_fn((n, input), |_| r.random_range(-2.0..2.0));
        let xt = Array2::from_shape_fn((n, input), |_| r.random_range(-2.0..2.0));
        let (qo, qt) = consistent_pair_forward(&online, &target, xs.view(), xt.view(), &mask).unwrap();
        for i in 0..n {
            let po = pruned_forward(&online, xs.row(i).as_slice().unwrap(), &mask, i);
            let pt = pruned_forward(&target, xt.row(i).as_slice().unwrap(), &mask, i);
            worst = worst.max((qo[[i, 0]] - po[0]).abs()).max((qt[[i, 0]] - pt[0]).abs());
        }
    }

    // The same identity through the agent's own Bellman target, with twin
    // critics sharing one mask.
    let mut agent_worst: f64 = 0.0;
    for seed in 0..10 {
        let mut cfg = small(AgentConfig::preset("ME+CDQ").unwrap());
        cfg.use_tps = false;
        cfg.dropout_p = 0.3;
        let spec = make_env("pendulum").unwrap().spec().clone();
        let mut r = rng(100 + seed);
        let mut agent = Agent::new(cfg, &spec, &mut r).unwrap();
        for c in agent.critics_mut() {
            perturb(&mut c.target, 0.1, &mut r);
        }
        let batch = random_batch(&spec, 16, &mut r);
        let inputs = agent.draw_critic_inputs(16, &mut r, &mut rng(seed)).unwrap();
        let mask = inputs.mask.clone().unwrap();
        let graph = agent.critic_graph(&batch, &inputs).unwrap();
        let y = graph.tape.value(graph.target_values).clone();
        let next_a = agent.actor_target().unwrap().forward_batch(batch.next_states.view()).unwrap();
        for i in 0..16 {
            let a = (next_a[[i, 0]] * 2.0).clamp(-2.0, 2.0);
            let mut x: Vec<f64> = batch.next_states.row(i).to_vec();
            x.push(a);
            let q = agent
                .critics()
                .iter()
                .map(|c| pruned_forward(&c.target, &x, &mask, i)[0])
                .fold(f64::INFINITY, f64::min);
            let expected = batch.rewards[i] + 0.99 * (1.0 - batch.terminals[i]) * q;
            agent_worst = agent_worst.max((y[[i, 0]] - expected).abs());
        }
    }
    let pass = worst < 1e-12 && agent_worst < 1e-12;
    report(
        3,
        pass,
        &format!("100 batches: max |masked − pruned| = {worst:.2e}; agent targets: {agent_worst:.2e}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 4. Dropout expectation
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_masked_mean_matches_unmasked_output() {
    let net = MlpParams::from_layers(
        vec![Dense {
            weight: array![[0.8, -1.3, 0.5, 2.0], [0.9, 0.4, 0.7, 1.2]],
            bias: array![[0.3, 0.1]],
        }],
        Head::Linear,
    )
    .unwrap();
    // Monte Carlo standard error is about 0.2% of each output at p = 0.5.
    let x = [1.0, -0.5, 2.0, 0.75];
    let exact = net.forward(&x).unwrap();
    let mut worst: f64 = 0.0;
    for p in [0.1, 0.5] {
        let est = mc_dropout_predict(&net, &x, p, 100_000, &mut rng(4)).unwrap();
        for (m, e) in est.mean.iter().zip(&exact) {
            worst = worst.max(((m - e) / e).abs());
        }
    }
    let pass = worst < 0.01;
    report(4, pass, &format!("p in {{0.1, 0.5}}, 1e5 passes: max relative deviation {worst:.2e}"));
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 5. Finite-difference gradient checks
// ---------------------------------------------------------------------------

const FD_STEP: f64 = 1e-5;
const FD_FLOOR: f64 = 1e-6;

fn flat<P: ParamSet>(p: &P) -> Vec<f64> {
    p.tensors().iter().flat_map(|t| t.iter().copied()).collect()
}

fn nudge<P: ParamSet>(p: &mut P, index: usize, delta: f64) {
    let mut i = index;
    for t in p.tensors_mut() {
        if i < t.len() {
            let v = t.iter_mut().nth(i).unwrap();
            *v += delta;
            return;
        }
        i -= t.len();
    }
    panic!("index out of range");
}

fn critic_check(agent: &mut Agent, batch: &Batch, inputs: &CriticInputs) -> f64 {
    let graph = agent.critic_graph(batch, inputs).unwrap();
    let mut grads = graph.tape.backward(graph.loss).unwrap();
    let mut worst: f64 = 0.0;
    for (c, bound) in graph.online.iter().enumerate() {
        let analytic: Vec<f64> = bound.grads(&graph.tape, &mut grads).iter().flat_map(|t| t.iter().copied()).collect();
        let n = analytic.len();
        let numeric = central_differences(n, FD_STEP, |i, h| {
            nudge(&mut agent.critics_mut()[c].online, i, h);
            let g = agent.critic_graph(batch, inputs).unwrap();
            let v = g.tape.scalar(g.loss);
            nudge(&mut agent.critics_mut()[c].online, i, -h);
            v
        });
        worst = worst.max(max_relative_error(&analytic, &numeric, FD_FLOOR));
    }
    worst
}

fn actor_check(agent: &mut Agent, batch: &Batch, noise: &Array2<f64>) -> f64 {
    let graph = agent.actor_graph(batch, noise).unwrap();
    let mut grads = graph.tape.backward(graph.loss).unwrap();
    let analytic: Vec<f64> = graph.actor.grads(&graph.tape, &mut grads).iter().flat_map(|t| t.iter().copied()).collect();
    assert_eq!(analytic.len(), flat(agent.actor()).len());
    let numeric = central_differences(analytic.len(), FD_STEP, |i, h| {
        nudge(agent.actor_mut(), i, h);
        let g = agent.actor_graph(batch, noise).unwrap();
        let v = g.tape.scalar(g.loss);
        nudge(agent.actor_mut(), i, -h);
        v
    });
    max_relative_error(&analytic, &numeric, FD_FLOOR)
}

#[test]
fn criterion_5_every_loss_matches_finite_differences() {
    let spec = make_env("reacher2d").unwrap().spec().clone();
    let mut rows = Vec::new();
    let setups: [(&str, &str, f64); 8] = [
        ("deterministic policy gradient", "ddpg", 0.0),
        ("target-network critic", "ddpg", 0.0),
        ("consistent masked critic", "me-ddpg", 0.3),
        ("consistent masked critic, twin", "ME+CDQ", 0.3),
        ("soft policy", "sac", 0.0),
        ("soft policy, single critic", "me-sac", 0.3),
        ("soft critic, masked", "me-sac", 0.3),
        ("soft critic, masked twin", "MES+CDQ", 0.3),
    ];
    for (k, (label, algo, p)) in setups.iter().enumerate() {
        let mut cfg = AgentConfig::preset(algo).unwrap();
        cfg.hidden = vec![12, 10];
        cfg.dropout_p = *p;
        let mut r = rng(50 + k as u64);
        let mut agent = Agent::new(cfg.clone(), &spec, &mut r).unwrap();
        for c in agent.critics_mut() {
            perturb(&mut c.target, 0.05, &mut r);
        }
        let batch = random_batch(&spec, 6, &mut r);
        let err = if label.contains("policy") {
            let noise = Array2::from_shape_fn((6, spec.action_dim), |_| r.random_range(-1.5..1.5));
            actor_check(&mut agent, &batch, &noise)
        } else {
            let inputs = agent.draw_critic_inputs(6, &mut r, &mut rng(k as u64)).unwrap();
            assert_eq!(inputs.mask.is_some(), *p > 0.0);
            critic_check(&mut agent, &batch, &inputs)
        };
        rows.push((label.to_string(), err));
        if cfg.family == Family::Sac && label.contains("policy") {
            // The entropy part of the soft critic target with a larger α.
            agent.set_log_alpha(0.5f64.ln());
            let inputs = agent.draw_critic_inputs(6, &mut r, &mut rng(9)).unwrap();
            rows.push((format!("{label} (soft target, alpha 0.5)"), critic_check(&mut agent, &batch, &inputs)));
        }
    }

    // Temperature objective.
    let log_probs = Array2::from_shape_fn((7, 1), |(i, _)| -1.0 + 0.4 * i as f64);
    let loss_at = |la: f64| {
        let mut t = Tape::new();
        let v = t.param(Array2::from_elem((1, 1), la));
        let l = temperature_loss(&mut t, v, &log_probs, -2.0);
        (t, v, l)
    };
    let (t, v, l) = loss_at(-0.3);
    let analytic = t.backward(l).unwrap().wrt(&t, v)[[0, 0]];
    let numeric = central_differences(1, FD_STEP, |_, h| {
        let (t, _, l) = loss_at(-0.3 + h);
        t.scalar(l)
    });
    rows.push(("temperature".into(), max_relative_error(&[analytic], &numeric, FD_FLOOR)));

    let worst = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let pass = worst < 1e-4;
    let summary: Vec<String> = rows.iter().map(|(l, e)| format!("{l} {e:.1e}")).collect();
    report(5, pass, &format!("{} losses, max relative error {worst:.2e} [{}]", rows.len(), summary.join(", ")));
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 6. Regularized critic vs deep-GP objective
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_gp_objective_is_affine_in_the_critic_objective() {
    let results = architecture_sweep(24, &mut rng(6)).unwrap();
    let worst = results.iter().map(|r| r.report.max_residual).fold(0.0, f64::max);
    let weakest = results.iter().map(|r| r.control_residual).fold(f64::INFINITY, f64::min);
    let distinct: std::collections::BTreeSet<Vec<usize>> = results.iter().map(|r| r.sizes.clone()).collect();
    let pass = distinct.len() >= 20 && worst < 1e-10 && weakest > 1e-3;
    report(
        6,
        pass,
        &format!(
            "{} architectures ({} distinct): max residual {worst:.2e}, smallest control residual {weakest:.2e}",
            results.len(),
            distinct.len()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 7. Learning at desk scale
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_learning_at_desk_scale() {
    let fixture = read_fixture("random_policy.txt");
    let value = |k: &str| fixture[k].parse::<f64>().unwrap();
    let di_random = value("double-integrator.mean");
    let pendulum_bar = value("pendulum.p99");
    let lqr = optimal_lqr_return(&DoubleIntegrator::new(), 1.0).unwrap();

    let mut pass = true;
    let mut details = Vec::new();
    for algo in ["me-ddpg", "me-sac"] {
        let cfg = ExperimentConfig::desk(algo, "double-integrator").unwrap();
        let score = run_experiment(&cfg).unwrap().metric().unwrap();
        let normalized = (score - di_random) / (lqr - di_random);
        let ok = normalized >= 0.9;
        pass &= ok;
        details.push(format!(
            "{algo} double-integrator top5 {score:.2} (normalized {normalized:.3}, optimal/achieved cost {:.3})",
            lqr / score
        ));

        let mut cfg = ExperimentConfig::desk(algo, "pendulum").unwrap();
        cfg.total_steps = 30_000;
        cfg.agent.random_start_steps = 5_000;
        let score = run_experiment(&cfg).unwrap().metric().unwrap();
        let ok = score > pendulum_bar;
        pass &= ok;
        details.push(format!("{algo} pendulum top5 {score:.1} vs random p99 {pendulum_bar:.1}"));
    }
    report(
        7,
        pass,
        &format!("LQR return {lqr:.3}, random {di_random:.1}; {}", details.join("; ")),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 8. Ablation switches
// ---------------------------------------------------------------------------

struct Trace {
    critics: usize,
    actor_steps: Vec<u64>,
    alphas: Vec<f64>,
}

fn run_thousand(name: &str) -> (Trainer, Trace) {
    let env = if name.starts_with("MES") || name.contains("sac") { "pendulum" } else { "double-integrator" };
    let mut t = trainer(small(AgentConfig::preset(name).unwrap()), env, 8);
    let mut trace = Trace {
        critics: t.agent.critics().len(),
        actor_steps: Vec::new(),
        alphas: Vec::new(),
    };
    for _ in 0..1000 {
        let rep = t.train_step().unwrap();
        if rep.updated_actor() {
            trace.actor_steps.push(rep.step);
        }
        trace.alphas.push(t.agent.alpha());
    }
    (t, trace)
}

#[test]
fn criterion_8_ablation_switches_change_only_their_path() {
    let mut checks: Vec<(String, bool)> = Vec::new();
    let (me_ddpg, base) = run_thousand("me-ddpg");
    let (_, base_sac) = run_thousand("me-sac");

    let (_, cdq) = run_thousand("ME+CDQ");
    checks.push(("ME+CDQ two critics".into(), cdq.critics == 2 && base.critics == 1));

    let (_, du) = run_thousand("MED-DU");
    let every = du.actor_steps.windows(2).all(|w| w[1] == w[0] + 1) && du.actor_steps.len() == 900;
    let even = base.actor_steps.iter().all(|s| s % 2 == 0) && base.actor_steps.len() == 450;
    checks.push(("MED-DU actor every step".into(), every && even));

    let (do_, _) = run_thousand("MED-DO");
    let mut r = rng(80);
    let no_mask = do_.agent.draw_critic_inputs(8, &mut r, &mut rng(1)).unwrap().mask.is_none();
    let has_mask = me_ddpg.agent.draw_critic_inputs(8, &mut r, &mut rng(1)).unwrap().mask.is_some();
    checks.push(("MED-DO identity masks".into(), no_mask && has_mask));

    let (tps, _) = run_thousand("MED-TPS");
    let spec = tps.agent.env_spec().clone();
    let batch = random_batch(&spec, 16, &mut r);
    let inputs = tps.agent.draw_critic_inputs(16, &mut r, &mut rng(2)).unwrap();
    let y = {
        let g = tps.agent.critic_graph(&batch, &inputs).unwrap();
        g.tape.value(g.target_values).clone()
    };
    let mut exact = inputs.noise.iter().all(|&v| v == 0.0);
    let next_a = tps.agent.actor_target().unwrap().forward_batch(batch.next_states.view()).unwrap();
    for i in 0..16 {
        let mut x = batch.next_states.row(i).to_vec();
        x.push(next_a[[i, 0]].clamp(-1.0, 1.0));
        let q = pruned_forward(&tps.agent.critics()[0].target, &x, inputs.mask.as_ref().unwrap(), i)[0];
        let expected = batch.rewards[i] + 0.99 * (1.0 - batch.terminals[i]) * q;
        exact &= (y[[i, 0]] - expected).abs() < 1e-12;
    }
    let smoothed = me_ddpg.agent.draw_critic_inputs(16, &mut r, &mut rng(2)).unwrap().noise.iter().any(|&v| v != 0.0);
    checks.push(("MED-TPS target action is the target policy".into(), exact && smoothed));

    let (_, fix) = run_thousand("MES+FIXENT");
    let constant = fix.alphas.iter().all(|&a| a == fix.alphas[0]);
    let adapts = base_sac.alphas.first() != base_sac.alphas.last();
    checks.push(("MES+FIXENT alpha constant".into(), constant && adapts));

    let (_, mes_cdq) = run_thousand("MES+CDQ");
    let (_, mes_du) = run_thousand("MES-DU");
    checks.push((
        "MES+CDQ / MES-DU".into(),
        mes_cdq.critics == 2 && base_sac.critics == 1 && mes_du.actor_steps.len() == 900,
    ));

    let pass = checks.iter().all(|c| c.1);
    let summary: Vec<String> = checks.iter().map(|(n, ok)| format!("{n} {}", if *ok { "ok" } else { "WRONG" })).collect();
    report(8, pass, &summary.join(", "));
    assert!(pass, "{summary:?}");
}

// ---------------------------------------------------------------------------
// 9. Metric and protocol fidelity
// ---------------------------------------------------------------------------

fn series(values: &[f64]) -> EvalSeries {
    let mut s = EvalSeries::new();
    for (i, &v) in values.iter().enumerate() {
        s.push(EvalRecord {
            step: 5000 * (i as u64 + 1),
            mean_return: v,
            std_return: 0.0,
        })
        .unwrap();
    }
    s
}

#[test]
fn criterion_9_metric_and_protocol_fidelity() {
    let mut checks: Vec<(&str, bool)> = Vec::new();
    checks.push(("top5 constant", top5_score(&series(&[3.5; 8])).unwrap() == 3.5));
    checks.push(("top5 1..6", top5_score(&series(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0])).unwrap() == 4.0));
    checks.push(("top5 across runs", top5_metric(&[series(&[4.0; 5]), series(&[6.0; 5])]).unwrap() == 5.0));
    checks.push(("top5 short run", top5_score(&series(&[1.0; 4])).is_err()));

    let one = SweepTable {
        p_values: vec![0.1],
        envs: vec!["e".into()],
        scores: vec![vec![7.0]],
    };
    let ant = SweepTable {
        p_values: vec![0.1, 0.95],
        envs: vec!["ant".into(), "flat".into()],
        scores: vec![vec![2846.0, 3.0], vec![2461.0, 3.0]],
    };
    let n = normalize_sweep(&ant).unwrap();
    checks.push(("normalize single", normalize_sweep(&one).unwrap().scores == vec![vec![1.0]]));
    checks.push((
        "normalize column",
        n.scores[0] == vec![1.0, 1.0] && (n.scores[1][0] - 0.865).abs() < 5e-4 && n.scores[1][1] == 1.0,
    ));

    checks.push(("smooth identity", smooth(&[1.0, -2.0, 5.0], 0.0).unwrap() == vec![1.0, -2.0, 5.0]));
    checks.push(("smooth constant", smooth(&[4.0; 5], 0.6).unwrap() == vec![4.0; 5]));
    checks.push(("smooth step", smooth(&[0.0, 1.0, 1.0, 1.0], 0.5).unwrap() == vec![0.0, 0.5, 0.75, 0.875]));

    // Full-size evaluation schedule: rows at 5,000 and 10,000 over 10
    // greedy episodes.
    let mut cfg = ExperimentConfig::full("me-ddpg", "pendulum").unwrap();
    cfg.total_steps = 10_000;
    cfg.agent.random_start_steps = 10_000;
    assert_eq!((cfg.eval_interval, cfg.eval_episodes), (5_000, 10));
    let run = run_seed(&cfg, 0).unwrap();
    let steps: Vec<u64> = run.series.records().iter().map(|r| r.step).collect();
    checks.push(("eval every 5000", steps == vec![5_000, 10_000]));

    let spec = make_env("pendulum").unwrap().spec().clone();
    let agent = Agent::new(small(AgentConfig::me_ddpg()), &spec, &mut rng(9)).unwrap();
    let mut env = make_env("pendulum").unwrap();
    let (m1, _) = evaluate(&agent, env.as_mut(), 10, 42).unwrap();
    let (m2, _) = evaluate(&agent, env.as_mut(), 10, 42).unwrap();
    let (_, sd1) = evaluate(&agent, env.as_mut(), 1, 42).unwrap();
    // A hand rollout with greedy actions reproduces the first episode.
    let mut manual_env = make_env("pendulum").unwrap();
    let mut obs = manual_env.reset_seeded(42);
    let mut manual = 0.0;
    loop {
        let out = manual_env.step(&agent.greedy_action(&obs).unwrap()).unwrap();
        manual += out.reward;
        if out.done {
            break;
        }
        obs = out.observation;
    }
    let (first, _) = evaluate(&agent, env.as_mut(), 1, 42).unwrap();
    checks.push(("evaluation deterministic and greedy", m1 == m2 && sd1 == 0.0 && first == manual));

    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::desk("me-sac", "double-integrator").unwrap();
    cfg.agent = small(cfg.agent);
    cfg.total_steps = 1_000;
    cfg.eval_interval = 100;
    cfg.eval_episodes = 2;
    cfg.seeds = vec![0, 1, 2];
    cfg.out_dir = Some(dir.path().to_path_buf());
    run_experiment(&cfg).unwrap();
    let stored = std::fs::read(dir.path().join(AGGREGATE_FILE)).unwrap();
    let recomputed = recompute_aggregate(dir.path()).unwrap();
    checks.push(("aggregate recomputation byte-stable", recomputed.as_bytes() == stored.as_slice()));

    let pass = checks.iter().all(|c| c.1);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    report(9, pass, &format!("{} checks, failing: {failed:?}", checks.len()));
    assert!(pass);
}
