use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::metrics::{evaluate, normalize_sweep, top5_score, EvalRecord, EvalSeries, SweepTable};
use super::plot::{svg_curves, Curve};
use crate::agents::{Agent, AgentConfig, Family, Trainer};
use crate::envs::{make_env, EnvSpec};
use crate::error::{Error, Result};

/// The four independent random streams of one run.
#[derive(Debug, Clone)]
pub struct RunStreams {
    /// Network initialization, exploration, replay sampling, policy noise.
    pub train: ChaCha8Rng,
    /// Seeds the training environment's reset distribution.
    pub env: ChaCha8Rng,
    /// Seeds the evaluation environment.
    pub eval: ChaCha8Rng,
    /// Dropout masks.
    pub dropout: ChaCha8Rng,
}

impl RunStreams {
    pub fn new(seed: u64) -> Self {
        let stream = |id: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        Self {
            train: stream(0),
            env: stream(1),
            eval: stream(2),
            dropout: stream(3),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub seed: u64,
    pub series: EvalSeries,
    pub parameter_count: usize,
    /// Wall-clock training time, evaluation included.
    pub seconds: f64,
}

/// Trains one seed for `cfg.total_steps` steps, evaluating every
/// `cfg.eval_interval` steps without exploration.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let mut streams = RunStreams::new(seed);
    let mut env = make_env(&cfg.env)?;
    env.seed(streams.env.next_u64());
    let mut eval_env = make_env(&cfg.env)?;
    let eval_seed = streams.eval.next_u64();

    let agent = Agent::new(cfg.agent.clone(), env.spec(), &mut streams.train)?;
    let parameter_count = agent.parameter_count();
    let mut trainer = Trainer::new(agent, env, streams.train, streams.dropout)?;
    let mut series = EvalSeries::new();
    for t in 0..cfg.total_steps {
        trainer.train_step()?;
        let done = t + 1;
        if done % cfg.eval_interval == 0 {
            let (mean_return, std_return) = evaluate(&trainer.agent, eval_env.as_mut(), cfg.eval_episodes, eval_seed)?;
            series.push(EvalRecord {
                step: done,
                mean_return,
                std_return,
            })?;
        }
    }
    Ok(RunOutcome {
        seed,
        series,
        parameter_count,
        seconds: started.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    /// In seed order.
    pub runs: Vec<RunOutcome>,
}

impl ExperimentResult {
    /// Per-run top-5 scores in seed order.
    pub fn scores(&self) -> Result<Vec<f64>> {
        self.runs.iter().map(|r| top5_score(&r.series)).collect()
    }

    /// Mean of the per-run top-5 scores.
    pub fn metric(&self) -> Result<f64> {
        let scores = self.scores()?;
        Ok(scores.iter().sum::<f64>() / scores.len() as f64)
    }

    pub fn mean_seconds(&self) -> f64 {
        self.runs.iter().map(|r| r.seconds).sum::<f64>() / self.runs.len() as f64
    }
}

/// Runs every seed in parallel, then writes artifacts when `cfg.out_dir` is
/// set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let runs = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, seed))
        .collect::<Result<Vec<_>>>()?;
    let result = ExperimentResult {
        config: cfg.clone(),
        runs,
    };
    if let Some(dir) = &cfg.out_dir {
        write_artifacts(&result, dir)?;
    }
    Ok(result)
}

/// File name of one run's evaluation curve.
pub fn series_file(seed: u64) -> String {
    format!("seed_{seed}.csv")
}

pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const REPORT_FILE: &str = "report.txt";
pub const PLOT_FILE: &str = "curve.svg";

/// `run_seed,top5_score` rows followed by a `mean` row.
pub fn aggregate_csv(seeds: &[u64], series: &[EvalSeries]) -> Result<String> {
    let mut out = String::from("run_seed,top5_score\n");
    let mut total = 0.0;
    for (seed, s) in seeds.iter().zip(series) {
        let score = top5_score(s)?;
        total += score;
        writeln!(out, "{seed},{score}").expect("write to string");
    }
    writeln!(out, "mean,{}", total / series.len() as f64).expect("write to string");
    Ok(out)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Per-seed CSVs, the aggregate (when every run has five evaluations), a
/// timing and parameter report, and a smoothed SVG curve.
pub fn write_artifacts(result: &ExperimentResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for run in &result.runs {
        write_file(&dir.join(series_file(run.seed)), &run.series.to_csv())?;
    }
    let seeds: Vec<u64> = result.runs.iter().map(|r| r.seed).collect();
    let series: Vec<EvalSeries> = result.runs.iter().map(|r| r.series.clone()).collect();
    let aggregate = aggregate_csv(&seeds, &series);
    if let Ok(text) = &aggregate {
        write_file(&dir.join(AGGREGATE_FILE), text)?;
    }

    let cfg = &result.config;
    let mut report = String::new();
    writeln!(report, "algorithm: {}", cfg.algo).expect("write to string");
    writeln!(report, "environment: {}", cfg.env).expect("write to string");
    writeln!(report, "steps: {}", cfg.total_steps).expect("write to string");
    writeln!(report, "hidden: {:?}", cfg.agent.hidden).expect("write to string");
    if let Some(run) = result.runs.first() {
        writeln!(report, "parameters: {}", run.parameter_count).expect("write to string");
    }
    match result.metric() {
        Ok(m) => writeln!(report, "top5 mean: {m}").expect("write to string"),
        Err(e) => writeln!(report, "top5 mean: unavailable ({e})").expect("write to string"),
    }
    for run in &result.runs {
        writeln!(report, "seed {} wall-clock: {:.3} s", run.seed, run.seconds).expect("write to string");
    }
    write_file(&dir.join(REPORT_FILE), &report)?;

    let curve = Curve {
        label: cfg.algo.clone(),
        runs: series,
    };
    write_file(&dir.join(PLOT_FILE), &svg_curves(&[curve], cfg.smoothing, &cfg.env)?)?;
    Ok(())
}

/// Reads back every `seed_*.csv` in `dir`, in seed order.
pub fn load_runs(dir: &Path) -> Result<(Vec<u64>, Vec<EvalSeries>)> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(seed) = name
            .strip_prefix("seed_")
            .and_then(|s| s.strip_suffix(".csv"))
            .and_then(|s| s.parse::<u64>().ok())
        {
            found.push((seed, path));
        }
    }
    if found.is_empty() {
        return Err(Error::InsufficientData(format!("no seed_*.csv files in {}", dir.display())));
    }
    found.sort();
    let mut seeds = Vec::with_capacity(found.len());
    let mut series = Vec::with_capacity(found.len());
    for (seed, path) in found {
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        seeds.push(seed);
        series.push(EvalSeries::from_csv(&text)?);
    }
    Ok((seeds, series))
}

/// Recomputes the aggregate file from the stored per-seed curves.
pub fn recompute_aggregate(dir: &Path) -> Result<String> {
    let (seeds, series) = load_runs(dir)?;
    aggregate_csv(&seeds, &series)
}

/// One cell per (p, environment): the top-5 metric of `base` with its
/// dropout probability set to p. Writes `heatmap.csv` and, when every column
/// has a positive maximum, `heatmap_normalized.csv` under `base.out_dir`.
pub fn sweep_p(base: &ExperimentConfig, p_values: &[f64], envs: &[String]) -> Result<SweepTable> {
    if p_values.is_empty() || envs.is_empty() {
        return Err(Error::config("sweep needs at least one p value and one environment"));
    }
    let mut scores = vec![vec![0.0; envs.len()]; p_values.len()];
    for (row, &p) in p_values.iter().enumerate() {
        for (col, env) in envs.iter().enumerate() {
            let mut cfg = base.clone();
            cfg.env = env.clone();
            cfg.agent.dropout_p = p;
            cfg.out_dir = base.out_dir.as_ref().map(|d| d.join(format!("p{p}_{env}")));
            scores[row][col] = run_experiment(&cfg)?.metric()?;
        }
    }
    let table = SweepTable {
        p_values: p_values.to_vec(),
        envs: envs.to_vec(),
        scores,
    };
    if let Some(dir) = &base.out_dir {
        write_file(&dir.join("heatmap.csv"), &table.to_csv())?;
        if let Ok(norm) = normalize_sweep(&table) {
            write_file(&dir.join("heatmap_normalized.csv"), &norm.to_csv())?;
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub name: String,
    pub score: f64,
    pub seconds: f64,
    /// Wall-clock relative to the plain baseline of the same family.
    pub time_ratio: f64,
}

/// Runs each named variant under `base` and tabulates scores and relative
/// wall-clock. The last name is taken as the timing baseline.
pub fn ablate(base: &ExperimentConfig, names: &[&str]) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::with_capacity(names.len());
    for name in names {
        let mut cfg = base.clone();
        let mut agent = AgentConfig::preset(name)?;
        agent.hidden = base.agent.hidden.clone();
        agent.random_start_steps = base.agent.random_start_steps;
        agent.dropout_p = base.agent.dropout_p;
        cfg.agent = agent;
        cfg.algo = name.to_string();
        cfg.out_dir = base.out_dir.as_ref().map(|d| d.join(name));
        let result = run_experiment(&cfg)?;
        rows.push(AblationRow {
            name: name.to_string(),
            score: result.metric()?,
            seconds: result.mean_seconds(),
            time_ratio: 1.0,
        });
    }
    let baseline = rows.last().map_or(1.0, |r| r.seconds);
    for row in &mut rows {
        row.time_ratio = row.seconds / baseline;
    }
    if let Some(dir) = &base.out_dir {
        write_file(&dir.join("ablation.csv"), &ablation_csv(&rows))?;
    }
    Ok(rows)
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("algorithm,top5_score,seconds,time_ratio\n");
    for r in rows {
        writeln!(out, "{},{},{:.3},{:.3}", r.name, r.score, r.seconds, r.time_ratio).expect("write to string");
    }
    out
}

/// (name, state dim, action dim) of the four locomotion tasks used for
/// parameter counting.
pub const BENCHMARK_DIMS: [(&str, usize, usize); 4] =
    [("Ant", 28, 8), ("HalfCheetah", 26, 6), ("Hopper", 15, 3), ("Walker2D", 22, 6)];

/// Exact trainable-parameter count of agent `algo` on a task with the given
/// dimensions, target networks included.
pub fn parameter_count_for(algo: &str, state_dim: usize, action_dim: usize, hidden: &[usize]) -> Result<usize> {
    let mut cfg = AgentConfig::preset(algo)?;
    cfg.hidden = hidden.to_vec();
    let spec = EnvSpec {
        name: "synthetic",
        state_dim,
        action_dim,
        action_low: vec![-1.0; action_dim],
        action_high: vec![1.0; action_dim],
        horizon: 1,
        reward_note: "",
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    Ok(Agent::new(cfg, &spec, &mut rng)?.parameter_count())
}

/// Parameter counts in millions for `algos` across [`BENCHMARK_DIMS`], as a
/// CSV table.
pub fn parameter_table(algos: &[&str], hidden: &[usize]) -> Result<String> {
    let mut out = String::from("algorithm");
    for (name, _, _) in BENCHMARK_DIMS {
        write!(out, ",{name}").expect("write to string");
    }
    out.push('\n');
    for algo in algos {
        out.push_str(algo);
        for (_, s, a) in BENCHMARK_DIMS {
            let n = parameter_count_for(algo, s, a, hidden)?;
            write!(out, ",{:.3}M", n as f64 / 1e6).expect("write to string");
        }
        out.push('\n');
    }
    Ok(out)
}

/// Baseline used for relative timing: plain DDPG or SAC.
pub fn baseline_for(family: Family) -> &'static str {
    match family {
        Family::Ddpg => "ddpg",
        Family::Sac => "sac",
    }
}

/// Default directory for a run's artifacts.
pub fn default_out_dir(cfg: &ExperimentConfig) -> PathBuf {
    PathBuf::from("runs").join(format!("{}_{}", cfg.algo.to_ascii_lowercase(), cfg.env))
}
