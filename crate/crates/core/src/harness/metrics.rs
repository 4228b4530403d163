use std::fmt::Write as _;

use crate::agents::Agent;
use crate::envs::Env;
use crate::error::{Error, Result};

/// Undiscounted returns of `episodes` greedy rollouts, with the environment
/// reseeded to `seed` first so repeated calls see the same initial states.
/// Returns the mean and the population standard deviation.
pub fn evaluate(agent: &Agent, env: &mut dyn Env, episodes: usize, seed: u64) -> Result<(f64, f64)> {
    if episodes == 0 {
        return Err(Error::config("evaluation needs at least one episode"));
    }
    env.seed(seed);
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut obs = env.reset();
        let mut total = 0.0;
        loop {
            let action = agent.greedy_action(&obs)?;
            let out = env.step(&action)?;
            total += out.reward;
            if out.done || out.terminal {
                break;
            }
            obs = out.observation;
        }
        returns.push(total);
    }
    Ok(mean_std(&returns))
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRecord {
    pub step: u64,
    pub mean_return: f64,
    pub std_return: f64,
}

/// Evaluation curve of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalSeries {
    records: Vec<EvalRecord>,
}

pub const SERIES_HEADER: &str = "step,mean_return,std_return";

impl EvalSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: EvalRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.step <= last.step {
                return Err(Error::config(format!(
                    "evaluation step {} does not follow {}",
                    record.step, last.step
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[EvalRecord] {
        &self.records
    }

    pub fn means(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mean_return).collect()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(SERIES_HEADER);
        out.push('\n');
        for r in &self.records {
            writeln!(out, "{},{},{}", r.step, r.mean_return, r.std_return).expect("write to string");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(SERIES_HEADER) {
            return Err(Error::Parse(format!("expected header `{SERIES_HEADER}`")));
        }
        let mut series = Self::new();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = || Error::Parse(format!("row {}: `{line}`", n + 1));
            let mut cells = line.split(',');
            let mut next = || cells.next().ok_or_else(bad);
            let step = next()?.trim().parse().map_err(|_| bad())?;
            let mean_return = next()?.trim().parse().map_err(|_| bad())?;
            let std_return = next()?.trim().parse().map_err(|_| bad())?;
            series.push(EvalRecord {
                step,
                mean_return,
                std_return,
            })?;
        }
        Ok(series)
    }
}

/// Average of the five largest evaluation means of one run.
pub fn top5_score(series: &EvalSeries) -> Result<f64> {
    if series.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "top-5 score needs at least 5 evaluations, run has {}",
            series.len()
        )));
    }
    let mut means = series.means();
    means.sort_by(|a, b| b.total_cmp(a));
    Ok(means[..5].iter().sum::<f64>() / 5.0)
}

/// Per-run top-5 scores, then their mean across runs.
pub fn top5_metric(runs: &[EvalSeries]) -> Result<f64> {
    if runs.is_empty() {
        return Err(Error::InsufficientData("no runs".into()));
    }
    let scores = runs.iter().map(top5_score).collect::<Result<Vec<_>>>()?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Scores indexed by dropout probability (rows) and environment (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub p_values: Vec<f64>,
    pub envs: Vec<String>,
    /// `scores[row][col]`.
    pub scores: Vec<Vec<f64>>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p");
        for env in &self.envs {
            out.push(',');
            out.push_str(env);
        }
        out.push('\n');
        for (p, row) in self.p_values.iter().zip(&self.scores) {
            write!(out, "{p}").expect("write to string");
            for v in row {
                write!(out, ",{v}").expect("write to string");
            }
            out.push('\n');
        }
        out
    }
}

/// Divides each environment column by its maximum, so the best `p` scores 1.
/// A column whose maximum is not positive cannot be normalized this way.
pub fn normalize_sweep(table: &SweepTable) -> Result<SweepTable> {
    if table.p_values.is_empty() || table.envs.is_empty() {
        return Err(Error::InsufficientData("empty sweep".into()));
    }
    if table.scores.len() != table.p_values.len() || table.scores.iter().any(|r| r.len() != table.envs.len()) {
        return Err(Error::config("sweep table is ragged"));
    }
    let mut out = table.clone();
    for (col, env) in table.envs.iter().enumerate() {
        let max = table.scores.iter().map(|r| r[col]).fold(f64::NEG_INFINITY, f64::max);
        if !(max > 0.0) {
            return Err(Error::UnsupportedNormalization {
                column: env.clone(),
                max,
            });
        }
        for row in out.scores.iter_mut() {
            row[col] /= max;
        }
    }
    Ok(out)
}

/// `y'₀ = y₀`, `y'ₖ = f·y'ₖ₋₁ + (1 − f)·yₖ`.
pub fn smooth(values: &[f64], factor: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&factor) {
        return Err(Error::config(format!("smoothing factor {factor} outside [0, 1)")));
    }
    let mut out = Vec::with_capacity(values.len());
    for (k, &v) in values.iter().enumerate() {
        out.push(if k == 0 { v } else { factor * out[k - 1] + (1.0 - factor) * v });
    }
    Ok(out)
}
