use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mepg::agents::{Family, DDPG_ABLATIONS, SAC_ABLATIONS};
use mepg::analysis::architecture_sweep;
use mepg::harness::{
    ablate, ablation_csv, parameter_table, recompute_aggregate, run::default_out_dir, run_experiment, sweep_p,
    ExperimentConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "mepg", version, about = "Dropout-ensemble actor-critic experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent on one environment over several seeds.
    Train(Common),
    /// Top-5 scores over a grid of dropout probabilities and environments.
    SweepP {
        #[command(flatten)]
        common: Common,
        /// Dropout probabilities, each in [0, 1).
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
        values: Vec<f64>,
        /// Environments (columns of the heatmap); defaults to `--env`.
        #[arg(long, value_delimiter = ',')]
        envs: Vec<String>,
    },
    /// Every ablation variant of `--algo`'s family, with relative timing.
    Ablate(Common),
    /// Recompute the aggregate file of a finished run from its seed CSVs.
    Report {
        #[arg(long = "in")]
        dir: PathBuf,
    },
    /// Check that the regularized critic objective is an affine image of the
    /// deep-GP objective on random architectures.
    VerifyGp {
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional CSV with one row per architecture.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parameter counts, in millions, on the four locomotion task shapes.
    Params {
        #[arg(long, value_delimiter = ',', default_value = "256,256")]
        hidden: Vec<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    /// Hidden [64, 64], 100k steps, evaluation every 2,500 steps, 3 seeds.
    Desk,
    /// Hidden [256, 256], 1M steps, evaluation every 5,000 steps, 5 seeds.
    Full,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value = "me-ddpg")]
    algo: String,
    #[arg(long, default_value = "pendulum")]
    env: String,
    #[arg(long, value_enum, default_value = "desk")]
    profile: Profile,
    /// Flat `key = value` file applied before the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    steps: Option<u64>,
    /// Dropout probability.
    #[arg(long)]
    p: Option<f64>,
    /// Ablation switches such as +cdq, -tps, -du, -do, +fixent.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
    toggle: Vec<String>,
    #[arg(long)]
    eval_interval: Option<u64>,
    #[arg(long)]
    eval_episodes: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    random_start: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn build(&self) -> mepg::Result<ExperimentConfig> {
        let mut cfg = match self.profile {
            Profile::Desk => ExperimentConfig::desk(&self.algo, &self.env)?,
            Profile::Full => ExperimentConfig::full(&self.algo, &self.env)?,
        };
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        if let Some(seeds) = &self.seeds {
            cfg.seeds = seeds.clone();
        }
        if let Some(v) = self.steps {
            cfg.total_steps = v;
        }
        if let Some(v) = self.p {
            cfg.agent.dropout_p = v;
        }
        for t in &self.toggle {
            cfg.agent.apply_toggle(t)?;
        }
        if let Some(v) = self.eval_interval {
            cfg.eval_interval = v;
        }
        if let Some(v) = self.eval_episodes {
            cfg.eval_episodes = v;
        }
        if let Some(v) = &self.hidden {
            cfg.agent.hidden = v.clone();
        }
        if let Some(v) = self.random_start {
            cfg.agent.random_start_steps = v;
        }
        cfg.out_dir = Some(self.out.clone().unwrap_or_else(|| default_out_dir(&cfg)));
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> mepg::Result<()> {
    match cli.command {
        Command::Train(common) => {
            let cfg = common.build()?;
            let result = run_experiment(&cfg)?;
            for run in &result.runs {
                let best = run.series.means().into_iter().fold(f64::NEG_INFINITY, f64::max);
                println!("seed {}: best eval {best:.3} in {:.1} s", run.seed, run.seconds);
            }
            match result.metric() {
                Ok(m) => println!("top5 mean: {m:.3}"),
                Err(e) => println!("top5 mean unavailable: {e}"),
            }
            println!("parameters: {}", result.runs[0].parameter_count);
            println!("artifacts: {}", cfg.out_dir.expect("set by build").display());
        }
        Command::SweepP { common, values, envs } => {
            let cfg = common.build()?;
            let envs = if envs.is_empty() { vec![cfg.env.clone()] } else { envs };
            let table = sweep_p(&cfg, &values, &envs)?;
            print!("{}", table.to_csv());
            if let Err(e) = mepg::harness::normalize_sweep(&table) {
                println!("normalized table not written: {e}");
            }
        }
        Command::Ablate(common) => {
            let cfg = common.build()?;
            let names: &[&str] = match cfg.agent.family {
                Family::Ddpg => &DDPG_ABLATIONS,
                Family::Sac => &SAC_ABLATIONS,
            };
            let rows = ablate(&cfg, names)?;
            print!("{}", ablation_csv(&rows));
        }
        Command::Report { dir } => {
            let text = recompute_aggregate(&dir)?;
            print!("{text}");
            let stored = dir.join(mepg::harness::run::AGGREGATE_FILE);
            match fs::read_to_string(&stored) {
                Ok(existing) if existing == text => println!("matches {}", stored.display()),
                Ok(_) => println!("differs from {}", stored.display()),
                Err(_) => println!("no stored aggregate at {}", stored.display()),
            }
        }
        Command::VerifyGp { count, seed, out } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let results = architecture_sweep(count, &mut rng)?;
            let mut csv = String::from("sizes,p,slope,intercept,max_residual,control_residual\n");
            let mut worst: f64 = 0.0;
            let mut weakest_control = f64::INFINITY;
            for r in &results {
                let sizes = r.sizes.iter().map(usize::to_string).collect::<Vec<_>>().join("-");
                println!(
                    "{sizes:>12}  p={:.3}  slope={:.12}  intercept={:+.3e}  residual={:.3e}  control={:.3e}",
                    r.p, r.report.slope, r.report.intercept, r.report.max_residual, r.control_residual
                );
                writeln!(
                    csv,
                    "{sizes},{},{},{},{},{}",
                    r.p, r.report.slope, r.report.intercept, r.report.max_residual, r.control_residual
                )
                .expect("write to string");
                worst = worst.max(r.report.max_residual);
                weakest_control = weakest_control.min(r.control_residual);
            }
            println!("largest residual {worst:.3e}, smallest control residual {weakest_control:.3e}");
            if let Some(path) = out {
                fs::write(&path, csv).map_err(|e| mepg::Error::Io { path, source: e })?;
            }
        }
        Command::Params { hidden } => {
            print!("{}", parameter_table(&["me-ddpg", "me-sac", "td3", "sac", "ddpg"], &hidden)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
