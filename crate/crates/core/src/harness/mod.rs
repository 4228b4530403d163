//! Experiment orchestration: configuration, seeded runs with periodic
//! greedy evaluation, the top-5 metric, sweeps, ablations, parameter
//! counts, and CSV/SVG artifacts.

pub mod config;
pub mod metrics;
pub mod plot;
pub mod run;

pub use config::ExperimentConfig;
pub use metrics::{
    evaluate, mean_std, normalize_sweep, smooth, top5_metric, top5_score, EvalRecord, EvalSeries, SweepTable,
};
pub use plot::{svg_curves, Curve};
pub use run::{
    ablate, ablation_csv, aggregate_csv, load_runs, parameter_count_for, parameter_table, recompute_aggregate,
    run_experiment, run_seed, sweep_p, write_artifacts, AblationRow, ExperimentResult, RunOutcome, RunStreams,
    BENCHMARK_DIMS,
};
