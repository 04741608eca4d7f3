//! Experiment orchestration: frame loops, traces, summaries and sweeps.

pub mod run;
pub mod summary;
pub mod trace;

pub use run::{
    replay_ratio_eval, run, run_baseline, run_lydroo, sweep, verify_trace, with_axis, Algorithm, ReplayResult,
    RunOptions, Simulation, SweepAxis, SweepPoint,
};
pub use summary::{classify, summarize, RunSummary, Stability};
pub use trace::{load_trace, read_trace, save_trace, write_trace, TraceRecord};
