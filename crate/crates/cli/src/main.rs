use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use offload_core::harness::summary::{plot_series_csv, DEFAULT_WINDOW, PLOT_WINDOW};
use offload_core::harness::{
    load_trace, replay_ratio_eval, run, save_trace, summarize, sweep, Algorithm, RunOptions, SweepAxis,
};
use offload_core::oracles;
use offload_core::rng::{stream, Stream};
use offload_core::SimConfig;

#[derive(Parser)]
#[command(name = "offload", version, about = "Online computation offloading simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one algorithm and write trace, summary and plot series.
    Run {
        #[arg(long, default_value = "lydroo")]
        algorithm: Algorithm,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run independent experiments over one parameter.
    Sweep {
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value = "lydroo")]
        algorithm: Algorithm,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Replay the observations of a trace through a fresh LyDROO learner
    /// and report its objective relative to the recorded one.
    Replay {
        trace: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Frames at the end used for the reported median.
        #[arg(long, default_value_t = 500)]
        tail: usize,
        /// Write the per-frame ratio series here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a solver against its independent reference on random instances.
    OracleCheck {
        #[arg(long, value_enum)]
        module: OracleModule,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Summarize a trace file.
    Summarize {
        trace: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
    },
    /// Print the default configuration.
    Config,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// Configuration file (TOML); defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    frames: usize,
    /// Overrides the seed in the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Metrics window in frames.
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    window: usize,
    /// Skip wall-time measurement so traces are byte-reproducible.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleModule {
    Lambert,
    TauRatio,
    Resalloc,
    Lycd,
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<SimConfig> {
    let mut cfg = match path {
        Some(p) => SimConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => SimConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

impl Common {
    fn options(&self) -> RunOptions {
        RunOptions {
            frames: self.frames,
            measure_time: !self.no_timing,
        }
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { algorithm, common, out } => {
            let cfg = load_config(common.config.as_deref(), common.seed)?;
            let trace = run(&cfg, algorithm, common.options())?;
            let summary = summarize(&trace, common.window.min(trace.len()))?;
            fs::create_dir_all(&out)?;
            save_trace(out.join("trace.csv"), &trace)?;
            fs::write(out.join("summary.toml"), summary.to_toml()?)?;
            fs::write(out.join("plot.csv"), plot_series_csv(&trace, PLOT_WINDOW))?;
            fs::write(out.join("config.toml"), cfg.to_toml()?)?;
            print!("{}", summary.to_toml()?);
        }
        Command::Sweep {
            axis,
            values,
            algorithm,
            common,
            out,
        } => {
            let cfg = load_config(common.config.as_deref(), common.seed)?;
            let window = common.window.min(common.frames);
            let points = sweep(&cfg, algorithm, axis, &values, common.options(), window)?;
            #[derive(serde::Serialize)]
            struct SweepFile<'a> {
                axis: SweepAxis,
                algorithm: Algorithm,
                point: &'a [offload_core::harness::SweepPoint],
            }
            let text = toml::to_string(&SweepFile {
                axis,
                algorithm,
                point: &points,
            })?;
            fs::create_dir_all(&out)?;
            fs::write(out.join("sweep.toml"), &text)?;
            for p in &points {
                println!(
                    "value={} rate={:.3} max_power={:.4} stable={} growth={:.4}",
                    p.value,
                    p.summary.mean_weighted_rate,
                    p.summary.mean_power.iter().cloned().fold(0.0, f64::max),
                    p.summary.stability.stable,
                    p.summary.stability.relative_growth
                );
            }
        }
        Command::Replay {
            trace,
            config,
            seed,
            tail,
            out,
        } => {
            let records = load_trace(&trace).with_context(|| format!("reading trace {}", trace.display()))?;
            let mut cfg = load_config(config.as_deref(), seed)?;
            if config.is_none() && records[0].num_devices() != cfg.num_devices {
                cfg = SimConfig::with_devices(records[0].num_devices())?;
                if let Some(s) = seed {
                    cfg.seed = s;
                }
            }
            let r = replay_ratio_eval(&records, &cfg, tail)?;
            if let Some(path) = out {
                let mut s = String::from("t,ratio\n");
                for (k, v) in r.ratio.iter().enumerate() {
                    s.push_str(&format!("{},{}\n", k + 1, v));
                }
                fs::write(path, s)?;
            }
            let [q1, med, q3] = r.tail_quartiles;
            println!("frames={} tail={} median={med:.4} q1={q1:.4} q3={q3:.4}", r.ratio.len(), r.tail);
        }
        Command::OracleCheck { module, instances, seed } => oracle_check(module, instances, seed)?,
        Command::Summarize { trace, window } => {
            let records = load_trace(&trace).with_context(|| format!("reading trace {}", trace.display()))?;
            print!("{}", summarize(&records, window)?.to_toml()?);
        }
        Command::Config => print!("{}", SimConfig::default().to_toml()?),
    }
    Ok(())
}

fn oracle_check(module: OracleModule, instances: usize, seed: u64) -> Result<()> {
    let mut rng = stream(seed, Stream::Instances);
    if instances == 0 {
        bail!("need at least one instance");
    }
    let worst = |reports: &[oracles::OracleReport]| {
        reports
            .iter()
            .max_by(|a, b| a.gap.abs().total_cmp(&b.gap.abs()))
            .cloned()
            .expect("nonempty")
    };
    match module {
        OracleModule::Lambert => {
            let (x, r) = oracles::lambert_residual_grid(instances, 1e6)?;
            println!("points={instances} max_residual={r:e} at x={x:e}");
        }
        OracleModule::TauRatio => {
            let cfg = SimConfig::default();
            let reports = oracles::check_tau_ratio(&mut rng, &cfg, instances);
            let w = worst(&reports);
            println!("instances={instances} max_rel_gap={:e} ({})", w.gap.abs(), w.instance);
        }
        OracleModule::Resalloc => {
            let checks = oracles::check_solver(&mut rng, instances, 4, oracles::DEFAULT_GRID_RESOLUTION)?;
            let reports: Vec<_> = checks.iter().map(|c| c.report.clone()).collect();
            let w = worst(&reports);
            let infeasible = checks.iter().filter(|c| !c.feasible).count();
            println!(
                "instances={instances} max_abs_rel_gap={:e} ({}) infeasible={infeasible}",
                w.gap.abs(),
                w.instance
            );
        }
        OracleModule::Lycd => {
            let cfg = SimConfig::default();
            let reports = oracles::check_lycd(&mut rng, &cfg, instances)?;
            let ratios: Vec<f64> = reports.iter().map(|r| r.value / r.oracle).collect();
            let [q1, med, q3] = offload_core::harness::summary::quartiles(&ratios);
            println!("instances={instances} median_ratio={med:.5} q1={q1:.5} q3={q3:.5}");
        }
    }
    Ok(())
}
