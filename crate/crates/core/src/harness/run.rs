//! Frame loops for LyDROO and the baselines, replay evaluation and sweeps.

use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::summary::{median, quartiles, summarize, RunSummary};
use super::trace::TraceRecord;
use crate::actor::Actor;
use crate::baselines::{lycd_solve, myopic_solve, EnergyLedger};
use crate::config::SimConfig;
use crate::env::{frame_outcome, sample_arrivals, sample_channel, update_queues, ArrivalState, FrameObservation, QueueState};
use crate::error::{OffloadError, Result};
use crate::resalloc::{objective_of, OffloadDecision, ResourceAllocation};
use crate::rng::RunStreams;
use crate::sched::{critic_select, per_frame_weights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Lydroo,
    Lycd,
    Myopic,
}

impl FromStr for Algorithm {
    type Err = OffloadError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lydroo" => Ok(Algorithm::Lydroo),
            "lycd" => Ok(Algorithm::Lycd),
            "myopic" => Ok(Algorithm::Myopic),
            other => Err(OffloadError::InvalidConfig(format!("unknown algorithm {other:?}"))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Lydroo => "lydroo",
            Algorithm::Lycd => "lycd",
            Algorithm::Myopic => "myopic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub frames: usize,
    /// Record action-generation wall time. Off gives byte-identical traces
    /// across runs and is required where no clock is available.
    pub measure_time: bool,
}

impl RunOptions {
    pub fn new(frames: usize) -> Self {
        Self {
            frames,
            measure_time: true,
        }
    }

    pub fn untimed(frames: usize) -> Self {
        Self {
            frames,
            measure_time: false,
        }
    }
}

struct Action {
    x: OffloadDecision,
    y: ResourceAllocation,
    objective: f64,
    candidates: usize,
    chosen: usize,
}

enum Policy {
    Lydroo(Box<Actor>),
    Lycd,
    Myopic(EnergyLedger),
}

/// Stateful simulation of one run, advanced a frame at a time.
pub struct Simulation {
    cfg: SimConfig,
    streams: RunStreams,
    policy: Policy,
    queues: QueueState,
    arrivals: ArrivalState,
    t: usize,
    measure_time: bool,
}

impl Simulation {
    pub fn new(cfg: &SimConfig, algorithm: Algorithm, measure_time: bool) -> Result<Self> {
        cfg.validate()?;
        let mut streams = RunStreams::new(cfg.seed);
        let policy = match algorithm {
            Algorithm::Lydroo => Policy::Lydroo(Box::new(Actor::new(cfg, &mut streams.init))),
            Algorithm::Lycd => Policy::Lycd,
            Algorithm::Myopic => Policy::Myopic(EnergyLedger::new(cfg.num_devices)),
        };
        let arrivals = ArrivalState::initial(&mut streams.arrivals, cfg);
        Ok(Self {
            cfg: cfg.clone(),
            streams,
            policy,
            queues: QueueState::empty(cfg.num_devices),
            arrivals,
            t: 0,
            measure_time,
        })
    }

    pub fn queues(&self) -> &QueueState {
        &self.queues
    }

    pub fn frame(&self) -> usize {
        self.t
    }

    pub fn actor(&self) -> Option<&Actor> {
        match &self.policy {
            Policy::Lydroo(a) => Some(a),
            _ => None,
        }
    }

    /// Advance one frame and return its record.
    pub fn step(&mut self) -> Result<TraceRecord> {
        self.t += 1;
        let t = self.t;
        let cfg = &self.cfg;
        let h = sample_channel(&mut self.streams.channel, cfg);
        let obs = self.queues.observe(t, h);
        let start = self.measure_time.then(Instant::now);
        let action = match &mut self.policy {
            Policy::Lydroo(actor) => {
                let p = actor.propose(&obs, cfg, &mut self.streams.quantizer)?;
                let best = critic_select(&p.candidates, &obs, cfg)?;
                actor.record_choice(p.features, &best.x, best.index);
                Action {
                    candidates: p.candidates.len(),
                    chosen: best.index,
                    x: best.x,
                    y: best.y,
                    objective: best.objective,
                }
            }
            Policy::Lycd => {
                let best = lycd_solve(&obs, cfg)?;
                Action {
                    x: best.x,
                    y: best.y,
                    objective: best.objective,
                    candidates: 1,
                    chosen: 0,
                }
            }
            Policy::Myopic(ledger) => {
                let d = myopic_solve(&obs, ledger, cfg)?;
                let objective = objective_of(&d.x, &d.y, &obs, &per_frame_weights(&obs, cfg), cfg)?;
                Action {
                    x: d.x,
                    y: d.y,
                    objective,
                    candidates: 1,
                    chosen: 0,
                }
            }
        };
        let wall_ms = start.map_or(0.0, |s| s.elapsed().as_secs_f64() * 1e3);
        let outcome = frame_outcome(&action.x, &action.y, &obs.h, cfg)?;
        match &mut self.policy {
            Policy::Lydroo(actor) => {
                actor.maybe_train(t, &mut self.streams.batch)?;
            }
            Policy::Myopic(ledger) => ledger.record(&outcome.power, cfg)?,
            Policy::Lycd => {}
        }
        let (arrived, next_state) = sample_arrivals(&mut self.streams.arrivals, cfg, self.arrivals);
        self.arrivals = next_state;
        self.queues = update_queues(&self.queues, &outcome, &arrived, cfg)?;
        Ok(TraceRecord {
            t,
            h: obs.h,
            arrivals: arrived,
            q: obs.q,
            y: obs.y,
            x: action.x.bits().map(u8::from).collect(),
            tau: action.y.tau,
            freq: action.y.freq,
            energy_offload: action.y.energy,
            rate: outcome.rate,
            power: outcome.power,
            weighted_rate: outcome.weighted_rate,
            objective: action.objective,
            candidates: action.candidates,
            chosen: action.chosen,
            wall_ms,
        })
    }
}

pub fn run(cfg: &SimConfig, algorithm: Algorithm, opts: RunOptions) -> Result<Vec<TraceRecord>> {
    let mut sim = Simulation::new(cfg, algorithm, opts.measure_time)?;
    (0..opts.frames).map(|_| sim.step()).collect()
}

pub fn run_lydroo(cfg: &SimConfig, opts: RunOptions) -> Result<Vec<TraceRecord>> {
    run(cfg, Algorithm::Lydroo, opts)
}

pub fn run_baseline(cfg: &SimConfig, which: Algorithm, opts: RunOptions) -> Result<Vec<TraceRecord>> {
    if which == Algorithm::Lydroo {
        return Err(OffloadError::InvalidConfig("lydroo is not a baseline".into()));
    }
    run(cfg, which, opts)
}

/// Recompute the queues from recorded work, energy and arrivals and check
/// they match the trace exactly.
pub fn verify_trace(trace: &[TraceRecord], cfg: &SimConfig) -> Result<()> {
    for pair in trace.windows(2) {
        let (r, next) = (&pair[0], &pair[1]);
        let q = QueueState {
            data: r.q.clone(),
            energy: r.y.clone(),
        };
        let outcome = crate::env::FrameOutcome {
            processed: r.rate.iter().map(|v| v * cfg.frame_duration).collect(),
            rate: r.rate.clone(),
            power: r.power.clone(),
            weighted_rate: r.weighted_rate,
        };
        let expect = update_queues(&q, &outcome, &r.arrivals, cfg)?;
        if expect.data != next.q || expect.energy != next.y {
            return Err(OffloadError::InvariantViolation(format!(
                "queues at frame {} do not follow from frame {}",
                next.t, r.t
            )));
        }
    }
    Ok(())
}

/// Per-frame ratios of a replay through LyDROO.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayResult {
    pub ratio: Vec<f64>,
    /// Median over the final `tail` frames.
    pub tail_median: f64,
    pub tail_quartiles: [f64; 3],
    pub tail: usize,
}

/// Feed the observations of a reference trace through a fresh LyDROO
/// learner (no queue feedback) and compare its objective with the
/// recorded one, frame by frame.
pub fn replay_ratio_eval(trace: &[TraceRecord], cfg: &SimConfig, tail: usize) -> Result<ReplayResult> {
    if trace.is_empty() {
        return Err(OffloadError::Trace("empty trace".into()));
    }
    if trace[0].num_devices() != cfg.num_devices {
        return Err(OffloadError::Trace(format!(
            "trace has {} devices, config {}",
            trace[0].num_devices(),
            cfg.num_devices
        )));
    }
    let mut streams = RunStreams::new(cfg.seed);
    let mut actor = Actor::new(cfg, &mut streams.init);
    let mut ratio = Vec::with_capacity(trace.len());
    for (k, r) in trace.iter().enumerate() {
        let t = k + 1;
        let obs = FrameObservation {
            t,
            h: r.h.clone(),
            q: r.q.clone(),
            y: r.y.clone(),
        };
        let p = actor.propose(&obs, cfg, &mut streams.quantizer)?;
        let best = critic_select(&p.candidates, &obs, cfg)?;
        actor.record_choice(p.features, &best.x, best.index);
        actor.maybe_train(t, &mut streams.batch)?;
        ratio.push(if r.objective > 0.0 { best.objective / r.objective } else { 1.0 });
    }
    let tail = tail.min(ratio.len());
    let last = &ratio[ratio.len() - tail..];
    Ok(ReplayResult {
        tail_median: median(last),
        tail_quartiles: quartiles(last),
        tail,
        ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Lambda,
    Gamma,
    V,
    N,
}

impl FromStr for SweepAxis {
    type Err = OffloadError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lambda" => Ok(SweepAxis::Lambda),
            "gamma" => Ok(SweepAxis::Gamma),
            "v" => Ok(SweepAxis::V),
            "n" => Ok(SweepAxis::N),
            other => Err(OffloadError::InvalidConfig(format!("unknown sweep axis {other:?}"))),
        }
    }
}

/// Copy of `template` with one parameter replaced.
pub fn with_axis(template: &SimConfig, axis: SweepAxis, value: f64) -> Result<SimConfig> {
    let mut file = template.to_file();
    let n = template.num_devices;
    match axis {
        SweepAxis::Lambda => file.arrivals.rate = vec![value; n].into(),
        SweepAxis::Gamma => file.power_threshold = vec![value; n].into(),
        SweepAxis::V => file.penalty_weight = value,
        SweepAxis::N => {
            if !(value >= 1.0 && value.fract() == 0.0) {
                return Err(OffloadError::InvalidConfig(format!("device count must be a positive integer, got {value}")));
            }
            let n = value as usize;
            let base = SimConfig::with_devices(n)?.to_file();
            // per-device vectors follow the new size; scalars come from the template
            file = crate::config::ConfigFile {
                num_devices: n,
                max_frequency: template.max_frequency[0].into(),
                max_power: template.max_power[0].into(),
                power_threshold: template.power_threshold[0].into(),
                rate_weight: base.rate_weight,
                distance: base.distance,
                arrivals: crate::config::ArrivalModel {
                    rate: template.arrival_rate[0].into(),
                    ..template.arrivals.clone()
                },
                ..file
            };
        }
    }
    SimConfig::from_file(file)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub summary: RunSummary,
}

/// Independent runs, one per value, executed on separate threads.
pub fn sweep(
    template: &SimConfig,
    algorithm: Algorithm,
    axis: SweepAxis,
    values: &[f64],
    opts: RunOptions,
    window: usize,
) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(OffloadError::InvalidConfig("sweep needs at least one value".into()));
    }
    let configs: Vec<SimConfig> = values.iter().map(|&v| with_axis(template, axis, v)).collect::<Result<_>>()?;
    std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| s.spawn(move || run(cfg, algorithm, opts).and_then(|tr| summarize(&tr, window))))
            .collect();
        handles
            .into_iter()
            .zip(values)
            .map(|(h, &value)| {
                let summary = h.join().expect("sweep worker panicked")?;
                Ok(SweepPoint { value, summary })
            })
            .collect()
    })
}
