//! Browser bindings. Every entry point takes and returns JSON text so the
//! page needs no generated glue beyond the three exported functions.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use offload_core::env::{mean_channel_gains, FrameObservation};
use offload_core::harness::summary::moving_average;
use offload_core::harness::{run, summarize, with_axis, Algorithm, RunOptions, SweepAxis};
use offload_core::oracles::enumerate_offloading;
use offload_core::resalloc::{optimal_tau_ratio, solve_detailed};
use offload_core::{OffloadDecision, SimConfig};

/// Largest simulation the page may request.
pub const MAX_FRAMES: usize = 20_000;
/// Largest device count for which the allocation demo also enumerates.
pub const MAX_ENUMERATED: usize = 10;

#[derive(Debug, Deserialize)]
pub struct AllocateRequest {
    /// Data queues [Mbit].
    pub q: Vec<f64>,
    /// Virtual energy queues.
    pub y: Vec<f64>,
    /// Channel gain as a multiple of each device's mean gain.
    pub h_scale: Vec<f64>,
    /// Offloading bits, 1 = offload.
    pub x: Vec<u8>,
    #[serde(default = "default_v")]
    pub v: f64,
}

fn default_v() -> f64 {
    20.0
}

#[derive(Debug, Serialize)]
pub struct AllocateResponse {
    pub tau: Vec<f64>,
    pub freq_mhz: Vec<f64>,
    pub energy: Vec<f64>,
    pub rate: Vec<f64>,
    pub objective: f64,
    pub mu: f64,
    /// Best decision found by enumeration, when N is small enough.
    pub best_x: Option<String>,
    pub best_objective: Option<f64>,
}

fn config_for(n: usize, v: f64) -> Result<SimConfig, String> {
    let base = SimConfig::with_devices(n).map_err(|e| e.to_string())?;
    with_axis(&base, SweepAxis::V, v).map_err(|e| e.to_string())
}

pub fn allocate_json(request: &str) -> Result<String, String> {
    let req: AllocateRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let n = req.q.len();
    if n == 0 || [req.y.len(), req.h_scale.len(), req.x.len()].iter().any(|&m| m != n) {
        return Err("q, y, h_scale and x must have the same non-zero length".into());
    }
    let cfg = config_for(n, req.v)?;
    let h = mean_channel_gains(&cfg).iter().zip(&req.h_scale).map(|(m, s)| m * s).collect();
    let obs = FrameObservation {
        t: 1,
        h,
        q: req.q,
        y: req.y,
    };
    obs.validate(&cfg).map_err(|e| e.to_string())?;
    let x = OffloadDecision::from_bits(&req.x);
    let sol = solve_detailed(&x, &obs, &cfg).map_err(|e| e.to_string())?;
    let (best_x, best_objective) = if n <= MAX_ENUMERATED {
        let (bx, bg) = enumerate_offloading(&obs, &cfg).map_err(|e| e.to_string())?;
        (Some(bx.to_string()), Some(bg))
    } else {
        (None, None)
    };
    let a = sol.allocation;
    to_json(&AllocateResponse {
        tau: a.tau,
        freq_mhz: a.freq.iter().map(|f| f / 1e6).collect(),
        energy: a.energy,
        rate: a.rate,
        objective: sol.objective,
        mu: sol.dual.mu,
        best_x,
        best_objective,
    })
}

#[derive(Debug, Deserialize)]
pub struct SimulateRequest {
    pub algorithm: Algorithm,
    pub devices: usize,
    /// Mean arrival rate per device [Mbps].
    pub lambda: f64,
    /// Average power threshold [W].
    pub gamma: f64,
    pub v: f64,
    pub frames: usize,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct SimulateResponse {
    /// Frame numbers of the sampled points.
    pub t: Vec<usize>,
    pub total_queue: Vec<f64>,
    pub weighted_rate: Vec<f64>,
    pub mean_power: Vec<f64>,
    pub stable: bool,
    pub final_total_queue: f64,
    pub window_rate: f64,
    pub window_max_power: f64,
}

/// Points per returned series.
const SERIES_POINTS: usize = 400;

pub fn simulate_json(request: &str) -> Result<String, String> {
    let req: SimulateRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    if req.frames == 0 || req.frames > MAX_FRAMES {
        return Err(format!("frames must be in 1..={MAX_FRAMES}"));
    }
    let mut cfg = config_for(req.devices, req.v)?;
    cfg = with_axis(&cfg, SweepAxis::Lambda, req.lambda).map_err(|e| e.to_string())?;
    cfg = with_axis(&cfg, SweepAxis::Gamma, req.gamma).map_err(|e| e.to_string())?;
    cfg.seed = req.seed;
    // no clock in the browser sandbox
    let trace = run(&cfg, req.algorithm, RunOptions::untimed(req.frames)).map_err(|e| e.to_string())?;
    let window = (req.frames / 5).max(1);
    let summary = summarize(&trace, window).map_err(|e| e.to_string())?;
    let smooth = (req.frames / 50).clamp(1, 200);
    let total: Vec<f64> = trace.iter().map(|r| r.total_queue()).collect();
    let rate: Vec<f64> = trace.iter().map(|r| r.weighted_rate).collect();
    let power: Vec<f64> = trace.iter().map(|r| r.power.iter().sum::<f64>() / r.power.len() as f64).collect();
    let (total, rate, power) = (
        moving_average(&total, smooth),
        moving_average(&rate, smooth),
        moving_average(&power, smooth),
    );
    let step = req.frames.div_ceil(SERIES_POINTS);
    let idx: Vec<usize> = (0..req.frames).step_by(step).chain([req.frames - 1]).collect();
    let pick = |v: &[f64]| idx.iter().map(|&k| v[k]).collect::<Vec<_>>();
    to_json(&SimulateResponse {
        t: idx.iter().map(|k| k + 1).collect(),
        total_queue: pick(&total),
        weighted_rate: pick(&rate),
        mean_power: pick(&power),
        stable: summary.stability.stable,
        final_total_queue: summary.final_total_queue,
        window_rate: summary.mean_weighted_rate,
        window_max_power: summary.mean_power.iter().cloned().fold(0.0, f64::max),
    })
}

#[derive(Debug, Deserialize)]
pub struct CurveRequest {
    /// Energy queue Y.
    pub y: f64,
    /// Channel gain over the mean gain of device `device`.
    pub h_scale: f64,
    #[serde(default)]
    pub device: usize,
    pub mu_min: f64,
    pub mu_max: f64,
    pub points: usize,
}

#[derive(Debug, Serialize)]
pub struct CurveResponse {
    pub mu: Vec<f64>,
    pub ratio: Vec<f64>,
    pub full_power: Vec<bool>,
    pub max_rate: f64,
}

/// Optimal rate-to-time ratio as a function of the time price μ.
pub fn tau_ratio_curve_json(request: &str) -> Result<String, String> {
    let req: CurveRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    if !(req.mu_min > 0.0 && req.mu_max > req.mu_min) || !(2..=2000).contains(&req.points) {
        return Err("need 0 < mu_min < mu_max and 2..=2000 points".into());
    }
    if !(req.y >= 0.0 && req.h_scale > 0.0) {
        return Err("y must be non-negative and h_scale positive".into());
    }
    let cfg = SimConfig::default();
    if req.device >= cfg.num_devices {
        return Err(format!("device must be below {}", cfg.num_devices));
    }
    let h = mean_channel_gains(&cfg)[req.device] * req.h_scale;
    let (lo, hi) = (req.mu_min.ln(), req.mu_max.ln());
    let mu: Vec<f64> = (0..req.points)
        .map(|k| (lo + (hi - lo) * k as f64 / (req.points - 1) as f64).exp())
        .collect();
    let entries: Vec<_> = mu.iter().map(|&m| optimal_tau_ratio(m, req.y, h, req.device, &cfg)).collect();
    to_json(&CurveResponse {
        max_rate: entries[0].max_rate,
        ratio: entries.iter().map(|e| e.ratio).collect(),
        full_power: entries.iter().map(|e| e.full_power).collect(),
        mu,
    })
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

/// Solve the resource allocation for a fixed decision.
#[wasm_bindgen]
pub fn allocate(request: &str) -> Result<String, JsError> {
    js(allocate_json(request))
}

/// Run a short simulation and return smoothed series.
#[wasm_bindgen]
pub fn simulate(request: &str) -> Result<String, JsError> {
    js(simulate_json(request))
}

#[wasm_bindgen]
pub fn tau_ratio_curve(request: &str) -> Result<String, JsError> {
    js(tau_ratio_curve_json(request))
}
