//! Random environment and physical model: fading channels, task arrivals,
//! computation/energy outcomes of an action, and queue dynamics.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::config::{ArrivalKind, SimConfig, SPEED_OF_LIGHT};
use crate::error::{OffloadError, Result};
use crate::resalloc::{OffloadDecision, ResourceAllocation};

/// Per-frame input to the decision makers: channel gains and queue backlogs.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameObservation {
    pub t: usize,
    /// Channel power gain per device (dimensionless).
    pub h: Vec<f64>,
    /// Data queue backlog [Mbit].
    pub q: Vec<f64>,
    /// Virtual energy queue (already ν-scaled).
    pub y: Vec<f64>,
}

impl FrameObservation {
    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn validate(&self, cfg: &SimConfig) -> Result<()> {
        let n = cfg.num_devices;
        for (got, _) in [(self.h.len(), "h"), (self.q.len(), "Q"), (self.y.len(), "Y")] {
            if got != n {
                return Err(OffloadError::ShapeMismatch { expected: n, got });
            }
        }
        if self.h.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(OffloadError::ContractViolation("channel gains must be positive".into()));
        }
        if self.q.iter().chain(&self.y).any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(OffloadError::ContractViolation("queues must be non-negative".into()));
        }
        Ok(())
    }
}

/// Physical result of executing one joint action.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    /// Bits processed D_i [Mbit].
    pub processed: Vec<f64>,
    /// Computation rate r_i [Mbps].
    pub rate: Vec<f64>,
    /// Average power e_i [W].
    pub power: Vec<f64>,
    /// Σ c_i r_i [Mbps].
    pub weighted_rate: f64,
}

/// Data queues [Mbit] and virtual energy queues.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueState {
    pub data: Vec<f64>,
    pub energy: Vec<f64>,
}

impl QueueState {
    pub fn empty(n: usize) -> Self {
        Self {
            data: vec![0.0; n],
            energy: vec![0.0; n],
        }
    }

    pub fn observe(&self, t: usize, h: Vec<f64>) -> FrameObservation {
        FrameObservation {
            t,
            h,
            q: self.data.clone(),
            y: self.energy.clone(),
        }
    }
}

/// Average channel gain under the free-space style path-loss model.
pub fn mean_channel_gain(distance: f64, cfg: &SimConfig) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(OffloadError::Domain(format!(
            "path loss is singular at distance {distance}"
        )));
    }
    let pl = &cfg.path_loss;
    let ratio = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * pl.carrier_frequency * distance);
    Ok(pl.antenna_gain * ratio.powf(pl.exponent))
}

pub fn mean_channel_gains(cfg: &SimConfig) -> Vec<f64> {
    cfg.distance
        .iter()
        .map(|&d| mean_channel_gain(d, cfg).expect("validated distances are positive"))
        .collect()
}

/// Draw one Rician block-fading realization per device.
///
/// `h = h̄ · |√ρ + √(1−ρ)·g|²` with `g` standard complex Gaussian, so the
/// deterministic line-of-sight part carries `ρ·h̄` and `E[h] = h̄`.
pub fn sample_channel<R: Rng + ?Sized>(rng: &mut R, cfg: &SimConfig) -> Vec<f64> {
    let los = cfg.rician_los_fraction.sqrt();
    let scatter = ((1.0 - cfg.rician_los_fraction) / 2.0).sqrt();
    mean_channel_gains(cfg)
        .into_iter()
        .map(|mean| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let a = los + scatter * re;
            let b = scatter * im;
            (mean * (a * a + b * b)).max(f64::MIN_POSITIVE)
        })
        .collect()
}

/// State of the arrival process between frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalState {
    Iid,
    OnOff { on: bool },
}

impl ArrivalState {
    /// Initial state; the ON-OFF chain starts from its stationary law.
    pub fn initial<R: Rng + ?Sized>(rng: &mut R, cfg: &SimConfig) -> Self {
        match cfg.arrivals.kind {
            ArrivalKind::IidExponential => ArrivalState::Iid,
            ArrivalKind::MarkovOnoff => {
                let u: f64 = rng.random();
                ArrivalState::OnOff {
                    on: u < cfg.arrivals.stationary_on(),
                }
            }
        }
    }
}

fn exponential<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    Exp::new(1.0 / mean).expect("positive rate").sample(rng)
}

/// Task data arriving during one frame [Mbit], and the next process state.
pub fn sample_arrivals<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &SimConfig,
    state: ArrivalState,
) -> (Vec<f64>, ArrivalState) {
    let t = cfg.frame_duration;
    match state {
        ArrivalState::Iid => {
            let a = cfg.arrival_rate.iter().map(|&l| exponential(rng, l * t)).collect();
            (a, state)
        }
        ArrivalState::OnOff { on } => {
            let a = cfg
                .arrival_rate
                .iter()
                .map(|&l| {
                    if on {
                        exponential(rng, cfg.arrivals.on_state_mean(l) * t)
                    } else {
                        0.0
                    }
                })
                .collect();
            let row = cfg.arrivals.transition[on as usize];
            let u: f64 = rng.random();
            (a, ArrivalState::OnOff { on: u < row[1] })
        }
    }
}

/// Local computation rate [Mbps] at CPU frequency `freq_hz`.
pub fn local_rate(freq_hz: f64, cfg: &SimConfig) -> f64 {
    freq_hz * 1e-6 / cfg.cycles_per_bit
}

/// Local computing power κ f³ [W].
pub fn local_power(freq_hz: f64, cfg: &SimConfig) -> f64 {
    cfg.kappa * freq_hz * freq_hz * freq_hz
}

/// Offloading rate [Mbps] for time share `tau` and per-frame energy `energy`.
pub fn offload_rate(tau: f64, energy: f64, h: f64, cfg: &SimConfig) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    cfg.bandwidth_mhz() * tau / cfg.comm_overhead * (energy * h / (tau * cfg.noise_power)).ln_1p()
        / std::f64::consts::LN_2
}

/// Evaluate rates and powers of the joint action `(x, y)`.
pub fn frame_outcome(
    x: &OffloadDecision,
    y: &ResourceAllocation,
    h: &[f64],
    cfg: &SimConfig,
) -> Result<FrameOutcome> {
    let n = cfg.num_devices;
    for got in [x.len(), y.tau.len(), y.freq.len(), y.energy.len(), y.rate.len(), h.len()] {
        if got != n {
            return Err(OffloadError::ShapeMismatch { expected: n, got });
        }
    }
    let negative = y
        .tau
        .iter()
        .chain(&y.freq)
        .chain(&y.energy)
        .chain(&y.rate)
        .any(|v| *v < 0.0 || v.is_nan());
    if negative {
        return Err(OffloadError::ContractViolation(
            "allocation entries must be non-negative".into(),
        ));
    }
    let mut rate = vec![0.0; n];
    let mut power = vec![0.0; n];
    for i in 0..n {
        if x.offloads(i) {
            if y.tau[i] > 0.0 {
                rate[i] = offload_rate(y.tau[i], y.energy[i], h[i], cfg);
                power[i] = y.energy[i];
            }
        } else {
            rate[i] = local_rate(y.freq[i], cfg);
            power[i] = local_power(y.freq[i], cfg);
        }
    }
    let processed = rate.iter().map(|r| r * cfg.frame_duration).collect();
    let weighted_rate = rate.iter().zip(&cfg.rate_weight).map(|(r, c)| r * c).sum();
    Ok(FrameOutcome {
        processed,
        rate,
        power,
        weighted_rate,
    })
}

/// Relative slack allowed on data causality before it counts as a solver bug.
const CAUSALITY_SLACK: f64 = 1e-9;

/// Apply the processed work, the energy use and the new arrivals.
///
/// `D ≤ Q` is guaranteed by the solvers up to rounding; an excess within
/// [`CAUSALITY_SLACK`] is clamped, anything larger is reported.
pub fn update_queues(
    queues: &QueueState,
    outcome: &FrameOutcome,
    arrivals: &[f64],
    cfg: &SimConfig,
) -> Result<QueueState> {
    let n = cfg.num_devices;
    let mut next = QueueState::empty(n);
    for i in 0..n {
        let q = queues.data[i];
        let d = outcome.processed[i];
        if d > q * (1.0 + CAUSALITY_SLACK) + 1e-12 {
            return Err(OffloadError::InvariantViolation(format!(
                "device {i} processed {d} Mbit with only {q} Mbit queued"
            )));
        }
        next.data[i] = q - d.min(q) + arrivals[i];
        let nu = cfg.energy_scale;
        next.energy[i] =
            (queues.energy[i] + nu * outcome.power[i] - nu * cfg.power_threshold[i]).max(0.0);
    }
    Ok(next)
}
