//! Simulation parameters.
//!
//! All inputs are stored in SI units (Hz, W, s, J·s²/cycle³). Data volumes
//! are in Mbit and rates in Mbps. The solvers work in MHz internally; the
//! helpers at the bottom of [`SimConfig`] perform those conversions in one
//! place so that no other module multiplies by `1e6`.
//!
//! The on-disk form is TOML. Every field has a default, so a config file
//! only needs to list the values it overrides:
//!
//! ```toml
//! num_devices = 10
//! penalty_weight = 20.0
//! power_threshold = 0.08      # scalar: broadcast to every device
//!
//! [arrivals]
//! kind = "markov_onoff"
//! rate = 3.0
//! transition = [[0.1, 0.9], [0.9, 0.1]]
//! ```

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{OffloadError, Result};

/// Speed of light used by the free-space path-loss term [m/s].
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Per-device parameter that may be written as a scalar (broadcast to all
/// devices) or as an explicit list of length `num_devices`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerDevice {
    All(f64),
    Each(Vec<f64>),
}

impl PerDevice {
    pub fn resolve(&self, n: usize, name: &str) -> Result<Vec<f64>> {
        match self {
            PerDevice::All(v) => Ok(vec![*v; n]),
            PerDevice::Each(v) if v.len() == n => Ok(v.clone()),
            PerDevice::Each(v) => Err(OffloadError::InvalidConfig(format!(
                "{name} has {} entries for {n} devices",
                v.len()
            ))),
        }
    }
}

impl From<f64> for PerDevice {
    fn from(v: f64) -> Self {
        PerDevice::All(v)
    }
}

impl From<Vec<f64>> for PerDevice {
    fn from(v: Vec<f64>) -> Self {
        PerDevice::Each(v)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PathLoss {
    /// Antenna gain A_d.
    pub antenna_gain: f64,
    /// Carrier frequency [Hz].
    pub carrier_frequency: f64,
    /// Path-loss exponent.
    pub exponent: f64,
}

impl Default for PathLoss {
    fn default() -> Self {
        Self {
            antenna_gain: 3.0,
            carrier_frequency: 915.0e6,
            exponent: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalKind {
    IidExponential,
    MarkovOnoff,
}

/// Task arrival process.
///
/// For the ON-OFF model a single two-state chain (state 0 = OFF, 1 = ON)
/// modulates every device. `transition[from][to]` is the one-frame
/// transition probability. The ON-state mean is derived so that the
/// long-run mean equals `rate`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ArrivalModel {
    pub kind: ArrivalKind,
    /// Mean arrival rate per device [Mbps].
    pub rate: PerDevice,
    pub transition: [[f64; 2]; 2],
    /// Second moment E[A²] per device. Recorded only; no algorithm reads it.
    pub second_moment: Option<PerDevice>,
}

impl Default for ArrivalModel {
    fn default() -> Self {
        Self {
            kind: ArrivalKind::IidExponential,
            rate: PerDevice::All(3.0),
            transition: [[0.1, 0.9], [0.9, 0.1]],
            second_moment: None,
        }
    }
}

impl ArrivalModel {
    /// Stationary probability of the ON state.
    pub fn stationary_on(&self) -> f64 {
        let p_off_on = self.transition[0][1];
        let p_on_off = self.transition[1][0];
        if p_off_on + p_on_off == 0.0 {
            // degenerate chain that never moves; treat as half-and-half
            return 0.5;
        }
        p_off_on / (p_off_on + p_on_off)
    }

    /// Mean arrival rate while the chain is ON [Mbps].
    pub fn on_state_mean(&self, rate: f64) -> f64 {
        rate / self.stationary_on()
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    XavierUniform,
    StandardNormal,
}

/// Actor network and policy-update settings.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct LearningConfig {
    pub hidden: Vec<usize>,
    pub memory_size: usize,
    pub batch_size: usize,
    pub training_interval: usize,
    pub m_update_interval: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub init: InitScheme,
    pub queue_scale: f64,
    pub energy_queue_scale: f64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            hidden: vec![120, 80],
            memory_size: 1024,
            batch_size: 32,
            training_interval: 10,
            m_update_interval: 32,
            learning_rate: 0.01,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            init: InitScheme::XavierUniform,
            queue_scale: 100.0,
            energy_queue_scale: 1000.0,
        }
    }
}

/// Dual bisection settings for the per-frame allocation solver.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Stop when the dual bracket is narrower than this...
    pub dual_tolerance: f64,
    /// ...and narrower than this fraction of its upper end.
    pub dual_relative_tolerance: f64,
    /// Initial upper bracket for the time dual.
    pub dual_upper: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dual_tolerance: 0.1,
            dual_relative_tolerance: 1e-6,
            dual_upper: 1.0e4,
        }
    }
}

/// On-disk form of [`SimConfig`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub num_devices: usize,
    /// Frame duration T [s].
    pub frame_duration: f64,
    /// Bandwidth W [Hz].
    pub bandwidth: f64,
    /// Communication overhead v_u (≥ 1).
    pub comm_overhead: f64,
    /// Noise power N0 [W]. Defaults to W · (−174 dBm/Hz).
    pub noise_power: Option<f64>,
    /// Noise power spectral density [dBm/Hz], used when `noise_power` is unset.
    pub noise_psd_dbm: f64,
    /// Computation cycles per bit φ.
    pub cycles_per_bit: f64,
    /// Energy-efficiency coefficient κ [J·s²/cycle³].
    pub kappa: f64,
    /// Max CPU frequency [Hz].
    pub max_frequency: PerDevice,
    /// Max transmit power [W].
    pub max_power: PerDevice,
    /// Average power threshold γ [W].
    pub power_threshold: PerDevice,
    /// Rate weight c. Default alternates 1.5 (odd devices) and 1.0 (even).
    pub rate_weight: Option<PerDevice>,
    /// Lyapunov penalty weight V.
    pub penalty_weight: f64,
    /// Virtual energy queue scaling ν.
    pub energy_scale: f64,
    /// Device-server distance [m]. Default is 120 + 15 (i − 1).
    pub distance: Option<PerDevice>,
    pub path_loss: PathLoss,
    pub rician_los_fraction: f64,
    pub arrivals: ArrivalModel,
    pub seed: u64,
    pub learning: LearningConfig,
    pub solver: SolverConfig,
}

impl Default for ConfigFile {
    fn default() -> Self {
        Self {
            num_devices: 10,
            frame_duration: 1.0,
            bandwidth: 2.0e6,
            comm_overhead: 1.1,
            noise_power: None,
            noise_psd_dbm: -174.0,
            cycles_per_bit: 100.0,
            kappa: 1e-26,
            max_frequency: PerDevice::All(0.3e9),
            max_power: PerDevice::All(0.1),
            power_threshold: PerDevice::All(0.08),
            rate_weight: None,
            penalty_weight: 20.0,
            energy_scale: 1000.0,
            distance: None,
            path_loss: PathLoss::default(),
            rician_los_fraction: 0.3,
            arrivals: ArrivalModel::default(),
            seed: 1,
            learning: LearningConfig::default(),
            solver: SolverConfig::default(),
        }
    }
}

/// Fully resolved simulation configuration with per-device vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub num_devices: usize,
    pub frame_duration: f64,
    pub bandwidth: f64,
    pub comm_overhead: f64,
    pub noise_power: f64,
    pub cycles_per_bit: f64,
    pub kappa: f64,
    pub max_frequency: Vec<f64>,
    pub max_power: Vec<f64>,
    pub power_threshold: Vec<f64>,
    pub rate_weight: Vec<f64>,
    pub penalty_weight: f64,
    pub energy_scale: f64,
    pub distance: Vec<f64>,
    pub path_loss: PathLoss,
    pub rician_los_fraction: f64,
    pub arrivals: ArrivalModel,
    pub arrival_rate: Vec<f64>,
    pub seed: u64,
    pub learning: LearningConfig,
    pub solver: SolverConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig::from_file(ConfigFile::default()).expect("default config is valid")
    }
}

fn default_distances(n: usize) -> Vec<f64> {
    (0..n).map(|i| 120.0 + 15.0 * i as f64).collect()
}

fn default_weights(n: usize) -> Vec<f64> {
    // devices are numbered from 1; odd-numbered devices get the larger weight
    (0..n).map(|i| if i % 2 == 0 { 1.5 } else { 1.0 }).collect()
}

impl SimConfig {
    /// Table defaults for `n` devices at the standard spacing.
    pub fn with_devices(n: usize) -> Result<Self> {
        SimConfig::from_file(ConfigFile {
            num_devices: n,
            ..ConfigFile::default()
        })
    }

    pub fn from_file(file: ConfigFile) -> Result<Self> {
        let n = file.num_devices;
        if n == 0 {
            return Err(OffloadError::InvalidConfig("num_devices must be ≥ 1".into()));
        }
        let noise_power = file
            .noise_power
            .unwrap_or_else(|| file.bandwidth * 10f64.powf(file.noise_psd_dbm / 10.0) * 1e-3);
        let rate_weight = match &file.rate_weight {
            Some(p) => p.resolve(n, "rate_weight")?,
            None => default_weights(n),
        };
        let distance = match &file.distance {
            Some(p) => p.resolve(n, "distance")?,
            None => default_distances(n),
        };
        let arrival_rate = file.arrivals.rate.resolve(n, "arrivals.rate")?;
        let cfg = SimConfig {
            num_devices: n,
            frame_duration: file.frame_duration,
            bandwidth: file.bandwidth,
            comm_overhead: file.comm_overhead,
            noise_power,
            cycles_per_bit: file.cycles_per_bit,
            kappa: file.kappa,
            max_frequency: file.max_frequency.resolve(n, "max_frequency")?,
            max_power: file.max_power.resolve(n, "max_power")?,
            power_threshold: file.power_threshold.resolve(n, "power_threshold")?,
            rate_weight,
            penalty_weight: file.penalty_weight,
            energy_scale: file.energy_scale,
            distance,
            path_loss: file.path_loss,
            rician_los_fraction: file.rician_los_fraction,
            arrivals: ArrivalModel {
                rate: arrival_rate.clone().into(),
                ..file.arrivals
            },
            arrival_rate,
            seed: file.seed,
            learning: file.learning,
            solver: file.solver,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_file(&self) -> ConfigFile {
        ConfigFile {
            num_devices: self.num_devices,
            frame_duration: self.frame_duration,
            bandwidth: self.bandwidth,
            comm_overhead: self.comm_overhead,
            noise_power: Some(self.noise_power),
            noise_psd_dbm: -174.0,
            cycles_per_bit: self.cycles_per_bit,
            kappa: self.kappa,
            max_frequency: self.max_frequency.clone().into(),
            max_power: self.max_power.clone().into(),
            power_threshold: self.power_threshold.clone().into(),
            rate_weight: Some(self.rate_weight.clone().into()),
            penalty_weight: self.penalty_weight,
            energy_scale: self.energy_scale,
            distance: Some(self.distance.clone().into()),
            path_loss: self.path_loss.clone(),
            rician_los_fraction: self.rician_los_fraction,
            arrivals: ArrivalModel {
                rate: self.arrival_rate.clone().into(),
                ..self.arrivals.clone()
            },
            seed: self.seed,
            learning: self.learning.clone(),
            solver: self.solver.clone(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text)?;
        SimConfig::from_file(file)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(&self.to_file())?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(OffloadError::InvalidConfig(msg));
        let n = self.num_devices;
        let scalars = [
            ("frame_duration", self.frame_duration),
            ("bandwidth", self.bandwidth),
            ("noise_power", self.noise_power),
            ("cycles_per_bit", self.cycles_per_bit),
            ("kappa", self.kappa),
            ("penalty_weight", self.penalty_weight),
            ("energy_scale", self.energy_scale),
            ("path_loss.antenna_gain", self.path_loss.antenna_gain),
            ("path_loss.carrier_frequency", self.path_loss.carrier_frequency),
            ("path_loss.exponent", self.path_loss.exponent),
        ];
        for (name, v) in scalars {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.comm_overhead >= 1.0) {
            return bad(format!("comm_overhead must be ≥ 1, got {}", self.comm_overhead));
        }
        if !(0.0..=1.0).contains(&self.rician_los_fraction) {
            return bad(format!(
                "rician_los_fraction must lie in [0, 1], got {}",
                self.rician_los_fraction
            ));
        }
        let vectors = [
            ("max_frequency", &self.max_frequency),
            ("max_power", &self.max_power),
            ("power_threshold", &self.power_threshold),
            ("rate_weight", &self.rate_weight),
            ("distance", &self.distance),
            ("arrivals.rate", &self.arrival_rate),
        ];
        for (name, v) in vectors {
            if v.len() != n {
                return bad(format!("{name} has {} entries for {n} devices", v.len()));
            }
            if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                return bad(format!("{name} entries must be positive, got {x}"));
            }
        }
        for i in 0..n {
            if self.power_threshold[i] > self.max_power[i] {
                return bad(format!(
                    "power_threshold[{i}] = {} exceeds max_power {}",
                    self.power_threshold[i], self.max_power[i]
                ));
            }
        }
        if self.arrivals.kind == ArrivalKind::MarkovOnoff {
            for row in &self.arrivals.transition {
                if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (row[0] + row[1] - 1.0).abs() > 1e-12
                {
                    return bad(format!("transition rows must be probability vectors, got {row:?}"));
                }
            }
            if self.arrivals.stationary_on() <= 0.0 {
                return bad("ON state has zero stationary probability".into());
            }
        }
        let l = &self.learning;
        if l.memory_size == 0 || l.batch_size == 0 || l.training_interval == 0 || l.m_update_interval == 0 {
            return bad("learning intervals and sizes must be ≥ 1".into());
        }
        if !(self.solver.dual_tolerance > 0.0 && self.solver.dual_relative_tolerance > 0.0 && self.solver.dual_upper > 0.0) {
            return bad("solver tolerances must be positive".into());
        }
        Ok(())
    }

    /// Bandwidth in MHz, so that rates come out in Mbps.
    pub fn bandwidth_mhz(&self) -> f64 {
        self.bandwidth * 1e-6
    }

    /// κ rescaled for frequencies in MHz: κ̃ = κ · 10¹⁸.
    pub fn kappa_mhz(&self) -> f64 {
        self.kappa * 1e18
    }

    pub fn max_frequency_mhz(&self, i: usize) -> f64 {
        self.max_frequency[i] * 1e-6
    }

    /// Per-frame rate cap implied by the data queue: D = r·T ≤ Q.
    pub fn rate_cap(&self, queue: f64) -> f64 {
        queue.max(0.0) / self.frame_duration
    }
}
