//! Optimal resource allocation for a fixed offloading decision.
//!
//! Given `x`, the per-frame problem separates into:
//!
//! * local devices, each maximizing `a f/φ − Y κ f³` under the frequency
//!   and data caps (closed form);
//! * offloading devices, which share the frame through `Σ τ ≤ 1`. The time
//!   constraint is dualized with multiplier `μ`. For fixed `μ` each device's
//!   optimal transmission rate `l(μ) = r/τ` has a Lambert-W closed form and
//!   its rate decision is bang-bang. `μ` is found by bisection on the
//!   subgradient `1 − Σ τ`, and a primal solution is recovered by solving
//!   the single-constraint LP over `r` with the rates frozen at `l(μ*)`.
//!
//! Units: rates in Mbps, bandwidth in MHz, energies per frame in J (W at
//! T = 1), frequencies returned in Hz.

use std::f64::consts::LN_2;
use std::fmt;

use crate::config::SimConfig;
use crate::env::{frame_outcome, FrameObservation};
use crate::error::{OffloadError, Result};
use crate::lambert::{lambert_w0, lambert_w0_shifted, BRANCH_POINT};
use crate::sched::{per_frame_weights, PerFrameWeights};

/// Binary offloading decision: `true` means device `i` offloads.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OffloadDecision(Vec<bool>);

impl OffloadDecision {
    pub fn zeros(n: usize) -> Self {
        Self(vec![false; n])
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![true; n])
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        Self(bits.iter().map(|b| *b != 0).collect())
    }

    /// Decision whose bit `i` is bit `i` of `mask`.
    pub fn from_mask(mask: u64, n: usize) -> Self {
        Self((0..n).map(|i| mask >> i & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn offloads(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, offload: bool) {
        self.0[i] = offload;
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = !self.0[i];
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect()
    }

    pub fn offloaders(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.0[i]).collect()
    }

    pub fn count_offloaders(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }
}

impl From<Vec<bool>> for OffloadDecision {
    fn from(v: Vec<bool>) -> Self {
        Self(v)
    }
}

impl fmt::Display for OffloadDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Continuous part of the per-frame action.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceAllocation {
    /// Offloading time share τ_i.
    pub tau: Vec<f64>,
    /// Local CPU frequency [Hz].
    pub freq: Vec<f64>,
    /// Offloading energy per frame e_{i,O}.
    pub energy: Vec<f64>,
    /// Offloading rate r_{i,O} [Mbps].
    pub rate: Vec<f64>,
}

impl ResourceAllocation {
    pub fn zeros(n: usize) -> Self {
        Self {
            tau: vec![0.0; n],
            freq: vec![0.0; n],
            energy: vec![0.0; n],
            rate: vec![0.0; n],
        }
    }

    /// Check every per-frame constraint with absolute slack `slack`.
    pub fn check_feasible(
        &self,
        x: &OffloadDecision,
        obs: &FrameObservation,
        cfg: &SimConfig,
        slack: f64,
    ) -> Result<()> {
        let fail = |msg: String| Err(OffloadError::ContractViolation(msg));
        let n = cfg.num_devices;
        if x.len() != n || self.tau.len() != n {
            return Err(OffloadError::ShapeMismatch {
                expected: n,
                got: x.len().min(self.tau.len()),
            });
        }
        let total: f64 = self.tau.iter().sum();
        if total > 1.0 + slack {
            return fail(format!("time shares sum to {total}"));
        }
        for i in 0..n {
            let (tau, f, e, r) = (self.tau[i], self.freq[i], self.energy[i], self.rate[i]);
            if [tau, f, e, r].iter().any(|v| *v < 0.0 || !v.is_finite()) {
                return fail(format!("device {i} has a negative or non-finite entry"));
            }
            let cap = cfg.rate_cap(obs.q[i]);
            if x.offloads(i) {
                if f != 0.0 {
                    return fail(format!("offloading device {i} computes locally"));
                }
                if e > cfg.max_power[i] * tau + slack {
                    return fail(format!("device {i} exceeds peak power"));
                }
                if r > cap + slack {
                    return fail(format!("device {i} offloads more than its queue"));
                }
                let achievable = crate::env::offload_rate(tau, e, obs.h[i], cfg);
                if r > achievable + slack * (1.0 + achievable) {
                    return fail(format!("device {i} rate {r} exceeds channel capacity {achievable}"));
                }
            } else {
                if tau != 0.0 || e != 0.0 || r != 0.0 {
                    return fail(format!("local device {i} has offloading resources"));
                }
                if f > cfg.max_frequency[i] * (1.0 + slack) {
                    return fail(format!("device {i} exceeds its max frequency"));
                }
                if crate::env::local_rate(f, cfg) > cap + slack {
                    return fail(format!("device {i} computes more than its queue"));
                }
            }
        }
        Ok(())
    }
}

/// Optimal local CPU frequency [Hz] for weight `a`, energy queue `y` and
/// backlog `q`, capped by the queue and by `f_max` of device `i`.
pub fn optimal_local_frequency(a: f64, y: f64, q: f64, i: usize, cfg: &SimConfig) -> f64 {
    let cap_mhz = (cfg.cycles_per_bit * cfg.rate_cap(q)).min(cfg.max_frequency_mhz(i));
    if cap_mhz <= 0.0 {
        return 0.0;
    }
    let f_mhz = if y > 0.0 {
        (a / (3.0 * cfg.cycles_per_bit * cfg.kappa_mhz() * y)).sqrt().min(cap_mhz)
    } else {
        cap_mhz
    };
    // cap_mhz may be f_max exactly; keep the Hz value within the bound after scaling
    (f_mhz * 1e6).min(cfg.max_frequency[i])
}

/// Energy per unit time needed to sustain rate `x` [Mbps] at unit channel
/// gain: `g(x) = N0 (2^{x v_u / W} − 1)`.
pub fn tx_power_fn(x: f64, cfg: &SimConfig) -> f64 {
    cfg.noise_power * (x * cfg.comm_overhead * LN_2 / cfg.bandwidth_mhz()).exp_m1()
}

/// Peak transmission rate at full power [Mbps].
pub fn max_rate(h: f64, i: usize, cfg: &SimConfig) -> f64 {
    cfg.bandwidth_mhz() / cfg.comm_overhead * (cfg.max_power[i] * h / cfg.noise_power).ln_1p() / LN_2
}

/// Smallest rate returned by the ratio computation; keeps `r/l` finite
/// when time is free (`μ = 0`).
pub const RATIO_FLOOR: f64 = 1e-12;

/// Per-device quantities of the dual evaluation at one `μ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioEntry {
    /// Optimal rate-to-time ratio l(μ) [Mbps].
    pub ratio: f64,
    /// Channel threshold ψ(μ) below which the device transmits at full power.
    pub threshold: f64,
    /// Exponent parameter A = 1 + μ/(Y P_max).
    pub exponent: f64,
    /// Full-power rate R_max [Mbps].
    pub max_rate: f64,
    pub full_power: bool,
}

/// `1 + W₀(−A e^{−A})` with `A = 1 + d`, accurate near the branch point.
fn w_plus_one(d: f64) -> f64 {
    if d < 1e-3 {
        // e·x + 1 with x = −A e^{−A}, i.e. 1 − (1 + d) e^{−d}, by its series
        let z = d * d * (0.5 - d / 3.0 + d * d / 8.0 - d * d * d / 30.0);
        return lambert_w0_shifted(z);
    }
    let a = 1.0 + d;
    let x = (-a * (-a).exp()).max(BRANCH_POINT);
    1.0 + lambert_w0(x).expect("argument is above the branch point")
}

/// Channel threshold ψ(μ) of device `i` and the exponent parameter A.
///
/// Uses `A / (−W) = e^{A + W}`, which follows from `W e^W = −A e^{−A}`, so
/// that large `A` overflows cleanly to an infinite threshold.
pub fn channel_threshold(mu: f64, y: f64, i: usize, cfg: &SimConfig) -> (f64, f64) {
    let p = cfg.max_power[i];
    let d = mu / (y * p);
    if !d.is_finite() {
        return (f64::INFINITY, f64::INFINITY);
    }
    let psi = cfg.noise_power / p * (d + w_plus_one(d)).exp_m1();
    (psi.max(0.0), 1.0 + d)
}

/// Optimal rate-to-time ratio of device `i` for dual price `mu`.
pub fn optimal_tau_ratio(mu: f64, y: f64, h: f64, i: usize, cfg: &SimConfig) -> RatioEntry {
    let r_max = max_rate(h, i, cfg);
    if y <= 0.0 {
        return RatioEntry {
            ratio: r_max,
            threshold: f64::INFINITY,
            exponent: f64::INFINITY,
            max_rate: r_max,
            full_power: true,
        };
    }
    let (threshold, exponent) = channel_threshold(mu, y, i, cfg);
    if h <= threshold {
        return RatioEntry {
            ratio: r_max,
            threshold,
            exponent,
            max_rate: r_max,
            full_power: true,
        };
    }
    let z = mu * h / (y * cfg.noise_power);
    let stationary = cfg.bandwidth_mhz() / (LN_2 * cfg.comm_overhead) * lambert_w0_shifted(z);
    RatioEntry {
        ratio: stationary.clamp(RATIO_FLOOR, r_max),
        threshold,
        exponent,
        max_rate: r_max,
        full_power: false,
    }
}

/// Per-unit-rate net reward of offloading at price `mu`:
/// `a − μ/l − Y g(l)/(l h)`.
pub fn rate_coefficient(mu: f64, a: f64, y: f64, h: f64, l: f64, cfg: &SimConfig) -> f64 {
    a - mu / l - y * tx_power_fn(l, cfg) / (l * h)
}

/// Bang-bang rate decision for fixed `mu`: the whole backlog if the net
/// reward is positive, nothing otherwise (ties go to zero).
pub fn dual_rate_decision(mu: f64, a: f64, y: f64, h: f64, q: f64, l: f64, cfg: &SimConfig) -> f64 {
    if rate_coefficient(mu, a, y, h, l, cfg) > 0.0 {
        cfg.rate_cap(q)
    } else {
        0.0
    }
}

/// Total time requested by the offloaders at price `mu`.
pub fn time_demand(
    mu: f64,
    offloaders: &[usize],
    obs: &FrameObservation,
    weights: &PerFrameWeights,
    cfg: &SimConfig,
) -> f64 {
    offloaders
        .iter()
        .map(|&i| {
            let l = optimal_tau_ratio(mu, obs.y[i], obs.h[i], i, cfg).ratio;
            dual_rate_decision(mu, weights.a[i], obs.y[i], obs.h[i], obs.q[i], l, cfg) / l
        })
        .sum()
}

/// Bisection for the time dual `μ*`.
///
/// Returns 0 when the offloaders fit in the frame at zero price. Otherwise
/// the bracket `[0, UB]` is grown by doubling until the demand at `UB` fits,
/// then halved until narrower than both the absolute tolerance and the
/// relative one; the last midpoint is returned.
pub fn bisect_dual(
    offloaders: &[usize],
    obs: &FrameObservation,
    weights: &PerFrameWeights,
    cfg: &SimConfig,
) -> f64 {
    if offloaders.is_empty() || time_demand(0.0, offloaders, obs, weights, cfg) <= 1.0 {
        return 0.0;
    }
    let mut lb = 0.0;
    let mut ub = cfg.solver.dual_upper;
    for _ in 0..200 {
        if time_demand(ub, offloaders, obs, weights, cfg) <= 1.0 {
            break;
        }
        lb = ub;
        ub *= 2.0;
    }
    loop {
        let mu = 0.5 * (lb + ub);
        if 1.0 - time_demand(mu, offloaders, obs, weights, cfg) < 0.0 {
            lb = mu;
        } else {
            ub = mu;
        }
        let width = ub - lb;
        if width <= cfg.solver.dual_tolerance && width <= cfg.solver.dual_relative_tolerance * ub {
            return mu;
        }
    }
}

/// Offloading resources of one device after primal recovery.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OffloadShare {
    pub rate: f64,
    pub tau: f64,
    pub energy: f64,
}

/// Fractional knapsack for `max Σ w_i r_i` s.t. `Σ r_i / l_i ≤ 1`,
/// `0 ≤ r_i ≤ cap_i`. Items are taken by reward per unit time `w_i l_i`,
/// ties in index order; non-positive rewards are never taken.
///
/// Returns the chosen `r_i`.
pub fn fractional_knapsack(reward: &[f64], ratio: &[f64], cap: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..reward.len()).filter(|&k| reward[k] > 0.0).collect();
    order.sort_by(|&p, &q| {
        (reward[q] * ratio[q])
            .partial_cmp(&(reward[p] * ratio[p]))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(p.cmp(&q))
    });
    let mut r = vec![0.0; reward.len()];
    let mut remaining = 1.0f64;
    for k in order {
        if remaining <= 0.0 {
            break;
        }
        let take = cap[k].min(remaining * ratio[k]);
        r[k] = take;
        remaining -= take / ratio[k];
    }
    r
}

/// Recover `(r, τ, e)` for the offloaders at dual price `mu`.
pub fn primal_recovery(
    mu: f64,
    offloaders: &[usize],
    obs: &FrameObservation,
    weights: &PerFrameWeights,
    cfg: &SimConfig,
) -> Vec<OffloadShare> {
    let entries: Vec<RatioEntry> = offloaders
        .iter()
        .map(|&i| optimal_tau_ratio(mu, obs.y[i], obs.h[i], i, cfg))
        .collect();
    let ratio: Vec<f64> = entries.iter().map(|e| e.ratio).collect();
    let reward: Vec<f64> = offloaders
        .iter()
        .zip(&ratio)
        .map(|(&i, &l)| weights.a[i] - obs.y[i] * tx_power_fn(l, cfg) / (obs.h[i] * l))
        .collect();
    let cap: Vec<f64> = offloaders.iter().map(|&i| cfg.rate_cap(obs.q[i])).collect();
    let rates = fractional_knapsack(&reward, &ratio, &cap);

    let mut time_left = 1.0f64;
    offloaders
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            if rates[k] <= 0.0 {
                return OffloadShare::default();
            }
            let l = ratio[k];
            let tau = (rates[k] / l).min(time_left.max(0.0));
            time_left -= tau;
            let energy = (tau * tx_power_fn(l, cfg) / obs.h[i]).min(cfg.max_power[i] * tau);
            OffloadShare {
                rate: rates[k].min(tau * l),
                tau,
                energy,
            }
        })
        .collect()
}

/// Dual price and per-offloader ratios at the solution.
#[derive(Debug, Clone, PartialEq)]
pub struct DualEvaluation {
    pub mu: f64,
    pub offloaders: Vec<usize>,
    pub entries: Vec<RatioEntry>,
}

/// Full solver output for one decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub allocation: ResourceAllocation,
    pub objective: f64,
    pub dual: DualEvaluation,
}

/// Solve the allocation problem for decision `x` and return the
/// allocation together with its per-frame objective `G(x, ξ)`.
pub fn solve_resource_allocation(
    x: &OffloadDecision,
    obs: &FrameObservation,
    cfg: &SimConfig,
) -> Result<(ResourceAllocation, f64)> {
    let s = solve_detailed(x, obs, cfg)?;
    Ok((s.allocation, s.objective))
}

pub fn solve_detailed(x: &OffloadDecision, obs: &FrameObservation, cfg: &SimConfig) -> Result<Solution> {
    let n = cfg.num_devices;
    if x.len() != n {
        return Err(OffloadError::ShapeMismatch {
            expected: n,
            got: x.len(),
        });
    }
    obs.validate(cfg)?;
    let weights = per_frame_weights(obs, cfg);
    let mut y = ResourceAllocation::zeros(n);
    for i in (0..n).filter(|&i| !x.offloads(i)) {
        y.freq[i] = optimal_local_frequency(weights.a[i], obs.y[i], obs.q[i], i, cfg);
    }
    // devices with nothing queued cannot contribute; leave them idle
    let offloaders: Vec<usize> = x
        .offloaders()
        .into_iter()
        .filter(|&i| cfg.rate_cap(obs.q[i]) > 0.0)
        .collect();
    let mu = bisect_dual(&offloaders, obs, &weights, cfg);
    for (share, &i) in primal_recovery(mu, &offloaders, obs, &weights, cfg)
        .into_iter()
        .zip(&offloaders)
    {
        y.tau[i] = share.tau;
        y.energy[i] = share.energy;
        y.rate[i] = share.rate;
    }
    let entries = offloaders
        .iter()
        .map(|&i| optimal_tau_ratio(mu, obs.y[i], obs.h[i], i, cfg))
        .collect();
    let objective = objective_of(x, &y, obs, &weights, cfg)?;
    Ok(Solution {
        allocation: y,
        objective,
        dual: DualEvaluation {
            mu,
            offloaders,
            entries,
        },
    })
}

/// `Σ a_i r_i − Σ Y_i e_i` with rates and powers from the physical model.
pub(crate) fn objective_of(
    x: &OffloadDecision,
    y: &ResourceAllocation,
    obs: &FrameObservation,
    weights: &PerFrameWeights,
    cfg: &SimConfig,
) -> Result<f64> {
    let out = frame_outcome(x, y, &obs.h, cfg)?;
    Ok((0..cfg.num_devices)
        .map(|i| {
            let r = out.rate[i].min(cfg.rate_cap(obs.q[i]));
            weights.a[i] * r - obs.y[i] * out.power[i]
        })
        .sum())
}
