//! Benchmark policies: Lyapunov-guided coordinate descent (LyCD) and the
//! Myopic rate maximizer with cumulative energy budgets.

use std::f64::consts::LN_2;

use crate::config::SimConfig;
use crate::env::{frame_outcome, local_power, offload_rate, FrameObservation};
use crate::error::{OffloadError, Result};
use crate::lambert::lambert_w0;
use crate::resalloc::{max_rate, solve_resource_allocation, OffloadDecision, ResourceAllocation};
use crate::sched::CandidateEvaluation;

/// Result of a bit-flip local search.
#[derive(Debug, Clone, PartialEq)]
pub struct DescentResult {
    pub x: OffloadDecision,
    pub y: ResourceAllocation,
    pub value: f64,
    pub evaluations: usize,
}

/// Steepest-ascent bit-flip search from `start`: each round evaluates all
/// single flips and applies the best one if it strictly improves.
pub fn coordinate_descent<F>(start: OffloadDecision, eval: &mut F) -> Result<DescentResult>
where
    F: FnMut(&OffloadDecision) -> Result<(ResourceAllocation, f64)>,
{
    let (mut y, mut value) = eval(&start)?;
    let mut x = start;
    let mut evaluations = 1;
    loop {
        let mut best: Option<(usize, ResourceAllocation, f64)> = None;
        for i in 0..x.len() {
            let mut cand = x.clone();
            cand.flip(i);
            let (cy, cv) = eval(&cand)?;
            evaluations += 1;
            let incumbent = best.as_ref().map_or(value, |b| b.2);
            if cv > incumbent {
                best = Some((i, cy, cv));
            }
        }
        match best {
            Some((i, cy, cv)) => {
                x.flip(i);
                y = cy;
                value = cv;
            }
            None => break,
        }
    }
    Ok(DescentResult {
        x,
        y,
        value,
        evaluations,
    })
}

/// Descent from all-zeros and from all-ones; the better result wins, the
/// all-zeros run on ties.
pub fn two_start_descent<F>(n: usize, mut eval: F) -> Result<DescentResult>
where
    F: FnMut(&OffloadDecision) -> Result<(ResourceAllocation, f64)>,
{
    let a = coordinate_descent(OffloadDecision::zeros(n), &mut eval)?;
    let b = coordinate_descent(OffloadDecision::ones(n), &mut eval)?;
    let evaluations = a.evaluations + b.evaluations;
    let mut best = if b.value > a.value { b } else { a };
    best.evaluations = evaluations;
    Ok(best)
}

/// LyCD: coordinate descent on the per-frame objective `G`.
pub fn lycd_solve(obs: &FrameObservation, cfg: &SimConfig) -> Result<CandidateEvaluation> {
    let r = two_start_descent(cfg.num_devices, |x| solve_resource_allocation(x, obs, cfg))?;
    Ok(CandidateEvaluation {
        x: r.x,
        y: r.y,
        objective: r.value,
        index: 0,
    })
}

/// Per-device cumulative energy used by the Myopic policy.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    /// Σ e_i^l·T over completed frames [J].
    pub cumulative: Vec<f64>,
    /// Number of completed frames.
    pub frames: usize,
}

impl EnergyLedger {
    pub fn new(n: usize) -> Self {
        Self {
            cumulative: vec![0.0; n],
            frames: 0,
        }
    }

    fn allowance(&self, i: usize, frames: usize, cfg: &SimConfig) -> f64 {
        frames as f64 * cfg.power_threshold[i] * cfg.frame_duration
    }

    /// Energy device `i` may spend in the upcoming frame [J].
    pub fn budget(&self, i: usize, cfg: &SimConfig) -> f64 {
        (self.allowance(i, self.frames + 1, cfg) - self.cumulative[i]).max(0.0)
    }

    /// Budget shrunk so that rounding in the running sum can never push
    /// the cumulative use above the allowance.
    fn safe_budget(&self, i: usize, cfg: &SimConfig) -> f64 {
        let margin = 1e-15 * self.allowance(i, self.frames + 1, cfg);
        let b = self.budget(i, cfg) * (1.0 - 1e-9) - margin;
        if b > 0.0 {
            b
        } else {
            0.0
        }
    }

    /// Book the realized average powers of one frame.
    pub fn record(&mut self, power: &[f64], cfg: &SimConfig) -> Result<()> {
        self.frames += 1;
        for (i, p) in power.iter().enumerate() {
            self.cumulative[i] += p * cfg.frame_duration;
            if self.cumulative[i] > self.allowance(i, self.frames, cfg) {
                return Err(OffloadError::InvariantViolation(format!(
                    "device {i} exceeded its cumulative energy budget at frame {}",
                    self.frames
                )));
            }
        }
        Ok(())
    }
}

/// Myopic frame decision and its weighted sum rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MyopicDecision {
    pub x: OffloadDecision,
    pub y: ResourceAllocation,
    pub weighted_rate: f64,
}

/// One offloading device in the Myopic time-sharing problem.
#[derive(Debug, Clone, Copy)]
struct MyopicLink {
    weight: f64,
    h: f64,
    budget: f64,
    cap: f64,
    r_max: f64,
    /// τ at which power P_max exhausts the budget.
    kink: f64,
    /// Smallest τ at which the queue cap is reached, or 1.
    tau_max: f64,
}

impl MyopicLink {
    fn new(i: usize, obs: &FrameObservation, budget: f64, cfg: &SimConfig) -> Self {
        let h = obs.h[i];
        let cap = cfg.rate_cap(obs.q[i]);
        let r_max = max_rate(h, i, cfg);
        let p = cfg.max_power[i] / cfg.frame_duration;
        let per_frame = budget / cfg.frame_duration;
        let kink = (per_frame / p).min(1.0);
        let mut link = Self {
            weight: cfg.rate_weight[i],
            h,
            budget: per_frame,
            cap,
            r_max,
            kink,
            tau_max: 0.0,
        };
        if cap <= 0.0 || per_frame <= 0.0 {
            return link;
        }
        link.tau_max = if cap <= r_max * kink {
            cap / r_max
        } else if link.uncapped_rate(1.0, cfg) <= cap {
            1.0
        } else {
            // rate is increasing in τ past the kink; find where it meets the cap
            let (mut lo, mut hi) = (kink, 1.0);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if link.uncapped_rate(mid, cfg) < cap {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi
        };
        link
    }

    fn energy(&self, tau: f64, cfg: &SimConfig, i: usize) -> f64 {
        (cfg.max_power[i] * tau).min(self.budget)
    }

    fn uncapped_rate(&self, tau: f64, cfg: &SimConfig) -> f64 {
        if tau <= self.kink {
            return self.r_max * tau;
        }
        offload_rate(tau, self.budget, self.h, cfg)
    }

    /// Maximizer of `c·rate(τ) − μ τ` over `[0, τ_max]`.
    fn best_tau(&self, mu: f64, cfg: &SimConfig) -> f64 {
        if self.tau_max <= 0.0 || mu >= self.weight * self.r_max {
            return 0.0;
        }
        if self.tau_max <= self.kink {
            return self.tau_max;
        }
        if mu <= 0.0 {
            return self.tau_max;
        }
        // past the kink the energy is fixed at the budget; the stationarity
        // condition ln(1+s) − s/(1+s) = k with s = B h/(τ N0) solves as
        // 1 + s = −1/W0(−e^{−(k+1)})
        let k = mu * LN_2 * cfg.comm_overhead / (self.weight * cfg.bandwidth_mhz());
        let w = lambert_w0(-(-(k + 1.0)).exp()).expect("argument lies in (−1/e, 0)");
        let s = -1.0 / w - 1.0;
        let tau = self.budget * self.h / (s * cfg.noise_power);
        tau.clamp(self.kink, self.tau_max)
    }
}

/// Myopic decision for the current frame given the energy ledger.
///
/// Maximizes `Σ c_i r_i` under the per-frame constraints and the running
/// budgets `e_i ≤ tγ_i − Σ_{l<t} e_i^l`. Locals run as fast as queue, CPU
/// and budget allow. Offloaders share the frame by bisection on the time
/// price with per-device closed-form time shares, and the two bracketing
/// allocations are blended so the frame is used exactly.
pub fn myopic_solve(obs: &FrameObservation, ledger: &EnergyLedger, cfg: &SimConfig) -> Result<MyopicDecision> {
    obs.validate(cfg)?;
    let n = cfg.num_devices;
    let budgets: Vec<f64> = (0..n).map(|i| ledger.safe_budget(i, cfg)).collect();
    let r = two_start_descent(n, |x| myopic_allocation(x, obs, &budgets, cfg))?;
    Ok(MyopicDecision {
        x: r.x,
        y: r.y,
        weighted_rate: r.value,
    })
}

/// Solve and book the frame's energy in one step.
pub fn myopic_step(obs: &FrameObservation, ledger: &mut EnergyLedger, cfg: &SimConfig) -> Result<MyopicDecision> {
    let d = myopic_solve(obs, ledger, cfg)?;
    let out = frame_outcome(&d.x, &d.y, &obs.h, cfg)?;
    ledger.record(&out.power, cfg)?;
    Ok(d)
}

/// Continuous Myopic allocation for a fixed decision and per-frame energy
/// budgets [J]; returns the allocation and its weighted rate.
pub fn myopic_allocation(
    x: &OffloadDecision,
    obs: &FrameObservation,
    budgets: &[f64],
    cfg: &SimConfig,
) -> Result<(ResourceAllocation, f64)> {
    let n = cfg.num_devices;
    let mut y = ResourceAllocation::zeros(n);
    for i in (0..n).filter(|&i| !x.offloads(i)) {
        let by_queue = cfg.cycles_per_bit * cfg.rate_cap(obs.q[i]) * 1e6;
        let by_budget = (budgets[i] / (cfg.frame_duration * cfg.kappa)).cbrt();
        let mut f = by_queue.min(cfg.max_frequency[i]).min(by_budget);
        // the cube root may round up by an ulp
        while f > 0.0 && local_power(f, cfg) * cfg.frame_duration > budgets[i] {
            f *= 1.0 - 1e-12;
        }
        y.freq[i] = f;
    }
    let ids: Vec<usize> = x.offloaders();
    let links: Vec<MyopicLink> = ids.iter().map(|&i| MyopicLink::new(i, obs, budgets[i], cfg)).collect();
    let shares = |mu: f64| -> Vec<f64> { links.iter().map(|l| l.best_tau(mu, cfg)).collect() };
    let mut tau = shares(0.0);
    if tau.iter().sum::<f64>() > 1.0 {
        let mut lo = 0.0;
        let mut hi = links.iter().map(|l| l.weight * l.r_max).fold(0.0, f64::max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if shares(mid).iter().sum::<f64>() > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-12 * hi {
                break;
            }
        }
        let (t_lo, t_hi) = (shares(lo), shares(hi));
        let (s_lo, s_hi): (f64, f64) = (t_lo.iter().sum(), t_hi.iter().sum());
        let theta = if s_lo > s_hi { (1.0 - s_hi) / (s_lo - s_hi) } else { 0.0 };
        tau = t_hi.iter().zip(&t_lo).map(|(b, a)| b + theta * (a - b)).collect();
        let total: f64 = tau.iter().sum();
        if total > 1.0 {
            tau.iter_mut().for_each(|t| *t /= total);
        }
    }
    for ((&i, link), t) in ids.iter().zip(&links).zip(tau) {
        if t <= 0.0 {
            continue;
        }
        let needed = t * cfg.noise_power / link.h
            * (link.cap * cfg.comm_overhead * LN_2 / (cfg.bandwidth_mhz() * t)).exp_m1();
        let e = link.energy(t, cfg, i).min(needed);
        y.tau[i] = t;
        y.energy[i] = e;
        y.rate[i] = offload_rate(t, e, link.h, cfg).min(link.cap);
    }
    let out = frame_outcome(x, &y, &obs.h, cfg)?;
    let value = (0..n)
        .map(|i| cfg.rate_weight[i] * out.rate[i].min(cfg.rate_cap(obs.q[i])))
        .sum();
    Ok((y, value))
}
