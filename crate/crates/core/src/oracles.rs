//! Brute-force and numerical references for testing the solvers.
//!
//! Nothing here reuses the closed forms of [`crate::resalloc`]; the only
//! shared code is the physical model in [`crate::env`].

use rand::Rng;

use crate::config::SimConfig;
use crate::env::{local_power, local_rate, offload_rate, sample_channel, FrameObservation};
use crate::error::{OffloadError, Result};
use crate::resalloc::{solve_resource_allocation, OffloadDecision};

/// Largest device count accepted by [`enumerate_offloading`].
pub const MAX_ENUMERATION_DEVICES: usize = 12;
/// Largest offloader count accepted by [`convex_reference_p4`].
pub const MAX_CONVEX_OFFLOADERS: usize = 3;
pub const DEFAULT_GRID_RESOLUTION: usize = 2000;
const GOLDEN_TOLERANCE: f64 = 1e-9;

/// One oracle comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub instance: String,
    pub oracle: f64,
    pub value: f64,
    /// `(oracle − value) / max(|oracle|, ε)`, signed.
    pub gap: f64,
}

impl OracleReport {
    pub fn new(instance: impl Into<String>, oracle: f64, value: f64) -> Self {
        Self {
            instance: instance.into(),
            oracle,
            value,
            gap: (oracle - value) / oracle.abs().max(1e-12),
        }
    }
}

/// Exhaustive search over all `2^N` decisions; the first maximizer in
/// mask order (all-zeros first) is returned.
pub fn enumerate_offloading(obs: &FrameObservation, cfg: &SimConfig) -> Result<(OffloadDecision, f64)> {
    let n = cfg.num_devices;
    if n > MAX_ENUMERATION_DEVICES {
        return Err(OffloadError::TooLarge {
            what: "devices for enumeration",
            got: n,
            limit: MAX_ENUMERATION_DEVICES,
        });
    }
    let mut best = (OffloadDecision::zeros(n), f64::NEG_INFINITY);
    for mask in 0..1u64 << n {
        let x = OffloadDecision::from_mask(mask, n);
        let (_, g) = solve_resource_allocation(&x, obs, cfg)?;
        if g > best.1 {
            best = (x, g);
        }
    }
    Ok(best)
}

/// Golden-section maximization of a unimodal `f` on `[lo, hi]`; returns
/// the best value seen (endpoints included).
pub fn golden_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut best = [(lo, f(lo)), (hi, f(hi))]
        .into_iter()
        .fold((lo, f64::NEG_INFINITY), |acc, p| if p.1 > acc.1 { p } else { acc });
    while b - a > tol * (1.0 + a.abs().max(b.abs())) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    for p in [(c, fc), (d, fd)] {
        if p.1 > best.1 {
            best = p;
        }
    }
    best
}

/// Golden-section minimization, the mirror of [`golden_max`].
pub fn golden_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (x, v) = golden_max(|t| -f(t), lo, hi, tol);
    (x, -v)
}

/// Best value of one local device: golden-section over its frequency.
fn local_value(i: usize, a: f64, obs: &FrameObservation, cfg: &SimConfig) -> f64 {
    let hi = (cfg.cycles_per_bit * cfg.rate_cap(obs.q[i]) * 1e6).min(cfg.max_frequency[i]);
    if hi <= 0.0 {
        return 0.0;
    }
    golden_max(
        |f| a * local_rate(f, cfg) - obs.y[i] * local_power(f, cfg),
        0.0,
        hi,
        GOLDEN_TOLERANCE,
    )
    .1
}

/// Best value of one offloading device with time share `tau`:
/// golden-section over its energy.
fn offload_value(i: usize, a: f64, tau: f64, obs: &FrameObservation, cfg: &SimConfig) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let cap = cfg.rate_cap(obs.q[i]);
    let y = obs.y[i];
    golden_max(
        |e| a * offload_rate(tau, e, obs.h[i], cfg).min(cap) - y * e,
        0.0,
        cfg.max_power[i] * tau,
        GOLDEN_TOLERANCE,
    )
    .1
    .max(0.0)
}

/// Numerical optimum of the allocation problem for decision `x`.
///
/// Time shares range over the grid `k/R` on the simplex; since every
/// device's value is non-decreasing in its share, the last offloader takes
/// the whole remaining time.
pub fn convex_reference_p4(
    x: &OffloadDecision,
    obs: &FrameObservation,
    cfg: &SimConfig,
    resolution: usize,
) -> Result<f64> {
    let n = cfg.num_devices;
    if x.len() != n {
        return Err(OffloadError::ShapeMismatch { expected: n, got: x.len() });
    }
    let m1 = x.offloaders();
    if m1.len() > MAX_CONVEX_OFFLOADERS {
        return Err(OffloadError::TooLarge {
            what: "offloaders for the convex reference",
            got: m1.len(),
            limit: MAX_CONVEX_OFFLOADERS,
        });
    }
    if resolution == 0 {
        return Err(OffloadError::ContractViolation("grid resolution must be ≥ 1".into()));
    }
    let a: Vec<f64> = (0..n).map(|i| obs.q[i] + cfg.penalty_weight * cfg.rate_weight[i]).collect();
    let local: f64 = (0..n).filter(|&i| !x.offloads(i)).map(|i| local_value(i, a[i], obs, cfg)).sum();
    let r = resolution;
    let table: Vec<Vec<f64>> = m1
        .iter()
        .map(|&i| (0..=r).map(|k| offload_value(i, a[i], k as f64 / r as f64, obs, cfg)).collect())
        .collect();
    let best = match table.len() {
        0 => 0.0,
        1 => table[0][r],
        2 => (0..=r).map(|j| table[0][j] + table[1][r - j]).fold(f64::NEG_INFINITY, f64::max),
        _ => {
            let mut best = f64::NEG_INFINITY;
            for j in 0..=r {
                for k in 0..=r - j {
                    best = best.max(table[0][j] + table[1][k] + table[2][r - j - k]);
                }
            }
            best
        }
    };
    Ok(local + best)
}

/// Independent optimum of `min_τ μτ + Y·e(τ)` for one device sending `r`
/// Mbit, with `e(τ)` the least energy that carries `r` in time `τ`, over
/// `τ ≥ r/R_max`. Returns `(τ*, cost)`.
pub fn tau_ratio_reference(mu: f64, y: f64, h: f64, r: f64, i: usize, cfg: &SimConfig) -> (f64, f64) {
    let cost = |tau: f64| mu * tau + y * tx_energy(r, tau, h, cfg);
    let p = cfg.max_power[i];
    // shortest time: full power, found from the forward rate model
    let (mut lo, mut hi) = (0.0, 1.0);
    while offload_rate(hi, p * hi, h, cfg) < r {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if offload_rate(mid, p * mid, h, cfg) < r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t_min = hi;
    let mut t = t_min;
    while cost(2.0 * t) < cost(t) {
        t *= 2.0;
    }
    golden_min(cost, t_min.max(0.5 * t), 2.0 * t, 1e-13)
}

/// Least energy that delivers `r` Mbit in time share `tau`, inverted from
/// the rate equation.
pub fn tx_energy(r: f64, tau: f64, h: f64, cfg: &SimConfig) -> f64 {
    let spectral = r * cfg.comm_overhead / (cfg.bandwidth * 1e-6 * tau);
    tau * cfg.noise_power / h * (spectral * std::f64::consts::LN_2).exp_m1()
}

/// Ranges for random oracle instances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceRanges {
    pub max_queue: f64,
    pub max_energy_queue: f64,
}

impl Default for InstanceRanges {
    fn default() -> Self {
        Self {
            max_queue: 20.0,
            max_energy_queue: 200.0,
        }
    }
}

/// Random observation: fading from the channel model, queues uniform.
pub fn random_observation<R: Rng + ?Sized>(rng: &mut R, cfg: &SimConfig, ranges: InstanceRanges) -> FrameObservation {
    let h = sample_channel(rng, cfg);
    let n = cfg.num_devices;
    let q = (0..n).map(|_| rng.random::<f64>() * ranges.max_queue).collect();
    let y = (0..n).map(|_| rng.random::<f64>() * ranges.max_energy_queue).collect();
    FrameObservation { t: 1, h, q, y }
}

/// Grid reference for the Myopic problem with two devices: every decision,
/// a `resolution`-point grid over the time split, full usable energy per
/// offloader and golden-section over local frequencies.
pub fn myopic_grid_reference(obs: &FrameObservation, budgets: &[f64], cfg: &SimConfig, resolution: usize) -> Result<f64> {
    if cfg.num_devices != 2 {
        return Err(OffloadError::TooLarge {
            what: "devices for the Myopic grid reference",
            got: cfg.num_devices,
            limit: 2,
        });
    }
    let value = |i: usize, offload: bool, tau: f64| -> f64 {
        let c = cfg.rate_weight[i];
        let cap = cfg.rate_cap(obs.q[i]);
        if offload {
            if tau <= 0.0 {
                return 0.0;
            }
            let e = (cfg.max_power[i] * tau).min(budgets[i] / cfg.frame_duration);
            c * offload_rate(tau, e, obs.h[i], cfg).min(cap)
        } else {
            let hi = (cfg.cycles_per_bit * cap * 1e6).min(cfg.max_frequency[i]);
            if hi <= 0.0 {
                return 0.0;
            }
            golden_max(
                |f| {
                    if local_power(f, cfg) * cfg.frame_duration <= budgets[i] {
                        c * local_rate(f, cfg)
                    } else {
                        -1.0
                    }
                },
                0.0,
                hi,
                1e-12,
            )
            .1
            .max(0.0)
        }
    };
    let mut best = f64::NEG_INFINITY;
    for mask in 0..4u64 {
        let x = OffloadDecision::from_mask(mask, 2);
        let v = match (x.offloads(0), x.offloads(1)) {
            (true, true) => (0..=resolution)
                .map(|k| {
                    let t = k as f64 / resolution as f64;
                    value(0, true, t) + value(1, true, 1.0 - t)
                })
                .fold(f64::NEG_INFINITY, f64::max),
            (o0, o1) => value(0, o0, 1.0) + value(1, o1, 1.0),
        };
        best = best.max(v);
    }
    Ok(best)
}

/// Largest `|W(x)e^{W(x)} − x|` over `points` log-spaced samples of
/// `[−1/e, x_max]` (linear from the branch point to 0, logarithmic above).
pub fn lambert_residual_grid(points: usize, x_max: f64) -> Result<(f64, f64)> {
    let neg = points / 4;
    let pos = points - neg;
    let mut worst = (0.0f64, 0.0f64);
    let mut check = |x: f64| -> Result<()> {
        let w = crate::lambert::lambert_w0(x)?;
        let r = (w * w.exp() - x).abs();
        if r > worst.1 {
            worst = (x, r);
        }
        Ok(())
    };
    for k in 0..neg {
        check(crate::lambert::BRANCH_POINT * (1.0 - k as f64 / neg as f64))?;
    }
    let (lo, hi) = (1e-12f64.ln(), x_max.ln());
    for k in 0..pos {
        check((lo + (hi - lo) * k as f64 / (pos - 1).max(1) as f64).exp())?;
    }
    Ok(worst)
}

/// Random instances comparing the closed-form time ratio with
/// [`tau_ratio_reference`]; the gap is measured on the cost.
pub fn check_tau_ratio<R: Rng + ?Sized>(rng: &mut R, cfg: &SimConfig, count: usize) -> Vec<OracleReport> {
    let h_mean = crate::env::mean_channel_gains(cfg);
    (0..count)
        .map(|k| {
            let i = k % cfg.num_devices;
            let mu = 10f64.powf(rng.random_range(-2.0..4.0));
            let y = 10f64.powf(rng.random_range(-1.0..3.0));
            let h = h_mean[i] * 10f64.powf(rng.random_range(-1.5..1.0));
            let r = rng.random_range(0.01..20.0);
            let l = crate::resalloc::optimal_tau_ratio(mu, y, h, i, cfg).ratio;
            let tau = r / l;
            let closed = mu * tau + y * tx_energy(r, tau, h, cfg);
            let (_, reference) = tau_ratio_reference(mu, y, h, r, i, cfg);
            // the closed form minimizes, so the oracle value is the larger "value" of −cost
            OracleReport::new(format!("mu={mu} Y={y} h={h} r={r}"), -reference, -closed)
        })
        .collect()
}

/// Outcome of the solver-vs-reference check for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverCheck {
    pub report: OracleReport,
    pub feasible: bool,
}

/// Random `(x, ξ)` pairs with `N ≤ max_devices` and at most three
/// offloaders, solved by the allocation solver and by the reference.
pub fn check_solver<R: Rng + ?Sized>(
    rng: &mut R,
    count: usize,
    max_devices: usize,
    resolution: usize,
) -> Result<Vec<SolverCheck>> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let n = rng.random_range(1..=max_devices);
        let cfg = SimConfig::with_devices(n)?;
        let obs = random_observation(rng, &cfg, InstanceRanges::default());
        let x = OffloadDecision::from_mask(rng.random_range(0..1u64 << n), n);
        if x.count_offloaders() > MAX_CONVEX_OFFLOADERS {
            continue;
        }
        let (y, g) = solve_resource_allocation(&x, &obs, &cfg)?;
        let feasible = y.check_feasible(&x, &obs, &cfg, 1e-9).is_ok();
        let reference = convex_reference_p4(&x, &obs, &cfg, resolution)?;
        out.push(SolverCheck {
            report: OracleReport::new(format!("N={n} x={x}"), reference, g),
            feasible,
        });
    }
    Ok(out)
}

/// LyCD against exhaustive enumeration on random observations; the
/// report's `value / oracle` is the optimality ratio.
pub fn check_lycd<R: Rng + ?Sized>(rng: &mut R, cfg: &SimConfig, count: usize) -> Result<Vec<OracleReport>> {
    (0..count)
        .map(|k| {
            let obs = random_observation(rng, cfg, InstanceRanges::default());
            let (_, best) = enumerate_offloading(&obs, cfg)?;
            let lycd = crate::baselines::lycd_solve(&obs, cfg)?;
            Ok(OracleReport::new(format!("instance {k}"), best, lycd.objective))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::mean_channel_gains;
    use crate::resalloc::optimal_local_frequency;

    #[test]
    fn enumeration_guard() {
        let c = SimConfig::with_devices(13).unwrap();
        let obs = FrameObservation {
            t: 1,
            h: mean_channel_gains(&c),
            q: vec![1.0; 13],
            y: vec![0.0; 13],
        };
        assert!(matches!(
            enumerate_offloading(&obs, &c),
            Err(OffloadError::TooLarge { .. })
        ));
    }

    #[test]
    fn empty_queues_pick_all_zeros() {
        let c = SimConfig::with_devices(3).unwrap();
        let obs = FrameObservation {
            t: 1,
            h: mean_channel_gains(&c),
            q: vec![0.0; 3],
            y: vec![1.0; 3],
        };
        let (x, g) = enumerate_offloading(&obs, &c).unwrap();
        assert_eq!(g, 0.0);
        assert_eq!(x, OffloadDecision::zeros(3));
    }

    #[test]
    fn all_local_reference_matches_closed_form() {
        let c = SimConfig::with_devices(3).unwrap();
        let obs = FrameObservation {
            t: 1,
            h: mean_channel_gains(&c),
            q: vec![0.7, 4.0, 12.0],
            y: vec![900.0, 250.0, 0.0],
        };
        let reference = convex_reference_p4(&OffloadDecision::zeros(3), &obs, &c, 10).unwrap();
        let closed: f64 = (0..3)
            .map(|i| {
                let a = obs.q[i] + 20.0 * c.rate_weight[i];
                let f = optimal_local_frequency(a, obs.y[i], obs.q[i], i, &c);
                a * local_rate(f, &c) - obs.y[i] * local_power(f, &c)
            })
            .sum();
        assert!((reference - closed).abs() <= 1e-6 * closed);
    }

    #[test]
    fn refinement_never_decreases() {
        let c = SimConfig::with_devices(3).unwrap();
        let mut rng = crate::rng::stream(2, crate::rng::Stream::Instances);
        let obs = random_observation(&mut rng, &c, InstanceRanges::default());
        let x = OffloadDecision::ones(3);
        let coarse = convex_reference_p4(&x, &obs, &c, 20).unwrap();
        let fine = convex_reference_p4(&x, &obs, &c, 40).unwrap();
        assert!(fine >= coarse);
    }

    #[test]
    fn convex_reference_guard() {
        let c = SimConfig::with_devices(4).unwrap();
        let obs = FrameObservation {
            t: 1,
            h: mean_channel_gains(&c),
            q: vec![1.0; 4],
            y: vec![0.0; 4],
        };
        assert!(convex_reference_p4(&OffloadDecision::ones(4), &obs, &c, 10).is_err());
    }

    #[test]
    fn golden_section_on_parabola() {
        let (x, v) = golden_max(|t| -(t - 0.3) * (t - 0.3) + 2.0, 0.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-6);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn tx_energy_inverts_rate() {
        let c = SimConfig::with_devices(1).unwrap();
        let h = mean_channel_gains(&c)[0];
        let e = tx_energy(3.0, 0.4, h, &c);
        assert!((offload_rate(0.4, e, h, &c) - 3.0).abs() < 1e-12);
    }
}
