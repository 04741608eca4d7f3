//! Windowed metrics and the queue-stability classifier.

use serde::{Deserialize, Serialize};

use super::trace::TraceRecord;
use crate::error::{OffloadError, Result};

/// Default frames averaged for reported metrics.
pub const DEFAULT_WINDOW: usize = 2000;
/// Moving-window length for plot series.
pub const PLOT_WINDOW: usize = 200;
/// Fraction of the run, at the end, over which queue growth is measured.
pub const STABILITY_TAIL: f64 = 0.3;
/// A run is stable when the fitted per-frame growth of the total queue over
/// the tail stays below this fraction of the mean data arriving per frame.
pub const STABILITY_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub frames: usize,
    /// Averages cover frames `window_start..=frames`.
    pub window_start: usize,
    pub window: usize,
    pub mean_weighted_rate: f64,
    pub mean_power: Vec<f64>,
    pub mean_queue: Vec<f64>,
    pub mean_total_queue: f64,
    pub final_total_queue: f64,
    pub stability: Stability,
    pub mean_candidates: f64,
    pub final_candidates: usize,
    pub mean_wall_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ratio_quartiles: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    /// First frame of the tail used for the fit.
    pub tail_start: usize,
    /// Least-squares slope of the total queue [Mbit/frame].
    pub slope: f64,
    pub tail_mean: f64,
    /// Mean total arrivals per frame over the tail [Mbit/frame].
    pub tail_arrivals: f64,
    /// Slope as a fraction of `tail_arrivals`: the share of arriving data
    /// that piles up instead of being served.
    pub relative_growth: f64,
    pub stable: bool,
}

/// Least-squares slope of `y` against its index.
pub fn ls_slope(y: &[f64]) -> f64 {
    let n = y.len();
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let xm = (nf - 1.0) / 2.0;
    let ym = y.iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, v) in y.iter().enumerate() {
        let dx = k as f64 - xm;
        sxy += dx * (v - ym);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Classify a run from its total-queue and total-arrival series.
pub fn classify(total_queue: &[f64], total_arrivals: &[f64]) -> Stability {
    let n = total_queue.len();
    let len = ((n as f64 * STABILITY_TAIL).ceil() as usize).clamp(n.min(2), n.max(1));
    let start = n - len.min(n);
    let tail = &total_queue[start..];
    let slope = ls_slope(tail);
    let tail_mean = tail.iter().sum::<f64>() / tail.len().max(1) as f64;
    let arr = &total_arrivals[start.min(total_arrivals.len())..];
    let tail_arrivals = arr.iter().sum::<f64>() / arr.len().max(1) as f64;
    let relative_growth = if tail_arrivals > 0.0 {
        slope / tail_arrivals
    } else if slope > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Stability {
        tail_start: start + 1,
        slope,
        tail_mean,
        tail_arrivals,
        relative_growth,
        stable: relative_growth <= STABILITY_THRESHOLD,
    }
}

fn mean(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    v.sum::<f64>() / n as f64
}

pub fn summarize(trace: &[TraceRecord], window: usize) -> Result<RunSummary> {
    if trace.is_empty() {
        return Err(OffloadError::Trace("empty trace".into()));
    }
    if window == 0 || window > trace.len() {
        return Err(OffloadError::Trace(format!(
            "window {window} does not fit a trace of {} frames",
            trace.len()
        )));
    }
    let n = trace[0].num_devices();
    let tail = &trace[trace.len() - window..];
    let totals: Vec<f64> = trace.iter().map(TraceRecord::total_queue).collect();
    let arrivals: Vec<f64> = trace.iter().map(|r| r.arrivals.iter().sum()).collect();
    Ok(RunSummary {
        frames: trace.len(),
        window_start: tail[0].t,
        window,
        mean_weighted_rate: mean(tail.iter().map(|r| r.weighted_rate), window),
        mean_power: (0..n).map(|i| mean(tail.iter().map(|r| r.power[i]), window)).collect(),
        mean_queue: (0..n).map(|i| mean(tail.iter().map(|r| r.q[i]), window)).collect(),
        mean_total_queue: mean(tail.iter().map(TraceRecord::total_queue), window),
        final_total_queue: *totals.last().expect("nonempty"),
        stability: classify(&totals, &arrivals),
        mean_candidates: mean(tail.iter().map(|r| r.candidates as f64), window),
        final_candidates: trace.last().expect("nonempty").candidates,
        mean_wall_ms: mean(trace.iter().map(|r| r.wall_ms), trace.len()),
        ratio_quartiles: None,
    })
}

/// Lower quartile, median and upper quartile (linear interpolation).
pub fn quartiles(values: &[f64]) -> [f64; 3] {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let q = |p: f64| {
        if v.is_empty() {
            return f64::NAN;
        }
        let pos = p * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    [q(0.25), q(0.5), q(0.75)]
}

pub fn median(values: &[f64]) -> f64 {
    quartiles(values)[1]
}

/// Trailing moving average; the first `window − 1` points average what is
/// available.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (k, v) in values.iter().enumerate() {
        sum += v;
        if k >= window {
            sum -= values[k - window];
        }
        out.push(sum / (k + 1).min(window) as f64);
    }
    out
}

/// Plot-ready CSV: frame, moving averages of weighted rate, total queue
/// and mean per-device power.
pub fn plot_series_csv(trace: &[TraceRecord], window: usize) -> String {
    let rate: Vec<f64> = trace.iter().map(|r| r.weighted_rate).collect();
    let queue: Vec<f64> = trace.iter().map(TraceRecord::total_queue).collect();
    let power: Vec<f64> = trace
        .iter()
        .map(|r| r.power.iter().sum::<f64>() / r.power.len().max(1) as f64)
        .collect();
    let (rate, queue, power) = (
        moving_average(&rate, window),
        moving_average(&queue, window),
        moving_average(&power, window),
    );
    let mut s = String::from("t,weighted_rate,total_queue,mean_power\n");
    for (k, r) in trace.iter().enumerate() {
        s.push_str(&format!("{},{},{},{}\n", r.t, rate[k], queue[k], power[k]));
    }
    s
}

impl RunSummary {
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_constant_and_line() {
        assert_eq!(ls_slope(&[4.0; 50]), 0.0);
        let line: Vec<f64> = (0..100).map(|k| 3.0 + 0.5 * k as f64).collect();
        assert!((ls_slope(&line) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn classifier_flags_linear_growth() {
        let arrivals = vec![30.0; 1000];
        let flat: Vec<f64> = (0..1000).map(|k| 40.0 + (k as f64 * 0.7).sin()).collect();
        assert!(classify(&flat, &arrivals).stable);
        // one percent of the arrivals left unserved is the boundary
        let growing: Vec<f64> = (0..1000).map(|k| k as f64 * 0.31).collect();
        let s = classify(&growing, &arrivals);
        assert!(!s.stable);
        assert!((s.relative_growth - 0.31 / 30.0).abs() < 1e-12);
        assert_eq!(s.tail_start, 701);
        let slow: Vec<f64> = (0..1000).map(|k| k as f64 * 0.29).collect();
        assert!(classify(&slow, &arrivals).stable);
        assert!(classify(&[0.0; 10], &[0.0; 10]).stable);
        assert!(!classify(&[0.0, 1.0, 2.0], &[0.0; 3]).stable);
    }

    #[test]
    fn quartiles_by_hand() {
        assert_eq!(quartiles(&[4.0, 1.0, 3.0, 2.0, 5.0]), [2.0, 3.0, 4.0]);
        assert_eq!(median(&[1.0, 2.0]), 1.5);
    }

    #[test]
    fn moving_average_warm_up() {
        assert_eq!(moving_average(&[2.0, 4.0, 6.0, 8.0], 2), vec![2.0, 3.0, 5.0, 7.0]);
    }
}
