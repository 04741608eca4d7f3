//! Noisy order-preserving quantization of a relaxed decision, and the
//! adaptive candidate-count schedule.

use rand::Rng;
use rand_distr::StandardNormal;

use super::mlp::sigmoid;
use crate::error::{OffloadError, Result};
use crate::resalloc::OffloadDecision;

/// `count` threshold quantizations of `xhat`, in order.
///
/// The first rounds at 0.5. The k-th (k ≥ 2) thresholds at the entry that
/// is (k−1)-th closest to 0.5; an entry equal to the threshold becomes 1
/// only when the threshold is at most 0.5.
pub fn order_preserving(xhat: &[f64], count: usize) -> Vec<OffloadDecision> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    out.push(xhat.iter().map(|v| *v > 0.5).collect::<Vec<_>>().into());
    let mut order: Vec<usize> = (0..xhat.len()).collect();
    order.sort_by(|&i, &j| {
        (xhat[i] - 0.5)
            .abs()
            .partial_cmp(&(xhat[j] - 0.5).abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    for &k in order.iter().take(count.saturating_sub(1)) {
        let th = xhat[k];
        let bits: Vec<bool> = xhat.iter().map(|v| *v > th || (*v == th && th <= 0.5)).collect();
        out.push(bits.into());
    }
    out
}

fn check_count(m: usize, n: usize) -> Result<()> {
    if !m.is_multiple_of(2) || m < 2 || m > 2 * n {
        return Err(OffloadError::ContractViolation(format!(
            "candidate count must be even in [2, {}], got {m}",
            2 * n
        )));
    }
    Ok(())
}

/// Quantize with an explicit noise vector for the noisy half.
pub fn nop_quantize_with_noise(xhat: &[f64], m: usize, noise: &[f64]) -> Result<Vec<OffloadDecision>> {
    check_count(m, xhat.len())?;
    if noise.len() != xhat.len() {
        return Err(OffloadError::ShapeMismatch {
            expected: xhat.len(),
            got: noise.len(),
        });
    }
    let mut out = order_preserving(xhat, m / 2);
    let noisy: Vec<f64> = xhat.iter().zip(noise).map(|(x, z)| sigmoid(x + z)).collect();
    out.extend(order_preserving(&noisy, m / 2));
    Ok(out)
}

/// `m` candidates: `m/2` noise-free thresholds of `xhat`, then `m/2` of
/// `sigmoid(xhat + n)` with `n` standard normal.
pub fn nop_quantize<R: Rng + ?Sized>(xhat: &[f64], m: usize, rng: &mut R) -> Result<Vec<OffloadDecision>> {
    check_count(m, xhat.len())?;
    let noise: Vec<f64> = (0..xhat.len()).map(|_| rng.sample(StandardNormal)).collect();
    nop_quantize_with_noise(xhat, m, &noise)
}

/// Adaptive candidate count `M_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerSchedule {
    pub current: usize,
    pub interval: usize,
    num_devices: usize,
    /// Largest `m* = m mod (M/2)` seen since the last update.
    max_since_update: Option<usize>,
}

impl QuantizerSchedule {
    pub fn new(num_devices: usize, interval: usize) -> Self {
        Self {
            current: 2 * num_devices,
            interval,
            num_devices,
            max_since_update: None,
        }
    }

    /// Record the index of the selected candidate in the current frame.
    pub fn record(&mut self, chosen: usize) {
        let m_star = chosen % (self.current / 2);
        self.max_since_update = Some(self.max_since_update.map_or(m_star, |v| v.max(m_star)));
    }

    /// Candidate count for frame `t` (first frame is 1).
    pub fn update(&mut self, t: usize) -> usize {
        if t.is_multiple_of(self.interval) {
            if let Some(m) = self.max_since_update.take() {
                self.current = 2 * (m + 1).min(self.num_devices);
            }
        }
        self.current
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(d: &OffloadDecision) -> String {
        d.to_string()
    }

    #[test]
    fn two_device_example() {
        let c = nop_quantize_with_noise(&[0.2, 0.6], 4, &[0.0, 0.0]).unwrap();
        assert_eq!(bits(&c[0]), "01");
        assert_eq!(bits(&c[1]), "00");
        // zero noise: noisy half quantizes sigmoid(x̂)
        let s: Vec<f64> = [0.2, 0.6].iter().map(|v: &f64| sigmoid(*v)).collect();
        let expected = order_preserving(&s, 2);
        assert_eq!(&c[2..], &expected[..]);
    }

    #[test]
    fn half_rounds_down() {
        let c = order_preserving(&[0.5, 0.9, 0.1], 1);
        assert_eq!(bits(&c[0]), "010");
    }

    #[test]
    fn rejects_bad_counts() {
        let x = [0.1, 0.7];
        assert!(nop_quantize_with_noise(&x, 3, &[0.0; 2]).is_err());
        assert!(nop_quantize_with_noise(&x, 0, &[0.0; 2]).is_err());
        assert!(nop_quantize_with_noise(&x, 6, &[0.0; 2]).is_err());
        assert!(nop_quantize_with_noise(&x, 4, &[0.0; 2]).is_ok());
    }

    #[test]
    fn schedule_update_rule() {
        let mut s = QuantizerSchedule::new(10, 32);
        assert_eq!(s.current, 20);
        for m in [0, 1, 2] {
            s.record(m);
        }
        assert_eq!(s.update(31), 20);
        assert_eq!(s.update(32), 6);
        // indices from the noisy half fold onto the noise-free ones
        s.record(5);
        assert_eq!(s.update(64), 6);
        s.record(3);
        assert_eq!(s.update(96), 2);
        s.record(0);
        assert_eq!(s.update(128), 2);
    }

    #[test]
    fn schedule_caps_at_two_n() {
        let mut s = QuantizerSchedule::new(3, 4);
        s.record(2);
        assert_eq!(s.update(4), 6);
    }
}
