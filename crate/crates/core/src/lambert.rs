//! Principal branch of the Lambert W function on the real line.
//!
//! W₀ is the inverse of `w ↦ w·eʷ` on `w ≥ −1`, defined for `x ≥ −1/e`.
//! Evaluation uses the branch-point series close to `−1/e` and Halley's
//! iteration elsewhere.

use std::f64::consts::E;

use crate::error::{OffloadError, Result};

/// The branch point −1/e.
pub const BRANCH_POINT: f64 = -1.0 / E;

/// Switch to the branch-point series when `e·x + 1` falls below this.
const SERIES_CUTOFF: f64 = 1e-3;

const MAX_ITER: usize = 32;

/// Coefficients of `W(−1/e + p²/(2e)) + 1` in powers of `p`.
const BRANCH_SERIES: [f64; 9] = [
    1.0,
    -1.0 / 3.0,
    11.0 / 72.0,
    -43.0 / 540.0,
    769.0 / 17280.0,
    -221.0 / 8505.0,
    680863.0 / 43545600.0,
    -1963.0 / 204120.0,
    226287557.0 / 37623398400.0,
];

fn branch_series(p: f64) -> f64 {
    // returns W + 1
    BRANCH_SERIES.iter().rev().fold(0.0, |acc, c| acc * p + c) * p
}

/// W₀(x). Errors for `x < −1/e` and NaN.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if x.is_nan() || x < BRANCH_POINT {
        return Err(OffloadError::Domain(format!(
            "Lambert W0 is undefined below -1/e, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let z = x.mul_add(E, 1.0).max(0.0);
    if z < SERIES_CUTOFF {
        return Ok(branch_series((2.0 * z).sqrt()) - 1.0);
    }
    if x > 1e100 {
        return Ok(log_form(x));
    }
    Ok(halley(x, initial_guess(x, z)))
}

/// `1 + W₀((z − 1)/e)` for `z ≥ 0`, evaluated without cancellation near
/// the branch point. Negative `z` is treated as 0.
pub fn lambert_w0_shifted(z: f64) -> f64 {
    let z = z.max(0.0);
    if z < SERIES_CUTOFF {
        return branch_series((2.0 * z).sqrt());
    }
    let x = (z - 1.0) / E;
    1.0 + lambert_w0(x).expect("argument is above the branch point")
}

fn initial_guess(x: f64, z: f64) -> f64 {
    if z < 0.5 {
        branch_series((2.0 * z).sqrt()) - 1.0
    } else if x < 20.0 {
        let l = x.ln_1p();
        l * (1.0 - (1.0 + l).ln() / (2.0 + l))
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    }
}

fn halley(x: f64, mut w: f64) -> f64 {
    for _ in 0..MAX_ITER {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let step = f / denom;
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * (1.0 + w.abs()) {
            break;
        }
    }
    w
}

/// Newton on `w + ln w = ln x`, used where `eʷ` would overflow.
fn log_form(x: f64) -> f64 {
    let lx = x.ln();
    let mut w = lx - lx.ln();
    for _ in 0..MAX_ITER {
        let g = w + w.ln() - lx;
        let step = g / (1.0 + 1.0 / w);
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w {
            break;
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain Newton on w·eʷ = x, kept as an independent reference.
    fn newton_reference(x: f64) -> f64 {
        let mut w = if x > 1.0 { x.ln() } else { 0.0 };
        for _ in 0..200 {
            let ew = w.exp();
            w -= (w * ew - x) / (ew * (w + 1.0));
        }
        w
    }

    #[test]
    fn fixed_points() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert!((lambert_w0(BRANCH_POINT).unwrap() + 1.0).abs() < 1e-7);
        assert!((lambert_w0(E).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn omega_constant() {
        let w = lambert_w0(1.0).unwrap();
        assert!((w - newton_reference(1.0)).abs() < 1e-15);
        assert!((w - 0.567_143_290_409_783_8).abs() < 1e-15);
    }

    #[test]
    fn rejects_below_branch_point() {
        assert!(lambert_w0(-0.4).is_err());
        assert!(lambert_w0(f64::NAN).is_err());
    }

    #[test]
    fn agrees_with_newton_reference() {
        for &x in &[-0.3, -0.1, 0.5, 2.0, 10.0, 1e3, 1e6] {
            let w = lambert_w0(x).unwrap();
            assert!((w - newton_reference(x)).abs() <= 1e-14 * (1.0 + w.abs()), "x = {x}");
        }
    }

    #[test]
    fn shifted_form_matches_direct_evaluation() {
        for &z in &[1e-6, 5e-4, 2e-3, 0.3, 1.0, 40.0, 1e5] {
            let direct = 1.0 + lambert_w0((z - 1.0) / E).unwrap();
            let shifted = lambert_w0_shifted(z);
            assert!((direct - shifted).abs() <= 1e-9 * shifted.max(1e-6), "z = {z}");
        }
        assert_eq!(lambert_w0_shifted(0.0), 0.0);
        // near the branch point the shifted value behaves like sqrt(2z)
        let z = 1e-14;
        assert!((lambert_w0_shifted(z) / (2.0 * z).sqrt() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn huge_arguments() {
        let x = 1e200;
        let w = lambert_w0(x).unwrap();
        assert!(((w.ln() + w) - x.ln()).abs() < 1e-12 * x.ln());
    }
}
