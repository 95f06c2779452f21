//! Multiplicative Chernoff bounds between observed counts and their
//! expectations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChernoffInterval {
    pub low: f64,
    pub high: f64,
    /// `-ln(ε/2)`.
    pub b: f64,
    /// Set when the input was zero and the interval carries no information.
    pub degenerate: bool,
}

/// `b = -ln(ε/2)`.
pub fn b_param(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid("epsilon", format!("{epsilon} not in (0, 1)")));
    }
    Ok(-(epsilon / 2.0).ln())
}

/// Bounds on the expectation of a count `chi` observed once.
pub fn expectation_bounds(chi: f64, epsilon: f64) -> Result<ChernoffInterval> {
    if !(chi >= 0.0) || !chi.is_finite() {
        return Err(Error::invalid("chi", "observed count must be finite and >= 0"));
    }
    let b = b_param(epsilon)?;
    Ok(ChernoffInterval {
        low: expectation_low(chi, b),
        high: expectation_high(chi, b),
        b,
        degenerate: chi == 0.0,
    })
}

/// Range an observation will fall in given its expectation `mean`.
pub fn observation_bounds(mean: f64, epsilon: f64) -> Result<ChernoffInterval> {
    if !(mean >= 0.0) || !mean.is_finite() {
        return Err(Error::invalid("mean", "expected count must be finite and >= 0"));
    }
    let b = b_param(epsilon)?;
    Ok(ChernoffInterval {
        low: observation_low(mean, b),
        high: observation_high(mean, b),
        b,
        degenerate: mean == 0.0,
    })
}

fn approx_delta(chi: f64, b: f64) -> f64 {
    (3.0 * b + (8.0 * b * chi + b * b).sqrt()) / (2.0 * (chi - b))
}

/// Defining equation of both exact bounds: `m - χ + χ ln(χ/m) = b`.
fn defining(m: f64, chi: f64, b: f64) -> f64 {
    m - chi + chi * (chi / m).ln() - b
}

pub fn expectation_low(chi: f64, b: f64) -> f64 {
    if chi <= 0.0 {
        return 0.0;
    }
    if chi >= 6.0 * b {
        return chi / (1.0 + approx_delta(chi, b));
    }
    // Root below χ, located by bisection in log space.
    let tiny = 1e-300f64;
    if defining(tiny, chi, b) <= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (tiny.ln(), chi.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if defining(mid.exp(), chi, b) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    (0.5 * (lo + hi)).exp()
}

pub fn expectation_high(chi: f64, b: f64) -> f64 {
    if chi <= 0.0 {
        return b;
    }
    if chi >= 6.0 * b {
        return chi / (1.0 - approx_delta(chi, b));
    }
    let mut lo = chi;
    let mut hi = chi + 10.0 * b + 10.0 * (b * chi).sqrt() + 1.0;
    while defining(hi, chi, b) <= 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if defining(mid, chi, b) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn observation_delta(mean: f64, b: f64) -> f64 {
    (b + (b * b + 8.0 * b * mean).sqrt()) / (2.0 * mean)
}

pub fn observation_low(mean: f64, b: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    ((1.0 - observation_delta(mean, b)) * mean).max(0.0)
}

pub fn observation_high(mean: f64, b: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    (1.0 + observation_delta(mean, b)) * mean
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_observation() {
        let i = expectation_bounds(0.0, 1e-10).unwrap();
        assert_eq!(i.low, 0.0);
        assert_relative_eq!(i.high, 2f64.ln() + 10.0 * 10f64.ln(), max_relative = 1e-14);
        assert!(i.degenerate);
    }

    #[test]
    fn large_count_uses_closed_form() {
        let i = expectation_bounds(1e6, 1e-10).unwrap();
        let b = i.b;
        let d = (3.0 * b + (8.0 * b * 1e6 + b * b).sqrt()) / (2.0 * (1e6 - b));
        assert_relative_eq!(i.low, 1e6 / (1.0 + d), max_relative = 1e-15);
        assert_relative_eq!(i.high, 1e6 / (1.0 - d), max_relative = 1e-15);
        assert!(i.low < 1e6 && i.high > 1e6);
    }

    #[test]
    fn small_count_roots_solve_the_equation() {
        let b = b_param(1e-10).unwrap();
        for chi in [1.0, 5.0, 35.0, 100.0] {
            let lo = expectation_low(chi, b);
            let hi = expectation_high(chi, b);
            assert!(lo < chi && chi < hi);
            assert!(defining(lo, chi, b).abs() < 1e-9 * chi.max(1.0));
            assert!(defining(hi, chi, b).abs() < 1e-9 * chi.max(1.0));
        }
    }

    #[test]
    fn invalid_epsilon() {
        assert!(expectation_bounds(1.0, 0.0).is_err());
        assert!(expectation_bounds(1.0, 1.0).is_err());
        assert!(observation_bounds(1.0, -1.0).is_err());
    }

    #[test]
    fn observation_examples() {
        let i = observation_bounds(0.0, 1e-10).unwrap();
        assert_eq!((i.low, i.high), (0.0, 0.0));
        assert!(i.degenerate);
        let i = observation_bounds(1e6, 1e-10).unwrap();
        let d = (i.b + (i.b * i.b + 8.0 * i.b * 1e6).sqrt()) / 2e6;
        assert_relative_eq!(i.low, (1.0 - d) * 1e6);
        assert_relative_eq!(i.high, (1.0 + d) * 1e6);
    }
}
