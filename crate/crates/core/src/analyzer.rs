//! Six-detector GHZ-state analyzer for weak coherent inputs.
//!
//! Path 1 combines Bob's H and Alice's V modes, path 2 Charlie's H and Bob's
//! V, path 3 Alice's H and Charlie's V. A half-wave plate at 22.5° in each
//! path maps the pair onto the detectors `DkH` and `DkV`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PulseModel;
use crate::quadrature::PhaseGrid;

const PROB_TOL: f64 = 1e-12;

/// Relative phase picked up by the V component of each user at the
/// polarizing beam splitters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerPhase {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
}

impl AnalyzerPhase {
    pub fn sum(&self) -> f64 {
        self.gamma1 + self.gamma2 + self.gamma3
    }

    /// Phases reduced to `[0, 2π)`.
    pub fn reduced(&self) -> AnalyzerPhase {
        let r = |g: f64| g.rem_euclid(std::f64::consts::TAU);
        AnalyzerPhase {
            gamma1: r(self.gamma1),
            gamma2: r(self.gamma2),
            gamma3: r(self.gamma3),
        }
    }
}

/// Click probabilities of D1H, D1V, D2H, D2V, D3H, D3V.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickProbs(pub [f64; 6]);

impl ClickProbs {
    pub fn path(&self, k: usize) -> (f64, f64) {
        (self.0[2 * k], self.0[2 * k + 1])
    }
}

/// The eight valid coincidence patterns: bit `k` set means the V detector of
/// path `k` clicked. Even patterns herald Φ⁺, odd ones Φ⁻.
pub const PATTERNS: [u8; 8] = [0, 1, 2, 3, 4, 5, 6, 7];

pub fn pattern_is_phi_plus(pattern: u8) -> bool {
    pattern.count_ones() % 2 == 0
}

/// Weak-field click probabilities, linear in the intensities.
#[allow(clippy::too_many_arguments)]
pub fn click_probabilities(
    mu: f64,
    nu: f64,
    kappa: f64,
    pulse: &PulseModel,
    phi_ab: f64,
    phi_bc: f64,
    phi_ca: f64,
    phase: &AnalyzerPhase,
) -> Result<ClickProbs> {
    for (name, v) in [("mu", mu), ("nu", nu), ("kappa", kappa)] {
        if !v.is_finite() {
            return Err(Error::invalid(name, "must be finite"));
        }
        if v < 0.0 {
            return Err(Error::invalid(name, "negative intensity"));
        }
    }
    for (name, v) in [
        ("phi_ab", phi_ab),
        ("phi_bc", phi_bc),
        ("phi_ca", phi_ca),
        ("gamma1", phase.gamma1),
        ("gamma2", phase.gamma2),
        ("gamma3", phase.gamma3),
    ] {
        if !v.is_finite() {
            return Err(Error::invalid(name, "must be finite"));
        }
    }
    let ovl = pulse.overlaps();
    let pair = |a: f64, b: f64, o: f64, arg: f64| {
        let base = (a + b) / 4.0;
        let cross = 0.5 * (a * b).sqrt() * o * arg.cos();
        (base + cross, base - cross)
    };
    let (p1h, p1v) = pair(mu, nu, ovl[0], phi_ab + phase.gamma1);
    let (p2h, p2v) = pair(nu, kappa, ovl[1], phi_bc + phase.gamma2);
    let (p3h, p3v) = pair(kappa, mu, ovl[2], phi_ca + phase.gamma3);
    let mut p = [p1h, p1v, p2h, p2v, p3h, p3v];
    for (i, v) in p.iter_mut().enumerate() {
        if !(-PROB_TOL..=1.0 + PROB_TOL).contains(v) {
            return Err(Error::Analysis(format!(
                "click probability {v} of detector {i} outside [0, 1]"
            )));
        }
        *v = v.clamp(0.0, 1.0);
    }
    Ok(ClickProbs(p))
}

/// Phase-averaged probabilities of heralding Φ⁺ and Φ⁻ with equal
/// intensities `mu`, using the weak-field click model.
pub fn projection_probabilities(
    mu: f64,
    pulse: &PulseModel,
    phase: &AnalyzerPhase,
    quadrature_points: usize,
) -> Result<(f64, f64)> {
    if !(mu >= 0.0) {
        return Err(Error::invalid("mu", "negative intensity"));
    }
    let grid = PhaseGrid::new(quadrature_points);
    let (mut plus, mut minus) = (0.0, 0.0);
    for &(phi_ab, phi_ca, w) in &grid.points {
        let phi_bc = -phi_ab - phi_ca;
        let c = click_probabilities(mu, mu, mu, pulse, phi_ab, phi_bc, phi_ca, phase)?;
        for pat in PATTERNS {
            let prob: f64 = (0..3).map(|k| c.0[2 * k + ((pat >> k) & 1) as usize]).product();
            if pattern_is_phi_plus(pat) {
                plus += w * prob;
            } else {
                minus += w * prob;
            }
        }
    }
    Ok((plus, minus))
}

/// Signed visibility set by the analyzer phases.
pub fn visibility_from_phases(phase: &AnalyzerPhase) -> f64 {
    0.25 * phase.sum().cos()
}

/// X-basis error rate for a given visibility and delay configuration.
pub fn qber_x(pulse: &PulseModel, visibility: f64) -> Result<f64> {
    if !(0.0..=0.25).contains(&visibility) {
        return Err(Error::invalid("visibility", format!("{visibility} not in [0, 0.25]")));
    }
    Ok(qber_x_unchecked(pulse, visibility))
}

pub(crate) fn qber_x_unchecked(pulse: &PulseModel, visibility: f64) -> f64 {
    let o: f64 = pulse.overlaps().iter().product();
    0.5 * (1.0 - visibility * o)
}

/// Polarization-mode amplitudes of one user's coherent pulse after the
/// channel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UserField {
    pub h: Complex64,
    pub v: Complex64,
}

/// Mean photon numbers at the six detectors, `[path][H=0, V=1]`.
/// `overlaps` are the pair overlaps of paths 1-3.
///
/// The threefold coincidence visibility is the product of the three path
/// fringes, so each path's interference term carries `(4V)^(1/3)` and the
/// product carries `4V`.
pub fn detector_means(fields: &[UserField; 3], overlaps: [f64; 3], visibility: f64) -> [[f64; 2]; 3] {
    let [a, b, c] = fields;
    let paths = [(b.h, a.v), (c.h, b.v), (a.h, c.v)];
    let fringe = (4.0 * visibility).cbrt();
    let mut out = [[0.0; 2]; 3];
    for (k, (h, v)) in paths.into_iter().enumerate() {
        let base = (h.norm_sqr() + v.norm_sqr()) / 2.0;
        let cross = (h * v.conj()).re * fringe * overlaps[k];
        out[k] = [(base + cross).max(0.0), (base - cross).max(0.0)];
    }
    out
}

/// Pattern probabilities for one field configuration. For each pattern the
/// pair is (any valid coincidence, coincidence driven purely by signal
/// light). Detector clicks follow `1 - (1 - p_d) e^{-n}`.
pub fn pattern_probabilities(means: &[[f64; 2]; 3], p_d: f64) -> [(f64, f64); 8] {
    let mut click = [[0.0; 2]; 3];
    let mut signal = [[0.0; 2]; 3];
    let mut silent = [[0.0; 2]; 3];
    for k in 0..3 {
        for d in 0..2 {
            let e = (-means[k][d]).exp();
            signal[k][d] = 1.0 - e;
            click[k][d] = 1.0 - e + e * p_d;
            silent[k][d] = e * (1.0 - p_d);
        }
    }
    let mut out = [(0.0, 0.0); 8];
    for pat in PATTERNS {
        let (mut tot, mut sig) = (1.0, 1.0);
        for k in 0..3 {
            let on = ((pat >> k) & 1) as usize;
            tot *= click[k][on] * silent[k][1 - on];
            sig *= signal[k][on] * silent[k][1 - on];
        }
        out[pat as usize] = (tot, sig);
    }
    out
}

/// Probability that every path has at least one click. Depends only on the
/// total light per path, not on the phases.
pub fn all_paths_fire(fields: &[UserField; 3], p_d: f64) -> f64 {
    let [a, b, c] = fields;
    let totals = [
        b.h.norm_sqr() + a.v.norm_sqr(),
        c.h.norm_sqr() + b.v.norm_sqr(),
        a.h.norm_sqr() + c.v.norm_sqr(),
    ];
    totals
        .iter()
        .map(|&n| 1.0 - (1.0 - p_d).powi(2) * (-n).exp())
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn zero() -> AnalyzerPhase {
        AnalyzerPhase::default()
    }

    #[test]
    fn perfect_interference() {
        let p = PulseModel::default();
        let c = click_probabilities(0.1, 0.1, 0.1, &p, 0.0, 0.0, 0.0, &zero()).unwrap();
        assert_abs_diff_eq!(c.0[0], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(c.0[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn quadrature_phase_kills_interference() {
        let p = PulseModel::default();
        let c = click_probabilities(0.1, 0.2, 0.1, &p, PI / 2.0, 0.0, 0.0, &zero()).unwrap();
        assert_abs_diff_eq!(c.0[0], 0.075, epsilon = 1e-15);
        assert_abs_diff_eq!(c.0[1], 0.075, epsilon = 1e-15);
    }

    #[test]
    fn distinguishable_pulses_split_evenly() {
        let p = PulseModel::with_delays(PulseModel::DEFAULT_GAMMA, 1e6, 2e6);
        let c = click_probabilities(0.1, 0.1, 0.1, &p, 0.0, 0.0, 0.0, &zero()).unwrap();
        assert_abs_diff_eq!(c.0[0], 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(c.0[1], 0.05, epsilon = 1e-15);
    }

    #[test]
    fn rejects_negative_intensity() {
        let p = PulseModel::default();
        assert!(click_probabilities(-0.1, 0.1, 0.1, &p, 0.0, 0.0, 0.0, &zero()).is_err());
        assert!(click_probabilities(0.1, f64::NAN, 0.1, &p, 0.0, 0.0, 0.0, &zero()).is_err());
    }

    #[test]
    fn projection_dip_and_peak() {
        let p = PulseModel::default();
        let (plus, minus) = projection_probabilities(0.1, &p, &zero(), 32).unwrap();
        assert_abs_diff_eq!(plus, 0.625e-3, epsilon = 1e-14);
        assert_abs_diff_eq!(minus, 0.375e-3, epsilon = 1e-14);
        let swapped = AnalyzerPhase {
            gamma1: PI,
            ..zero()
        };
        let (plus, _) = projection_probabilities(0.1, &p, &swapped, 32).unwrap();
        assert_abs_diff_eq!(plus, 0.375e-3, epsilon = 1e-14);
    }

    #[test]
    fn qber_examples() {
        let p = PulseModel::default();
        assert_eq!(qber_x(&p, 0.25).unwrap(), 0.375);
        assert_eq!(qber_x(&p, 0.0).unwrap(), 0.5);
        assert!(qber_x(&p, 0.3).is_err());
        let gamma = 1e-4;
        let p = PulseModel::with_delays(gamma, 100.0, 100.0);
        assert_abs_diff_eq!(qber_x(&p, 0.25).unwrap(), 0.5 * (1.0 - 0.25 * (-1.0f64).exp()), epsilon = 1e-15);
    }

    #[test]
    fn visibility_examples() {
        assert_eq!(visibility_from_phases(&zero()), 0.25);
        let half = AnalyzerPhase {
            gamma1: PI / 2.0,
            ..zero()
        };
        assert_abs_diff_eq!(visibility_from_phases(&half), 0.0, epsilon = 1e-16);
        let third = AnalyzerPhase {
            gamma1: PI / 9.0,
            gamma2: PI / 9.0,
            gamma3: PI / 9.0,
        };
        assert_abs_diff_eq!(visibility_from_phases(&third), 0.125, epsilon = 1e-15);
    }
}
