//! Expected-value forward model: single-photon closed forms, coherent-pulse
//! gain tables and the infinite-decoy key rate.

use num_complex::Complex64;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::analyzer::{detector_means, pattern_is_phi_plus, pattern_probabilities, UserField, PATTERNS};
use crate::decoy::key_rate_four_intensity;
use crate::error::{Error, Result};
use crate::model::{AnalysisConfig, Basis, Combo, GainEntry, GainMode, GainTable, PulseModel, Source, SourceSpec, SystemModel};
use crate::quadrature::PhaseGrid;

/// Poisson photon-number distribution truncated where the tail drops below
/// `1e-12`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonExpansion {
    pub mu: f64,
    pub coefficients: Vec<f64>,
}

impl PoissonExpansion {
    pub const TAIL: f64 = 1e-12;

    pub fn new(mu: f64) -> Result<Self> {
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::invalid("mu", "intensity must be finite and >= 0"));
        }
        let mut coefficients = vec![(-mu).exp()];
        let mut sum = coefficients[0];
        let mut n = 0usize;
        while 1.0 - sum >= Self::TAIL && n < 10_000 {
            n += 1;
            let next = coefficients[n - 1] * mu / n as f64;
            coefficients.push(next);
            sum += next;
        }
        Ok(PoissonExpansion { mu, coefficients })
    }

    pub fn n_max(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficient(&self, n: usize) -> f64 {
        self.coefficients.get(n).copied().unwrap_or(0.0)
    }

    pub fn tail(&self) -> f64 {
        (1.0 - self.coefficients.iter().sum::<f64>()).max(0.0)
    }
}

/// Closed-form single-photon yields `(Y_Z, Y_X)` at the geometric-mean
/// transmittance. The two bases coincide.
pub fn single_photon_yield(system: &SystemModel) -> Result<(f64, f64)> {
    system.validate()?;
    let y = y111_closed(system.mean_eta(), system.p_d);
    Ok((y, y))
}

/// Closed-form single-photon bit error rate in the X basis, which equals
/// the Z-basis phase error rate.
pub fn single_photon_error(system: &SystemModel) -> Result<f64> {
    system.validate()?;
    let (eta, pd, ed) = (system.mean_eta(), system.p_d, system.e_d);
    let y = y111_closed(eta, pd);
    if y <= 0.0 {
        return Err(Error::Analysis("single-photon yield is zero".into()));
    }
    let q = 1.0 - eta;
    let num = (1.0 - pd).powi(3)
        * (ed / 4.0 * eta.powi(3)
            + 0.75 * eta.powi(3) * pd
            + 2.25 * eta * eta * q * pd
            + 1.5 * eta * eta * q * pd * pd
            + 6.0 * eta * q * q * pd * pd
            + 4.0 * q.powi(3) * pd.powi(3));
    Ok(num / y)
}

fn y111_closed(eta: f64, pd: f64) -> f64 {
    let q = 1.0 - eta;
    (1.0 - pd).powi(3)
        * (eta.powi(3) / 4.0
            + 1.5 * eta.powi(3) * pd
            + 4.5 * eta * eta * q * pd
            + 3.0 * eta * eta * q * pd * pd
            + 12.0 * eta * q * q * pd * pd
            + 8.0 * q.powi(3) * pd.powi(3))
}

/// User phases for a pair of relative phases `(φ_AB, φ_CA)`.
pub fn user_phases(phi_ab: f64, phi_ca: f64) -> [f64; 3] {
    [0.0, -phi_ab, phi_ca]
}

/// Fields sent by the three users. `amplitudes` are `sqrt(η μ)`, bit `u` of
/// `setting` selects V (Z basis) or the minus state (X basis) for user `u`.
pub fn setting_fields(amplitudes: [f64; 3], basis: Basis, setting: u8, phases: [f64; 3]) -> [UserField; 3] {
    let mut out = [UserField::default(); 3];
    for u in 0..3 {
        let a = Complex64::from_polar(amplitudes[u], phases[u]);
        let bit = (setting >> u) & 1 == 1;
        out[u] = match basis {
            Basis::Z if bit => UserField { h: Complex64::ZERO, v: a },
            Basis::Z => UserField { h: a, v: Complex64::ZERO },
            Basis::X => {
                let s = a * std::f64::consts::FRAC_1_SQRT_2;
                UserField { h: s, v: if bit { -s } else { s } }
            }
        };
    }
    out
}

/// Whether two users send light, so that some path can interfere and the
/// click statistics depend on the phases.
fn phase_dependent(amplitudes: [f64; 3]) -> bool {
    amplitudes.iter().filter(|&&a| a > 0.0).count() >= 2
}

/// Gain, X-basis parity error gain and Z-basis pairwise error gains of one
/// concrete intensity triple.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TripleGain {
    pub gain: f64,
    pub parity_error_gain: f64,
    pub pair_error_gains: [f64; 3],
}

/// User pairs (AB, AC, BC) as index pairs.
pub const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Error probability of a coincidence given whether it was signal-only and
/// whether the ideal outcome is wrong.
#[inline]
pub fn error_weight(signal_only: bool, wrong: bool, e_d: f64) -> f64 {
    match (signal_only, wrong) {
        (false, _) => 0.5,
        (true, true) => 1.0 - e_d,
        (true, false) => e_d,
    }
}

/// Expected gains of a single intensity triple in one basis.
pub fn triple_gain(
    intensities: [f64; 3],
    basis: Basis,
    system: &SystemModel,
    pulse: &PulseModel,
    grid: &PhaseGrid,
) -> TripleGain {
    let etas = system.etas();
    let amps = [0, 1, 2].map(|u| (etas[u] * intensities[u]).sqrt());
    let trivial;
    let grid = if phase_dependent(amps) {
        grid
    } else {
        trivial = PhaseGrid::trivial();
        &trivial
    };
    let overlaps = pulse.overlaps();
    let mut out = TripleGain::default();
    for setting in 0u8..8 {
        let parity = setting.count_ones() % 2 == 0;
        let pair_wrong = PAIRS.map(|(i, j)| ((setting >> i) & 1) != ((setting >> j) & 1));
        for &(phi_ab, phi_ca, w) in &grid.points {
            let fields = setting_fields(amps, basis, setting, user_phases(phi_ab, phi_ca));
            let means = detector_means(&fields, overlaps, system.visibility);
            let probs = pattern_probabilities(&means, system.p_d);
            let w = w / 8.0;
            for pat in PATTERNS {
                let (tot, sig) = probs[pat as usize];
                let dark = tot - sig;
                out.gain += w * tot;
                match basis {
                    Basis::X => {
                        let wrong = pattern_is_phi_plus(pat) != parity;
                        out.parity_error_gain += w * (sig * error_weight(true, wrong, system.e_d) + 0.5 * dark);
                    }
                    Basis::Z => {
                        for (p, &wrong) in pair_wrong.iter().enumerate() {
                            out.pair_error_gains[p] +=
                                w * (sig * error_weight(true, wrong, system.e_d) + 0.5 * dark);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gain-table entry for one ledger combination, summing aggregate members.
pub fn combo_gain(
    combo: Combo,
    source: &SourceSpec,
    system: &SystemModel,
    pulse: &PulseModel,
    grid: &PhaseGrid,
    basis: Basis,
) -> TripleGain {
    let mut acc = TripleGain::default();
    for member in combo.members() {
        let ints = member.map(|s: Source| source.intensity(s));
        let g = triple_gain(ints, basis, system, pulse, grid);
        acc.gain += g.gain;
        acc.parity_error_gain += g.parity_error_gain;
        for p in 0..3 {
            acc.pair_error_gains[p] += g.pair_error_gains[p];
        }
    }
    acc
}

/// Expected gain table with the default quadrature size.
pub fn expected_gains(source: &SourceSpec, system: &SystemModel, pulse: &PulseModel) -> Result<GainTable> {
    expected_gains_with(source, system, pulse, AnalysisConfig::default().quadrature_points)
}

pub fn expected_gains_with(
    source: &SourceSpec,
    system: &SystemModel,
    pulse: &PulseModel,
    quadrature_points: usize,
) -> Result<GainTable> {
    gains_in_basis(source, system, pulse, quadrature_points, None)
}

/// Gain table with every combination evaluated in `basis` when given,
/// otherwise in its protocol basis.
pub fn gains_in_basis(
    source: &SourceSpec,
    system: &SystemModel,
    pulse: &PulseModel,
    quadrature_points: usize,
    basis: Option<Basis>,
) -> Result<GainTable> {
    source.validate_intensities()?;
    system.validate()?;
    pulse.validate()?;
    let grid = PhaseGrid::new(quadrature_points);
    let compute = |c: &Combo| combo_gain(*c, source, system, pulse, &grid, basis.unwrap_or(c.basis()));
    #[cfg(feature = "parallel")]
    let gains: Vec<TripleGain> = Combo::ALL.par_iter().map(compute).collect();
    #[cfg(not(feature = "parallel"))]
    let gains: Vec<TripleGain> = Combo::ALL.iter().map(compute).collect();

    let mut table = GainTable::new(GainMode::Expected);
    for (c, g) in Combo::ALL.into_iter().zip(gains) {
        let error_gain = match basis.unwrap_or(c.basis()) {
            Basis::Z => g.pair_error_gains.iter().cloned().fold(0.0, f64::max),
            Basis::X => g.parity_error_gain,
        };
        if c == Combo::Zzz {
            table.zzz_pair_error_gains = g.pair_error_gains;
        }
        table.set(c, GainEntry { gain: g.gain, error_gain });
    }
    Ok(table)
}

/// Key rate with perfect knowledge of the single-photon yield and error.
pub fn infinite_decoy_key_rate(source: &SourceSpec, system: &SystemModel) -> Result<f64> {
    source.validate()?;
    let (y, _) = single_photon_yield(system)?;
    if y <= 0.0 {
        return Ok(0.0);
    }
    let e = single_photon_error(system)?;
    let g = triple_gain(
        [source.mu_z; 3],
        Basis::Z,
        system,
        &PulseModel::default(),
        &PhaseGrid::new(AnalysisConfig::default().quadrature_points),
    );
    let qber = if g.gain > 0.0 { g.pair_error_gains.map(|e| e / g.gain) } else { [0.0; 3] };
    Ok(key_rate_four_intensity(y, e, g.gain, qber, source, system))
}
