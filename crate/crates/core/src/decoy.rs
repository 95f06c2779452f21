//! Decoy-state estimators on gain tables: the vacuum-containing ℋ term,
//! S₊/S₋, single-photon bounds and key-rate formulas for the four- and
//! three-intensity protocols.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::gains_in_basis;
use crate::model::{Basis, Combo, DecoyEstimate, GainTable, PulseModel, SourceSpec, SystemModel};

const ENTROPY_TOL: f64 = 1e-12;

/// Binary entropy in bits with `H(0) = H(1) = 0`. Arguments within `1e-12`
/// outside [0, 1] are clamped.
pub fn binary_entropy(x: f64) -> f64 {
    debug_assert!((-ENTROPY_TOL..=1.0 + ENTROPY_TOL).contains(&x), "entropy argument {x}");
    let x = x.clamp(0.0, 1.0);
    if x == 0.0 || x == 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// Entropy of an error rate, treating rates above one half as one half.
fn error_entropy(e: f64) -> f64 {
    binary_entropy(e.clamp(0.0, 0.5))
}

pub fn h_term(gains: &GainTable, source: &SourceSpec) -> f64 {
    let a = (-source.mu_x).exp();
    a * gains.gain(Combo::OxxSym) - a * a * gains.gain(Combo::XooSym) + a.powi(3) * gains.gain(Combo::Ooo)
}

/// Objective weights of S₊ for `[xxx, oyy, yoy, yyo, ooo]`.
pub fn s_plus_weights(mu_x: f64, mu_y: f64) -> [f64; 5] {
    let base = (-3.0 * mu_x).exp() * mu_x.powi(4);
    let side = base * (-mu_y).exp();
    [
        (-3.0 * mu_y).exp() * mu_y.powi(4),
        side,
        side,
        side,
        base * (-3.0 * mu_y).exp(),
    ]
}

/// Objective weights of S₋ for `[yyy, yoo, oyo, ooy]`.
pub fn s_minus_weights(mu_x: f64, mu_y: f64) -> [f64; 4] {
    let base = (-3.0 * mu_x).exp() * mu_x.powi(4);
    let side = base * (-2.0 * mu_y).exp();
    [base, side, side, side]
}

pub const S_PLUS_COMBOS: [Combo; 5] = [Combo::Xxx, Combo::Oyy, Combo::Yoy, Combo::Yyo, Combo::Ooo];
pub const S_MINUS_COMBOS: [Combo; 4] = [Combo::Yyy, Combo::Yoo, Combo::Oyo, Combo::Ooy];

pub fn s_plus(gains: &GainTable, source: &SourceSpec) -> f64 {
    let w = s_plus_weights(source.mu_x, source.mu_y);
    S_PLUS_COMBOS.iter().zip(w).map(|(c, w)| w * gains.gain(*c)).sum()
}

pub fn s_minus(gains: &GainTable, source: &SourceSpec) -> f64 {
    let w = s_minus_weights(source.mu_x, source.mu_y);
    S_MINUS_COMBOS.iter().zip(w).map(|(c, w)| w * gains.gain(*c)).sum()
}

/// Denominator of the yield bound; positive iff `mu_x < mu_y`.
pub fn yield_denominator(mu_x: f64, mu_y: f64) -> f64 {
    (-3.0 * mu_x - 3.0 * mu_y).exp() * (mu_x.powi(3) * mu_y.powi(4) - mu_x.powi(4) * mu_y.powi(3))
}

/// Unclamped yield bound for given S₊ᴸ, S₋ᵁ and ℋ.
pub(crate) fn raw_yield(s_plus_low: f64, s_minus_high: f64, h: f64, mu_x: f64, mu_y: f64) -> f64 {
    (s_plus_low - s_minus_high - (-3.0 * mu_y).exp() * mu_y.powi(4) * h) / yield_denominator(mu_x, mu_y)
}

pub fn y111_lower(s_plus_low: f64, s_minus_high: f64, h: f64, source: &SourceSpec) -> Result<f64> {
    if !(source.mu_x < source.mu_y) {
        return Err(Error::invalid("mu_x", "mu_x < mu_y violated"));
    }
    Ok(raw_yield(s_plus_low, s_minus_high, h, source.mu_x, source.mu_y).clamp(0.0, 1.0))
}

/// Upper bound on the single-photon error; `None` when the yield bound is
/// zero and no key can be extracted.
pub fn e111_upper(exx_qxx_high: f64, h: f64, y111_low: f64, source: &SourceSpec) -> Option<f64> {
    error_bound(exx_qxx_high, h, y111_low, source.mu_x)
}

pub(crate) fn error_bound(eq_high: f64, h: f64, y: f64, mu_x: f64) -> Option<f64> {
    if !(y > 0.0) {
        return None;
    }
    Some(((eq_high - h / 2.0) / (mu_x.powi(3) * (-3.0 * mu_x).exp() * y)).clamp(0.0, 1.0))
}

/// Key-rate bracket shared by both protocols: `p³{μ³e^{-3μ}Y[1-H(e)] - Q f H(E)}`,
/// clamped at zero.
pub fn key_rate_formula(p_key: f64, mu: f64, f: f64, y111: f64, e111: f64, q_z: f64, qber_max_entropy: f64) -> f64 {
    key_rate_margin(p_key, mu, f, y111, e111, q_z, qber_max_entropy).max(0.0)
}

/// The same bracket without the clamp; negative when no key survives.
pub fn key_rate_margin(p_key: f64, mu: f64, f: f64, y111: f64, e111: f64, q_z: f64, qber_max_entropy: f64) -> f64 {
    p_key.powi(3) * (mu.powi(3) * (-3.0 * mu).exp() * y111 * (1.0 - error_entropy(e111)) - q_z * f * qber_max_entropy)
}

/// Largest binary entropy among the pairwise Z-basis error rates.
pub fn max_pair_entropy(qber: [f64; 3]) -> f64 {
    qber.iter().map(|&e| error_entropy(e)).fold(0.0, f64::max)
}

pub fn key_rate_four_intensity(
    y111: f64,
    e111_pz: f64,
    q_z: f64,
    qber: [f64; 3],
    source: &SourceSpec,
    system: &SystemModel,
) -> f64 {
    key_rate_formula(source.p_z, source.mu_z, system.f, y111, e111_pz, q_z, max_pair_entropy(qber))
}

/// Asymptotic decoy bounds from exact gains.
pub fn asymptotic_estimate(gains: &GainTable, source: &SourceSpec) -> Result<DecoyEstimate> {
    let h = h_term(gains, source);
    let sp = s_plus(gains, source);
    let sm = s_minus(gains, source);
    let y = y111_lower(sp, sm, h, source)?;
    let e = e111_upper(gains.get(Combo::Xxx).error_gain, h, y, source).unwrap_or(1.0);
    Ok(DecoyEstimate {
        h_low: h,
        h_high: h,
        s_plus_low: sp,
        s_minus_high: sm,
        y111_exp_low: y,
        e111_exp_high: e,
        y111_real_low: y,
        e111_real_high: e,
    })
}

/// Asymptotic four-intensity key rate with the decoy bounds it used.
pub fn asymptotic_key_rate_four_intensity(
    source: &SourceSpec,
    system: &SystemModel,
    gains: &GainTable,
) -> Result<(f64, DecoyEstimate)> {
    let est = asymptotic_estimate(gains, source)?;
    let rate = key_rate_four_intensity(
        est.y111_exp_low,
        est.e111_exp_high,
        gains.gain(Combo::Zzz),
        gains.qber_z(),
        source,
        system,
    );
    Ok((rate, est))
}

/// Three-intensity protocol: signal `mu`, decoy `nu` and vacuum, each
/// non-vacuum intensity sent in Z with probability `p_z_*` and otherwise X.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeIntensitySpec {
    pub mu: f64,
    pub nu: f64,
    pub p_mu: f64,
    pub p_nu: f64,
    pub p_z_mu: f64,
    pub p_z_nu: f64,
}

impl ThreeIntensitySpec {
    pub fn p_o(&self) -> f64 {
        1.0 - self.p_mu - self.p_nu
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::invalid("nu", "nu > 0 violated"));
        }
        if !(self.nu < self.mu) || !self.mu.is_finite() {
            return Err(Error::invalid("nu", "nu < mu violated"));
        }
        for (name, p) in [
            ("p_mu", self.p_mu),
            ("p_nu", self.p_nu),
            ("p_z_mu", self.p_z_mu),
            ("p_z_nu", self.p_z_nu),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(name, format!("{p} not in [0, 1]")));
            }
        }
        if self.p_o() < -1e-12 {
            return Err(Error::invalid("p_mu", "p_mu + p_nu <= 1 violated"));
        }
        Ok(())
    }

    /// Probability that a user sends the key source (signal in Z).
    pub fn p_key(&self) -> f64 {
        self.p_mu * self.p_z_mu
    }

    /// Roles for the elimination in one basis: weak decoy `x` = ν, strong
    /// decoy `y` = μ, both restricted to `basis`. The returned spec carries
    /// the selection probabilities of those restricted sources.
    pub fn role_source(&self, basis: Basis) -> SourceSpec {
        let (px, py) = match basis {
            Basis::Z => (self.p_nu * self.p_z_nu, self.p_mu * self.p_z_mu),
            Basis::X => (self.p_nu * (1.0 - self.p_z_nu), self.p_mu * (1.0 - self.p_z_mu)),
        };
        SourceSpec {
            mu_z: self.mu,
            mu_x: self.nu,
            mu_y: self.mu,
            mu_o: 0.0,
            p_z: py,
            p_x: px,
            p_y: py,
            p_o: self.p_o(),
        }
    }
}

/// Asymptotic three-intensity key rate from the Z-role and X-role gain
/// tables (every combination evaluated in the role's basis).
pub fn key_rate_three_intensity(z_gains: &GainTable, x_gains: &GainTable, spec: &ThreeIntensitySpec, f: f64) -> Result<f64> {
    spec.validate()?;
    let (mu, nu) = (spec.mu, spec.nu);
    let hz = h_term(z_gains, &spec.role_source(Basis::Z));
    let y = raw_yield(
        s_plus(z_gains, &spec.role_source(Basis::Z)),
        s_minus(z_gains, &spec.role_source(Basis::Z)),
        hz,
        nu,
        mu,
    )
    .clamp(0.0, 1.0);
    let xs = spec.role_source(Basis::X);
    let hx = h_term(x_gains, &xs);
    let yx = raw_yield(s_plus(x_gains, &xs), s_minus(x_gains, &xs), hx, nu, mu).clamp(0.0, 1.0);
    let Some(e) = error_bound(x_gains.get(Combo::Xxx).error_gain, hx, yx, nu) else {
        return Ok(0.0);
    };
    if y <= 0.0 {
        return Ok(0.0);
    }
    Ok(key_rate_formula(
        spec.p_key(),
        mu,
        f,
        y,
        e,
        z_gains.gain(Combo::Zzz),
        max_pair_entropy(z_gains.qber_z()),
    ))
}

/// Role gain tables `(Z, X)` of a three-intensity configuration.
pub fn three_intensity_gains(
    spec: &ThreeIntensitySpec,
    system: &SystemModel,
    pulse: &PulseModel,
    quadrature_points: usize,
) -> Result<(GainTable, GainTable)> {
    spec.validate()?;
    let z = gains_in_basis(&spec.role_source(Basis::Z), system, pulse, quadrature_points, Some(Basis::Z))?;
    let x = gains_in_basis(&spec.role_source(Basis::X), system, pulse, quadrature_points, Some(Basis::X))?;
    Ok((z, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GainEntry, GainMode};
    use approx::assert_relative_eq;

    fn table(entries: &[(Combo, f64)]) -> GainTable {
        let mut t = GainTable::new(GainMode::Expected);
        for &(c, q) in entries {
            t.set(c, GainEntry { gain: q, error_gain: 0.0 });
        }
        t
    }

    #[test]
    fn entropy_edges() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert_relative_eq!(binary_entropy(0.5), 1.0);
    }

    #[test]
    fn h_term_examples() {
        let s = SourceSpec::EXPERIMENT;
        assert_eq!(h_term(&table(&[]), &s), 0.0);
        let t = table(&[(Combo::Ooo, 1e-3)]);
        assert_relative_eq!(h_term(&t, &s), (-3.0 * s.mu_x).exp() * 1e-3);
    }

    #[test]
    fn s_plus_minus_examples() {
        let s = SourceSpec::EXPERIMENT;
        let t = table(&[]);
        assert_eq!((s_plus(&t, &s), s_minus(&t, &s)), (0.0, 0.0));
        let t = table(&[(Combo::Xxx, 2e-4)]);
        assert_relative_eq!(s_plus(&t, &s), (-3.0 * s.mu_y).exp() * s.mu_y.powi(4) * 2e-4);
        assert_eq!(s_minus(&t, &s), 0.0);
    }

    #[test]
    fn yield_bound_clamps_and_checks_order() {
        let s = SourceSpec::EXPERIMENT;
        assert_eq!(y111_lower(0.0, 1.0, 0.0, &s).unwrap(), 0.0);
        let bad = SourceSpec { mu_x: 0.2, ..s };
        assert!(y111_lower(1.0, 0.0, 0.0, &bad).is_err());
    }

    #[test]
    fn error_bound_examples() {
        let s = SourceSpec::EXPERIMENT;
        assert_eq!(e111_upper(1e-5, 2e-5, 1e-2, &s), Some(0.0));
        assert_eq!(e111_upper(1e-5, 0.0, 0.0, &s), None);
    }

    #[test]
    fn key_rate_edges() {
        let s = SourceSpec::EXPERIMENT;
        let sys = SystemModel::symmetric(0.5, 1e-6, 0.02, 0.25, 1.16).unwrap();
        assert_eq!(key_rate_four_intensity(0.1, 0.5, 1e-4, [0.01; 3], &s, &sys), 0.0);
        assert_eq!(key_rate_four_intensity(0.1, 0.7, 0.0, [0.0; 3], &s, &sys), 0.0);
        assert_eq!(key_rate_four_intensity(0.0, 0.0, 1e-4, [0.01; 3], &s, &sys), 0.0);
        assert!(key_rate_four_intensity(0.1, 0.05, 1e-5, [0.01; 3], &s, &sys) > 0.0);
    }

    #[test]
    fn three_intensity_rejects_bad_order() {
        let spec = ThreeIntensitySpec {
            mu: 0.1,
            nu: 0.2,
            p_mu: 0.5,
            p_nu: 0.3,
            p_z_mu: 0.9,
            p_z_nu: 0.1,
        };
        assert!(spec.validate().is_err());
        let t = GainTable::new(GainMode::Expected);
        assert!(key_rate_three_intensity(&t, &t, &spec, 1.16).is_err());
        let ok = ThreeIntensitySpec { mu: 0.3, ..spec };
        assert_eq!(key_rate_three_intensity(&t, &t, &ok, 1.16).unwrap(), 0.0);
    }
}
