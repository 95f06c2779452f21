//! Finite-size analysis: Chernoff intervals on all counts, joint-constraint
//! linear programs for S₊/S₋, the ℋ range, real-value conversion and the
//! single scan over ℋ.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::chernoff::{b_param, expectation_high, expectation_low, observation_high, observation_low};
use crate::decoy::{
    error_bound, key_rate_formula, max_pair_entropy, raw_yield, s_minus_weights, s_plus_weights,
    ThreeIntensitySpec, S_MINUS_COMBOS, S_PLUS_COMBOS,
};
use crate::error::{Error, Result};
use crate::ledger::CountLedger;
use crate::lp::{Cmp, LinearProgram};
use crate::model::{AnalysisConfig, Basis, Combo, DecoyEstimate, GainTable, KeyRateReport, SourceSpec};

/// Real-valued counts per combination. Ledgers convert into this form;
/// expected counts built from gain tables use it directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observations {
    /// Pulses per row (aggregates: total over the three members).
    pub pulses: [f64; 12],
    pub counts: [f64; 12],
    pub errors_zzz: [f64; 3],
    pub errors_xxx: f64,
}

impl From<&CountLedger> for Observations {
    fn from(l: &CountLedger) -> Self {
        Observations {
            pulses: Combo::ALL.map(|c| l.pulses(c)),
            counts: Combo::ALL.map(|c| l.coincidences(c) as f64),
            errors_zzz: l.errors_zzz.map(|e| e as f64),
            errors_xxx: l.errors_xxx as f64,
        }
    }
}

impl Observations {
    /// Expected counts under an i.i.d. sending schedule: every member
    /// configuration receives `n_pulses` times the product of the users'
    /// selection probabilities.
    pub fn expected(gains: &GainTable, source: &SourceSpec, n_pulses: f64) -> Observations {
        let mut pulses = [0.0; 12];
        let mut counts = [0.0; 12];
        for c in Combo::ALL {
            let member = c.members()[0];
            let per_member = n_pulses * member.iter().map(|s| source.probability(*s)).product::<f64>();
            pulses[c.index()] = per_member * c.member_count() as f64;
            counts[c.index()] = per_member * gains.gain(c);
        }
        let nz = pulses[Combo::Zzz.index()];
        Observations {
            pulses,
            counts,
            errors_zzz: gains.zzz_pair_error_gains.map(|e| e * nz),
            errors_xxx: gains.get(Combo::Xxx).error_gain * pulses[Combo::Xxx.index()],
        }
    }

    pub fn pulses(&self, c: Combo) -> f64 {
        self.pulses[c.index()]
    }

    pub fn pulses_per_member(&self, c: Combo) -> f64 {
        self.pulses[c.index()] / c.member_count() as f64
    }

    pub fn count(&self, c: Combo) -> f64 {
        self.counts[c.index()]
    }

    pub fn qber_z(&self) -> [f64; 3] {
        let m = self.count(Combo::Zzz);
        if m > 0.0 {
            self.errors_zzz.map(|e| e / m)
        } else {
            [0.0; 3]
        }
    }

    pub fn qber_x(&self) -> f64 {
        let m = self.count(Combo::Xxx);
        if m > 0.0 {
            self.errors_xxx / m
        } else {
            0.0
        }
    }
}

/// Chernoff bounds with a running count of applications.
pub struct Bounder {
    b: f64,
    applications: Cell<usize>,
}

impl Bounder {
    pub fn new(epsilon: f64) -> Result<Self> {
        Ok(Bounder {
            b: b_param(epsilon)?,
            applications: Cell::new(0),
        })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn applications(&self) -> usize {
        self.applications.get()
    }

    fn tick(&self) {
        self.applications.set(self.applications.get() + 1);
    }

    pub fn exp_low(&self, chi: f64) -> f64 {
        self.tick();
        expectation_low(chi, self.b)
    }

    pub fn exp_high(&self, chi: f64) -> f64 {
        self.tick();
        expectation_high(chi, self.b)
    }
}

fn require(obs: &Observations, combos: &[Combo]) -> Result<()> {
    for &c in combos {
        if !(obs.pulses(c) > 0.0) {
            return Err(Error::MissingCombination(c.token().to_string()));
        }
    }
    Ok(())
}

/// Optimizes `Σ w_v n_v / N_v` over expected counts `n_v`. Joint rows bound
/// every subset of at least two variables (below when `minimize`, above
/// otherwise); every variable also gets its own two-sided bound.
fn joint_lp(obs: &Observations, combos: &[Combo], weights: &[f64], minimize: bool, bounder: &Bounder) -> Result<f64> {
    require(obs, combos)?;
    let n = combos.len();
    let counts: Vec<f64> = combos.iter().map(|&c| obs.count(c)).collect();
    let per_var: Vec<(f64, f64)> = counts.iter().map(|&c| (bounder.exp_low(c), bounder.exp_high(c))).collect();
    // work in units of each variable's upper bound
    let scale: Vec<f64> = per_var.iter().map(|&(_, hi)| hi.max(1.0)).collect();
    let w: Vec<f64> = (0..n).map(|i| weights[i] / obs.pulses(combos[i]) * scale[i]).collect();
    let w_max = w.iter().cloned().fold(0.0, f64::max);
    if w_max <= 0.0 {
        return Ok(0.0);
    }
    let mut lp = LinearProgram::new(w.iter().map(|x| x / w_max).collect());
    for (i, &(lo, hi)) in per_var.iter().enumerate() {
        let mut row = vec![0.0; n];
        row[i] = 1.0;
        lp.add(row.clone(), Cmp::Ge, lo / scale[i]);
        lp.add(row, Cmp::Le, hi / scale[i]);
    }
    for mask in 1u32..(1 << n) {
        if mask.count_ones() < 2 {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let sum: f64 = members.iter().map(|&i| counts[i]).sum();
        let rhs = if minimize { bounder.exp_low(sum) } else { bounder.exp_high(sum) };
        let row_scale = members.iter().map(|&i| scale[i]).fold(0.0, f64::max);
        let mut row = vec![0.0; n];
        for &i in &members {
            row[i] = scale[i] / row_scale;
        }
        lp.add(row, if minimize { Cmp::Ge } else { Cmp::Le }, rhs / row_scale);
    }
    let sol = if minimize { lp.minimize()? } else { lp.maximize()? };
    Ok(sol.value * w_max)
}

/// Smallest S₊ compatible with the observed counts.
pub fn splus_min(obs: &Observations, mu_x: f64, mu_y: f64, bounder: &Bounder) -> Result<f64> {
    joint_lp(obs, &S_PLUS_COMBOS, &s_plus_weights(mu_x, mu_y), true, bounder)
}

/// Largest S₋ compatible with the observed counts.
pub fn sminus_max(obs: &Observations, mu_x: f64, mu_y: f64, bounder: &Bounder) -> Result<f64> {
    joint_lp(obs, &S_MINUS_COMBOS, &s_minus_weights(mu_x, mu_y), false, bounder)
}

/// Interval of the ℋ term. The lower end is clamped at zero.
pub fn h_range(obs: &Observations, mu_x: f64, bounder: &Bounder) -> Result<(f64, f64)> {
    require(obs, &[Combo::OxxSym, Combo::XooSym, Combo::Ooo])?;
    let a = (-mu_x).exp();
    let n1 = obs.pulses_per_member(Combo::OxxSym);
    let n2 = obs.pulses_per_member(Combo::XooSym);
    let n0 = obs.pulses(Combo::Ooo);
    let (c1, c2, c0) = (obs.count(Combo::OxxSym), obs.count(Combo::XooSym), obs.count(Combo::Ooo));
    let (l1, u1) = (bounder.exp_low(c1), bounder.exp_high(c1));
    let (l2, u2) = (bounder.exp_low(c2), bounder.exp_high(c2));
    let (l0, u0) = (bounder.exp_low(c0), bounder.exp_high(c0));
    let low = a * l1 / n1 - a * a * u2 / n2 + a.powi(3) * l0 / n0;
    let high = a * u1 / n1 - a * a * l2 / n2 + a.powi(3) * u0 / n0;
    let low = low.max(0.0);
    if low > high {
        return Err(Error::Analysis(format!("empty h interval [{low:e}, {high:e}]")));
    }
    Ok((low, high))
}

fn grid(low: f64, high: f64, points: usize) -> impl Iterator<Item = f64> {
    let step = (high - low) / (points - 1) as f64;
    (0..points).map(move |i| if i + 1 == points { high } else { low + step * i as f64 })
}

/// Single-photon quantities at one ℋ value, expectation and real.
#[derive(Debug, Clone, Copy, PartialEq)]
struct ScanPoint {
    y_exp: f64,
    e_exp: f64,
    y_real: f64,
    e_real: f64,
}

/// Real-value conversion of the expected bounds for `n_single` key-basis
/// single-photon emissions. Not counted; callers record the two
/// applications once for the point they report.
fn to_real(y_exp: f64, e_exp: f64, n_single: f64, b: f64) -> (f64, f64) {
    let y = observation_low(n_single * y_exp, b) / n_single;
    if y <= 0.0 {
        return (0.0, 1.0);
    }
    let e = (observation_high(n_single * y * e_exp, b) / (n_single * y)).min(1.0);
    (y, e)
}

/// Full ledger-to-rate pipeline for the four-intensity protocol.
pub fn finite_key_rate(ledger: &CountLedger, source: &SourceSpec, f: f64, config: &AnalysisConfig) -> Result<KeyRateReport> {
    ledger.validate()?;
    finite_key_rate_obs(&Observations::from(ledger), source, f, config)
}

pub fn finite_key_rate_obs(obs: &Observations, source: &SourceSpec, f: f64, config: &AnalysisConfig) -> Result<KeyRateReport> {
    source.validate()?;
    config.validate()?;
    require(obs, &[Combo::Zzz, Combo::Xxx])?;
    let bounder = Bounder::new(config.epsilon)?;
    let (mx, my, mz) = (source.mu_x, source.mu_y, source.mu_z);

    let (h_low, h_high) = h_range(obs, mx, &bounder)?;
    let sp = splus_min(obs, mx, my, &bounder)?;
    let sm = sminus_max(obs, mx, my, &bounder)?;
    let eq_high = bounder.exp_high(obs.errors_xxx) / obs.pulses(Combo::Xxx);

    let n_single = obs.pulses(Combo::Zzz) * mz.powi(3) * (-3.0 * mz).exp();
    let q_z = obs.count(Combo::Zzz) / obs.pulses(Combo::Zzz);
    let qber = obs.qber_z();
    let hmax = max_pair_entropy(qber);

    let mut best: Option<(f64, f64, ScanPoint)> = None;
    let mut any_yield = false;
    for h in grid(h_low, h_high, config.h_scan_points) {
        let y_exp = raw_yield(sp, sm, h, mx, my).clamp(0.0, 1.0);
        let point = match error_bound(eq_high, h, y_exp, mx) {
            Some(e_exp) => {
                any_yield = true;
                let (y_real, e_real) = to_real(y_exp, e_exp, n_single, bounder.b());
                ScanPoint { y_exp, e_exp, y_real, e_real }
            }
            None => ScanPoint { y_exp, e_exp: 1.0, y_real: 0.0, e_real: 1.0 },
        };
        let r = key_rate_formula(source.p_z, mz, f, point.y_real, point.e_real, q_z, hmax);
        if best.is_none_or(|(br, _, _)| r < br) {
            best = Some((r, h, point));
        }
    }
    let applications = bounder.applications() + 2;
    let (rate, h_argmin, point) = best.expect("grid has at least two points");

    Ok(KeyRateReport {
        rate_per_pulse: rate,
        rate_per_second: None,
        qber_z_ab: qber[0],
        qber_z_ac: qber[1],
        qber_z_bc: qber[2],
        qber_x: obs.qber_x(),
        gain_z: q_z,
        decoy: DecoyEstimate {
            h_low,
            h_high,
            s_plus_low: sp,
            s_minus_high: sm,
            y111_exp_low: point.y_exp,
            e111_exp_high: point.e_exp,
            y111_real_low: point.y_real,
            e111_real_high: point.e_real,
        },
        h_argmin,
        epsilon: config.epsilon,
        chernoff_applications: applications,
        failure_budget: applications as f64 * config.epsilon,
        h_scan_points: config.h_scan_points,
        reason: (!any_yield).then(|| "single-photon yield bound is zero over the whole h interval".to_string()),
    })
}

/// Counts of a three-intensity run, split into the two role tables.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeIntensityObservations {
    pub z: Observations,
    pub x: Observations,
}

impl ThreeIntensityObservations {
    pub fn expected(z_gains: &GainTable, x_gains: &GainTable, spec: &ThreeIntensitySpec, n_pulses: f64) -> Self {
        ThreeIntensityObservations {
            z: Observations::expected(z_gains, &spec.role_source(Basis::Z), n_pulses),
            x: Observations::expected(x_gains, &spec.role_source(Basis::X), n_pulses),
        }
    }
}

/// Finite-size three-intensity rate. The yield bound comes from the Z-role
/// elimination at the worst end of its ℋ interval; the phase error is the
/// largest X-role bound over its ℋ interval.
pub fn finite_key_rate_three_intensity(
    obs: &ThreeIntensityObservations,
    spec: &ThreeIntensitySpec,
    f: f64,
    config: &AnalysisConfig,
) -> Result<KeyRateReport> {
    spec.validate()?;
    config.validate()?;
    let bounder = Bounder::new(config.epsilon)?;
    let (mu, nu) = (spec.mu, spec.nu);

    let (hz_low, hz_high) = h_range(&obs.z, nu, &bounder)?;
    let spz = splus_min(&obs.z, nu, mu, &bounder)?;
    let smz = sminus_max(&obs.z, nu, mu, &bounder)?;
    let y_exp = raw_yield(spz, smz, hz_high, nu, mu).clamp(0.0, 1.0);

    let (hx_low, hx_high) = h_range(&obs.x, nu, &bounder)?;
    let spx = splus_min(&obs.x, nu, mu, &bounder)?;
    let smx = sminus_max(&obs.x, nu, mu, &bounder)?;
    require(&obs.x, &[Combo::Xxx])?;
    let eq_high = bounder.exp_high(obs.x.errors_xxx) / obs.x.pulses(Combo::Xxx);
    let mut e_exp: f64 = 0.0;
    let mut h_argmax = hx_low;
    for h in grid(hx_low, hx_high, config.h_scan_points) {
        let yx = raw_yield(spx, smx, h, nu, mu).clamp(0.0, 1.0);
        let e = error_bound(eq_high, h, yx, nu).unwrap_or(1.0);
        if e > e_exp {
            e_exp = e;
            h_argmax = h;
        }
    }

    let key = Combo::Zzz;
    let n_single = obs.z.pulses(key) * mu.powi(3) * (-3.0 * mu).exp();
    let (y_real, e_real, reason) = if y_exp > 0.0 {
        let (y, e) = to_real(y_exp, e_exp, n_single, bounder.b());
        (y, e, None)
    } else {
        (0.0, 1.0, Some("single-photon yield bound is zero".to_string()))
    };
    let q_z = obs.z.count(key) / obs.z.pulses(key);
    let qber = obs.z.qber_z();
    let rate = key_rate_formula(spec.p_key(), mu, f, y_real, e_real, q_z, max_pair_entropy(qber));
    let applications = bounder.applications() + 2;
    Ok(KeyRateReport {
        rate_per_pulse: rate,
        rate_per_second: None,
        qber_z_ab: qber[0],
        qber_z_ac: qber[1],
        qber_z_bc: qber[2],
        qber_x: obs.x.qber_x(),
        gain_z: q_z,
        decoy: DecoyEstimate {
            h_low: hz_low,
            h_high: hz_high,
            s_plus_low: spz,
            s_minus_high: smz,
            y111_exp_low: y_exp,
            e111_exp_high: e_exp,
            y111_real_low: y_real,
            e111_real_high: e_real,
        },
        h_argmin: h_argmax,
        epsilon: config.epsilon,
        chernoff_applications: applications,
        failure_budget: applications as f64 * config.epsilon,
        h_scan_points: config.h_scan_points,
        reason,
    })
}
