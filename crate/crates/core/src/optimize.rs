//! Multi-start downhill-simplex search over protocol parameters.
//!
//! Intensities are searched in log space, selection probabilities through a
//! softmax, so every probe is a valid configuration. The decoy ordering is
//! kept by writing the larger intensity as the smaller one times a ratio
//! bounded away from one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoy::{key_rate_margin, max_pair_entropy, three_intensity_gains, ThreeIntensitySpec};
use crate::error::{Error, Result};
use crate::finite::{finite_key_rate_obs, finite_key_rate_three_intensity, Observations, ThreeIntensityObservations};
use crate::forward::expected_gains_with;
use crate::model::{AnalysisConfig, KeyRateReport, PulseModel, SourceSpec, SystemModel};

/// Smallest allowed ratio between the two decoy-type intensities.
pub const MIN_INTENSITY_RATIO: f64 = 1.05;
const MIN_INTENSITY: f64 = 1e-4;
const MAX_INTENSITY: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    /// Objective evaluations per start.
    pub evaluations_per_start: usize,
    /// Random starts in addition to the fixed ones.
    pub random_starts: usize,
    pub seed: u64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            evaluations_per_start: 300,
            random_starts: 3,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum<P> {
    pub params: P,
    pub rate: f64,
    pub evaluations: usize,
    pub seed: u64,
}

/// Finite-key four-intensity rate from expected counts under i.i.d.
/// source selection. Analysis failures count as rate zero.
pub fn four_intensity_rate(source: &SourceSpec, system: &SystemModel, n_pulses: f64, config: &AnalysisConfig) -> f64 {
    four_intensity_score(source, system, n_pulses, config).max(0.0)
}

pub fn three_intensity_rate(spec: &ThreeIntensitySpec, system: &SystemModel, n_pulses: f64, config: &AnalysisConfig) -> f64 {
    three_intensity_score(spec, system, n_pulses, config).max(0.0)
}

/// Unclamped key-rate bracket at the reported bounds, so the search has a
/// slope to follow where the rate itself is zero.
fn margin(report: &KeyRateReport, p_key: f64, mu: f64, f: f64) -> f64 {
    let qber = [report.qber_z_ab, report.qber_z_ac, report.qber_z_bc];
    key_rate_margin(
        p_key,
        mu,
        f,
        report.decoy.y111_real_low,
        report.decoy.e111_real_high,
        report.gain_z,
        max_pair_entropy(qber),
    )
}

fn four_intensity_score(source: &SourceSpec, system: &SystemModel, n_pulses: f64, config: &AnalysisConfig) -> f64 {
    let eval = || -> Result<f64> {
        let gains = expected_gains_with(source, system, &PulseModel::default(), config.quadrature_points)?;
        let obs = Observations::expected(&gains, source, n_pulses);
        let report = finite_key_rate_obs(&obs, source, system.f, config)?;
        Ok(margin(&report, source.p_z, source.mu_z, system.f))
    };
    eval().unwrap_or(FAILED)
}

fn three_intensity_score(spec: &ThreeIntensitySpec, system: &SystemModel, n_pulses: f64, config: &AnalysisConfig) -> f64 {
    let eval = || -> Result<f64> {
        let (z, x) = three_intensity_gains(spec, system, &PulseModel::default(), config.quadrature_points)?;
        let obs = ThreeIntensityObservations::expected(&z, &x, spec, n_pulses);
        let report = finite_key_rate_three_intensity(&obs, spec, system.f, config)?;
        Ok(margin(&report, spec.p_key(), spec.mu, system.f))
    };
    eval().unwrap_or(FAILED)
}

/// Score of configurations the analysis rejects.
const FAILED: f64 = -1.0;

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-9, 1.0 - 1e-9);
    (p / (1.0 - p)).ln()
}

fn intensity(t: f64) -> Option<f64> {
    let v = t.exp();
    (MIN_INTENSITY..=MAX_INTENSITY).contains(&v).then_some(v)
}

fn ratio(t: f64) -> f64 {
    MIN_INTENSITY_RATIO + t.exp()
}

/// Coordinates: ln μ_z, ln μ_x, ln(μ_y/μ_x − r_min), then logits of
/// (p_z, p_x, p_y) relative to p_o.
fn decode_four(t: &[f64]) -> Option<SourceSpec> {
    let mu_z = intensity(t[0])?;
    let mu_x = intensity(t[1])?;
    let mu_y = mu_x * ratio(t[2]);
    if mu_y > MAX_INTENSITY {
        return None;
    }
    let p = softmax(&[t[3], t[4], t[5], 0.0]);
    SourceSpec::new(mu_z, mu_x, mu_y, p[0], p[1], p[2]).ok()
}

fn encode_four(s: &SourceSpec) -> Vec<f64> {
    let r = (s.mu_y / s.mu_x - MIN_INTENSITY_RATIO).max(1e-3);
    vec![
        s.mu_z.ln(),
        s.mu_x.ln(),
        r.ln(),
        (s.p_z / s.p_o).ln(),
        (s.p_x / s.p_o).ln(),
        (s.p_y / s.p_o).ln(),
    ]
}

/// Coordinates: ln ν, ln(μ/ν − r_min), logits of (p_μ, p_ν) relative to
/// vacuum, logit p_{Z|μ}, logit p_{Z|ν}.
fn decode_three(t: &[f64]) -> Option<ThreeIntensitySpec> {
    let nu = intensity(t[0])?;
    let mu = nu * ratio(t[1]);
    if mu > MAX_INTENSITY {
        return None;
    }
    let p = softmax(&[t[2], t[3], 0.0]);
    let spec = ThreeIntensitySpec {
        mu,
        nu,
        p_mu: p[0],
        p_nu: p[1],
        p_z_mu: sigmoid(t[4]),
        p_z_nu: sigmoid(t[5]),
    };
    spec.validate().ok().map(|_| spec)
}

fn encode_three(s: &ThreeIntensitySpec) -> Vec<f64> {
    let r = (s.mu / s.nu - MIN_INTENSITY_RATIO).max(1e-3);
    vec![
        s.nu.ln(),
        r.ln(),
        (s.p_mu / s.p_o()).ln(),
        (s.p_nu / s.p_o()).ln(),
        logit(s.p_z_mu),
        logit(s.p_z_nu),
    ]
}

/// Nelder-Mead minimization of `f`. Returns the best vertex, its value and
/// the number of evaluations spent.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], step: f64, max_evals: usize) -> (Vec<f64>, f64, usize) {
    let n = x0.len();
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &[f64]| {
        evals.set(evals.get() + 1);
        f(x)
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = eval(&x);
        simplex.push((x, v));
    }
    let combine = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(a, b)| a + t * (b - a)).collect() };
    while evals.get() < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if size < 1e-7 || (spread.abs() <= 1e-12 * simplex[0].1.abs() && size < 1e-3) {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let reflected = combine(&centroid, &worst.0, -1.0);
        let fr = eval(&reflected);
        if fr < simplex[0].1 {
            let expanded = combine(&centroid, &worst.0, -2.0);
            let fe = eval(&expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let (contracted, fc) = if fr < worst.1 {
                let c = combine(&centroid, &worst.0, -0.5);
                let v = eval(&c);
                (c, v)
            } else {
                let c = combine(&centroid, &worst.0, 0.5);
                let v = eval(&c);
                (c, v)
            };
            if fc < fr.min(worst.1) {
                simplex[n] = (contracted, fc);
            } else {
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    let x = combine(&best, &v.0, 0.5);
                    let fx = eval(&x);
                    *v = (x, fx);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, v) = simplex.swap_remove(0);
    (x, v, evals.get())
}

/// Runs every start, returning the best decoded point. Ties are broken on
/// the lexicographic order of the coordinates.
fn multi_start<P, D, S>(starts: Vec<Vec<f64>>, decode: D, score: S, settings: &OptimizerSettings) -> Result<(P, usize)>
where
    P: Send,
    D: Fn(&[f64]) -> Option<P> + Sync,
    S: Fn(&P) -> f64 + Sync,
{
    let objective = |t: &[f64]| match decode(t) {
        Some(p) => -score(&p),
        // outside the box: worse than any feasible point, sloped back in
        None => -FAILED + 1.0 + t.iter().map(|v| v.abs()).sum::<f64>(),
    };
    let run = |x0: &Vec<f64>| nelder_mead(objective, x0, 0.3, settings.evaluations_per_start);
    #[cfg(feature = "parallel")]
    let results: Vec<_> = starts.par_iter().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = starts.iter().map(run).collect();
    let evaluations = results.iter().map(|r| r.2).sum();
    let best = results
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.iter().zip(&b.0).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)))
        .ok_or_else(|| Error::Analysis("no optimizer starts".into()))?;
    let params = decode(&best.0).ok_or_else(|| Error::Analysis("optimizer left the parameter box".into()))?;
    Ok((params, evaluations))
}

fn check_inputs(system: &SystemModel, n_pulses: f64, config: &AnalysisConfig) -> Result<()> {
    system.validate()?;
    config.validate()?;
    if !(n_pulses > 0.0) || !n_pulses.is_finite() {
        return Err(Error::invalid("n_pulses", "n_pulses > 0 violated"));
    }
    Ok(())
}

/// Maximizes the four-intensity finite-key rate. The experiment's operating
/// point is always one of the starts.
pub fn optimize_four_intensity(
    system: &SystemModel,
    n_pulses: f64,
    config: &AnalysisConfig,
    settings: &OptimizerSettings,
) -> Result<Optimum<SourceSpec>> {
    check_inputs(system, n_pulses, config)?;
    let mut starts = vec![
        encode_four(&SourceSpec::EXPERIMENT),
        encode_four(&SourceSpec::new(0.3, 0.03, 0.12, 0.6, 0.3, 0.05)?),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    for _ in 0..settings.random_starts {
        let mu_x = rng.random_range(0.01..0.08);
        let spec = SourceSpec::new(
            rng.random_range(0.1..0.5),
            mu_x,
            mu_x * rng.random_range(2.0..6.0),
            rng.random_range(0.3..0.7),
            rng.random_range(0.15..0.4),
            rng.random_range(0.02..0.1),
        );
        if let Ok(s) = spec {
            starts.push(encode_four(&s));
        }
    }
    let score = |s: &SourceSpec| four_intensity_score(s, system, n_pulses, config);
    let (params, evaluations) = multi_start(starts, decode_four, score, settings)?;
    Ok(Optimum {
        rate: four_intensity_rate(&params, system, n_pulses, config),
        params,
        evaluations,
        seed: settings.seed,
    })
}

pub fn optimize_three_intensity(
    system: &SystemModel,
    n_pulses: f64,
    config: &AnalysisConfig,
    settings: &OptimizerSettings,
) -> Result<Optimum<ThreeIntensitySpec>> {
    check_inputs(system, n_pulses, config)?;
    let fixed = [
        ThreeIntensitySpec { mu: 0.3, nu: 0.05, p_mu: 0.5, p_nu: 0.3, p_z_mu: 0.8, p_z_nu: 0.2 },
        ThreeIntensitySpec { mu: 0.4, nu: 0.1, p_mu: 0.4, p_nu: 0.4, p_z_mu: 0.7, p_z_nu: 0.1 },
    ];
    let mut starts: Vec<Vec<f64>> = fixed.iter().map(encode_three).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    for _ in 0..settings.random_starts {
        let nu = rng.random_range(0.02..0.15);
        let p_mu = rng.random_range(0.3..0.6);
        starts.push(encode_three(&ThreeIntensitySpec {
            mu: nu * rng.random_range(2.0..8.0),
            nu,
            p_mu,
            p_nu: rng.random_range(0.1..(0.95 - p_mu)),
            p_z_mu: rng.random_range(0.5..0.95),
            p_z_nu: rng.random_range(0.05..0.5),
        }));
    }
    let score = |s: &ThreeIntensitySpec| three_intensity_score(s, system, n_pulses, config);
    let (params, evaluations) = multi_start(starts, decode_three, score, settings)?;
    Ok(Optimum {
        rate: three_intensity_rate(&params, system, n_pulses, config),
        params,
        evaluations,
        seed: settings.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_finds_quadratic_minimum() {
        let (x, v, _) = nelder_mead(|x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2), &[0.0, 0.0], 0.5, 2000);
        assert!((x[0] - 1.0).abs() < 1e-4 && (x[1] + 2.0).abs() < 1e-4, "{x:?} {v}");
    }

    #[test]
    fn encodings_round_trip() {
        let s = SourceSpec::EXPERIMENT;
        let back = decode_four(&encode_four(&s)).unwrap();
        assert!((back.mu_y - s.mu_y).abs() < 1e-12 && (back.p_x - s.p_x).abs() < 1e-12);
        let t = ThreeIntensitySpec { mu: 0.3, nu: 0.05, p_mu: 0.5, p_nu: 0.3, p_z_mu: 0.8, p_z_nu: 0.2 };
        let back = decode_three(&encode_three(&t)).unwrap();
        assert!((back.mu - t.mu).abs() < 1e-12 && (back.p_z_nu - t.p_z_nu).abs() < 1e-9);
    }

    #[test]
    fn ratio_margin_is_kept() {
        let s = decode_four(&[-1.0, -3.0, -40.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(s.mu_y >= s.mu_x * MIN_INTENSITY_RATIO);
    }
}
