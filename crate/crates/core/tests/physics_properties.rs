use mdiqcc::analyzer::{projection_probabilities, qber_x, visibility_from_phases, AnalyzerPhase};
use mdiqcc::decoy::{asymptotic_estimate, e111_upper, h_term, key_rate_four_intensity, s_minus, s_plus, y111_lower};
use mdiqcc::forward::{expected_gains, expected_gains_with, single_photon_error, single_photon_yield};
use mdiqcc::{Combo, GainEntry, GainMode, GainTable, PulseModel, Source, SourceSpec, SystemModel};
use proptest::prelude::*;

const F: f64 = 1.16;

fn delays() -> impl Strategy<Value = (f64, f64, f64)> {
    (1e-5..1e-3f64, -300.0..300.0f64, -300.0..300.0f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projection_total_ignores_timing((gamma, tb, tc) in delays(), mu in 0.01..0.2f64) {
        let (p, m) = projection_probabilities(mu, &PulseModel::with_delays(gamma, tb, tc), &AnalyzerPhase::default(), 16).unwrap();
        prop_assert!(((p + m) / mu.powi(3) - 1.0).abs() < 1e-9, "{} vs {}", p + m, mu.powi(3));
    }

    #[test]
    fn qber_x_ignores_user_labels((gamma, tb, tc) in delays(), v in 0.0..0.25f64) {
        let times = [0.0, tb, tc];
        let reference = qber_x(&PulseModel::with_delays(gamma, tb, tc), v).unwrap();
        for perm in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
            let t = perm.map(|i| times[i]);
            let pulse = PulseModel::with_delays(gamma, t[1] - t[0], t[2] - t[0]);
            prop_assert!((qber_x(&pulse, v).unwrap() - reference).abs() < 1e-15);
        }
    }

    #[test]
    fn phi_minus_share_is_qber_x(
        (gamma, tb, tc) in delays(),
        g1 in -0.5..0.5f64,
        g2 in -0.5..0.5f64,
        g3 in -0.5..0.5f64,
    ) {
        let pulse = PulseModel::with_delays(gamma, tb, tc);
        let phase = AnalyzerPhase { gamma1: g1, gamma2: g2, gamma3: g3 };
        let (p, m) = projection_probabilities(0.05, &pulse, &phase, 16).unwrap();
        let q = qber_x(&pulse, visibility_from_phases(&phase)).unwrap();
        prop_assert!((m / (p + m) - q).abs() < 1e-8, "{} vs {q}", m / (p + m));
    }
}

fn symmetric(eta: f64, p_d: f64, e_d: f64) -> SystemModel {
    SystemModel::symmetric(eta, p_d, e_d, 0.25, F).unwrap()
}

#[test]
fn equal_users_give_symmetric_gains() {
    let g = expected_gains(&SourceSpec::EXPERIMENT, &symmetric(0.3, 1e-6, 0.02), &PulseModel::default()).unwrap();
    for group in [[Combo::Oyy, Combo::Yoy, Combo::Yyo], [Combo::Yoo, Combo::Oyo, Combo::Ooy]] {
        for c in &group[1..] {
            assert!((g.gain(*c) - g.gain(group[0])).abs() < 1e-12);
        }
    }
}

#[test]
fn weak_signal_gain_is_single_photon_term() {
    // Without dark counts every term with an empty pulse vanishes, so the
    // signal gain is the three-photon term plus corrections of order mu^4.
    let sys = symmetric(0.6, 0.0, 0.02);
    let (y111, _) = single_photon_yield(&sys).unwrap();
    let residual = |mu: f64| {
        let source = SourceSpec::new(mu, mu / 10.0, mu / 2.0, 0.4, 0.3, 0.2).unwrap();
        let g = expected_gains(&source, &sys, &PulseModel::default()).unwrap();
        g.gain(Combo::Zzz) - mu.powi(3) * (-3.0 * mu).exp() * y111
    };
    let (r3, r4) = (residual(1e-3), residual(1e-4));
    assert!(r3.abs() < 1e-12 && r3.abs() < 1e-9 * 1e-3, "{r3}");
    let order = (r3 / r4).log10();
    assert!((order - 4.0).abs() < 0.05, "residual scales as mu^{order}");
    // Vacuum triples only ever see dark counts: one per path, eight patterns.
    let source = SourceSpec::new(1e-3, 1e-4, 5e-4, 0.4, 0.3, 0.2).unwrap();
    let p_d = 1e-3;
    let g = expected_gains(&source, &symmetric(0.6, p_d, 0.02), &PulseModel::default()).unwrap();
    let dark = 8.0 * p_d.powi(3) * (1.0 - p_d).powi(3);
    assert!((g.gain(Combo::Ooo) - dark).abs() < 1e-12 * dark);
}

#[test]
fn single_photon_error_limits() {
    let e = single_photon_error(&symmetric(1.0, 0.0, 0.03)).unwrap();
    assert!((e - 0.03).abs() < 1e-14);
    let e = single_photon_error(&symmetric(1e-9, 1e-6, 0.03)).unwrap();
    assert!((e - 0.5).abs() < 1e-6, "{e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn asymptotic_bounds_are_safe(
        eta in 0.01..1.0f64,
        p_d in 0.0..1e-5f64,
        e_d in 0.0..0.1f64,
        mu_x in 0.005..0.1f64,
        gap in 1.2..6.0f64,
    ) {
        let source = SourceSpec::new(0.2, mu_x, mu_x * gap, 0.4, 0.3, 0.2).unwrap();
        let sys = symmetric(eta, p_d, e_d);
        let gains = expected_gains_with(&source, &sys, &PulseModel::default(), 16).unwrap();
        let est = asymptotic_estimate(&gains, &source).unwrap();
        let (y, _) = single_photon_yield(&sys).unwrap();
        prop_assert!(est.y111_exp_low <= y * (1.0 + 1e-9), "{} > {y}", est.y111_exp_low);
        if est.y111_exp_low > 0.0 {
            let e = single_photon_error(&sys).unwrap();
            prop_assert!(est.e111_exp_high >= e * (1.0 - 1e-9), "{} < {e}", est.e111_exp_high);
        }
    }
}

const MAX_PHOTONS: usize = 6;

fn poisson(mu: f64) -> Vec<f64> {
    let mut out = vec![(-mu).exp()];
    for n in 1..=MAX_PHOTONS {
        out.push(out[n - 1] * mu / n as f64);
    }
    out
}

/// Gains of an arbitrary photon-number yield table. Events with an empty
/// pulse err half the time; the rest err as the table says.
fn synthetic_gains(source: &SourceSpec, yields: &[f64], errors: &[f64]) -> GainTable {
    let k = MAX_PHOTONS + 1;
    let mut table = GainTable::new(GainMode::Expected);
    for c in Combo::ALL {
        let mut entry = GainEntry::default();
        for member in c.members() {
            let pn = member.map(|s: Source| poisson(source.intensity(s)));
            for m in 0..k {
                for n in 0..k {
                    for p in 0..k {
                        let w = pn[0][m] * pn[1][n] * pn[2][p];
                        let i = (m * k + n) * k + p;
                        entry.gain += w * yields[i];
                        entry.error_gain += w * errors[i];
                    }
                }
            }
        }
        table.set(c, entry);
    }
    table
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn elimination_never_overestimates(
        yields in prop::collection::vec(0.0..1.0f64, (MAX_PHOTONS + 1).pow(3)),
        flips in prop::collection::vec(0.0..1.0f64, (MAX_PHOTONS + 1).pow(3)),
        mu_x in 0.01..0.15f64,
        gap in 1.2..8.0f64,
    ) {
        let k = MAX_PHOTONS + 1;
        let errors: Vec<f64> = (0..yields.len())
            .map(|i| {
                let vacuum = i / (k * k) == 0 || (i / k) % k == 0 || i % k == 0;
                if vacuum { yields[i] / 2.0 } else { yields[i] * flips[i] }
            })
            .collect();
        let source = SourceSpec::new(0.2, mu_x, mu_x * gap, 0.4, 0.3, 0.2).unwrap();
        let gains = synthetic_gains(&source, &yields, &errors);
        let h = h_term(&gains, &source);
        let y = y111_lower(s_plus(&gains, &source), s_minus(&gains, &source), h, &source).unwrap();
        let i111 = (k + 1) * k + 1;
        prop_assert!(y <= yields[i111] + 1e-9, "{y} > {}", yields[i111]);
        if y > 1e-6 {
            let e = e111_upper(gains.get(Combo::Xxx).error_gain, h, y, &source).unwrap();
            prop_assert!(e >= flips[i111] - 1e-6, "{e} < {}", flips[i111]);
        }
    }

    #[test]
    fn key_rate_falls_with_errors(
        y in 1e-4..0.3f64,
        e in 0.0..0.3f64,
        qber in prop::array::uniform3(0.0..0.3f64),
        bump in 0.0..0.1f64,
        which in 0usize..4,
    ) {
        let source = SourceSpec::EXPERIMENT;
        let sys = symmetric(0.3, 1e-6, 0.02);
        let q_z = 1e-4;
        let base = key_rate_four_intensity(y, e, q_z, qber, &source, &sys);
        let (mut e2, mut q2) = (e, qber);
        if which == 3 { e2 += bump } else { q2[which] += bump }
        prop_assert!(key_rate_four_intensity(y, e2, q_z, q2, &source, &sys) <= base);
    }
}
