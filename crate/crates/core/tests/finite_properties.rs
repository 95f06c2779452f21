use mdiqcc::chernoff::expectation_bounds;
use mdiqcc::decoy::{s_minus_weights, s_plus_weights, S_MINUS_COMBOS, S_PLUS_COMBOS};
use mdiqcc::finite::{finite_key_rate_obs, h_range, sminus_max, splus_min, Bounder, Observations};
use mdiqcc::forward::expected_gains;
use mdiqcc::{AnalysisConfig, PulseModel, SourceSpec, SystemModel};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

fn observations(loss_db: f64, n_pulses: f64) -> (SourceSpec, Observations) {
    let source = SourceSpec::EXPERIMENT;
    let eta = SystemModel::eta_from_total_loss(loss_db, 1.0);
    let sys = SystemModel::symmetric(eta, 1e-6, 0.0225, 0.218, 1.16).unwrap();
    let gains = expected_gains(&source, &sys, &PulseModel::default()).unwrap();
    (source, Observations::expected(&gains, &source, n_pulses))
}

fn plug_in(obs: &Observations, combos: &[mdiqcc::Combo], weights: &[f64]) -> f64 {
    combos.iter().zip(weights).map(|(c, w)| w * obs.count(*c) / obs.pulses(*c)).sum()
}

#[test]
fn chernoff_coverage_at_one_in_a_thousand() {
    let epsilon = 1e-3;
    let trials = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut below, mut above) = (0, 0);
    for i in 0..trials {
        let mean = 10f64.powf(1.0 + 4.0 * i as f64 / trials as f64);
        let chi = Poisson::new(mean).unwrap().sample(&mut rng);
        let b = expectation_bounds(chi, epsilon).unwrap();
        below += usize::from(mean < b.low);
        above += usize::from(mean > b.high);
    }
    let misses = below + above;
    assert!((misses as f64) <= epsilon * trials as f64, "{below} + {above} misses in {trials}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn lp_optima_bracket_plug_in(loss in 6.0..22.0f64, log_n in 10.0..14.0f64) {
        let (s, obs) = observations(loss, 10f64.powf(log_n));
        let bounder = Bounder::new(1e-10).unwrap();
        let lo = splus_min(&obs, s.mu_x, s.mu_y, &bounder).unwrap();
        let hi = sminus_max(&obs, s.mu_x, s.mu_y, &bounder).unwrap();
        let sp = plug_in(&obs, &S_PLUS_COMBOS, &s_plus_weights(s.mu_x, s.mu_y));
        let sm = plug_in(&obs, &S_MINUS_COMBOS, &s_minus_weights(s.mu_x, s.mu_y));
        prop_assert!(lo <= sp * (1.0 + 1e-9), "{lo} > {sp}");
        prop_assert!(hi >= sm * (1.0 - 1e-9), "{hi} < {sm}");
        let (h_lo, h_hi) = h_range(&obs, s.mu_x, &bounder).unwrap();
        prop_assert!(h_lo <= h_hi);
    }

    #[test]
    fn looser_failure_probability_tightens_bounds(loss in 6.0..22.0f64, e1 in 2.0..12.0f64, e2 in 2.0..12.0f64) {
        let (s, obs) = observations(loss, 1e12);
        let (tight, loose) = if e1 > e2 { (e1, e2) } else { (e2, e1) };
        let strict = Bounder::new(10f64.powf(-tight)).unwrap();
        let lax = Bounder::new(10f64.powf(-loose)).unwrap();
        prop_assert!(splus_min(&obs, s.mu_x, s.mu_y, &strict).unwrap() <= splus_min(&obs, s.mu_x, s.mu_y, &lax).unwrap() * (1.0 + 1e-12));
        prop_assert!(sminus_max(&obs, s.mu_x, s.mu_y, &strict).unwrap() >= sminus_max(&obs, s.mu_x, s.mu_y, &lax).unwrap() * (1.0 - 1e-12));
    }
}

#[test]
fn finer_scans_never_raise_the_rate() {
    let (s, obs) = observations(14.0, 1e13);
    let rate = |points| {
        let config = AnalysisConfig { h_scan_points: points, ..AnalysisConfig::default() };
        finite_key_rate_obs(&obs, &s, 1.16, &config).unwrap().rate_per_pulse
    };
    // nested grids: every point of one is a point of the next
    let sizes = [2, 3, 5, 9, 17, 33, 65, 129];
    let rates: Vec<f64> = sizes.iter().map(|&n| rate(n)).collect();
    for w in rates.windows(2) {
        assert!(w[1] <= w[0], "{rates:?}");
    }
    let fine = rate(1025);
    assert!((rate(64) - fine).abs() <= 1e-3 * fine, "{} vs {fine}", rate(64));
}

#[test]
fn large_samples_approach_the_asymptotic_rate() {
    let source = SourceSpec::EXPERIMENT;
    let sys = SystemModel::symmetric(SystemModel::eta_from_total_loss(12.0, 1.0), 1e-6, 0.0225, 0.218, 1.16).unwrap();
    let gains = expected_gains(&source, &sys, &PulseModel::default()).unwrap();
    let (asymptotic, _) = mdiqcc::decoy::asymptotic_key_rate_four_intensity(&source, &sys, &gains).unwrap();
    let obs = Observations::expected(&gains, &source, 1e15);
    let finite = finite_key_rate_obs(&obs, &source, 1.16, &AnalysisConfig::default()).unwrap();
    let gap = (asymptotic - finite.rate_per_pulse) / asymptotic;
    assert!((0.0..0.05).contains(&gap), "finite {} vs asymptotic {asymptotic}", finite.rate_per_pulse);
}
