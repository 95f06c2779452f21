use mdiqcc::forward::expected_gains;
use mdiqcc::model::{Combo, PulseModel, SourceSpec, SystemModel};
use mdiqcc::sim::{simulate_counts, simulate_hom_scan, SimPlan};

fn bright() -> SystemModel {
    SystemModel::symmetric(0.5, 1e-4, 0.02, 0.25, 1.16).unwrap()
}

fn within(observed: u64, mean: f64, sigmas: f64) -> bool {
    (observed as f64 - mean).abs() <= sigmas * mean.sqrt() + 1.0
}

#[test]
fn counts_track_expected_gains() {
    let source = SourceSpec::new(0.6, 0.3, 0.5, 0.25, 0.25, 0.25).unwrap();
    let sys = bright();
    let gains = expected_gains(&source, &sys, &PulseModel::default()).unwrap();
    let ledger = simulate_counts(&source, &sys, &SimPlan::proportional(1e8, 11)).unwrap();
    for c in Combo::ALL {
        let mean = gains.gain(c) * ledger.pulses_per_member(c);
        assert!(within(ledger.coincidences(c), mean, 4.5), "{}: {} vs {mean}", c.token(), ledger.coincidences(c));
    }
    let n = ledger.pulses(Combo::Xxx);
    assert!(within(ledger.errors_xxx, gains.get(Combo::Xxx).error_gain * n, 4.5));
    let n = ledger.pulses(Combo::Zzz);
    for p in 0..3 {
        assert!(within(ledger.errors_zzz[p], gains.zzz_pair_error_gains[p] * n, 4.5));
    }
}

#[test]
fn seed_controls_the_stream() {
    let source = SourceSpec::EXPERIMENT;
    let a = simulate_counts(&source, &bright(), &SimPlan::proportional(1e6, 5)).unwrap();
    let b = simulate_counts(&source, &bright(), &SimPlan::proportional(1e6, 5)).unwrap();
    let c = simulate_counts(&source, &bright(), &SimPlan::proportional(1e6, 6)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn hom_dip_is_centred() {
    let sys = SystemModel::symmetric(0.5, 1e-6, 0.0, 0.25, 1.16).unwrap();
    let grid = [(0.0, 0.0), (400.0, -400.0)];
    let pts = simulate_hom_scan(0.1, &sys, PulseModel::DEFAULT_GAMMA, &grid, 2_000_000, 9).unwrap();
    let q0 = pts[0].qber_x.unwrap();
    let q1 = pts[1].qber_x.unwrap();
    assert!(q0 < q1, "{q0} {q1}");
}
