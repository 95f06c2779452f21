use mdiqcc::optimize::{four_intensity_rate, optimize_four_intensity, optimize_three_intensity, three_intensity_rate, OptimizerSettings};
use mdiqcc::{AnalysisConfig, SystemModel};

const QUICK: OptimizerSettings = OptimizerSettings {
    evaluations_per_start: 80,
    random_starts: 1,
    seed: 3,
};

fn channel(loss_db: f64) -> SystemModel {
    SystemModel::symmetric(SystemModel::eta_from_total_loss(loss_db, 0.8), 1e-6, 0.025, 0.25, 1.16).unwrap()
}

fn config() -> AnalysisConfig {
    AnalysisConfig { h_scan_points: 16, quadrature_points: 16, ..AnalysisConfig::default() }
}

#[test]
fn reported_rate_is_the_rate_at_the_reported_point() {
    let sys = channel(10.0);
    let best = optimize_four_intensity(&sys, 1e13, &config(), &QUICK).unwrap();
    assert_eq!(best.rate.to_bits(), four_intensity_rate(&best.params, &sys, 1e13, &config()).to_bits());
    let best = optimize_three_intensity(&sys, 1e13, &config(), &QUICK).unwrap();
    assert_eq!(best.rate.to_bits(), three_intensity_rate(&best.params, &sys, 1e13, &config()).to_bits());
}

#[test]
fn same_seed_same_optimum() {
    let sys = channel(14.0);
    let a = optimize_four_intensity(&sys, 1e13, &config(), &QUICK).unwrap();
    let b = optimize_four_intensity(&sys, 1e13, &config(), &QUICK).unwrap();
    assert_eq!(a, b);
}

#[test]
fn best_rate_tracks_loss_and_sample_size() {
    let by_loss: Vec<f64> = [4.0, 8.0, 12.0, 16.0, 20.0]
        .iter()
        .map(|&l| optimize_four_intensity(&channel(l), 1e13, &config(), &QUICK).unwrap().rate)
        .collect();
    for w in by_loss.windows(2) {
        assert!(w[1] <= w[0], "{by_loss:?}");
    }
    let sys = channel(14.0);
    let by_n: Vec<f64> = [1e11, 1e12, 1e13, 1e14, 1e15]
        .iter()
        .map(|&n| optimize_four_intensity(&sys, n, &config(), &QUICK).unwrap().rate)
        .collect();
    for w in by_n.windows(2) {
        assert!(w[1] >= w[0], "{by_n:?}");
    }
}
