use mdiqcc::{CountLedger, Combo, Config};
use proptest::prelude::*;
use serde_json::json;

#[derive(Debug, Clone)]
struct Raw {
    mu_z: f64,
    mu_x: f64,
    mu_y: f64,
    p: [f64; 3],
    p_skew: f64,
    eta: [f64; 3],
    p_d: f64,
    e_d: f64,
    visibility: f64,
    f: f64,
    gamma: f64,
    epsilon: f64,
    h_scan_points: usize,
    quadrature_points: usize,
}

fn raw() -> impl Strategy<Value = Raw> {
    (
        (-0.1..1.0f64, -0.05..0.3f64, 0.0..0.3f64),
        [-0.05..0.6f64, -0.05..0.6f64, -0.05..0.3f64],
        prop_oneof![3 => Just(0.0), 1 => -0.05..0.05f64],
        [-0.05..1.05f64, -0.05..1.05f64, -0.05..1.05f64],
        (-0.01..0.2f64, -0.05..0.6f64, -0.02..0.27f64, 0.9..1.5f64),
        prop_oneof![5 => 1e-6..1e-3f64, 1 => -1e-4..0.0f64],
        (-0.1..1.05f64, 0usize..80, 0usize..40),
    )
        .prop_map(|((mu_z, mu_x, mu_y), p, p_skew, eta, (p_d, e_d, visibility, f), gamma, (epsilon, h, q))| Raw {
            mu_z,
            mu_x,
            mu_y,
            p,
            p_skew,
            eta,
            p_d,
            e_d,
            visibility,
            f,
            gamma,
            epsilon,
            h_scan_points: h,
            quadrature_points: q,
        })
}

impl Raw {
    fn p_o(&self) -> f64 {
        1.0 - self.p.iter().sum::<f64>() + self.p_skew
    }

    fn json(&self) -> String {
        json!({
            "source": {
                "mu_z": self.mu_z, "mu_x": self.mu_x, "mu_y": self.mu_y, "mu_o": 0.0,
                "p_z": self.p[0], "p_x": self.p[1], "p_y": self.p[2], "p_o": self.p_o(),
            },
            "system": {
                "eta_a": self.eta[0], "eta_b": self.eta[1], "eta_c": self.eta[2],
                "p_d": self.p_d, "e_d": self.e_d, "visibility": self.visibility, "f": self.f,
            },
            "pulse": { "gamma": self.gamma },
            "analysis": {
                "epsilon": self.epsilon,
                "h_scan_points": self.h_scan_points,
                "quadrature_points": self.quadrature_points,
            },
        })
        .to_string()
    }

    /// Whether every listed type invariant holds, stated from scratch.
    fn admissible(&self) -> bool {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let probs = [self.p[0], self.p[1], self.p[2], self.p_o()];
        let sum: f64 = probs.iter().sum();
        self.mu_z > 0.0
            && self.mu_x >= 0.0
            && self.mu_x < self.mu_y
            && probs.iter().all(|&p| p >= 0.0)
            && (sum - 1.0).abs() <= 1e-12
            && self.eta.iter().all(|&e| unit(e))
            && unit(self.p_d)
            && unit(self.e_d)
            && (0.0..=0.25).contains(&self.visibility)
            && self.f >= 1.0
            && self.gamma > 0.0
            && self.epsilon > 0.0
            && self.epsilon < 1.0
            && self.h_scan_points >= 2
            && self.quadrature_points >= 8
    }
}

fn ledger() -> impl Strategy<Value = CountLedger> {
    (
        prop::array::uniform12((0u32..2_000_000, 0.0..1.0f64)),
        prop::array::uniform3(0.0..0.5f64),
        0.0..0.5f64,
        0.0..0.5f64,
    )
        .prop_map(|(rows, ez, ex, ey)| {
            let mut l = CountLedger::default();
            for (c, (mantissa, frac)) in Combo::ALL.into_iter().zip(rows) {
                let pulses = f64::from(mantissa) * 1e5;
                l.set(c, pulses, (pulses * frac * 1e-3).floor() as u64);
            }
            let m = Combo::ALL.map(|c| l.coincidences(c) as f64);
            l.errors_zzz = ez.map(|e| (m[Combo::Zzz.index()] * e) as u64);
            l.errors_xxx = (m[Combo::Xxx.index()] * ex) as u64;
            l.errors_yyy = (m[Combo::Yyy.index()] * ey) as u64;
            l
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn config_accepts_exactly_the_admissible_inputs(r in raw()) {
        let parsed = Config::from_json_str(&r.json());
        prop_assert_eq!(parsed.is_ok(), r.admissible(), "{:?} -> {:?}", r, parsed.err());
    }
}

proptest! {
    #[test]
    fn ledger_csv_round_trips(l in ledger()) {
        let counts = l.counts_csv();
        let errors = l.errors_csv();
        let mut back = CountLedger::default();
        back.read_counts(counts.as_bytes()).unwrap();
        back.read_errors(errors.as_bytes()).unwrap();
        prop_assert_eq!(&back, &l);
        prop_assert_eq!(back.counts_csv(), counts);
        prop_assert_eq!(back.errors_csv(), errors);
    }
}
