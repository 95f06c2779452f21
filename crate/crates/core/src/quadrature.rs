//! Gauss-Legendre rules used for phase averaging.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Product rule averaging over `[0, 2π]²`: each entry is `(φ1, φ2, weight)`
/// with weights summing to one.
#[derive(Debug, Clone)]
pub struct PhaseGrid {
    pub points: Vec<(f64, f64, f64)>,
}

impl PhaseGrid {
    pub fn new(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let phis: Vec<(f64, f64)> = x.iter().zip(&w).map(|(&xi, &wi)| ((xi + 1.0) * PI, wi / 2.0)).collect();
        let mut points = Vec::with_capacity(n * n);
        for &(a, wa) in &phis {
            for &(b, wb) in &phis {
                points.push((a, b, wa * wb));
            }
        }
        PhaseGrid { points }
    }

    /// A single zero-phase node, for integrands that do not depend on phase.
    pub fn trivial() -> Self {
        PhaseGrid {
            points: vec![(0.0, 0.0, 1.0)],
        }
    }
}
