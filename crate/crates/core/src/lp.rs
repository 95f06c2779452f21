//! Dense two-phase simplex for small linear programs with nonnegative
//! variables. Bland's rule guarantees termination.

use crate::error::{Error, Result};

/// Smallest admissible pivot. Tableau entries are O(1) after the callers'
/// scaling; smaller pivots amplify rounding noise.
const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub cmp: Cmp,
    pub rhs: f64,
}

/// `minimize c·x` subject to the constraints and `x >= 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        LinearProgram {
            objective,
            constraints: Vec::new(),
        }
    }

    fn check(&self, sol: LpSolution) -> Result<LpSolution> {
        let v = self.max_violation(&sol.x);
        if v > 1e-7 {
            return Err(Error::Infeasible(format!("solution violates constraints by {v:e}")));
        }
        Ok(sol)
    }

    pub fn add(&mut self, coeffs: Vec<f64>, cmp: Cmp, rhs: f64) {
        assert_eq!(coeffs.len(), self.objective.len(), "constraint width");
        self.constraints.push(Constraint { coeffs, cmp, rhs });
    }

    pub fn minimize(&self) -> Result<LpSolution> {
        let sol = Tableau::build(self).solve(&self.objective)?;
        self.check(sol)
    }

    pub fn maximize(&self) -> Result<LpSolution> {
        let neg: Vec<f64> = self.objective.iter().map(|c| -c).collect();
        let sol = self.check(Tableau::build(self).solve(&neg)?)?;
        Ok(LpSolution {
            value: -sol.value,
            x: sol.x,
        })
    }
}

struct Tableau {
    /// `rows x (cols + 1)`, last column is the right-hand side.
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_vars: usize,
    n_cols: usize,
    artificial_start: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Tableau {
        let n = lp.objective.len();
        let m = lp.constraints.len();
        let n_slack = lp.constraints.iter().filter(|c| c.cmp != Cmp::Eq).count();
        let artificial_start = n + n_slack;
        let n_cols = artificial_start + m;
        let mut a = vec![vec![0.0; n_cols + 1]; m];
        let mut basis = vec![0; m];
        let mut slack = n;
        for (i, c) in lp.constraints.iter().enumerate() {
            let flip = c.rhs < 0.0;
            let s = if flip { -1.0 } else { 1.0 };
            for j in 0..n {
                a[i][j] = s * c.coeffs[j];
            }
            match c.cmp {
                Cmp::Le => {
                    a[i][slack] = s;
                    slack += 1;
                }
                Cmp::Ge => {
                    a[i][slack] = -s;
                    slack += 1;
                }
                Cmp::Eq => {}
            }
            a[i][n_cols] = s * c.rhs;
            a[i][artificial_start + i] = 1.0;
            basis[i] = artificial_start + i;
        }
        // A slack with +1 after sign normalization can start in the basis
        // directly; its artificial then stays at zero.
        for i in 0..m {
            if let Some(j) = (n..artificial_start).find(|&j| a[i][j] == 1.0 && (0..m).all(|r| r == i || a[r][j] == 0.0)) {
                basis[i] = j;
                a[i][artificial_start + i] = 0.0;
            }
        }
        Tableau {
            a,
            basis,
            n_vars: n,
            n_cols,
            artificial_start,
        }
    }

    fn rhs(&self, i: usize) -> f64 {
        self.a[i][self.n_cols]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.a[row][col];
        for v in self.a[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.a[row].clone();
        for (i, r) in self.a.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                r[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Runs simplex iterations for cost vector `cost` over columns
    /// `0..allowed`. Returns false when unbounded.
    fn iterate(&mut self, cost: &[f64], allowed: usize) -> bool {
        let m = self.a.len();
        loop {
            // reduced costs
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let mut d = cost[j];
                for i in 0..m {
                    d -= cost[self.basis[i]] * self.a[i][j];
                }
                d < -PIVOT_TOL * (1.0 + cost[j].abs())
            });
            let Some(col) = entering else { return true };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..m {
                let aij = self.a[i][col];
                if aij > PIVOT_TOL {
                    let ratio = self.rhs(i) / aij;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-15 * br.abs().max(1.0)
                                || (ratio <= br + 1e-15 * br.abs().max(1.0) && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match best {
                None => return false,
                Some((row, _)) => self.pivot(row, col),
            }
        }
    }

    fn solve(mut self, objective: &[f64]) -> Result<LpSolution> {
        let m = self.a.len();
        // phase 1
        let mut cost1 = vec![0.0; self.n_cols];
        for c in cost1.iter_mut().skip(self.artificial_start) {
            *c = 1.0;
        }
        self.iterate(&cost1, self.n_cols);
        let infeas: f64 = (0..m)
            .filter(|&i| self.basis[i] >= self.artificial_start)
            .map(|i| self.rhs(i))
            .sum();
        let scale = 1.0 + (0..m).map(|i| self.rhs(i).abs()).fold(0.0, f64::max);
        if infeas > FEAS_TOL * scale {
            return Err(Error::Infeasible(format!("phase-one residual {infeas:e}")));
        }
        // drive remaining artificials out of the basis
        for i in 0..m {
            if self.basis[i] >= self.artificial_start {
                if let Some(j) = (0..self.artificial_start).find(|&j| self.a[i][j].abs() > PIVOT_TOL) {
                    self.pivot(i, j);
                }
            }
        }
        let mut cost2 = vec![0.0; self.n_cols];
        cost2[..self.n_vars].copy_from_slice(objective);
        if !self.iterate(&cost2, self.artificial_start) {
            return Err(Error::Infeasible("objective is unbounded".into()));
        }
        let mut x = vec![0.0; self.n_vars];
        for i in 0..m {
            if self.basis[i] < self.n_vars {
                x[self.basis[i]] = self.rhs(i).max(0.0);
            }
        }
        let value = x.iter().zip(objective).map(|(x, c)| x * c).sum();
        Ok(LpSolution { x, value })
    }
}

impl LinearProgram {
    /// Largest constraint violation of `x`, relative to the row scale.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| {
                let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, x)| a * x).sum();
                let scale = 1.0 + c.rhs.abs();
                let v = match c.cmp {
                    Cmp::Le => lhs - c.rhs,
                    Cmp::Ge => c.rhs - lhs,
                    Cmp::Eq => (lhs - c.rhs).abs(),
                };
                v.max(0.0) / scale
            })
            .fold(0.0, f64::max)
    }
}
