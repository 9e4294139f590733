//! Dense bounded-variable primal simplex with Bland's rule.
//!
//! Solves `max c^T x  s.t.  A x <= b,  0 <= x <= u` with `b >= 0`, so the
//! all-slack basis is a feasible start. Upper bounds may be infinite.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    /// Row-major constraint matrix, one `Vec` per row.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    /// Iteration cap reached; `x` is the last (feasible) basic solution.
    Stalled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row duals `y >= 0`.
    pub duals: Vec<f64>,
    /// Reduced costs `c_j - y^T A_j` of the structural variables.
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Dual objective `b^T y + sum_j u_j max(d_j, 0)`; equals the primal
    /// objective at optimality.
    pub fn dual_objective(&self, lp: &LinearProgram) -> f64 {
        let by: f64 = lp.b.iter().zip(&self.duals).map(|(b, y)| b * y).sum();
        let ub: f64 = lp
            .upper
            .iter()
            .zip(&self.reduced_costs)
            .filter(|(_, &d)| d > 0.0)
            .map(|(u, d)| u * d)
            .sum();
        by + ub
    }
}

#[derive(Copy, Clone, PartialEq, Eq, Debug)]
enum State {
    Basic(usize),
    AtLower,
    AtUpper,
}

impl LinearProgram {
    pub fn new(c: Vec<f64>, a: Vec<Vec<f64>>, b: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let lp = LinearProgram { c, a, b, upper };
        lp.validate()?;
        Ok(lp)
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.c.len();
        if self.upper.len() != n {
            return Err(Error::InvalidLp(format!("{} upper bounds for {n} variables", self.upper.len())));
        }
        if self.a.len() != self.b.len() {
            return Err(Error::InvalidLp(format!("{} rows but {} right-hand sides", self.a.len(), self.b.len())));
        }
        if let Some(r) = self.a.iter().position(|row| row.len() != n) {
            return Err(Error::InvalidLp(format!("row {r} has the wrong length")));
        }
        if self.b.iter().any(|&x| !(x >= 0.0) || x.is_nan()) {
            return Err(Error::InvalidLp("right-hand side must be non-negative".into()));
        }
        if self.upper.iter().any(|&u| !(u >= 0.0)) {
            return Err(Error::InvalidLp("upper bounds must be non-negative".into()));
        }
        let finite = |x: &f64| x.is_finite();
        if !self.c.iter().all(finite) || !self.a.iter().flatten().all(finite) {
            return Err(Error::InvalidLp("non-finite coefficient".into()));
        }
        Ok(())
    }

    /// Default iteration cap.
    pub fn default_max_iterations(&self) -> usize {
        1000 + 50 * (self.num_vars() + self.num_rows())
    }

    pub fn solve(&self) -> Result<LpSolution> {
        self.solve_with_limit(self.default_max_iterations())
    }

    pub fn solve_with_limit(&self, max_iterations: usize) -> Result<LpSolution> {
        self.validate()?;
        let n = self.num_vars();
        let m = self.num_rows();
        let cols = n + m;
        // Row i: x_B(i) + sum_j t[i][j] x_j = const, over all columns.
        let mut t: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let mut row = self.a[i].clone();
                row.resize(cols, 0.0);
                row[n + i] = 1.0;
                row
            })
            .collect();
        let mut cost = self.c.clone();
        cost.resize(cols, 0.0);
        let upper: Vec<f64> = self.upper.iter().copied().chain(std::iter::repeat(f64::INFINITY).take(m)).collect();
        let mut basis: Vec<usize> = (n..cols).collect();
        let mut state: Vec<State> = (0..cols).map(|j| if j >= n { State::Basic(j - n) } else { State::AtLower }).collect();
        let mut val = vec![0.0; cols];
        val[n..].copy_from_slice(&self.b);
        // Reduced costs d_j = c_j - c_B^T T_j; slack basis has c_B = 0.
        let mut d = cost.clone();

        let mut iterations = 0;
        let mut status = LpStatus::Optimal;
        loop {
            let entering = (0..cols).find(|&j| match state[j] {
                State::AtLower => d[j] > COST_EPS && upper[j] > 0.0,
                State::AtUpper => d[j] < -COST_EPS,
                State::Basic(_) => false,
            });
            let Some(j) = entering else { break };
            if iterations >= max_iterations {
                status = LpStatus::Stalled;
                break;
            }
            iterations += 1;
            let dir = if state[j] == State::AtLower { 1.0 } else { -1.0 };

            // Ratio test; ties go to the smallest variable index.
            let mut theta = upper[j];
            let mut leave: Option<(usize, bool)> = None; // (row, hits_upper)
            let mut leave_var = usize::MAX;
            for i in 0..m {
                let rate = -t[i][j] * dir;
                if rate.abs() <= PIVOT_EPS {
                    continue;
                }
                let bv = basis[i];
                let (limit, hits_upper) = if rate < 0.0 {
                    (val[bv].max(0.0) / -rate, false)
                } else if upper[bv].is_finite() {
                    ((upper[bv] - val[bv]).max(0.0) / rate, true)
                } else {
                    continue;
                };
                if limit < theta - 1e-12 || (limit <= theta + 1e-12 && leave.is_some() && bv < leave_var) {
                    theta = limit;
                    leave = Some((i, hits_upper));
                    leave_var = bv;
                }
            }
            if !theta.is_finite() {
                return Err(Error::InvalidLp("objective is unbounded".into()));
            }

            val[j] += dir * theta;
            for i in 0..m {
                let bv = basis[i];
                val[bv] -= t[i][j] * dir * theta;
            }

            match leave {
                None => {
                    state[j] = if dir > 0.0 { State::AtUpper } else { State::AtLower };
                    val[j] = if dir > 0.0 { upper[j] } else { 0.0 };
                }
                Some((r, hits_upper)) => {
                    let lv = basis[r];
                    state[lv] = if hits_upper { State::AtUpper } else { State::AtLower };
                    val[lv] = if hits_upper { upper[lv] } else { 0.0 };
                    let piv = t[r][j];
                    for x in t[r].iter_mut() {
                        *x /= piv;
                    }
                    let pivot_row = t[r].clone();
                    for (i, row) in t.iter_mut().enumerate() {
                        if i == r {
                            continue;
                        }
                        let f = row[j];
                        if f != 0.0 {
                            for (x, &p) in row.iter_mut().zip(&pivot_row) {
                                *x -= f * p;
                            }
                            row[j] = 0.0;
                        }
                    }
                    let f = d[j];
                    for (x, &p) in d.iter_mut().zip(&pivot_row) {
                        *x -= f * p;
                    }
                    d[j] = 0.0;
                    basis[r] = j;
                    state[j] = State::Basic(r);
                }
            }
        }

        let x: Vec<f64> = (0..n).map(|j| val[j].clamp(0.0, upper[j])).collect();
        let objective = self.c.iter().zip(&x).map(|(c, x)| c * x).sum();
        let duals = (0..m).map(|i| (-d[n + i]).max(0.0)).collect();
        Ok(LpSolution {
            status,
            x,
            objective,
            duals,
            reduced_costs: d[..n].to_vec(),
            iterations,
        })
    }

    /// Largest violation of `A x <= b` and `0 <= x <= u`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (row, &b) in self.a.iter().zip(&self.b) {
            let ax: f64 = row.iter().zip(x).map(|(a, x)| a * x).sum();
            worst = worst.max(ax - b);
        }
        for (&xi, &u) in x.iter().zip(&self.upper) {
            worst = worst.max(-xi).max(xi - u);
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn inf() -> f64 {
        f64::INFINITY
    }

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let lp = LinearProgram::new(
            vec![3.0, 5.0],
            vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]],
            vec![4.0, 12.0, 18.0],
            vec![inf(), inf()],
        )
        .unwrap();
        let s = lp.solve().unwrap();
        assert!(s.is_optimal());
        assert!((s.objective - 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
        assert!((s.dual_objective(&lp) - 36.0).abs() < 1e-9);
    }

    #[test]
    fn bound_flip_only() {
        let lp = LinearProgram::new(vec![1.0, 2.0], vec![vec![1.0, 1.0]], vec![10.0], vec![1.0, 1.0]).unwrap();
        let s = lp.solve().unwrap();
        assert_eq!(s.x, vec![1.0, 1.0]);
        assert!((s.dual_objective(&lp) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_rhs_degenerate() {
        let lp = LinearProgram::new(vec![1.0, 1.0], vec![vec![1.0, -1.0], vec![-1.0, 1.0]], vec![0.0, 0.0], vec![1.0, 1.0])
            .unwrap();
        let s = lp.solve().unwrap();
        assert!((s.objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_rhs_and_unbounded() {
        assert!(LinearProgram::new(vec![1.0], vec![vec![1.0]], vec![-1.0], vec![1.0]).is_err());
        let lp = LinearProgram::new(vec![1.0], vec![vec![-1.0]], vec![1.0], vec![inf()]).unwrap();
        assert!(matches!(lp.solve(), Err(Error::InvalidLp(_))));
    }

    #[test]
    fn stall_is_reported() {
        let lp = LinearProgram::new(
            vec![3.0, 5.0],
            vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]],
            vec![4.0, 12.0, 18.0],
            vec![inf(), inf()],
        )
        .unwrap();
        let s = lp.solve_with_limit(1).unwrap();
        assert_eq!(s.status, LpStatus::Stalled);
        assert!(lp.max_violation(&s.x) <= 1e-9);
    }

    proptest! {
        #[test]
        fn random_lps_are_certified_by_duality(
            n in 1usize..6,
            m in 1usize..6,
            seed in proptest::collection::vec(-3i32..=3, 80),
        ) {
            let mut it = seed.iter().cycle().map(|&v| v as f64);
            let c: Vec<f64> = (0..n).map(|_| it.next().unwrap()).collect();
            let a: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| it.next().unwrap()).collect()).collect();
            let b: Vec<f64> = (0..m).map(|_| it.next().unwrap().abs()).collect();
            let u: Vec<f64> = (0..n).map(|_| 1.0 + it.next().unwrap().abs()).collect();
            let lp = LinearProgram::new(c, a, b, u).unwrap();
            let s = lp.solve().unwrap();
            prop_assert!(s.is_optimal());
            prop_assert!(lp.max_violation(&s.x) <= 1e-9);
            prop_assert!((s.objective - s.dual_objective(&lp)).abs() <= 1e-7);
            // complementary slackness on rows
            for (i, row) in lp.a.iter().enumerate() {
                let slack = lp.b[i] - row.iter().zip(&s.x).map(|(a, x)| a * x).sum::<f64>();
                prop_assert!((slack * s.duals[i]).abs() <= 1e-7);
            }
        }
    }
}
