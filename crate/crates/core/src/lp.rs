//! Dense bounded-variable simplex for packing-type programs
//!
//! ```text
//! maximize c·x  subject to  A x <= b,  0 <= x <= u,  b >= 0
//! ```
//!
//! Rows can be appended after a solve; the previous optimal basis stays dual
//! feasible and the dual simplex restores primal feasibility. The tableau is
//! kept in condensed form, one column per nonbasic variable, so its size is
//! `rows x structurals` regardless of how many rows are added.
//!
//! Entering and leaving choices break ties by the lowest variable index. After
//! a run of degenerate pivots the primal phase switches to Bland's rule.

use rayon::prelude::*;

use crate::error::{Error, Result};

const FEAS_TOL: f64 = 1e-10;
const OPT_TOL: f64 = 1e-11;
const PIVOT_TOL: f64 = 1e-11;
const DEGENERATE_RUN: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Basic(usize),
    Nonbasic(usize),
}

#[derive(Clone, Debug)]
pub struct Simplex {
    n: usize,
    cost: Vec<f64>,
    /// Upper bounds of all variables; slacks are unbounded above.
    upper: Vec<f64>,
    /// `x_B(r) = const - Σ_k rows[r][k] x_N(k)`.
    rows: Vec<Vec<f64>>,
    /// `z = const - Σ_k obj[k] x_N(k)`, so the reduced cost is `-obj[k]`.
    obj: Vec<f64>,
    basic: Vec<usize>,
    nonbasic: Vec<usize>,
    at_upper: Vec<bool>,
    slot: Vec<Slot>,
    value: Vec<f64>,
    pub pivots: usize,
    pub max_pivots: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
}

impl Simplex {
    /// `cost` is maximized; `upper[j]` may be infinite.
    pub fn new(cost: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = cost.len();
        if upper.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: upper.len() });
        }
        if upper.iter().any(|&u| !(u >= 0.0)) || cost.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("bounds must be nonnegative and costs finite".into()));
        }
        Ok(Simplex {
            n,
            obj: cost.iter().map(|c| -c).collect(),
            cost,
            upper,
            rows: Vec::new(),
            basic: Vec::new(),
            nonbasic: (0..n).collect(),
            at_upper: vec![false; n],
            slot: (0..n).map(Slot::Nonbasic).collect(),
            value: vec![0.0; n],
            pivots: 0,
            max_pivots: 200_000,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Appends `a·x <= b` and returns its row number.
    pub fn add_row(&mut self, a: &[f64], b: f64) -> Result<usize> {
        if a.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: a.len() });
        }
        if !(b >= 0.0 && b.is_finite()) || a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("rows need finite coefficients and b >= 0, got b = {b}")));
        }
        let mut row = vec![0.0; self.n];
        let mut lhs = 0.0;
        for (j, &aj) in a.iter().enumerate() {
            if aj == 0.0 {
                continue;
            }
            lhs += aj * self.value[j];
            match self.slot[j] {
                Slot::Nonbasic(k) => row[k] += aj,
                Slot::Basic(r) => {
                    for (dst, &t) in row.iter_mut().zip(&self.rows[r]) {
                        *dst -= aj * t;
                    }
                }
            }
        }
        let id = self.value.len();
        let r = self.rows.len();
        self.rows.push(row);
        self.basic.push(id);
        self.slot.push(Slot::Basic(r));
        self.upper.push(f64::INFINITY);
        self.value.push(b - lhs);
        Ok(r)
    }

    pub fn solution(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.value[j].clamp(0.0, self.upper[j])).collect()
    }

    pub fn objective(&self) -> f64 {
        self.solution().iter().zip(&self.cost).map(|(x, c)| x * c).sum()
    }

    fn infeasibility(&self, r: usize) -> f64 {
        let v = self.basic[r];
        let x = self.value[v];
        (-x).max(x - self.upper[v])
    }

    pub fn solve(&mut self) -> Result<Status> {
        let mut degenerate = 0usize;
        loop {
            if self.pivots >= self.max_pivots {
                return Err(Error::SolverStalled { iterations: self.pivots, objective: self.objective() });
            }
            let worst = (0..self.rows.len())
                .map(|r| (r, self.infeasibility(r)))
                .filter(|&(_, v)| v > FEAS_TOL)
                .fold(None, |best: Option<(usize, f64)>, cur| match best {
                    Some(b) if b.1 >= cur.1 => Some(b),
                    _ => Some(cur),
                });
            if let Some((r, _)) = worst {
                self.dual_step(r)?;
                continue;
            }
            match self.primal_step(degenerate >= DEGENERATE_RUN)? {
                None => return Ok(Status::Optimal),
                Some(theta) => {
                    if theta <= FEAS_TOL {
                        degenerate += 1;
                    } else {
                        degenerate = 0;
                    }
                }
            }
        }
    }

    fn can_increase(&self, k: usize) -> bool {
        !self.at_upper[k] && self.upper[self.nonbasic[k]] > 0.0
    }

    /// One primal iteration; `None` at optimality, otherwise the step length.
    fn primal_step(&mut self, bland: bool) -> Result<Option<f64>> {
        let mut entering: Option<(usize, f64)> = None;
        for k in 0..self.n {
            let rc = -self.obj[k];
            let gain = if self.can_increase(k) && rc > OPT_TOL {
                rc
            } else if self.at_upper[k] && rc < -OPT_TOL {
                -rc
            } else {
                continue;
            };
            let better = match entering {
                None => true,
                Some((e, g)) => {
                    if bland {
                        self.nonbasic[k] < self.nonbasic[e]
                    } else {
                        gain > g || (gain == g && self.nonbasic[k] < self.nonbasic[e])
                    }
                }
            };
            if better {
                entering = Some((k, gain));
            }
        }
        let Some((k, _)) = entering else { return Ok(None) };
        let s = if self.at_upper[k] { -1.0 } else { 1.0 };
        let v = self.nonbasic[k];
        // (step, row, leaves at upper)
        let mut best: Option<(f64, usize, bool)> = None;
        for r in 0..self.rows.len() {
            let a = self.rows[r][k] * s;
            let b = self.basic[r];
            let x = self.value[b];
            let (theta, up) = if a > PIVOT_TOL {
                ((x.max(0.0)) / a, false)
            } else if a < -PIVOT_TOL && self.upper[b].is_finite() {
                (((self.upper[b] - x).max(0.0)) / -a, true)
            } else {
                continue;
            };
            let better = match best {
                None => true,
                Some((t, rr, _)) => theta < t || (theta == t && b < self.basic[rr]),
            };
            if better {
                best = Some((theta, r, up));
            }
        }
        let flip = self.upper[v];
        match best {
            Some((theta, r, up)) if theta < flip => {
                self.move_nonbasic(k, s * theta);
                self.pivot(r, k, up);
                Ok(Some(theta))
            }
            _ if flip.is_finite() => {
                self.move_nonbasic(k, s * flip);
                self.value[v] = if s > 0.0 { self.upper[v] } else { 0.0 };
                self.at_upper[k] = s > 0.0;
                Ok(Some(flip))
            }
            _ => Err(Error::InvalidInput("linear program is unbounded".into())),
        }
    }

    fn dual_step(&mut self, r: usize) -> Result<()> {
        let b = self.basic[r];
        let x = self.value[b];
        let below = x < 0.0;
        let target = if below { 0.0 } else { self.upper[b] };
        let mut best: Option<(f64, usize)> = None;
        for k in 0..self.n {
            let a = self.rows[r][k];
            // x_B moves by -a Δx_k; increase x_B when below, decrease otherwise
            let eligible = if below {
                (a < -PIVOT_TOL && self.can_increase(k)) || (a > PIVOT_TOL && self.at_upper[k])
            } else {
                (a > PIVOT_TOL && self.can_increase(k)) || (a < -PIVOT_TOL && self.at_upper[k])
            };
            if !eligible {
                continue;
            }
            let ratio = (self.obj[k] / a).abs();
            let better = match best {
                None => true,
                Some((q, e)) => ratio < q || (ratio == q && self.nonbasic[k] < self.nonbasic[e]),
            };
            if better {
                best = Some((ratio, k));
            }
        }
        let Some((_, k)) = best else {
            return Err(Error::Infeasible(format!("row {r} cannot be satisfied")));
        };
        let delta = -(target - x) / self.rows[r][k];
        self.move_nonbasic(k, delta);
        self.pivot(r, k, !below);
        Ok(())
    }

    /// Moves nonbasic column `k` by `delta` and updates every basic value.
    fn move_nonbasic(&mut self, k: usize, delta: f64) {
        if delta == 0.0 {
            return;
        }
        for r in 0..self.rows.len() {
            let a = self.rows[r][k];
            if a != 0.0 {
                self.value[self.basic[r]] -= a * delta;
            }
        }
        self.value[self.nonbasic[k]] += delta;
    }

    /// Exchanges the basic variable of row `r` with nonbasic column `k`; the
    /// leaving variable is placed exactly on the bound it reached.
    fn pivot(&mut self, r: usize, k: usize, leaves_at_upper: bool) {
        self.pivots += 1;
        let p = self.rows[r][k];
        let mut prow = std::mem::take(&mut self.rows[r]);
        for (j, t) in prow.iter_mut().enumerate() {
            *t = if j == k { 1.0 / p } else { *t / p };
        }
        let update = |row: &mut Vec<f64>| {
            let f = row[k];
            if f == 0.0 {
                return;
            }
            for (j, (dst, &src)) in row.iter_mut().zip(&prow).enumerate() {
                if j == k {
                    *dst = -f * src;
                } else {
                    *dst -= f * src;
                }
            }
        };
        if self.rows.len() * self.n > 1 << 16 {
            self.rows.par_iter_mut().enumerate().filter(|(i, _)| *i != r).for_each(|(_, row)| update(row));
        } else {
            self.rows.iter_mut().enumerate().filter(|(i, _)| *i != r).for_each(|(_, row)| update(row));
        }
        update(&mut self.obj);
        self.rows[r] = prow;

        let leaving = self.basic[r];
        let entering = self.nonbasic[k];
        self.value[leaving] = if leaves_at_upper { self.upper[leaving] } else { 0.0 };
        self.basic[r] = entering;
        self.nonbasic[k] = leaving;
        self.at_upper[k] = leaves_at_upper;
        self.slot[entering] = Slot::Basic(r);
        self.slot[leaving] = Slot::Nonbasic(k);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = Simplex::new(vec![3.0, 5.0], vec![f64::INFINITY; 2]).unwrap();
        lp.add_row(&[1.0, 0.0], 4.0).unwrap();
        lp.add_row(&[0.0, 2.0], 12.0).unwrap();
        lp.add_row(&[3.0, 2.0], 18.0).unwrap();
        lp.solve().unwrap();
        let x = lp.solution();
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 6.0).abs() < 1e-12);
        assert!((lp.objective() - 36.0).abs() < 1e-12);
    }

    #[test]
    fn bounds_only() {
        let mut lp = Simplex::new(vec![1.0, -1.0, 2.0], vec![2.0, 3.0, 0.5]).unwrap();
        lp.solve().unwrap();
        assert_eq!(lp.solution(), vec![2.0, 0.0, 0.5]);
        assert_eq!(lp.pivots, 0);
    }

    #[test]
    fn rows_added_after_solve() {
        let mut lp = Simplex::new(vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        lp.solve().unwrap();
        assert_eq!(lp.objective(), 2.0);
        lp.add_row(&[1.0, 2.0], 2.0).unwrap();
        lp.add_row(&[3.0, 1.0], 2.0).unwrap();
        lp.solve().unwrap();
        // vertex of the two cuts: x = 2/5, y = 4/5
        assert!((lp.objective() - 1.2).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_rows() {
        let mut lp = Simplex::new(vec![1.0], vec![1.0]).unwrap();
        assert!(lp.add_row(&[1.0], -1.0).is_err());
        assert!(lp.add_row(&[1.0, 2.0], 1.0).is_err());
        assert!(Simplex::new(vec![1.0], vec![-1.0]).is_err());
    }
}
