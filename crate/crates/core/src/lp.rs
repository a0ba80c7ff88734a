//! Dense two-phase simplex with Bland's anti-cycling rule.
//!
//! Problems have the form `minimize c.x  s.t.  A x = b,  x >= lower`. They are
//! small (tens of variables, at most a few hundred rows), so a dense tableau is
//! the right tool. After the pivoting finishes the basic variables are
//! recomputed from the original rows by least squares to clean up round-off.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub max_pivots: usize,
    /// Smallest tableau entry accepted as a pivot.
    pub pivot_tol: f64,
    /// Reduced costs above `-cost_tol` count as nonnegative.
    pub cost_tol: f64,
    /// Phase-one objective (relative to the right-hand side) below which the
    /// problem counts as feasible.
    pub feasibility_tol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_pivots: 100_000,
            pivot_tol: 1e-10,
            cost_tol: 1e-11,
            feasibility_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    num_vars: usize,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    objective: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Max-norm of `A x - b` on the unscaled rows.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn solution(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

impl LinearProgram {
    /// `num_vars` variables, each bounded below by zero until changed.
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            rows: Vec::new(),
            rhs: Vec::new(),
            lower: vec![0.0; num_vars],
            objective: None,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, rhs: f64) -> Result<()> {
        if coeffs.len() != self.num_vars {
            return Err(Error::DimMismatch {
                expected: self.num_vars,
                found: coeffs.len(),
            });
        }
        self.rows.push(coeffs);
        self.rhs.push(rhs);
        Ok(())
    }

    pub fn set_lower(&mut self, var: usize, bound: f64) {
        self.lower[var] = bound;
    }

    pub fn set_all_lower(&mut self, bound: f64) {
        self.lower.iter_mut().for_each(|l| *l = bound);
    }

    pub fn set_objective(&mut self, costs: Vec<f64>) -> Result<()> {
        if costs.len() != self.num_vars {
            return Err(Error::DimMismatch {
                expected: self.num_vars,
                found: costs.len(),
            });
        }
        self.objective = Some(costs);
        Ok(())
    }

    pub fn residual(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(row, b)| (dot(row, x) - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn solve(&self, opts: &SimplexOptions) -> Result<LpOutcome> {
        let n = self.num_vars;
        // Shift to y = x - lower >= 0 and normalize each row.
        let mut rows = Vec::with_capacity(self.rows.len());
        let mut rhs = Vec::with_capacity(self.rows.len());
        for (row, &b) in self.rows.iter().zip(&self.rhs) {
            let shifted = b - dot(row, &self.lower);
            let scale = row.iter().fold(shifted.abs(), |a, v| a.max(v.abs()));
            if scale == 0.0 {
                continue;
            }
            let sign = if shifted < 0.0 { -1.0 } else { 1.0 };
            rows.push(row.iter().map(|v| sign * v / scale).collect::<Vec<_>>());
            rhs.push(sign * shifted / scale);
        }

        if rows.is_empty() {
            let x = self.lower.clone();
            return self.finish_trivial(x);
        }

        let mut tab = Tableau::new(&rows, &rhs, n);
        tab.phase_one(opts)?;
        let infeasibility: f64 = tab.objective_value();
        let rhs_scale = rhs.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        if infeasibility > opts.feasibility_tol * rhs_scale {
            return Ok(LpOutcome::Infeasible);
        }
        tab.drive_out_artificials(opts);

        if let Some(costs) = &self.objective {
            if tab.phase_two(costs, opts)? == PhaseResult::Unbounded {
                return Ok(LpOutcome::Unbounded);
            }
        }

        let mut y = vec![0.0; n];
        for (i, &b) in tab.basis.iter().enumerate() {
            if b < n {
                y[b] = tab.rhs(i).max(0.0);
            }
        }
        let basic: Vec<usize> = tab.basis.iter().copied().filter(|&b| b < n).collect();
        self.polish(&rows, &rhs, &basic, &mut y);

        let x: Vec<f64> = y.iter().zip(&self.lower).map(|(v, l)| v + l).collect();
        let objective = self.objective.as_ref().map_or(0.0, |c| dot(c, &x));
        let residual = self.residual(&x);
        Ok(LpOutcome::Optimal(LpSolution {
            x,
            objective,
            residual,
        }))
    }

    fn finish_trivial(&self, x: Vec<f64>) -> Result<LpOutcome> {
        // Only all-zero rows remain: feasible iff every rhs is zero after the shift.
        if self.residual(&x) > 0.0 {
            return Ok(LpOutcome::Infeasible);
        }
        if let Some(c) = &self.objective {
            if c.iter().any(|&v| v < 0.0) {
                return Ok(LpOutcome::Unbounded);
            }
        }
        let objective = self.objective.as_ref().map_or(0.0, |c| dot(c, &x));
        Ok(LpOutcome::Optimal(LpSolution {
            x,
            objective,
            residual: 0.0,
        }))
    }

    /// Re-solves the scaled rows for the basic variables by least squares; the
    /// update is kept only if it stays nonnegative and lowers the residual.
    fn polish(&self, rows: &[Vec<f64>], rhs: &[f64], basic: &[usize], y: &mut [f64]) {
        if basic.is_empty() {
            return;
        }
        let a = DMatrix::from_fn(rows.len(), basic.len(), |i, k| rows[i][basic[k]]);
        let b = DVector::from_column_slice(rhs);
        let svd = a.svd(true, true);
        let Ok(sol) = svd.solve(&b, 1e-12) else {
            return;
        };
        if sol.iter().any(|v| !v.is_finite() || *v < -1e-9) {
            return;
        }
        let before = scaled_residual(rows, rhs, y);
        let mut candidate = y.to_vec();
        for (k, &var) in basic.iter().enumerate() {
            candidate[var] = sol[k].max(0.0);
        }
        if scaled_residual(rows, rhs, &candidate) <= before {
            y.copy_from_slice(&candidate);
        }
    }
}

fn scaled_residual(rows: &[Vec<f64>], rhs: &[f64], y: &[f64]) -> f64 {
    rows.iter()
        .zip(rhs)
        .map(|(r, b)| (dot(r, y) - b).abs())
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, PartialEq, Eq)]
enum PhaseResult {
    Optimal,
    Unbounded,
}

/// Row-major tableau: `m` constraint rows followed by one reduced-cost row.
/// Columns are the `n` structural variables, `m` artificials and the rhs.
struct Tableau {
    m: usize,
    n: usize,
    width: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    active: Vec<bool>,
}

impl Tableau {
    fn new(rows: &[Vec<f64>], rhs: &[f64], n: usize) -> Self {
        let m = rows.len();
        let width = n + m + 1;
        let mut data = vec![0.0; (m + 1) * width];
        for i in 0..m {
            data[i * width..i * width + n].copy_from_slice(&rows[i]);
            data[i * width + n + i] = 1.0;
            data[i * width + width - 1] = rhs[i];
        }
        Self {
            m,
            n,
            width,
            data,
            basis: (n..n + m).collect(),
            active: vec![true; m],
        }
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.width - 1)
    }

    fn cost_row(&self) -> usize {
        self.m
    }

    /// Value of the current objective (the negated corner of the cost row).
    fn objective_value(&self) -> f64 {
        -self.at(self.cost_row(), self.width - 1)
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        let p = self.data[row * w + col];
        for j in 0..w {
            self.data[row * w + j] /= p;
        }
        let pivot_row: Vec<f64> = self.data[row * w..(row + 1) * w].to_vec();
        for i in 0..=self.m {
            if i == row {
                continue;
            }
            let f = self.data[i * w + col];
            if f == 0.0 {
                continue;
            }
            for (j, pv) in pivot_row.iter().enumerate() {
                self.data[i * w + j] -= f * pv;
            }
            self.data[i * w + col] = 0.0;
        }
        self.basis[row] = col;
    }

    fn phase_one(&mut self, opts: &SimplexOptions) -> Result<()> {
        let w = self.width;
        let c = self.cost_row();
        for j in 0..w {
            let mut s = 0.0;
            for i in 0..self.m {
                if j < self.n || j == w - 1 {
                    s += self.data[i * w + j];
                }
            }
            self.data[c * w + j] = if j < self.n || j == w - 1 { -s } else { 0.0 };
        }
        self.iterate(self.n + self.m, opts)?;
        Ok(())
    }

    fn drive_out_artificials(&mut self, opts: &SimplexOptions) {
        for i in 0..self.m {
            if self.basis[i] < self.n || !self.active[i] {
                continue;
            }
            let col = (0..self.n).find(|&j| self.at(i, j).abs() > opts.pivot_tol);
            match col {
                Some(j) => self.pivot(i, j),
                None => self.active[i] = false,
            }
        }
    }

    fn phase_two(&mut self, costs: &[f64], opts: &SimplexOptions) -> Result<PhaseResult> {
        let w = self.width;
        let c = self.cost_row();
        let row = &mut self.data[c * w..(c + 1) * w];
        row.fill(0.0);
        row[..self.n].copy_from_slice(&costs[..self.n]);
        for i in 0..self.m {
            if !self.active[i] {
                continue;
            }
            let b = self.basis[i];
            if b >= self.n {
                continue;
            }
            let f = costs[b];
            if f == 0.0 {
                continue;
            }
            for j in 0..w {
                self.data[c * w + j] -= f * self.data[i * w + j];
            }
        }
        self.iterate(self.n, opts)
    }

    /// Bland's rule over the first `allowed` columns.
    fn iterate(&mut self, allowed: usize, opts: &SimplexOptions) -> Result<PhaseResult> {
        let c = self.cost_row();
        for _ in 0..opts.max_pivots {
            let Some(col) = (0..allowed).find(|&j| self.at(c, j) < -opts.cost_tol) else {
                return Ok(PhaseResult::Optimal);
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.m {
                if !self.active[i] {
                    continue;
                }
                let a = self.at(i, col);
                if a <= opts.pivot_tol {
                    continue;
                }
                let ratio = self.rhs(i).max(0.0) / a;
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        let tie = (ratio - br).abs() <= 1e-12 * br.abs().max(1.0);
                        if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            match best {
                Some((row, _)) => self.pivot(row, col),
                None => return Ok(PhaseResult::Unbounded),
            }
        }
        Err(Error::Lp(format!(
            "pivot limit {} reached",
            opts.max_pivots
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(lp: &LinearProgram) -> LpOutcome {
        lp.solve(&SimplexOptions::default()).unwrap()
    }

    #[test]
    fn simple_optimum() {
        // minimize -x - y  s.t. x + 2y + s = 4, 3x + y + t = 6
        let mut lp = LinearProgram::new(4);
        lp.add_row(vec![1.0, 2.0, 1.0, 0.0], 4.0).unwrap();
        lp.add_row(vec![3.0, 1.0, 0.0, 1.0], 6.0).unwrap();
        lp.set_objective(vec![-1.0, -1.0, 0.0, 0.0]).unwrap();
        let sol = solve(&lp).solution().unwrap();
        assert!((sol.x[0] - 1.6).abs() < 1e-12);
        assert!((sol.x[1] - 1.2).abs() < 1e-12);
        assert!((sol.objective + 2.8).abs() < 1e-12);
    }

    #[test]
    fn infeasible_detected() {
        let mut lp = LinearProgram::new(2);
        lp.add_row(vec![1.0, 1.0], -1.0).unwrap();
        assert_eq!(solve(&lp), LpOutcome::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::new(2);
        lp.add_row(vec![1.0, -1.0], 0.0).unwrap();
        lp.set_objective(vec![-1.0, 0.0]).unwrap();
        assert_eq!(solve(&lp), LpOutcome::Unbounded);
    }

    #[test]
    fn lower_bounds_respected() {
        let mut lp = LinearProgram::new(2);
        lp.add_row(vec![1.0, 1.0], 3.0).unwrap();
        lp.set_lower(0, 2.5);
        lp.set_objective(vec![0.0, 1.0]).unwrap();
        let sol = solve(&lp).solution().unwrap();
        assert!((sol.x[0] - 3.0).abs() < 1e-12);
        assert!(sol.x[1].abs() < 1e-12);

        lp.set_lower(1, 1.0);
        assert_eq!(solve(&lp), LpOutcome::Infeasible);
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let mut lp = LinearProgram::new(3);
        lp.add_row(vec![1.0, 1.0, 0.0], 1.0).unwrap();
        lp.add_row(vec![2.0, 2.0, 0.0], 2.0).unwrap();
        lp.add_row(vec![0.0, 1.0, 1.0], 1.0).unwrap();
        let sol = solve(&lp).solution().unwrap();
        assert!(sol.residual < 1e-12);
        assert!(sol.x.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Classic cycling example under the textbook largest-coefficient rule.
        let mut lp = LinearProgram::new(7);
        lp.add_row(vec![0.5, -5.5, -2.5, 9.0, 1.0, 0.0, 0.0], 0.0).unwrap();
        lp.add_row(vec![0.5, -1.5, -0.5, 1.0, 0.0, 1.0, 0.0], 0.0).unwrap();
        lp.add_row(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0], 1.0).unwrap();
        lp.set_objective(vec![-10.0, 57.0, 9.0, 24.0, 0.0, 0.0, 0.0])
            .unwrap();
        let sol = solve(&lp).solution().unwrap();
        assert!((sol.objective + 1.0).abs() < 1e-9);
    }

    #[test]
    fn no_rows_means_lower_bounds() {
        let mut lp = LinearProgram::new(2);
        lp.set_all_lower(0.5);
        let sol = solve(&lp).solution().unwrap();
        assert_eq!(sol.x, vec![0.5, 0.5]);
    }
}
