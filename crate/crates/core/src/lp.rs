//! Bounded-variable revised simplex for the small linear programs built by the
//! dispatch layer (peak shaving, arbitrage, DC-OPF curtailment).
//!
//! The solver keeps an explicit dense basis inverse, which is fine for the
//! problem sizes seen here (a few hundred columns at most). Rows and columns are
//! equilibrated by their max-abs entry before solving. Pricing is Dantzig's rule
//! with lowest-index tie breaking; after a run of degenerate pivots the solver
//! switches to Bland's rule until progress resumes, so it cannot cycle.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const DEGENERATE_STREAK_FOR_BLAND: usize = 8;
const MAX_ITERATIONS: usize = 50_000;

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("row {row} references variable {var} but only {nvars} variables exist")]
    BadIndex { row: usize, var: usize, nvars: usize },
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("simplex iteration limit ({0}) reached")]
    IterationLimit(usize),
    #[error("basis matrix became singular")]
    SingularBasis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub kind: RowKind,
    pub rhs: f64,
}

/// `minimize c'x  s.t.  rows,  lower <= x <= upper`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpProblem {
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    rows: Vec<Row>,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a column; infinite bounds are allowed.
    pub fn add_var(&mut self, lower: f64, upper: f64, cost: f64) -> usize {
        self.lower.push(lower);
        self.upper.push(upper);
        self.cost.push(cost);
        self.cost.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, kind: RowKind, rhs: f64) -> usize {
        self.rows.push(Row { coeffs, kind, rhs });
        self.rows.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.lower[var], self.upper[var])
    }

    pub fn cost(&self, var: usize) -> f64 {
        self.cost[var]
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.cost[var] = cost;
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        for (j, &c) in self.cost.iter().enumerate() {
            if !c.is_finite() {
                return Err(LpError::NonFinite(format!("cost of x{j}")));
            }
            if self.lower[j].is_nan() || self.upper[j].is_nan() {
                return Err(LpError::NonFinite(format!("bounds of x{j}")));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::NonFinite(format!("rhs of row {i}")));
            }
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(LpError::BadIndex { row: i, var: j, nvars: n });
                }
                if !a.is_finite() {
                    return Err(LpError::NonFinite(format!("row {i}, x{j}")));
                }
            }
        }
        Ok(())
    }

    /// Objective value of `x` under this problem's costs.
    pub fn objective_of(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any row or bound by `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for row in &self.rows {
            let act: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let viol = match row.kind {
                RowKind::Le => act - row.rhs,
                RowKind::Ge => row.rhs - act,
                RowKind::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// Plain-text dump: one `min` line, one line per row, then one line per
    /// bounded variable.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "min");
        for (j, &c) in self.cost.iter().enumerate() {
            if c != 0.0 {
                let _ = write!(out, " {c:+e} x{j}");
            }
        }
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(out, "r{i}:");
            for &(j, a) in &row.coeffs {
                let _ = write!(out, " {a:+e} x{j}");
            }
            let op = match row.kind {
                RowKind::Le => "<=",
                RowKind::Ge => ">=",
                RowKind::Eq => "=",
            };
            let _ = writeln!(out, " {op} {:e}", row.rhs);
        }
        for j in 0..self.num_vars() {
            let _ = writeln!(out, "b{j}: {:e} <= x{j} <= {:e}", self.lower[j], self.upper[j]);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub x: Vec<f64>,
    /// Row multipliers `y` with `c - A'y = d`.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    fn non_optimal(status: LpStatus, n: usize, m: usize, iterations: usize) -> Self {
        Self {
            status,
            objective: match status {
                LpStatus::Unbounded => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            },
            x: vec![0.0; n],
            duals: vec![0.0; m],
            reduced_costs: vec![0.0; n],
            iterations,
        }
    }
}

/// Solves `problem`. Infeasible and unbounded programs are reported through
/// [`LpStatus`]; `Err` is reserved for malformed input or numerical breakdown.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution, LpError> {
    problem.validate()?;
    let n = problem.num_vars();
    let m = problem.num_rows();
    if (0..n).any(|j| problem.lower[j] > problem.upper[j]) {
        return Ok(LpSolution::non_optimal(LpStatus::Infeasible, n, m, 0));
    }
    let mut simplex = Simplex::new(problem);
    simplex.run()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic(usize),
    Nonbasic,
}

struct Simplex<'a> {
    problem: &'a LpProblem,
    n: usize,
    m: usize,
    /// Total columns: structurals, then one slack per row, then one artificial per row.
    ncols: usize,
    /// Dense scaled columns, `cols[j][i]`.
    cols: Vec<Vec<f64>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    value: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    iterations: usize,
    pivots_since_refactor: usize,
}

impl<'a> Simplex<'a> {
    fn new(problem: &'a LpProblem) -> Self {
        let n = problem.num_vars();
        let m = problem.num_rows();
        let ncols = n + 2 * m;

        let mut dense = vec![vec![0.0; m]; n];
        for (i, row) in problem.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                dense[j][i] += a;
            }
        }
        let mut row_scale = vec![1.0; m];
        for (i, rs) in row_scale.iter_mut().enumerate() {
            let mx = dense.iter().map(|c| c[i].abs()).fold(0.0, f64::max);
            if mx > 0.0 {
                *rs = 1.0 / mx;
            }
        }
        let mut col_scale = vec![1.0; n];
        for (j, col) in dense.iter_mut().enumerate() {
            for (i, a) in col.iter_mut().enumerate() {
                *a *= row_scale[i];
            }
            let mx = col.iter().map(|a| a.abs()).fold(0.0, f64::max);
            if mx > 0.0 {
                col_scale[j] = 1.0 / mx;
                for a in col.iter_mut() {
                    *a *= col_scale[j];
                }
            }
        }

        let mut cols = dense;
        let mut lower = Vec::with_capacity(ncols);
        let mut upper = Vec::with_capacity(ncols);
        let mut cost = Vec::with_capacity(ncols);
        for j in 0..n {
            lower.push(problem.lower[j] / col_scale[j]);
            upper.push(problem.upper[j] / col_scale[j]);
            cost.push(problem.cost[j] * col_scale[j]);
        }
        for (i, row) in problem.rows.iter().enumerate() {
            let mut e = vec![0.0; m];
            e[i] = 1.0;
            cols.push(e);
            let (lo, hi) = match row.kind {
                RowKind::Le => (0.0, f64::INFINITY),
                RowKind::Ge => (f64::NEG_INFINITY, 0.0),
                RowKind::Eq => (0.0, 0.0),
            };
            lower.push(lo);
            upper.push(hi);
            cost.push(0.0);
        }
        for i in 0..m {
            cols.push(vec![0.0; m]);
            let _ = i;
            lower.push(0.0);
            upper.push(0.0);
            cost.push(0.0);
        }
        let rhs = problem
            .rows
            .iter()
            .zip(&row_scale)
            .map(|(r, s)| r.rhs * s)
            .collect();

        Self {
            problem,
            n,
            m,
            ncols,
            cols,
            lower,
            upper,
            cost,
            rhs,
            row_scale,
            col_scale,
            value: vec![0.0; ncols],
            state: vec![VarState::Nonbasic; ncols],
            basis: Vec::with_capacity(m),
            binv: vec![0.0; m * m],
            iterations: 0,
            pivots_since_refactor: 0,
        }
    }

    fn run(&mut self) -> Result<LpSolution, LpError> {
        let (n, m) = (self.n, self.m);
        // Nonbasic starting values: zero when admissible, else the nearest bound.
        for j in 0..n + m {
            self.value[j] = 0.0_f64.clamp(self.lower[j], self.upper[j]);
        }
        let mut residual = self.rhs.clone();
        for j in 0..n + m {
            let v = self.value[j];
            if v != 0.0 {
                for (r, a) in residual.iter_mut().zip(&self.cols[j]) {
                    *r -= a * v;
                }
            }
        }
        let mut any_artificial = false;
        for i in 0..m {
            let slack = n + i;
            let r = residual[i];
            let fits_slack = r + self.value[slack] >= self.lower[slack] - FEAS_TOL
                && r + self.value[slack] <= self.upper[slack] + FEAS_TOL;
            if fits_slack && self.lower[slack] < self.upper[slack] {
                self.value[slack] += r;
                self.state[slack] = VarState::Basic(i);
                self.basis.push(slack);
            } else {
                let art = n + m + i;
                let sign = if r >= 0.0 { 1.0 } else { -1.0 };
                self.cols[art][i] = sign;
                self.upper[art] = f64::INFINITY;
                self.value[art] = r.abs();
                self.state[art] = VarState::Basic(i);
                self.basis.push(art);
                any_artificial = true;
            }
        }
        self.refactor()?;

        if any_artificial {
            let phase1_cost: Vec<f64> = (0..self.ncols)
                .map(|j| if j >= n + m && self.upper[j] > 0.0 { 1.0 } else { 0.0 })
                .collect();
            let outcome = self.optimize(&phase1_cost)?;
            debug_assert!(outcome != Outcome::Unbounded);
            let infeas: f64 = (n + m..self.ncols).map(|j| self.value[j].max(0.0)).sum();
            if infeas > FEAS_TOL * (1.0 + self.rhs.iter().map(|r| r.abs()).fold(0.0, f64::max)) {
                return Ok(LpSolution::non_optimal(LpStatus::Infeasible, n, m, self.iterations));
            }
            for j in n + m..self.ncols {
                self.upper[j] = 0.0;
                if self.state[j] == VarState::Nonbasic {
                    self.value[j] = 0.0;
                }
            }
        }

        let phase2_cost = self.cost.clone();
        if self.optimize(&phase2_cost)? == Outcome::Unbounded {
            return Ok(LpSolution::non_optimal(LpStatus::Unbounded, n, m, self.iterations));
        }
        Ok(self.extract(&phase2_cost))
    }

    fn extract(&mut self, cost: &[f64]) -> LpSolution {
        let (n, m) = (self.n, self.m);
        self.compute_basic_values();
        let y = self.duals_scaled(cost);
        let mut x = vec![0.0; n];
        for j in 0..n {
            let v = self.value[j] * self.col_scale[j];
            x[j] = v.clamp(self.problem.lower[j], self.problem.upper[j]);
        }
        let mut reduced_costs = vec![0.0; n];
        for j in 0..n {
            let d = cost[j] - dot(&y, &self.cols[j]);
            reduced_costs[j] = d / self.col_scale[j];
        }
        let duals = (0..m).map(|i| y[i] * self.row_scale[i]).collect();
        LpSolution {
            status: LpStatus::Optimal,
            objective: self.problem.objective_of(&x),
            x,
            duals,
            reduced_costs,
            iterations: self.iterations,
        }
    }

    fn optimize(&mut self, cost: &[f64]) -> Result<Outcome, LpError> {
        let m = self.m;
        let mut degenerate_streak = 0usize;
        let mut alpha = vec![0.0; m];
        loop {
            if self.iterations >= MAX_ITERATIONS {
                return Err(LpError::IterationLimit(MAX_ITERATIONS));
            }
            if self.pivots_since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            self.compute_basic_values();
            let y = self.duals_scaled(cost);

            let bland = degenerate_streak >= DEGENERATE_STREAK_FOR_BLAND;
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..self.ncols {
                if self.state[j] != VarState::Nonbasic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let d = cost[j] - dot(&y, &self.cols[j]);
                let can_increase = self.value[j] < self.upper[j] - FEAS_TOL;
                let can_decrease = self.value[j] > self.lower[j] + FEAS_TOL;
                let dir = if d < -OPT_TOL && can_increase {
                    1.0
                } else if d > OPT_TOL && can_decrease {
                    -1.0
                } else {
                    continue;
                };
                if bland {
                    entering = Some((j, dir));
                    break;
                }
                if d.abs() > best {
                    best = d.abs();
                    entering = Some((j, dir));
                }
            }
            let Some((q, dir)) = entering else {
                return Ok(Outcome::Optimal);
            };

            self.ftran(q, &mut alpha);
            // Basic variable i moves by -dir * alpha[i] per unit step.
            let mut step = f64::INFINITY;
            let mut leaving: Option<(usize, bool)> = None;
            let own = self.upper[q] - self.lower[q];
            if own.is_finite() {
                step = if dir > 0.0 {
                    self.upper[q] - self.value[q]
                } else {
                    self.value[q] - self.lower[q]
                };
            }
            for i in 0..m {
                let delta = -dir * alpha[i];
                if delta.abs() <= PIVOT_TOL {
                    continue;
                }
                let b = self.basis[i];
                let (limit, to_upper) = if delta < 0.0 {
                    if self.lower[b] == f64::NEG_INFINITY {
                        continue;
                    }
                    (((self.value[b] - self.lower[b]) / -delta).max(0.0), false)
                } else {
                    if self.upper[b] == f64::INFINITY {
                        continue;
                    }
                    (((self.upper[b] - self.value[b]) / delta).max(0.0), true)
                };
                let better = match leaving {
                    None => limit < step,
                    Some((r, _)) => {
                        limit < step - 1e-12 || (limit <= step + 1e-12 && b < self.basis[r])
                    }
                };
                if better {
                    step = limit;
                    leaving = Some((i, to_upper));
                }
            }
            if step == f64::INFINITY {
                return Ok(Outcome::Unbounded);
            }
            self.iterations += 1;
            degenerate_streak = if step <= 1e-12 { degenerate_streak + 1 } else { 0 };

            match leaving {
                None => {
                    // Bound flip of the entering column.
                    self.value[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                }
                Some((r, to_upper)) => {
                    let out = self.basis[r];
                    self.value[out] = if to_upper { self.upper[out] } else { self.lower[out] };
                    self.state[out] = VarState::Nonbasic;
                    self.value[q] += dir * step;
                    self.state[q] = VarState::Basic(r);
                    self.basis[r] = q;
                    self.pivot(r, &alpha)?;
                }
            }
        }
    }

    fn compute_basic_values(&mut self) {
        let m = self.m;
        let mut r = self.rhs.clone();
        for j in 0..self.ncols {
            if self.state[j] == VarState::Nonbasic && self.value[j] != 0.0 {
                let v = self.value[j];
                for (ri, a) in r.iter_mut().zip(&self.cols[j]) {
                    *ri -= a * v;
                }
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            self.value[self.basis[i]] = dot(row, &r);
        }
    }

    fn duals_scaled(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for i in 0..m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yk, b) in y.iter_mut().zip(row) {
                    *yk += cb * b;
                }
            }
        }
        y
    }

    fn ftran(&self, q: usize, out: &mut [f64]) {
        let m = self.m;
        let col = &self.cols[q];
        for i in 0..m {
            out[i] = dot(&self.binv[i * m..(i + 1) * m], col);
        }
    }

    fn pivot(&mut self, r: usize, alpha: &[f64]) -> Result<(), LpError> {
        let m = self.m;
        let piv = alpha[r];
        if piv.abs() < 1e-14 {
            return self.refactor();
        }
        for k in 0..m {
            self.binv[r * m + k] /= piv;
        }
        for i in 0..m {
            if i != r && alpha[i] != 0.0 {
                let f = alpha[i];
                for k in 0..m {
                    self.binv[i * m + k] -= f * self.binv[r * m + k];
                }
            }
        }
        self.pivots_since_refactor += 1;
        Ok(())
    }

    /// Rebuilds the basis inverse by Gauss-Jordan elimination with partial pivoting.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for i in 0..m {
                a[i * m + k] = self.cols[j][i];
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let p = (c..m)
                .max_by(|&x, &y| a[x * m + c].abs().total_cmp(&a[y * m + c].abs()))
                .unwrap_or(c);
            if a[p * m + c].abs() < 1e-13 {
                return Err(LpError::SingularBasis);
            }
            if p != c {
                for k in 0..m {
                    a.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let d = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for i in 0..m {
                if i != c {
                    let f = a[i * m + c];
                    if f != 0.0 {
                        for k in 0..m {
                            a[i * m + k] -= f * a[c * m + k];
                            inv[i * m + k] -= f * inv[c * m + k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        self.pivots_since_refactor = 0;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Optimal,
    Unbounded,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
