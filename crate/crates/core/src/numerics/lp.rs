//! Dense revised simplex.
//!
//! Problems are brought into standard form `min cᵀy, A·y = b, y ≥ 0, b ≥ 0`
//! and solved with a two-phase revised simplex that keeps an explicit basis
//! inverse, refreshed from an LU factorization every few dozen pivots.
//! Pricing is Dantzig's rule; after a run of degenerate pivots the phase
//! switches to Bland's rule for the remainder so cycling cannot occur.

use super::dense::{norm_inf, DenseMatrix};
use super::lu::LuFactors;
use crate::error::{Error, Result};

/// Bounds at or beyond this magnitude are treated as infinite.
pub const INFINITY_SENTINEL: f64 = 1e20;

#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    /// Minimize `objective · x`.
    pub objective: Vec<f64>,
    pub a_eq: DenseMatrix,
    pub b_eq: Vec<f64>,
    /// `a_ub · x ≤ b_ub`.
    pub a_ub: DenseMatrix,
    pub b_ub: Vec<f64>,
    /// Per-variable `[lower, upper]`; infinite ends are allowed.
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    /// No constraints and `x ≥ 0`.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            objective,
            a_eq: DenseMatrix::with_cols(n),
            b_eq: Vec::new(),
            a_ub: DenseMatrix::with_cols(n),
            b_ub: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.b_eq.len() + self.b_ub.len()
    }

    pub fn add_eq(&mut self, row: &[f64], rhs: f64) {
        self.a_eq.push_row(row);
        self.b_eq.push(rhs);
    }

    pub fn add_le(&mut self, row: &[f64], rhs: f64) {
        self.a_ub.push_row(row);
        self.b_ub.push(rhs);
    }

    pub fn add_ge(&mut self, row: &[f64], rhs: f64) {
        let neg: Vec<f64> = row.iter().map(|v| -v).collect();
        self.add_le(&neg, -rhs);
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.bounds[var] = (lower, upper);
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let bad = |what: &str| Err(Error::Validation(format!("linear program: {what}")));
        if self.a_eq.cols() != n || self.a_ub.cols() != n || self.bounds.len() != n {
            return bad("column counts disagree with objective length");
        }
        if self.a_eq.rows() != self.b_eq.len() || self.a_ub.rows() != self.b_ub.len() {
            return bad("constraint rows disagree with right-hand sides");
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.objective)
            || !finite(self.a_eq.as_slice())
            || !finite(self.a_ub.as_slice())
            || !finite(&self.b_eq)
            || !finite(&self.b_ub)
        {
            return bad("non-finite coefficient");
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return bad(&format!("variable {j} has bounds [{lo}, {hi}]"));
            }
        }
        Ok(())
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (lhs, rhs) in self.a_eq.mul_vec(x).iter().zip(&self.b_eq) {
            worst = worst.max((lhs - rhs).abs());
        }
        for (lhs, rhs) in self.a_ub.mul_vec(x).iter().zip(&self.b_ub) {
            worst = worst.max(lhs - rhs);
        }
        for (v, &(lo, hi)) in x.iter().zip(&self.bounds) {
            worst = worst.max(lo - v).max(v - hi);
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Empty unless `status` is optimal.
    pub x: Vec<f64>,
    pub objective_value: f64,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    fn without_point(status: LpStatus) -> Self {
        LpSolution {
            status,
            x: Vec::new(),
            objective_value: match status {
                LpStatus::Unbounded => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            },
        }
    }
}

#[derive(Clone, Debug)]
pub struct LpOptions {
    /// Phase-one residual (relative to `1 + ‖b‖∞`) above which the problem is infeasible.
    pub feasibility_tol: f64,
    /// Reduced-cost threshold for entering candidates.
    pub optimality_tol: f64,
    /// Smallest column entry accepted in the ratio test.
    pub pivot_tol: f64,
    /// Defaults to `10_000 · (n + m)` when `None`.
    pub max_iterations: Option<usize>,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub stall_limit: usize,
    pub refactor_interval: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            feasibility_tol: 1e-8,
            optimality_tol: 1e-9,
            pivot_tol: 1e-9,
            max_iterations: None,
            stall_limit: 50,
            refactor_interval: 64,
        }
    }
}

pub fn lp_solve(lp: &LinearProgram) -> Result<LpSolution> {
    lp_solve_with(lp, &LpOptions::default())
}

pub fn lp_solve_with(lp: &LinearProgram, opts: &LpOptions) -> Result<LpSolution> {
    lp.validate()?;
    let std = StandardForm::build(lp);
    let max_iter = opts
        .max_iterations
        .unwrap_or(10_000 * (lp.num_vars() + lp.num_constraints()).max(1));
    let mut tab = Tableau::new(&std, max_iter)?;

    if std.first_artificial < std.a.cols() {
        let phase1: Vec<f64> = (0..std.a.cols())
            .map(|j| if j >= std.first_artificial { 1.0 } else { 0.0 })
            .collect();
        tab.run_phase(&phase1, std.a.cols(), opts)?;
        tab.refactor()?;
        let infeasibility: f64 = tab
            .basis
            .iter()
            .zip(&tab.xb)
            .filter(|(&j, _)| j >= std.first_artificial)
            .map(|(_, v)| v.max(0.0))
            .sum();
        if infeasibility > opts.feasibility_tol * (1.0 + norm_inf(&std.b)) {
            return Ok(LpSolution::without_point(LpStatus::Infeasible));
        }
        tab.drive_out_artificials(std.first_artificial, opts)?;
    }

    let mut cost = std.cost.clone();
    cost.resize(std.a.cols(), 0.0);
    if tab.run_phase(&cost, std.first_artificial, opts)? == PhaseOutcome::Unbounded {
        return Ok(LpSolution::without_point(LpStatus::Unbounded));
    }
    tab.refactor()?;

    let mut y = vec![0.0; std.a.cols()];
    for (&j, &v) in tab.basis.iter().zip(&tab.xb) {
        y[j] = v.max(0.0);
    }
    let x = std.recover(&y);
    let objective_value = lp.objective_at(&x);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective_value,
    })
}

#[derive(Clone, Copy, Debug)]
enum ColumnMap {
    /// `x = lower + y`
    Shift { col: usize, lower: f64 },
    /// `x = upper − y`
    Mirror { col: usize, upper: f64 },
    /// `x = y⁺ − y⁻`
    Split { pos: usize, neg: usize },
}

struct StandardForm {
    a: DenseMatrix,
    b: Vec<f64>,
    cost: Vec<f64>,
    first_artificial: usize,
    /// For each row, the column that starts basic.
    initial_basis: Vec<usize>,
    maps: Vec<ColumnMap>,
}

fn is_infinite(v: f64) -> bool {
    v.abs() >= INFINITY_SENTINEL
}

impl StandardForm {
    fn build(lp: &LinearProgram) -> Self {
        let mut maps = Vec::with_capacity(lp.num_vars());
        let mut n_struct = 0;
        let mut cost = Vec::new();
        for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
            let c = lp.objective[j];
            let map = match (is_infinite(lo), is_infinite(hi)) {
                (false, _) => {
                    cost.push(c);
                    ColumnMap::Shift { col: n_struct, lower: lo }
                }
                (true, false) => {
                    cost.push(-c);
                    ColumnMap::Mirror { col: n_struct, upper: hi }
                }
                (true, true) => {
                    cost.push(c);
                    cost.push(-c);
                    n_struct += 1;
                    ColumnMap::Split { pos: n_struct - 1, neg: n_struct }
                }
            };
            n_struct += 1;
            maps.push(map);
        }

        // (coefficients over structural columns, rhs, has slack)
        let mut rows: Vec<(Vec<f64>, f64, bool)> = Vec::new();
        let transform = |row: &[f64], rhs: f64| {
            let mut coeffs = vec![0.0; n_struct];
            let mut rhs = rhs;
            for (a, map) in row.iter().zip(&maps) {
                if *a == 0.0 {
                    continue;
                }
                match *map {
                    ColumnMap::Shift { col, lower } => {
                        coeffs[col] += a;
                        rhs -= a * lower;
                    }
                    ColumnMap::Mirror { col, upper } => {
                        coeffs[col] -= a;
                        rhs -= a * upper;
                    }
                    ColumnMap::Split { pos, neg } => {
                        coeffs[pos] += a;
                        coeffs[neg] -= a;
                    }
                }
            }
            (coeffs, rhs)
        };
        for i in 0..lp.a_eq.rows() {
            let (c, r) = transform(lp.a_eq.row(i), lp.b_eq[i]);
            rows.push((c, r, false));
        }
        for i in 0..lp.a_ub.rows() {
            let (c, r) = transform(lp.a_ub.row(i), lp.b_ub[i]);
            rows.push((c, r, true));
        }
        for (map, &(lo, hi)) in maps.iter().zip(&lp.bounds) {
            if let ColumnMap::Shift { col, .. } = *map {
                if !is_infinite(hi) {
                    let mut c = vec![0.0; n_struct];
                    c[col] = 1.0;
                    rows.push((c, hi - lo, true));
                }
            }
        }

        let m = rows.len();
        let n_slack = rows.iter().filter(|r| r.2).count();
        let n_art = rows.iter().filter(|r| !r.2 || r.1 < 0.0).count();
        let first_artificial = n_struct + n_slack;
        let mut a = DenseMatrix::zeros(m, first_artificial + n_art);
        let mut b = vec![0.0; m];
        let mut initial_basis = vec![0; m];
        let mut next_slack = n_struct;
        let mut next_art = first_artificial;
        for (i, (coeffs, rhs, has_slack)) in rows.into_iter().enumerate() {
            let sign = if rhs < 0.0 { -1.0 } else { 1.0 };
            let out = a.row_mut(i);
            for (o, c) in out.iter_mut().zip(&coeffs) {
                *o = sign * c;
            }
            b[i] = sign * rhs;
            let mut basic = None;
            if has_slack {
                out[next_slack] = sign;
                if sign > 0.0 {
                    basic = Some(next_slack);
                }
                next_slack += 1;
            }
            initial_basis[i] = match basic {
                Some(col) => col,
                None => {
                    out[next_art] = 1.0;
                    next_art += 1;
                    next_art - 1
                }
            };
        }
        StandardForm {
            a,
            b,
            cost,
            first_artificial,
            initial_basis,
            maps,
        }
    }

    fn recover(&self, y: &[f64]) -> Vec<f64> {
        self.maps
            .iter()
            .map(|map| match *map {
                ColumnMap::Shift { col, lower } => lower + y[col],
                ColumnMap::Mirror { col, upper } => upper - y[col],
                ColumnMap::Split { pos, neg } => y[pos] - y[neg],
            })
            .collect()
    }
}

#[derive(Debug, PartialEq, Eq)]
enum PhaseOutcome {
    Optimal,
    Unbounded,
}

struct Tableau<'a> {
    a: &'a DenseMatrix,
    b: &'a [f64],
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: DenseMatrix,
    xb: Vec<f64>,
    iterations: usize,
    max_iterations: usize,
    since_refactor: usize,
}

impl<'a> Tableau<'a> {
    fn new(std: &'a StandardForm, max_iterations: usize) -> Result<Self> {
        let m = std.a.rows();
        let mut is_basic = vec![false; std.a.cols()];
        for &j in &std.initial_basis {
            is_basic[j] = true;
        }
        // The starting basis is a signed identity, every column is +1 in its row.
        let tab = Tableau {
            a: &std.a,
            b: &std.b,
            basis: std.initial_basis.clone(),
            is_basic,
            binv: DenseMatrix::identity(m),
            xb: std.b.clone(),
            iterations: 0,
            max_iterations,
            since_refactor: 0,
        };
        Ok(tab)
    }

    fn m(&self) -> usize {
        self.basis.len()
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.m();
        self.since_refactor = 0;
        if m == 0 {
            return Ok(());
        }
        let mut bmat = DenseMatrix::zeros(m, m);
        for (k, &j) in self.basis.iter().enumerate() {
            for i in 0..m {
                bmat[(i, k)] = self.a[(i, j)];
            }
        }
        let lu = LuFactors::factorize(&bmat).map_err(|_| Error::NumericalBreakdown {
            iterations: self.iterations,
        })?;
        self.binv = lu.inverse();
        self.xb = lu.solve(self.b);
        Ok(())
    }

    fn column(&self, j: usize) -> Vec<f64> {
        let m = self.m();
        let mut alpha = vec![0.0; m];
        for k in 0..m {
            let akj = self.a[(k, j)];
            if akj != 0.0 {
                for (i, al) in alpha.iter_mut().enumerate() {
                    *al += self.binv[(i, k)] * akj;
                }
            }
        }
        alpha
    }

    fn reduced_costs(&self, cost: &[f64], n_allowed: usize) -> Vec<f64> {
        let m = self.m();
        let mut y = vec![0.0; m];
        for (k, &j) in self.basis.iter().enumerate() {
            let cb = cost[j];
            if cb != 0.0 {
                for (i, yi) in y.iter_mut().enumerate() {
                    *yi += cb * self.binv[(k, i)];
                }
            }
        }
        let mut d = cost[..n_allowed].to_vec();
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                let row = &self.a.row(i)[..n_allowed];
                for (dj, aij) in d.iter_mut().zip(row) {
                    *dj -= yi * aij;
                }
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64]) -> Result<()> {
        let m = self.m();
        let ar = alpha[r];
        let theta = self.xb[r] / ar;
        for i in 0..m {
            if i != r {
                self.xb[i] -= theta * alpha[i];
            }
        }
        self.xb[r] = theta;

        let inv = 1.0 / ar;
        for v in self.binv.row_mut(r) {
            *v *= inv;
        }
        let pivot_row = self.binv.row(r).to_vec();
        for (i, &ai) in alpha.iter().enumerate() {
            if i != r && ai != 0.0 {
                for (v, p) in self.binv.row_mut(i).iter_mut().zip(&pivot_row) {
                    *v -= ai * p;
                }
            }
        }
        self.is_basic[self.basis[r]] = false;
        self.is_basic[q] = true;
        self.basis[r] = q;

        self.iterations += 1;
        self.since_refactor += 1;
        if self.iterations > self.max_iterations {
            return Err(Error::NumericalBreakdown {
                iterations: self.iterations,
            });
        }
        Ok(())
    }

    /// Runs simplex iterations with entering candidates restricted to `0..n_allowed`.
    fn run_phase(&mut self, cost: &[f64], n_allowed: usize, opts: &LpOptions) -> Result<PhaseOutcome> {
        let mut bland = false;
        let mut stall = 0;
        loop {
            if self.since_refactor >= opts.refactor_interval {
                self.refactor()?;
            }
            let d = self.reduced_costs(cost, n_allowed);
            let candidates = (0..n_allowed).filter(|&j| !self.is_basic[j] && d[j] < -opts.optimality_tol);
            let entering = if bland {
                candidates.min()
            } else {
                candidates.fold(None, |best: Option<usize>, j| match best {
                    Some(b) if d[b] <= d[j] => Some(b),
                    _ => Some(j),
                })
            };
            let Some(q) = entering else {
                return Ok(PhaseOutcome::Optimal);
            };

            let alpha = self.column(q);
            let mut leave: Option<(usize, f64)> = None;
            for (i, &ai) in alpha.iter().enumerate() {
                if ai <= opts.pivot_tol {
                    continue;
                }
                let t = self.xb[i].max(0.0) / ai;
                leave = match leave {
                    None => Some((i, t)),
                    Some((r, tr)) => {
                        let tie = (t - tr).abs() <= 1e-12 * (1.0 + tr.abs());
                        let better = if tie {
                            if bland {
                                self.basis[i] < self.basis[r]
                            } else {
                                ai > alpha[r]
                            }
                        } else {
                            t < tr
                        };
                        if better {
                            Some((i, t))
                        } else {
                            Some((r, tr))
                        }
                    }
                };
            }
            let Some((r, theta)) = leave else {
                return Ok(PhaseOutcome::Unbounded);
            };
            if theta <= 1e-12 {
                stall += 1;
                if stall > opts.stall_limit {
                    bland = true;
                }
            } else {
                stall = 0;
            }
            self.xb[r] = self.xb[r].max(0.0);
            self.pivot(r, q, &alpha)?;
        }
    }

    /// Pivots zero-level artificials out of the basis where the row allows it.
    /// Rows where no structural or slack column has a nonzero entry are
    /// redundant; their artificial stays basic at zero for good.
    fn drive_out_artificials(&mut self, first_artificial: usize, opts: &LpOptions) -> Result<()> {
        for r in 0..self.m() {
            if self.basis[r] < first_artificial {
                continue;
            }
            let rho = self.binv.row(r).to_vec();
            let found = (0..first_artificial).filter(|&j| !self.is_basic[j]).find(|&j| {
                let v: f64 = rho.iter().enumerate().map(|(i, p)| p * self.a[(i, j)]).sum();
                v.abs() > opts.pivot_tol
            });
            if let Some(q) = found {
                let alpha = self.column(q);
                self.xb[r] = 0.0;
                self.pivot(r, q, &alpha)?;
            }
        }
        self.refactor()
    }
}
