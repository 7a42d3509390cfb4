//! A small dense linear-program solver.
//!
//! Solves `min/max cᵀx` subject to `Ax = b`, `0 ≤ x ≤ u` (upper bounds
//! optional) with a two-phase primal simplex using Bland's rule, so the pivot
//! sequence, and therefore the returned vertex, is fully deterministic.
//! Every reported optimum is checked against a dual certificate before it is
//! returned.
//!
//! ```
//! use causal_transfer::lp::{solve, LinearProgram, Sense};
//!
//! let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0, 0.0]);
//! lp.add_equality(vec![1.0, 1.0], 1.0);
//! let sol = solve(&lp, 1e-9).unwrap();
//! assert!((sol.value - 1.0).abs() < 1e-12);
//! ```

use thiserror::Error;

/// Default feasibility and optimality tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Rows whose elimination residual falls below this are treated as linearly
/// dependent on earlier rows.
const PIVOT_THRESHOLD: f64 = 1e-11;
const ENTER_EPS: f64 = 1e-12;
const RATIO_EPS: f64 = 1e-12;
const MAX_PIVOTS: usize = 200_000;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum LpError {
    #[error("program is infeasible")]
    Infeasible,
    #[error("program is unbounded in the objective direction")]
    Unbounded,
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// An equality-form LP over nonnegative variables.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub upper: Vec<Option<f64>>,
}

impl LinearProgram {
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            sense,
            objective,
            rows: Vec::new(),
            rhs: Vec::new(),
            upper: vec![None; n],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_equality(&mut self, coeffs: Vec<f64>, rhs: f64) {
        self.rows.push(coeffs);
        self.rhs.push(rhs);
    }

    pub fn set_upper(&mut self, var: usize, bound: f64) {
        self.upper[var] = Some(bound);
    }

    /// Same program with the opposite optimization direction.
    pub fn with_sense(&self, sense: Sense) -> Self {
        Self {
            sense,
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.n_vars();
        if self.rows.len() != self.rhs.len() {
            return Err(LpError::Malformed("row and right-hand-side counts differ".into()));
        }
        if self.upper.len() != n {
            return Err(LpError::Malformed("upper-bound vector has the wrong length".into()));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::Malformed("objective has a non-finite coefficient".into()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != n {
                return Err(LpError::Malformed(format!("row {i} has {} coefficients, expected {n}", row.len())));
            }
            if row.iter().any(|a| !a.is_finite()) || !self.rhs[i].is_finite() {
                return Err(LpError::Malformed(format!("row {i} has a non-finite entry")));
            }
        }
        for (j, u) in self.upper.iter().enumerate() {
            if let Some(u) = u {
                if !u.is_finite() || *u < 0.0 {
                    return Err(LpError::Malformed(format!("variable {j} has invalid upper bound {u}")));
                }
            }
        }
        Ok(())
    }
}

/// An optimal vertex together with the quantities used to certify it.
#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
    /// Objective value of the dual certificate, in the program's own sense.
    pub dual_bound: f64,
    /// `‖Ax − b‖∞` of the returned point on the original rows.
    pub primal_residual: f64,
}

/// Standard form `min cᵀx, Ax = b, x ≥ 0` after folding in upper bounds.
struct StandardForm {
    cost: Vec<f64>,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

impl StandardForm {
    fn from_lp(lp: &LinearProgram) -> Self {
        let n = lp.n_vars();
        let n_upper = lp.upper.iter().filter(|u| u.is_some()).count();
        let total = n + n_upper;
        let sign = match lp.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut cost: Vec<f64> = lp.objective.iter().map(|c| sign * c).collect();
        cost.resize(total, 0.0);
        let mut rows: Vec<Vec<f64>> = lp
            .rows
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.resize(total, 0.0);
                r
            })
            .collect();
        let mut rhs = lp.rhs.clone();
        let mut slack = n;
        for (j, u) in lp.upper.iter().enumerate() {
            if let Some(u) = u {
                let mut row = vec![0.0; total];
                row[j] = 1.0;
                row[slack] = 1.0;
                rows.push(row);
                rhs.push(*u);
                slack += 1;
            }
        }
        Self { cost, rows, rhs }
    }

    fn residual(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(row, b)| (dot(row, x) - b).abs())
            .fold(0.0, f64::max)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fixes variables forced to zero by rows of one sign with a zero right-hand
/// side and drops those rows. Returns the surviving row and column indices.
fn presolve(form: &StandardForm, tol: f64) -> Result<(Vec<usize>, Vec<usize>), LpError> {
    let n = form.cost.len();
    let mut col_alive = vec![true; n];
    let mut row_alive = vec![true; form.rows.len()];
    loop {
        let mut changed = false;
        for (i, row) in form.rows.iter().enumerate() {
            if !row_alive[i] {
                continue;
            }
            let live = || row.iter().enumerate().filter(|(j, _)| col_alive[*j]).map(|(_, a)| *a);
            if live().all(|a| a == 0.0) {
                if form.rhs[i].abs() > tol {
                    return Err(LpError::Infeasible);
                }
                row_alive[i] = false;
                changed = true;
                continue;
            }
            if form.rhs[i].abs() > 1e-15 {
                continue;
            }
            let nonneg = live().all(|a| a >= 0.0);
            let nonpos = live().all(|a| a <= 0.0);
            if nonneg || nonpos {
                for (j, a) in row.iter().enumerate() {
                    if *a != 0.0 {
                        col_alive[j] = false;
                    }
                }
                row_alive[i] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let rows = (0..form.rows.len()).filter(|&i| row_alive[i]).collect();
    let cols = (0..n).filter(|&j| col_alive[j]).collect();
    Ok((rows, cols))
}

/// Keeps a maximal linearly independent subset of rows (in order), checking
/// that every dropped row is consistent with the kept ones.
fn independent_rows(a: &[Vec<f64>], b: &[f64], tol: f64) -> Result<Vec<usize>, LpError> {
    let mut reduced: Vec<(usize, Vec<f64>, f64)> = Vec::new();
    let mut keep = Vec::new();
    for (i, row) in a.iter().enumerate() {
        let scale = row.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let mut r = row.clone();
        let mut rb = b[i];
        for (col, pivot_row, pivot_b) in &reduced {
            let f = r[*col];
            if f != 0.0 {
                for (x, p) in r.iter_mut().zip(pivot_row) {
                    *x -= f * p;
                }
                rb -= f * pivot_b;
            }
        }
        let (col, mag) = r
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bj, bm), (j, x)| if x.abs() > bm { (j, x.abs()) } else { (bj, bm) });
        if mag <= PIVOT_THRESHOLD * scale {
            if rb.abs() > tol * scale.max(b[i].abs()).max(1.0) {
                return Err(LpError::Infeasible);
            }
            continue;
        }
        let p = r[col];
        r.iter_mut().for_each(|x| *x /= p);
        reduced.push((col, r, rb / p));
        keep.push(i);
    }
    Ok(keep)
}

struct Tableau {
    /// `m` rows of `cols + 1` entries; the last entry is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// Reduced costs, with the negated objective value in the last slot.
    d: Vec<f64>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for x in self.t[r].iter_mut() {
            *x /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (x, pr) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * pr;
                }
                row[c] = 0.0;
            }
        }
        let f = self.d[c];
        if f != 0.0 {
            for (x, pr) in self.d.iter_mut().zip(&pivot_row) {
                *x -= f * pr;
            }
            self.d[c] = 0.0;
        }
        self.basis[r] = c;
    }

    fn set_costs(&mut self, cost: &[f64]) {
        let width = self.cols + 1;
        let mut d = vec![0.0; width];
        d[..cost.len()].copy_from_slice(cost);
        for (row, &bv) in self.t.iter().zip(&self.basis) {
            let cb = cost.get(bv).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for (x, a) in d.iter_mut().zip(row) {
                    *x -= cb * a;
                }
            }
        }
        self.d = d;
    }

    /// Runs Bland's-rule simplex over columns `0..eligible`.
    fn optimize(&mut self, eligible: usize, pivots: &mut usize) -> Result<(), LpError> {
        loop {
            let Some(c) = (0..eligible).find(|&j| self.d[j] < -ENTER_EPS) else {
                return Ok(());
            };
            let rhs = self.cols;
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.t.iter().enumerate() {
                if row[c] <= RATIO_EPS {
                    continue;
                }
                let ratio = row[rhs].max(0.0) / row[c];
                leave = match leave {
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
            let Some((r, _)) = leave else {
                return Err(LpError::Unbounded);
            };
            self.pivot(r, c);
            *pivots += 1;
            if *pivots > MAX_PIVOTS {
                return Err(LpError::Numerical("pivot limit exceeded".into()));
            }
        }
    }
}

/// Solves `B^T y = c_B` by Gaussian elimination with partial pivoting.
fn solve_square_transposed(a: &[Vec<f64>], basis: &[usize], cb: &[f64]) -> Result<Vec<f64>, LpError> {
    let m = basis.len();
    // Row k of the system is column basis[k] of `a`.
    let mut sys: Vec<Vec<f64>> = (0..m)
        .map(|k| {
            let mut row: Vec<f64> = (0..m).map(|i| a[i][basis[k]]).collect();
            row.push(cb[k]);
            row
        })
        .collect();
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&x, &y| sys[x][col].abs().total_cmp(&sys[y][col].abs()))
            .unwrap();
        if sys[piv][col].abs() < 1e-14 {
            return Err(LpError::Numerical("singular basis".into()));
        }
        sys.swap(col, piv);
        for r in 0..m {
            if r != col {
                let f = sys[r][col] / sys[col][col];
                if f != 0.0 {
                    for k in col..=m {
                        sys[r][k] -= f * sys[col][k];
                    }
                }
            }
        }
    }
    Ok((0..m).map(|i| sys[i][m] / sys[i][i]).collect())
}

/// Solves the program and certifies optimality to within `tol`.
///
/// # Errors
///
/// [`LpError::Infeasible`] if no point satisfies the constraints,
/// [`LpError::Unbounded`] if the objective is unbounded,
/// [`LpError::Numerical`] if the final KKT check fails.
pub fn solve(lp: &LinearProgram, tol: f64) -> Result<LpSolution, LpError> {
    lp.validate()?;
    if !(tol > 0.0) {
        return Err(LpError::Malformed("tolerance must be positive".into()));
    }
    let form = StandardForm::from_lp(lp);
    let n_total = form.cost.len();

    let (live_rows, live_cols) = presolve(&form, tol)?;
    let mut a: Vec<Vec<f64>> = live_rows
        .iter()
        .map(|&i| live_cols.iter().map(|&j| form.rows[i][j]).collect())
        .collect();
    let mut b: Vec<f64> = live_rows.iter().map(|&i| form.rhs[i]).collect();
    let cost: Vec<f64> = live_cols.iter().map(|&j| form.cost[j]).collect();
    for (row, bi) in a.iter_mut().zip(b.iter_mut()) {
        if *bi < 0.0 {
            row.iter_mut().for_each(|x| *x = -*x);
            *bi = -*bi;
        }
    }
    let keep = independent_rows(&a, &b, tol)?;
    let mut a: Vec<Vec<f64>> = keep.iter().map(|&i| a[i].clone()).collect();
    let mut b: Vec<f64> = keep.iter().map(|&i| b[i]).collect();
    let k = live_cols.len();

    let mut x_live = vec![0.0; k];
    let mut y = vec![0.0; a.len()];
    if !a.is_empty() {
        let m = a.len();
        let cols = k + m;
        let t = a
            .iter()
            .zip(&b)
            .enumerate()
            .map(|(i, (row, bi))| {
                let mut r = Vec::with_capacity(cols + 1);
                r.extend_from_slice(row);
                r.extend((0..m).map(|j| if i == j { 1.0 } else { 0.0 }));
                r.push(*bi);
                r
            })
            .collect();
        let mut tab = Tableau {
            t,
            basis: (k..k + m).collect(),
            d: Vec::new(),
            cols,
        };
        let mut phase1 = vec![0.0; cols];
        phase1[k..].iter_mut().for_each(|c| *c = 1.0);
        tab.set_costs(&phase1);
        let mut pivots = 0;
        tab.optimize(k, &mut pivots)?;
        let infeasibility = -tab.d[cols];
        let scale = b.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        if infeasibility > tol * scale {
            return Err(LpError::Infeasible);
        }

        // Pivot remaining artificials out of the basis; a row with no usable
        // structural entry is redundant and dropped.
        let mut r = 0;
        while r < tab.t.len() {
            if tab.basis[r] < k {
                r += 1;
                continue;
            }
            let candidate = (0..k)
                .filter(|&j| tab.t[r][j].abs() > 1e-9)
                .max_by(|&x, &y| tab.t[r][x].abs().total_cmp(&tab.t[r][y].abs()));
            match candidate {
                Some(c) => {
                    tab.pivot(r, c);
                    r += 1;
                }
                None => {
                    let row_id = tab.basis[r] - k;
                    tab.t.remove(r);
                    tab.basis.remove(r);
                    a.remove(row_id);
                    b.remove(row_id);
                    // Artificial columns keep their ids; renumber the rest.
                    for bv in tab.basis.iter_mut() {
                        if *bv > k + row_id {
                            *bv -= 1;
                        }
                    }
                    for row in tab.t.iter_mut() {
                        row.remove(k + row_id);
                    }
                    tab.cols -= 1;
                }
            }
        }

        let mut phase2 = cost.clone();
        phase2.resize(tab.cols, 0.0);
        tab.set_costs(&phase2);
        tab.optimize(k, &mut pivots)?;

        for (row, &bv) in tab.t.iter().zip(&tab.basis) {
            x_live[bv] = row[tab.cols].max(0.0);
        }
        let cb: Vec<f64> = tab.basis.iter().map(|&bv| cost[bv]).collect();
        y = solve_square_transposed(&a, &tab.basis, &cb)?;
    } else if cost.iter().any(|&c| c < 0.0) {
        return Err(LpError::Unbounded);
    }

    // Dual certificate on the reduced program.
    let cost_scale = cost.iter().fold(1.0f64, |m, c| m.max(c.abs()));
    for j in 0..k {
        let reduced = cost[j] - a.iter().zip(&y).map(|(row, yi)| row[j] * yi).sum::<f64>();
        if reduced < -tol * cost_scale {
            return Err(LpError::Numerical(format!(
                "dual infeasible at column {j} (reduced cost {reduced:e})"
            )));
        }
    }
    let primal = dot(&cost, &x_live);
    let dual = dot(&b, &y);
    if (primal - dual).abs() > tol * (1.0 + primal.abs()) {
        return Err(LpError::Numerical(format!("duality gap {:e}", (primal - dual).abs())));
    }

    let mut x_full = vec![0.0; n_total];
    for (&j, &v) in live_cols.iter().zip(&x_live) {
        x_full[j] = v;
    }
    let primal_residual = form.residual(&x_full);
    let rhs_scale = form.rhs.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    if primal_residual > tol * rhs_scale {
        return Err(LpError::Numerical(format!("primal residual {primal_residual:e}")));
    }

    let (value, dual_bound) = match lp.sense {
        Sense::Minimize => (primal, dual),
        Sense::Maximize => (-primal, -dual),
    };
    x_full.truncate(lp.n_vars());
    Ok(LpSolution {
        value,
        x: x_full,
        dual_bound,
        primal_residual,
    })
}
