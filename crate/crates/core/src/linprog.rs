//! Dense two-phase tableau simplex with Bland's pivot rule.
//!
//! Problems are maximizations over `x ≥ 0` with rows of the form
//! `a·x ≥ b` or `a·x = b`. Bland's rule (lowest eligible index enters, ties
//! in the ratio test leave by lowest basic index) is always on, so degenerate
//! problems terminate.
//!
//! # Debug dump format
//!
//! [`LinearProgram::dump`] writes one objective line followed by one line per
//! row, numbers separated by single spaces and printed in Rust's shortest
//! round-trip form:
//!
//! ```text
//! max: c1 c2 ... cn
//! a1 a2 ... an >= b
//! a1 a2 ... an = b
//! ```

use std::fmt::Write as _;

use thiserror::Error;

/// Entries with magnitude at or below this are never pivoted on.
pub const PIVOT_TOLERANCE: f64 = 1e-10;
/// Feasibility tolerance for returned points.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-7;
const REFRESH_INTERVAL: usize = 50;
/// A chosen pivot smaller than this, relative to its column, triggers a
/// refresh and a fresh choice before it is used.
const SUSPECT_PIVOT: f64 = 1e-6;
pub const DEFAULT_MAX_PIVOTS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Ge,
    Eq,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Ge => ">=",
            Relation::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// maximize `objective·x` subject to `rows`, `x ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    num_vars: usize,
    objective: Vec<f64>,
    rows: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("solver stalled after {pivots} pivots")]
    Stalled { pivots: usize },
    #[error("numerical failure: optimal point violates a constraint by {violation:e}")]
    Numerical { violation: f64 },
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram { num_vars, objective: vec![0.0; num_vars], rows: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn rows(&self) -> &[Constraint] {
        &self.rows
    }

    pub fn set_objective(&mut self, objective: Vec<f64>) {
        self.objective = objective;
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        self.rows.push(Constraint { coeffs, relation, rhs });
    }

    pub fn validate(&self) -> Result<(), LpError> {
        if self.objective.len() != self.num_vars {
            return Err(LpError::Malformed(format!(
                "objective has {} coefficients for {} variables",
                self.objective.len(),
                self.num_vars
            )));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::Malformed("objective has a non-finite coefficient".into()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.coeffs.len() != self.num_vars {
                return Err(LpError::Malformed(format!(
                    "row {i} has {} coefficients for {} variables",
                    row.coeffs.len(),
                    self.num_vars
                )));
            }
            if row.coeffs.iter().any(|c| !c.is_finite()) || !row.rhs.is_finite() {
                return Err(LpError::Malformed(format!("row {i} has a non-finite entry")));
            }
        }
        Ok(())
    }

    /// Largest amount by which `x` violates a row or a bound; 0 when feasible.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = x.iter().fold(0.0f64, |w, &v| w.max(-v));
        for row in &self.rows {
            let lhs: f64 = row.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
            let v = match row.relation {
                Relation::Ge => row.rhs - lhs,
                Relation::Eq => (row.rhs - lhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn dump(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|c| format!("{c}")).collect::<Vec<_>>().join(" ");
        let mut out = format!("max: {}\n", join(&self.objective));
        for row in &self.rows {
            let _ = writeln!(out, "{} {} {}", join(&row.coeffs), row.relation.symbol(), row.rhs);
        }
        out
    }

    /// Parse the format written by [`dump`](Self::dump).
    pub fn parse_dump(text: &str) -> Result<Self, LpError> {
        let bad = |msg: String| LpError::Malformed(msg);
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head = lines.next().ok_or_else(|| bad("empty dump".into()))?;
        let head = head.strip_prefix("max:").ok_or_else(|| bad("missing `max:` line".into()))?;
        let parse_nums = |s: &str| -> Result<Vec<f64>, LpError> {
            s.split_whitespace().map(|t| t.parse::<f64>().map_err(|e| bad(format!("{t:?}: {e}")))).collect()
        };
        let objective = parse_nums(head)?;
        let mut lp = LinearProgram::new(objective.len());
        lp.set_objective(objective);
        for line in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() < 2 {
                return Err(bad(format!("short row {line:?}")));
            }
            let relation = match toks[toks.len() - 2] {
                ">=" => Relation::Ge,
                "=" => Relation::Eq,
                other => return Err(bad(format!("unknown relation {other:?}"))),
            };
            let rhs = parse_nums(toks[toks.len() - 1])?[0];
            let coeffs = parse_nums(&toks[..toks.len() - 2].join(" "))?;
            lp.add_row(coeffs, relation, rhs);
        }
        lp.validate()?;
        Ok(lp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    /// Present iff `status` is `Optimal`.
    pub solution: Option<Vec<f64>>,
    pub value: Option<f64>,
    pub pivots: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub max_pivots: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { max_pivots: DEFAULT_MAX_PIVOTS }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpResult, LpError> {
    solve_lp_with(lp, SimplexOptions::default())
}

#[derive(Clone)]
struct Tableau {
    // row-major, `width` = columns + 1 (rhs last)
    cells: Vec<f64>,
    width: usize,
    rows: usize,
    basis: Vec<usize>,
    cost: Vec<f64>,
    pivots: usize,
    max_pivots: usize,
    // initial tableau rows and the original row behind each current row,
    // kept so the tableau can be rebuilt from scratch for the current basis
    original: Vec<f64>,
    row_ids: Vec<usize>,
    objective: Vec<f64>,
    since_refresh: usize,
}

enum Phase {
    Optimal,
    Unbounded,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.cells[r * self.width + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.cells[r * self.width + self.width - 1]
    }

    fn pivot(&mut self, pr: usize, pc: usize) -> Result<(), LpError> {
        self.pivots += 1;
        if self.pivots > self.max_pivots {
            return Err(LpError::Stalled { pivots: self.max_pivots });
        }
        let w = self.width;
        let inv = 1.0 / self.at(pr, pc);
        for c in 0..w {
            self.cells[pr * w + c] *= inv;
        }
        self.cells[pr * w + pc] = 1.0;
        let (before, rest) = self.cells.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        let eliminate = |row: &mut [f64]| {
            let f = row[pc];
            if f != 0.0 {
                for (x, &p) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * p;
                }
                row[pc] = 0.0;
            }
        };
        before.chunks_mut(w).for_each(eliminate);
        after.chunks_mut(w).for_each(eliminate);
        let f = self.cost[pc];
        if f != 0.0 {
            for (x, &p) in self.cost.iter_mut().zip(prow.iter()) {
                *x -= f * p;
            }
            self.cost[pc] = 0.0;
        }
        self.basis[pr] = pc;
        self.since_refresh += 1;
        Ok(())
    }

    /// Recompute every row as B⁻¹·(original row) by Gaussian elimination with
    /// partial pivoting, discarding round-off accumulated over many pivots.
    fn refresh(&mut self) -> bool {
        self.since_refresh = 0;
        let (k, w) = (self.rows, self.width);
        // augmented [B | A b], one line per current row
        let mut aug: Vec<Vec<f64>> = self
            .row_ids
            .iter()
            .map(|&id| {
                let orig = &self.original[id * w..(id + 1) * w];
                let mut line: Vec<f64> = self.basis.iter().map(|&j| orig[j]).collect();
                line.extend_from_slice(orig);
                line
            })
            .collect();
        for col in 0..k {
            let Some(piv) = (col..k).max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs())) else {
                return false;
            };
            if aug[piv][col].abs() <= PIVOT_TOLERANCE {
                // numerically singular basis: keep the incrementally updated tableau
                return false;
            }
            aug.swap(col, piv);
            let inv = 1.0 / aug[col][col];
            aug[col].iter_mut().for_each(|x| *x *= inv);
            let prow = aug[col].clone();
            for (r, line) in aug.iter_mut().enumerate() {
                let f = line[col];
                if r != col && f != 0.0 {
                    line.iter_mut().zip(&prow).for_each(|(x, &p)| *x -= f * p);
                }
            }
        }
        for (r, line) in aug.iter().enumerate() {
            self.cells[r * w..(r + 1) * w].copy_from_slice(&line[k..]);
            self.cells[r * w + self.basis[r]] = 1.0;
        }
        let c = std::mem::take(&mut self.objective);
        self.set_cost(&c);
        true
    }

    /// Load `c` (maximize) as the cost row, pricing out the current basis.
    fn set_cost(&mut self, c: &[f64]) {
        self.objective = c.to_vec();
        let w = self.width;
        self.cost = vec![0.0; w];
        self.cost[..c.len()].copy_from_slice(c);
        for r in 0..self.rows {
            let cb = c.get(self.basis[r]).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for j in 0..w {
                    self.cost[j] -= cb * self.cells[r * w + j];
                }
            }
        }
    }

    /// Bland's rule iterations over columns `0..eligible`.
    fn run(&mut self, eligible: usize) -> Result<Phase, LpError> {
        loop {
            if self.since_refresh >= REFRESH_INTERVAL {
                self.refresh();
            }
            let improving = PIVOT_TOLERANCE * (1.0 + self.cost_scale(eligible));
            let Some(enter) = (0..eligible).find(|&j| self.cost[j] > improving) else {
                if self.since_refresh > 0 {
                    // confirm optimality on a freshly rebuilt tableau
                    self.refresh();
                    let improving = PIVOT_TOLERANCE * (1.0 + self.cost_scale(eligible));
                    if (0..eligible).any(|j| self.cost[j] > improving) {
                        continue;
                    }
                }
                return Ok(Phase::Optimal);
            };
            // Round-off grows with the entries of the column, so eligibility
            // is judged relative to its largest magnitude.
            let eligible_pivot = PIVOT_TOLERANCE * (1.0 + self.column_max(enter));
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, enter);
                if a <= eligible_pivot {
                    continue;
                }
                let ratio = self.rhs(r).max(0.0) / a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((br, best)) => {
                        let tie = (ratio - best).abs() <= 1e-9 * (1.0 + best.abs());
                        if (!tie && ratio < best) || (tie && self.basis[r] < self.basis[br]) {
                            Some((r, ratio))
                        } else {
                            Some((br, best))
                        }
                    }
                };
            }
            match leave {
                None => return Ok(Phase::Unbounded),
                Some((r, _)) => {
                    if self.since_refresh > 0 && self.at(r, enter) < SUSPECT_PIVOT * (1.0 + self.column_max(enter)) {
                        self.refresh();
                        continue;
                    }
                    self.pivot(r, enter)?
                }
            }
        }
    }

    fn cost_scale(&self, eligible: usize) -> f64 {
        self.cost[..eligible].iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    fn column_max(&self, c: usize) -> f64 {
        (0..self.rows).fold(0.0f64, |m, r| m.max(self.at(r, c).abs()))
    }

    fn drop_row(&mut self, r: usize) {
        let w = self.width;
        self.cells.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.row_ids.remove(r);
        self.rows -= 1;
    }
}

pub fn solve_lp_with(lp: &LinearProgram, opts: SimplexOptions) -> Result<LpResult, LpError> {
    solve(lp, None, opts)
}

/// Like [`solve_lp_with`], starting from a caller-supplied basis: one column
/// per row, where column `j < num_vars` is variable `j` and `num_vars + i` is
/// the surplus of the `i`-th `≥` row. When that basis is singular or
/// infeasible the solver falls back to phase 1 from scratch.
pub fn solve_lp_from(lp: &LinearProgram, start: &[usize], opts: SimplexOptions) -> Result<LpResult, LpError> {
    solve(lp, Some(start), opts)
}

fn solve(lp: &LinearProgram, start: Option<&[usize]>, opts: SimplexOptions) -> Result<LpResult, LpError> {
    lp.validate()?;
    let n = lp.num_vars;
    let m = lp.rows.len();
    let n_slack = lp.rows.iter().filter(|r| r.relation == Relation::Ge).count();
    // A ≥ row with rhs ≤ 0, negated, starts with its slack basic; every
    // other row needs an artificial.
    let slack_basic = |row: &Constraint| row.relation == Relation::Ge && row.rhs <= 0.0;
    let n_art = lp.rows.iter().filter(|r| !slack_basic(r)).count();
    let art0 = n + n_slack;
    let cols = art0 + n_art;
    let width = cols + 1;

    let mut cells = vec![0.0; m * width];
    let mut basis = Vec::with_capacity(m);
    let mut slack = n;
    let mut art = art0;
    for (r, row) in lp.rows.iter().enumerate() {
        let line = &mut cells[r * width..(r + 1) * width];
        line[..n].copy_from_slice(&row.coeffs);
        let own_slack = (row.relation == Relation::Ge).then(|| {
            line[slack] = -1.0;
            slack += 1;
            slack - 1
        });
        line[cols] = row.rhs;
        if row.rhs < 0.0 || slack_basic(row) {
            line.iter_mut().for_each(|x| *x = -*x);
        }
        match own_slack {
            Some(j) if slack_basic(row) => basis.push(j),
            _ => {
                line[art] = 1.0;
                basis.push(art);
                art += 1;
            }
        }
    }
    let mut t = Tableau {
        original: cells.clone(),
        row_ids: (0..m).collect(),
        objective: Vec::new(),
        since_refresh: 0,
        cells,
        width,
        rows: m,
        basis,
        cost: Vec::new(),
        pivots: 0,
        max_pivots: opts.max_pivots,
    };

    let scale = 1.0 + lp.rows.iter().fold(0.0f64, |a, r| a.max(r.rhs.abs()));
    let warm = start.and_then(|basis| {
        let distinct = basis.iter().collect::<std::collections::BTreeSet<_>>().len() == m;
        if basis.len() != m || !distinct || basis.iter().any(|&j| j >= art0) {
            return None;
        }
        let mut w = Tableau { basis: basis.to_vec(), ..t.clone() };
        let feasible = w.refresh() && (0..m).all(|r| w.rhs(r) >= -FEASIBILITY_TOLERANCE * scale);
        feasible.then_some(w)
    });
    if let Some(w) = warm {
        t = w;
    } else {
        // Phase 1: maximize −Σ artificials.
        let mut phase1 = vec![0.0; cols];
        phase1[art0..].iter_mut().for_each(|c| *c = -1.0);
        t.set_cost(&phase1);
        // artificials that leave the basis never need to return
        t.run(art0)?;
        let infeasibility: f64 = (0..t.rows).filter(|&r| t.basis[r] >= art0).map(|r| t.rhs(r).max(0.0)).sum();
        if infeasibility > FEASIBILITY_TOLERANCE * scale {
            return Ok(LpResult { status: LpStatus::Infeasible, solution: None, value: None, pivots: t.pivots });
        }
    }

    // Drive remaining artificials out of the basis; rows where that is
    // impossible are linearly dependent and dropped.
    let mut r = 0;
    while r < t.rows {
        if t.basis[r] < art0 {
            r += 1;
            continue;
        }
        match (0..art0).find(|&j| t.at(r, j).abs() > PIVOT_TOLERANCE * (1.0 + t.column_max(j))) {
            Some(j) => {
                t.pivot(r, j)?;
                r += 1;
            }
            None => t.drop_row(r),
        }
    }
    for r in 0..t.rows {
        for a in art0..cols {
            t.cells[r * width + a] = 0.0;
        }
    }

    let mut phase2 = lp.objective.clone();
    phase2.resize(cols, 0.0);
    t.set_cost(&phase2);
    if let Phase::Unbounded = t.run(art0)? {
        return Ok(LpResult { status: LpStatus::Unbounded, solution: None, value: None, pivots: t.pivots });
    }

    let mut x = vec![0.0; n];
    for r in 0..t.rows {
        if t.basis[r] < n {
            x[t.basis[r]] = t.rhs(r).max(0.0);
        }
    }
    let violation = lp.max_violation(&x);
    if violation > FEASIBILITY_TOLERANCE * scale {
        return Err(LpError::Numerical { violation });
    }
    let value = lp.objective_value(&x);
    Ok(LpResult { status: LpStatus::Optimal, solution: Some(x), value: Some(value), pivots: t.pivots })
}
