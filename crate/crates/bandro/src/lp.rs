//! Dense bounded-variable linear programming by two-phase primal simplex.
//!
//! Sized for the band programs this crate generates: a few hundred variables,
//! a few dozen rows, dense row storage. Infinite bounds are expressed with
//! IEEE infinities, never large magic numbers. Pivoting is deterministic:
//! Dantzig pricing with a largest-pivot tie rule, switching to Bland's rule
//! after `10 * n` degenerate steps.

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("iteration cap of {0} pivots exceeded")]
    IterationLimit(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// `min c.x` subject to `lo_r <= a_r.x <= hi_r` per row and per-variable
/// bounds. Equalities use `lo == hi`; one-sided rows and free variables use
/// infinite bounds.
#[derive(Clone, Debug)]
pub struct LpProblem<T> {
    objective: Vec<T>,
    rows: Vec<(Vec<T>, T, T)>,
    var_lower: Vec<T>,
    var_upper: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    /// Optimizer (empty unless `status == Optimal`).
    pub x: Vec<T>,
    /// Objective value `c.x` (zero unless `status == Optimal`).
    pub objective: T,
}

impl<T: Real> LpProblem<T> {
    /// Problem with the given objective, all variables free.
    pub fn new(objective: Vec<T>) -> Self {
        let n = objective.len();
        LpProblem {
            objective,
            rows: Vec::new(),
            var_lower: vec![T::neg_infinity(); n],
            var_upper: vec![T::infinity(); n],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn set_var_bounds(&mut self, var: usize, lo: T, hi: T) {
        self.var_lower[var] = lo;
        self.var_upper[var] = hi;
    }

    pub fn add_row(&mut self, coeffs: Vec<T>, lo: T, hi: T) {
        self.rows.push((coeffs, lo, hi));
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.n_vars();
        if n == 0 {
            return Err(LpError::Malformed("at least one variable required".into()));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::Malformed("objective must be finite".into()));
        }
        for (j, (lo, hi)) in self.var_lower.iter().zip(&self.var_upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || *lo > *hi {
                return Err(LpError::Malformed(format!("variable {j} bounds [{lo}, {hi}]")));
            }
        }
        for (r, (coeffs, lo, hi)) in self.rows.iter().enumerate() {
            if coeffs.len() != n {
                return Err(LpError::Malformed(format!(
                    "row {r} has {} coefficients, expected {n}",
                    coeffs.len()
                )));
            }
            if coeffs.iter().any(|c| !c.is_finite()) {
                return Err(LpError::Malformed(format!("row {r} has non-finite coefficients")));
            }
            if lo.is_nan() || hi.is_nan() || *lo > *hi {
                return Err(LpError::Malformed(format!("row {r} bounds [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

/// Minimize the problem's objective.
pub fn solve_min<T: Real>(problem: &LpProblem<T>) -> Result<LpSolution<T>, LpError> {
    solve(problem, false)
}

/// Maximize the problem's objective.
pub fn solve_max<T: Real>(problem: &LpProblem<T>) -> Result<LpSolution<T>, LpError> {
    solve(problem, true)
}

fn solve<T: Real>(problem: &LpProblem<T>, maximize: bool) -> Result<LpSolution<T>, LpError> {
    problem.validate()?;
    let mut tab = Tableau::build(problem, maximize);
    let status = tab.run()?;
    if status != LpStatus::Optimal {
        return Ok(LpSolution { status, x: Vec::new(), objective: T::zero() });
    }
    let x: Vec<T> = tab.val[..tab.n_struct].to_vec();
    tab.verify(problem, &x)?;
    // Objective reported against the original (unnegated) coefficients.
    let objective = dot(&problem.objective, &x);
    Ok(LpSolution { status, x, objective })
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    Free,
}

struct Tableau<T> {
    n_struct: usize,
    n_rows: usize,
    n_arts: usize,
    /// Columns: structural, slack per row, artificial per infeasible row.
    lower: Vec<T>,
    upper: Vec<T>,
    cost: Vec<T>,
    /// `B^{-1} A`, dense, row major.
    tab: Vec<Vec<T>>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    val: Vec<T>,
    pivots: usize,
    cap: usize,
    degenerate: usize,
    bland: bool,
    opt_tol: T,
    pivot_tol: T,
    degen_tol: T,
}

impl<T: Real> Tableau<T> {
    fn build(problem: &LpProblem<T>, maximize: bool) -> Tableau<T> {
        let n = problem.n_vars();
        let m = problem.n_rows();
        let mut lower = problem.var_lower.clone();
        let mut upper = problem.var_upper.clone();
        let mut cost: Vec<T> = problem
            .objective
            .iter()
            .map(|c| if maximize { -*c } else { *c })
            .collect();
        for (_, lo, hi) in &problem.rows {
            lower.push(*lo);
            upper.push(*hi);
            cost.push(T::zero());
        }

        // Nonbasic start for structural variables: a finite bound, else zero.
        let mut state = Vec::with_capacity(n + m);
        let mut val = Vec::with_capacity(n + m);
        for j in 0..n {
            if lower[j].is_finite() {
                state.push(VarState::AtLower);
                val.push(lower[j]);
            } else if upper[j].is_finite() {
                state.push(VarState::AtUpper);
                val.push(upper[j]);
            } else {
                state.push(VarState::Free);
                val.push(T::zero());
            }
        }

        // Equality system [R | -I | arts] z = 0 with the slack of every
        // satisfied row basic and an artificial basic elsewhere.
        let mut tab: Vec<Vec<T>> = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut art_info: Vec<(usize, T)> = Vec::new(); // (row, sign of residual)
        for (r, (coeffs, lo, hi)) in problem.rows.iter().enumerate() {
            let t_r = dot(coeffs, &val[..n]);
            let ftol = feas_tol::<T>(if lo.is_finite() { *lo } else { *hi });
            if t_r >= *lo - ftol && t_r <= *hi + ftol {
                // Slack basic at value t_r; basis coefficient is -1.
                state.push(VarState::Basic);
                val.push(t_r);
                basis.push(n + r);
                let mut row: Vec<T> = coeffs.iter().map(|c| -*c).collect();
                row.extend((0..m).map(|k| if k == r { T::one() } else { T::zero() }));
                tab.push(row);
            } else {
                // Slack pinned to the nearest bound, artificial carries the
                // residual: a.x - s - sign * w = 0 with w = |residual|.
                let (s_val, s_state) = if t_r > *hi {
                    (*hi, VarState::AtUpper)
                } else {
                    (*lo, VarState::AtLower)
                };
                state.push(s_state);
                val.push(s_val);
                let resid = t_r - s_val;
                let sign = if resid > T::zero() { T::one() } else { -T::one() };
                basis.push(0); // patched below once the artificial index is known
                art_info.push((r, sign));
                // Basis coefficient of the artificial is -sign; multiply the
                // row by -sign so the basic column becomes the unit vector.
                let mult = -sign;
                let mut row: Vec<T> = coeffs.iter().map(|c| *c * mult).collect();
                row.extend((0..m).map(|k| if k == r { -mult } else { T::zero() }));
                tab.push(row);
            }
        }

        // Append artificial columns and patch their basis entries.
        let n_arts = art_info.len();
        let total = n + m + n_arts;
        for row in tab.iter_mut() {
            row.resize(total, T::zero());
        }
        for (a, (r, _sign)) in art_info.iter().enumerate() {
            let col = n + m + a;
            basis[*r] = col;
            lower.push(T::zero());
            upper.push(T::infinity());
            cost.push(T::zero());
            state.push(VarState::Basic);
            let coeffs = &problem.rows[*r].0;
            let t_r = dot(coeffs, &val[..n]);
            val.push((t_r - val[n + *r]).abs());
            // The artificial's column is -sign * e_r; row r was scaled by
            // -sign, so the basic entry is exactly one.
            tab[*r][col] = T::one();
        }

        let cap = 50 * (n + m).max(1);
        Tableau {
            n_struct: n,
            n_rows: m,
            n_arts,
            lower,
            upper,
            cost,
            tab,
            basis,
            state,
            val,
            pivots: 0,
            cap,
            degenerate: 0,
            bland: false,
            opt_tol: T::c(1e-9),
            pivot_tol: T::c(1e-10),
            degen_tol: T::c(1e-11),
        }
    }

    fn run(&mut self) -> Result<LpStatus, LpError> {
        if self.n_arts > 0 {
            let mut phase1 = vec![T::zero(); self.total()];
            for c in phase1.iter_mut().skip(self.n_struct + self.n_rows) {
                *c = T::one();
            }
            match self.iterate(&phase1)? {
                LpStatus::Optimal => {}
                // Phase 1 minimizes a sum of nonnegative variables, so an
                // unbounded verdict can only be numerical noise.
                LpStatus::Unbounded | LpStatus::Infeasible => {
                    return Err(LpError::Numerical("phase 1 did not reach an optimum".into()))
                }
            }
            let infeas = (self.n_struct + self.n_rows..self.total())
                .fold(T::zero(), |acc, j| acc + self.val[j]);
            let tol = T::c(1e-7) * (T::one() + self.scale());
            if infeas > tol {
                return Ok(LpStatus::Infeasible);
            }
            self.retire_artificials();
        }
        let phase2 = self.cost.clone();
        self.iterate(&phase2)
    }

    fn total(&self) -> usize {
        self.n_struct + self.n_rows + self.n_arts
    }

    fn scale(&self) -> T {
        let mut s = T::zero();
        for j in 0..self.n_struct + self.n_rows {
            if self.lower[j].is_finite() {
                s = s.max(self.lower[j].abs());
            }
            if self.upper[j].is_finite() {
                s = s.max(self.upper[j].abs());
            }
        }
        s
    }

    /// Pin every artificial to zero and pivot basic ones out where possible.
    fn retire_artificials(&mut self) {
        let art_start = self.n_struct + self.n_rows;
        for r in 0..self.n_rows {
            if self.basis[r] >= art_start {
                let pivot_col = (0..art_start)
                    .filter(|&j| self.state[j] != VarState::Basic)
                    .find(|&j| self.tab[r][j].abs() > self.pivot_tol);
                if let Some(q) = pivot_col {
                    let leave = self.basis[r];
                    self.pivot(r, q);
                    self.state[q] = VarState::Basic;
                    self.state[leave] = VarState::AtLower;
                    self.val[leave] = T::zero();
                    self.basis[r] = q;
                    // The entering variable keeps its current (bound) value:
                    // the pivoted step is zero because the artificial sits at 0.
                }
            }
        }
        for j in art_start..self.total() {
            self.upper[j] = T::zero();
        }
    }

    fn iterate(&mut self, cost: &[T]) -> Result<LpStatus, LpError> {
        loop {
            self.pivots += 1;
            if self.pivots > self.cap {
                return Err(LpError::IterationLimit(self.cap));
            }

            // Reduced costs d = c - c_B^T tab.
            let mut zrow = vec![T::zero(); self.total()];
            for r in 0..self.n_rows {
                let cb = cost[self.basis[r]];
                if cb != T::zero() {
                    for (z, t) in zrow.iter_mut().zip(&self.tab[r]) {
                        *z = *z + cb * *t;
                    }
                }
            }

            let entering = self.choose_entering(cost, &zrow);
            let (q, dir) = match entering {
                Some(e) => e,
                None => return Ok(LpStatus::Optimal),
            };

            match self.ratio_test(q, dir) {
                Step::Unbounded => return Ok(LpStatus::Unbounded),
                Step::BoundFlip(t) => {
                    self.apply_step(q, dir, t);
                    self.state[q] = match self.state[q] {
                        VarState::AtLower => VarState::AtUpper,
                        VarState::AtUpper => VarState::AtLower,
                        other => other,
                    };
                    self.note_degeneracy(t);
                }
                Step::Pivot(t, row, leave_state) => {
                    let leave = self.basis[row];
                    self.apply_step(q, dir, t);
                    // Snap the leaving variable exactly onto the bound it hit.
                    self.val[leave] = match leave_state {
                        VarState::AtLower => self.lower[leave],
                        _ => self.upper[leave],
                    };
                    self.state[leave] = leave_state;
                    self.state[q] = VarState::Basic;
                    self.basis[row] = q;
                    self.pivot(row, q);
                    self.note_degeneracy(t);
                }
            }
        }
    }

    fn note_degeneracy(&mut self, step: T) {
        if step <= self.degen_tol {
            self.degenerate += 1;
            if self.degenerate > 10 * self.total() {
                self.bland = true;
            }
        }
    }

    /// Entering column and movement direction (+1 / -1), or None at optimum.
    fn choose_entering(&self, cost: &[T], zrow: &[T]) -> Option<(usize, T)> {
        let mut best: Option<(usize, T, T)> = None; // (col, dir, score)
        for j in 0..self.total() {
            let (can_up, can_down) = match self.state[j] {
                VarState::Basic => (false, false),
                VarState::AtLower => (self.upper[j] > self.lower[j], false),
                VarState::AtUpper => (false, self.lower[j] < self.upper[j]),
                VarState::Free => (true, true),
            };
            let d = cost[j] - zrow[j];
            let candidate = if can_up && d < -self.opt_tol {
                Some((T::one(), -d))
            } else if can_down && d > self.opt_tol {
                Some((-T::one(), d))
            } else {
                None
            };
            if let Some((dir, score)) = candidate {
                if self.bland {
                    return Some((j, dir));
                }
                match best {
                    Some((_, _, s)) if s >= score => {}
                    _ => best = Some((j, dir, score)),
                }
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn ratio_test(&self, q: usize, dir: T) -> Step<T> {
        // The entering variable's own opposite bound.
        let own = if self.lower[q].is_finite() && self.upper[q].is_finite() {
            self.upper[q] - self.lower[q]
        } else {
            T::infinity()
        };
        let mut best_t = own;
        let mut best: Option<(usize, VarState, T)> = None; // (row, bound hit, |coef|)
        for r in 0..self.n_rows {
            let coef = self.tab[r][q];
            if coef.abs() <= self.pivot_tol {
                continue;
            }
            let b = self.basis[r];
            let rate = -dir * coef; // basic value moves at this rate per unit step
            let (limit, hit) = if rate < T::zero() {
                (self.lower[b], VarState::AtLower)
            } else {
                (self.upper[b], VarState::AtUpper)
            };
            if !limit.is_finite() {
                continue;
            }
            let room = if rate < T::zero() {
                self.val[b] - limit
            } else {
                limit - self.val[b]
            };
            let t = (room / rate.abs()).max(T::zero());
            let better = match &best {
                _ if t < best_t - self.degen_tol => true,
                Some((brow, _, bcoef)) if (t - best_t).abs() <= self.degen_tol => {
                    if self.bland {
                        self.basis[r] < self.basis[*brow]
                    } else {
                        coef.abs() > *bcoef
                    }
                }
                None if t <= best_t => true,
                _ => false,
            };
            if better {
                best_t = t.min(best_t);
                best = Some((r, hit, coef.abs()));
            }
        }
        if best_t.is_infinite() {
            return Step::Unbounded;
        }
        match best {
            Some((row, hit, _)) if best_t < own || (best_t - own).abs() <= self.degen_tol => {
                // Prefer the basis change when both limits coincide: keeps the
                // walk making progress through vertices.
                Step::Pivot(best_t, row, hit)
            }
            _ => Step::BoundFlip(best_t),
        }
    }

    /// Move the entering variable by `dir * t` and update basic values.
    fn apply_step(&mut self, q: usize, dir: T, t: T) {
        if t > T::zero() {
            for r in 0..self.n_rows {
                let b = self.basis[r];
                let delta = dir * t * self.tab[r][q];
                self.val[b] = self.val[b] - delta;
            }
            self.val[q] = self.val[q] + dir * t;
        }
    }

    /// Gauss-Jordan elimination on the pivot element (row, q).
    fn pivot(&mut self, row: usize, q: usize) {
        let piv = self.tab[row][q];
        let inv = T::one() / piv;
        for v in self.tab[row].iter_mut() {
            *v = *v * inv;
        }
        let pivot_row = self.tab[row].clone();
        for r in 0..self.n_rows {
            if r == row {
                continue;
            }
            let factor = self.tab[r][q];
            if factor.abs() > T::zero() {
                for (v, p) in self.tab[r].iter_mut().zip(&pivot_row) {
                    *v = *v - factor * *p;
                }
                self.tab[r][q] = T::zero();
            }
        }
    }

    /// Final feasibility audit at the spec tolerances.
    fn verify(&self, problem: &LpProblem<T>, x: &[T]) -> Result<(), LpError> {
        for (j, v) in x.iter().enumerate() {
            let lo = problem.var_lower[j];
            let hi = problem.var_upper[j];
            if (lo.is_finite() && *v < lo - feas_tol::<T>(lo))
                || (hi.is_finite() && *v > hi + feas_tol::<T>(hi))
            {
                return Err(LpError::Numerical(format!(
                    "variable {j} = {v} violates bounds [{lo}, {hi}]"
                )));
            }
        }
        for (r, (coeffs, lo, hi)) in problem.rows.iter().enumerate() {
            let v = dot(coeffs, x);
            if (lo.is_finite() && v < *lo - feas_tol::<T>(*lo))
                || (hi.is_finite() && v > *hi + feas_tol::<T>(*hi))
            {
                return Err(LpError::Numerical(format!(
                    "row {r} value {v} violates bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

enum Step<T> {
    BoundFlip(T),
    Pivot(T, usize, VarState),
    Unbounded,
}

/// Feasibility tolerance `1e-8 * (1 + |bound|)`.
fn feas_tol<T: Real>(bound: T) -> T {
    let b = if bound.is_finite() { bound.abs() } else { T::zero() };
    T::c(1e-8) * (T::one() + b)
}

/// Brute-force vertex enumeration for small problems, used as an independent
/// oracle in tests across the crate. Only correct when every variable is
/// box-bounded (so the feasible set is a polytope).
#[cfg(test)]
pub(crate) mod brute {
    use super::*;

    /// Returns `None` when no feasible vertex exists.
    pub fn enumerate_optimum(
        problem: &LpProblem<f64>,
        maximize: bool,
    ) -> Option<(f64, Vec<f64>)> {
        let n = problem.n_vars();
        // Candidate active hyperplanes: each finite row bound and var bound.
        let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
        for (coeffs, lo, hi) in &problem.rows {
            if lo.is_finite() {
                planes.push((coeffs.clone(), *lo));
            }
            if hi.is_finite() && hi != lo {
                planes.push((coeffs.clone(), *hi));
            }
        }
        for j in 0..n {
            let mut unit = vec![0.0; n];
            unit[j] = 1.0;
            if problem.var_lower[j].is_finite() {
                planes.push((unit.clone(), problem.var_lower[j]));
            }
            if problem.var_upper[j].is_finite() && problem.var_upper[j] != problem.var_lower[j] {
                planes.push((unit, problem.var_upper[j]));
            }
        }
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut idx: Vec<usize> = (0..n).collect();
        loop {
            if let Some(x) = solve_square(&planes, &idx, n) {
                if feasible(problem, &x) {
                    let obj = x
                        .iter()
                        .zip(&problem.objective)
                        .map(|(a, b)| a * b)
                        .sum::<f64>();
                    let better = match &best {
                        None => true,
                        Some((b, _)) => {
                            if maximize {
                                obj > *b
                            } else {
                                obj < *b
                            }
                        }
                    };
                    if better {
                        best = Some((obj, x));
                    }
                }
            }
            if !next_combination(&mut idx, planes.len(), n) {
                break;
            }
        }
        best
    }

    fn next_combination(idx: &mut [usize], total: usize, k: usize) -> bool {
        if k == 0 || total < k {
            return false;
        }
        let mut i = k;
        loop {
            if i == 0 {
                return false;
            }
            i -= 1;
            if idx[i] < total - (k - i) {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                return true;
            }
        }
    }

    #[allow(clippy::needless_range_loop)]
    fn solve_square(planes: &[(Vec<f64>, f64)], active: &[usize], n: usize) -> Option<Vec<f64>> {
        let mut a: Vec<Vec<f64>> = active.iter().map(|&i| planes[i].0.clone()).collect();
        let mut b: Vec<f64> = active.iter().map(|&i| planes[i].1).collect();
        // Gaussian elimination with partial pivoting.
        for col in 0..n {
            let (pr, pv) = (col..n)
                .map(|r| (r, a[r][col].abs()))
                .max_by(|x, y| x.1.total_cmp(&y.1))?;
            if pv < 1e-10 {
                return None;
            }
            a.swap(col, pr);
            b.swap(col, pr);
            for r in 0..n {
                if r != col {
                    let f = a[r][col] / a[col][col];
                    if f != 0.0 {
                        for c in col..n {
                            a[r][c] -= f * a[col][c];
                        }
                        b[r] -= f * b[col];
                    }
                }
            }
        }
        Some((0..n).map(|i| b[i] / a[i][i]).collect())
    }

    pub fn feasible(problem: &LpProblem<f64>, x: &[f64]) -> bool {
        let tol = |b: f64| 1e-9 * (1.0 + b.abs());
        for (j, v) in x.iter().enumerate() {
            if *v < problem.var_lower[j] - tol(problem.var_lower[j])
                || *v > problem.var_upper[j] + tol(problem.var_upper[j])
            {
                return false;
            }
        }
        for (coeffs, lo, hi) in &problem.rows {
            let val: f64 = coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
            if (lo.is_finite() && val < lo - tol(*lo)) || (hi.is_finite() && val > hi + tol(*hi)) {
                return false;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    const INF: f64 = f64::INFINITY;

    fn boxed(objective: Vec<f64>, bounds: &[(f64, f64)]) -> LpProblem<f64> {
        let mut p = LpProblem::new(objective);
        for (j, (lo, hi)) in bounds.iter().enumerate() {
            p.set_var_bounds(j, *lo, *hi);
        }
        p
    }

    #[test]
    fn bound_attained_minimum() {
        let p = boxed(vec![1.0], &[(0.0, 1.0)]);
        let s = solve_min(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0]).abs() < 1e-12);
        assert!(s.objective.abs() < 1e-12);
    }

    #[test]
    fn bound_attained_maximum() {
        let p = boxed(vec![1.0], &[(0.0, 1.0)]);
        let s = solve_max(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 1.0).abs() < 1e-12);
        assert!((s.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equality_forces_objective() {
        let mut p = boxed(vec![1.0, 1.0], &[(0.0, 1.0), (0.0, 1.0)]);
        p.add_row(vec![1.0, 1.0], 1.0, 1.0);
        let s = solve_min(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-10);
    }

    #[test]
    fn triangle_vertex_optimum() {
        // min -x1 - 2 x2 over x1 + x2 <= 1, x >= 0: optimum at (0, 1).
        let mut p = boxed(vec![-1.0, -2.0], &[(0.0, INF), (0.0, INF)]);
        p.add_row(vec![1.0, 1.0], -INF, 1.0);
        let s = solve_min(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 2.0).abs() < 1e-10);
        assert!(s.x[0].abs() < 1e-10 && (s.x[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn detects_infeasible_rows() {
        let mut p = boxed(vec![1.0], &[(-INF, INF)]);
        p.add_row(vec![1.0], 2.0, INF);
        p.add_row(vec![1.0], -INF, 1.0);
        let s = solve_max(&p).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let p = boxed(vec![-1.0], &[(0.0, INF)]);
        let s = solve_min(&p).unwrap();
        assert_eq!(s.status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variables_with_equality() {
        // min x1 + x2 s.t. x1 - x2 = 3, x2 >= -1 (x1 free).
        let mut p = boxed(vec![1.0, 1.0], &[(-INF, INF), (-1.0, INF)]);
        p.add_row(vec![1.0, -1.0], 3.0, 3.0);
        let s = solve_min(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[1] + 1.0).abs() < 1e-10, "x2 at its lower bound");
        assert!((s.objective - 1.0).abs() < 1e-10);
    }

    #[test]
    fn three_variable_band_style_instance_matches_enumeration() {
        // Unimodality chain + mass rows, the shape of the band programs.
        let mut p = boxed(vec![0.0, 1.0, 0.0], &[(0.0, 2.0), (0.0, 2.0), (0.0, 2.0)]);
        p.add_row(vec![1.0, -1.0, 0.0], -INF, 0.0); // b1 <= b2
        p.add_row(vec![0.0, 1.0, -1.0], 0.0, INF); // b2 >= b3
        p.add_row(vec![0.3, 0.5, 0.2], 1.0, 1.0); // total mass
        p.add_row(vec![0.0, 0.5, 0.2], 0.2, 0.8); // group mass
        for maximize in [false, true] {
            let s = if maximize { solve_max(&p) } else { solve_min(&p) }.unwrap();
            assert_eq!(s.status, LpStatus::Optimal);
            let (obj, _) = brute::enumerate_optimum(&p, maximize).unwrap();
            assert!(
                (s.objective - obj).abs() < 1e-8,
                "simplex {} vs enumeration {obj}",
                s.objective
            );
        }
    }

    fn random_instance(rng: &mut impl Rng) -> LpProblem<f64> {
        let n = rng.gen_range(2..=5);
        let rows = rng.gen_range(1..=6);
        let mut p = LpProblem::new((0..n).map(|_| rng.gen_range(-3.0..3.0)).collect());
        for j in 0..n {
            let lo = rng.gen_range(-1.0..0.5);
            p.set_var_bounds(j, lo, lo + rng.gen_range(0.25..2.0));
        }
        for _ in 0..rows {
            let coeffs: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let kind = rng.gen_range(0..4);
            let c = rng.gen_range(-1.5..1.5);
            match kind {
                0 => p.add_row(coeffs, c, INF),
                1 => p.add_row(coeffs, -INF, c),
                2 => p.add_row(coeffs, c, c + rng.gen_range(0.1..1.0)),
                _ => p.add_row(coeffs, c, c),
            }
        }
        p
    }

    #[test]
    fn agrees_with_vertex_enumeration_on_random_instances() {
        let mut rng = crate::SeedStream::new(42).derive_stream("lp-oracle").rng();
        let mut optimal = 0;
        for trial in 0..300 {
            let p = random_instance(&mut rng);
            for maximize in [false, true] {
                let s = if maximize { solve_max(&p) } else { solve_min(&p) }.unwrap();
                let oracle = brute::enumerate_optimum(&p, maximize);
                match (s.status, oracle) {
                    (LpStatus::Optimal, Some((obj, _))) => {
                        optimal += 1;
                        assert!(
                            (s.objective - obj).abs() < 1e-8 * (1.0 + obj.abs()),
                            "trial {trial}: simplex {} vs enumeration {obj}",
                            s.objective
                        );
                    }
                    (LpStatus::Infeasible, None) => {}
                    (status, oracle) => {
                        panic!("trial {trial}: simplex {status:?} but oracle {oracle:?}")
                    }
                }
            }
        }
        assert!(optimal > 100, "want a healthy share of feasible instances");
    }

    #[test]
    fn external_feasible_points_never_beat_the_optimum() {
        // Weak-duality style self check: every feasible vertex of the polytope
        // scores no better than the reported optimum.
        let mut rng = crate::SeedStream::new(17).derive_stream("lp-weak").rng();
        for _ in 0..50 {
            let p = random_instance(&mut rng);
            let s = solve_min(&p).unwrap();
            if s.status != LpStatus::Optimal {
                continue;
            }
            if let Some((_, xbest)) = brute::enumerate_optimum(&p, false) {
                assert!(brute::feasible(&p, &xbest));
                let obj: f64 = xbest.iter().zip(&p.objective).map(|(a, b)| a * b).sum();
                assert!(obj >= s.objective - 1e-8);
            }
        }
    }

    #[test]
    fn works_in_f32_too() {
        let mut p: LpProblem<f32> = LpProblem::new(vec![-1.0, -2.0]);
        p.set_var_bounds(0, 0.0, f32::INFINITY);
        p.set_var_bounds(1, 0.0, f32::INFINITY);
        p.add_row(vec![1.0, 1.0], f32::NEG_INFINITY, 1.0);
        let s = solve_min(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 2.0).abs() < 1e-4);
    }
}
