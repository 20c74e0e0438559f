//! Dense bounded-variable primal simplex.
//!
//! Every row `a x (<=|=|>=) b` is rewritten as `s·a x - w = 0` with a logical
//! variable `w` carrying the row bounds and `s` the row scale. The starting
//! basis is all logicals; phase 1 minimises the sum of bound infeasibilities
//! of the basic variables, phase 2 the objective. Dantzig pricing with a
//! Harris ratio test, switching to Bland's rule once the iteration count
//! passes `10 (m + n)`.

use std::sync::Arc;
use std::time::Instant;

use log::debug;

use super::program::{MathProgram, ProgramError, Sense, SolveResult, SolveStatus};

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-14;
const REFRESH_EVERY: usize = 64;
const NONBASIC: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LpOptions {
    /// Hard cap on pivots plus bound flips; `None` means `50 (m + n) + 1000`.
    pub max_iterations: Option<usize>,
    /// Iteration after which Bland's rule replaces Dantzig pricing; `None`
    /// means `10 (m + n)`.
    pub bland_after: Option<usize>,
}

/// Solves a program without binaries.
pub fn solve_lp(p: &MathProgram) -> Result<SolveResult, ProgramError> {
    solve_lp_with(p, &LpOptions::default())
}

pub fn solve_lp_with(p: &MathProgram, options: &LpOptions) -> Result<SolveResult, ProgramError> {
    p.validate()?;
    if p.has_binaries() {
        return Err(ProgramError::HasBinaries);
    }
    let lower: Vec<f64> = p.vars().iter().map(|v| v.lower).collect();
    let upper: Vec<f64> = p.vars().iter().map(|v| v.upper).collect();
    Ok(solve_relaxation(p, &lower, &upper, options))
}

/// Solves the continuous relaxation of `p` with the given variable bounds.
/// The program is assumed valid.
pub(crate) fn solve_relaxation(p: &MathProgram, lower: &[f64], upper: &[f64], options: &LpOptions) -> SolveResult {
    solve_relaxation_warm(p, lower, upper, options).0
}

/// Like [`solve_relaxation`], also handing back the final tableau when the
/// relaxation is optimal so children can start from it.
pub(crate) fn solve_relaxation_warm(
    p: &MathProgram,
    lower: &[f64],
    upper: &[f64],
    options: &LpOptions,
) -> (SolveResult, Option<WarmStart>) {
    let start = Instant::now();
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return (infeasible_result(start), None);
    }
    finish(p, Tableau::new(p, lower, upper), options, start)
}

/// Re-solves from an optimal parent tableau after fixing `var` to `value`.
pub(crate) fn resolve_fixed(
    p: &MathProgram,
    parent: &WarmStart,
    var: usize,
    value: f64,
    options: &LpOptions,
) -> (SolveResult, Option<WarmStart>) {
    let start = Instant::now();
    let mut tableau = parent.0.clone();
    if value < tableau.lb[var] || value > tableau.ub[var] {
        return (infeasible_result(start), None);
    }
    tableau.iterations = 0;
    tableau.lb[var] = value;
    tableau.ub[var] = value;
    if tableau.row_of[var] == NONBASIC {
        let delta = value - tableau.x[var];
        if delta != 0.0 {
            for i in 0..tableau.m {
                let tij = tableau.entry(i, var);
                if tij != 0.0 {
                    let b = tableau.basis[i];
                    tableau.x[b] -= tij * delta;
                }
            }
        }
        tableau.x[var] = value;
        tableau.at_upper[var] = false;
    }
    finish(p, tableau, options, start)
}

/// Optimal tableau kept for warm starts.
#[derive(Clone)]
pub(crate) struct WarmStart(Tableau);

fn infeasible_result(start: Instant) -> SolveResult {
    SolveResult {
        status: SolveStatus::Infeasible,
        values: Vec::new(),
        objective: f64::NAN,
        nodes: 1,
        iterations: 0,
        wall_time: start.elapsed(),
    }
}

fn finish(p: &MathProgram, mut tableau: Tableau, options: &LpOptions, start: Instant) -> (SolveResult, Option<WarmStart>) {
    let m = tableau.m;
    let n = tableau.n;
    let max_iterations = options.max_iterations.unwrap_or(50 * (m + n) + 1000);
    let bland_after = options.bland_after.unwrap_or(10 * (m + n));
    let status = tableau.run(max_iterations, bland_after);
    let values = if status == SolveStatus::Optimal {
        tableau.refine();
        tableau.structural_values()
    } else {
        Vec::new()
    };
    let objective = if status == SolveStatus::Optimal {
        p.objective_value(&values)
    } else {
        f64::NAN
    };
    debug!(
        "lp {}: {} rows, {} cols, status {status}, {} iterations",
        p.name, m, n, tableau.iterations
    );
    let result = SolveResult {
        status,
        values,
        objective,
        nodes: 1,
        iterations: tableau.iterations,
        wall_time: start.elapsed(),
    };
    let warm = (status == SolveStatus::Optimal).then_some(WarmStart(tableau));
    (result, warm)
}

enum Step {
    Flip(f64),
    Pivot { row: usize, t: f64, to_upper: bool },
    Unbounded,
}

#[derive(Clone)]
struct Tableau {
    m: usize,
    n: usize,
    cols: usize,
    t: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    at_upper: Vec<bool>,
    basis: Vec<usize>,
    row_of: Vec<usize>,
    d: Vec<f64>,
    iterations: usize,
    scratch: Vec<usize>,
    /// Scaled rows `s·a`, for refinement.
    rows: Arc<Vec<Vec<(usize, f64)>>>,
}

impl Tableau {
    fn new(p: &MathProgram, lower: &[f64], upper: &[f64]) -> Self {
        let m = p.num_constraints();
        let n = p.num_vars();
        let cols = n + m;
        let mut t = vec![0.0; m * cols];
        let mut lb = Vec::with_capacity(cols);
        let mut ub = Vec::with_capacity(cols);
        lb.extend_from_slice(lower);
        ub.extend_from_slice(upper);
        let mut cost = p.objective().to_vec();
        cost.resize(cols, 0.0);

        let mut x = vec![0.0; cols];
        let mut at_upper = vec![false; cols];
        for j in 0..n {
            // Start each structural at the bound nearer zero.
            if upper[j].abs() < lower[j].abs() {
                x[j] = upper[j];
                at_upper[j] = true;
            } else {
                x[j] = lower[j];
            }
        }

        for (i, c) in p.constraints().iter().enumerate() {
            let scale = c.terms.iter().map(|(_, a)| a.abs()).fold(0.0, f64::max);
            let s = if scale > 0.0 { 1.0 / scale } else { 1.0 };
            let row = &mut t[i * cols..(i + 1) * cols];
            let mut activity = 0.0;
            for (v, a) in &c.terms {
                row[v.0] = -a * s;
                activity += a * s * x[v.0];
            }
            row[n + i] = 1.0;
            let rhs = c.rhs * s;
            let (lo, hi) = match c.sense {
                Sense::Le => (f64::NEG_INFINITY, rhs),
                Sense::Ge => (rhs, f64::INFINITY),
                Sense::Eq => (rhs, rhs),
            };
            lb.push(lo);
            ub.push(hi);
            x[n + i] = activity;
        }

        let rows: Vec<Vec<(usize, f64)>> = p
            .constraints()
            .iter()
            .map(|c| {
                let scale = c.terms.iter().map(|(_, a)| a.abs()).fold(0.0, f64::max);
                let s = if scale > 0.0 { 1.0 / scale } else { 1.0 };
                c.terms.iter().map(|(v, a)| (v.0, a * s)).collect()
            })
            .collect();

        let mut row_of = vec![NONBASIC; cols];
        let basis: Vec<usize> = (0..m).map(|i| n + i).collect();
        for (i, &b) in basis.iter().enumerate() {
            row_of[b] = i;
        }
        Tableau {
            m,
            n,
            cols,
            t,
            lb,
            ub,
            cost,
            x,
            at_upper,
            basis,
            row_of,
            d: vec![0.0; cols],
            iterations: 0,
            scratch: Vec::with_capacity(cols),
            rows: Arc::new(rows),
        }
    }

    #[inline]
    fn entry(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.cols + j]
    }

    fn run(&mut self, max_iterations: usize, bland_after: usize) -> SolveStatus {
        // Phase 1.
        let mut infeasible_cost = vec![0.0; self.m];
        loop {
            if self.iterations.is_multiple_of(REFRESH_EVERY) && self.iterations > 0 {
                self.refresh_basic_values();
            }
            let mut any = false;
            for i in 0..self.m {
                let b = self.basis[i];
                infeasible_cost[i] = if self.x[b] < self.lb[b] - PRIMAL_TOL {
                    any = true;
                    -1.0
                } else if self.x[b] > self.ub[b] + PRIMAL_TOL {
                    any = true;
                    1.0
                } else {
                    0.0
                };
            }
            if !any {
                break;
            }
            if self.iterations >= max_iterations {
                return SolveStatus::IterationLimit;
            }
            self.d.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..self.m {
                let c = infeasible_cost[i];
                if c == 0.0 {
                    continue;
                }
                let row = &self.t[i * self.cols..(i + 1) * self.cols];
                for (dj, tij) in self.d.iter_mut().zip(row) {
                    *dj -= c * tij;
                }
            }
            let bland = self.iterations >= bland_after;
            let Some((q, dir)) = self.price(bland) else {
                return SolveStatus::Infeasible;
            };
            match self.ratio_test(q, dir, true, bland) {
                Step::Unbounded => return SolveStatus::Infeasible,
                step => self.apply(q, dir, step, false),
            }
        }

        // Phase 2.
        self.recompute_reduced_costs();
        loop {
            if self.iterations.is_multiple_of(REFRESH_EVERY) {
                self.refresh_basic_values();
                self.recompute_reduced_costs();
            }
            if self.iterations >= max_iterations {
                return SolveStatus::IterationLimit;
            }
            let bland = self.iterations >= bland_after;
            let Some((q, dir)) = self.price(bland) else {
                return SolveStatus::Optimal;
            };
            match self.ratio_test(q, dir, false, bland) {
                Step::Unbounded => return SolveStatus::Unbounded,
                step => self.apply(q, dir, step, true),
            }
        }
    }

    /// Entering column and its direction of movement.
    fn price(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.cols {
            if self.row_of[j] != NONBASIC || self.lb[j] == self.ub[j] {
                continue;
            }
            let dj = self.d[j];
            let dir = if !self.at_upper[j] && dj < -DUAL_TOL {
                1.0
            } else if self.at_upper[j] && dj > DUAL_TOL {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if dj.abs() > best_score {
                best_score = dj.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn ratio_test(&self, q: usize, dir: f64, phase1: bool, bland: bool) -> Step {
        let flip = self.ub[q] - self.lb[q];
        let mut relaxed_min = f64::INFINITY;
        // (row, exact ratio, alpha magnitude, leaves at upper)
        let mut candidates: Vec<(usize, f64, f64, bool)> = Vec::new();
        for i in 0..self.m {
            let alpha = -dir * self.entry(i, q);
            if alpha.abs() <= PIVOT_TOL {
                continue;
            }
            let b = self.basis[i];
            let xi = self.x[b];
            let (lo, hi) = (self.lb[b], self.ub[b]);
            let (exact, relaxed, to_upper) = if alpha < 0.0 {
                if phase1 && xi > hi + PRIMAL_TOL {
                    let r = (xi - hi) / -alpha;
                    (r, r, true)
                } else if phase1 && xi < lo - PRIMAL_TOL {
                    continue;
                } else if lo.is_finite() {
                    ((xi - lo) / -alpha, (xi - lo + PRIMAL_TOL) / -alpha, false)
                } else {
                    continue;
                }
            } else if phase1 && xi < lo - PRIMAL_TOL {
                let r = (lo - xi) / alpha;
                (r, r, false)
            } else if phase1 && xi > hi + PRIMAL_TOL {
                continue;
            } else if hi.is_finite() {
                ((hi - xi) / alpha, (hi - xi + PRIMAL_TOL) / alpha, true)
            } else {
                continue;
            };
            relaxed_min = relaxed_min.min(relaxed);
            candidates.push((i, exact.max(0.0), alpha.abs(), to_upper));
        }

        if candidates.is_empty() {
            return if flip.is_finite() { Step::Flip(flip) } else { Step::Unbounded };
        }

        if bland {
            let min_ratio = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
            if flip <= min_ratio {
                return Step::Flip(flip);
            }
            let (row, t, _, to_upper) = candidates
                .iter()
                .filter(|c| c.1 <= min_ratio + 1e-12)
                .min_by_key(|c| self.basis[c.0])
                .copied()
                .expect("nonempty");
            return Step::Pivot { row, t, to_upper };
        }

        if flip <= relaxed_min {
            return Step::Flip(flip);
        }
        let mut chosen: Option<(usize, f64, f64, bool)> = None;
        for c in candidates.iter().filter(|c| c.1 <= relaxed_min) {
            let better = match chosen {
                None => true,
                Some(best) => c.2 > best.2 || (c.2 == best.2 && self.basis[c.0] < self.basis[best.0]),
            };
            if better {
                chosen = Some(*c);
            }
        }
        let (row, t, _, to_upper) = chosen.expect("the relaxed minimum is attained by some candidate");
        Step::Pivot { row, t, to_upper }
    }

    fn apply(&mut self, q: usize, dir: f64, step: Step, update_costs: bool) {
        self.iterations += 1;
        match step {
            Step::Unbounded => unreachable!("handled by caller"),
            Step::Flip(range) => {
                for i in 0..self.m {
                    let tiq = self.entry(i, q);
                    if tiq != 0.0 {
                        let b = self.basis[i];
                        self.x[b] -= dir * tiq * range;
                    }
                }
                self.at_upper[q] = !self.at_upper[q];
                self.x[q] = if self.at_upper[q] { self.ub[q] } else { self.lb[q] };
            }
            Step::Pivot { row, t, to_upper } => {
                for i in 0..self.m {
                    let tiq = self.entry(i, q);
                    if tiq != 0.0 {
                        let b = self.basis[i];
                        self.x[b] -= dir * tiq * t;
                    }
                }
                self.x[q] += dir * t;
                let leaving = self.basis[row];
                self.x[leaving] = if to_upper { self.ub[leaving] } else { self.lb[leaving] };
                self.at_upper[leaving] = to_upper;
                self.pivot(row, q, update_costs);
                self.basis[row] = q;
                self.row_of[q] = row;
                self.row_of[leaving] = NONBASIC;
                self.at_upper[q] = false;
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize, update_costs: bool) {
        let cols = self.cols;
        let inv = 1.0 / self.t[r * cols + q];
        self.scratch.clear();
        {
            let row = &mut self.t[r * cols..(r + 1) * cols];
            for (k, v) in row.iter_mut().enumerate() {
                if *v != 0.0 {
                    *v *= inv;
                    self.scratch.push(k);
                }
            }
            row[q] = 1.0;
        }
        let (before, rest) = self.t.split_at_mut(r * cols);
        let (pivot_row, after) = rest.split_at_mut(cols);
        let nz = &self.scratch;
        let eliminate = |row: &mut [f64]| {
            let f = row[q];
            if f == 0.0 {
                return;
            }
            for &k in nz {
                let v = row[k] - f * pivot_row[k];
                row[k] = if v.abs() < DROP_TOL { 0.0 } else { v };
            }
            row[q] = 0.0;
        };
        for row in before.chunks_exact_mut(cols) {
            eliminate(row);
        }
        for row in after.chunks_exact_mut(cols) {
            eliminate(row);
        }
        if update_costs {
            let f = self.d[q];
            if f != 0.0 {
                for &k in nz {
                    self.d[k] -= f * pivot_row[k];
                }
            }
            self.d[q] = 0.0;
        }
    }

    fn refresh_basic_values(&mut self) {
        for i in 0..self.m {
            let row = &self.t[i * self.cols..(i + 1) * self.cols];
            let mut v = 0.0;
            for (j, tij) in row.iter().enumerate() {
                if *tij != 0.0 && self.row_of[j] == NONBASIC {
                    v -= tij * self.x[j];
                }
            }
            self.x[self.basis[i]] = v;
        }
    }

    fn recompute_reduced_costs(&mut self) {
        self.d.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.t[i * self.cols..(i + 1) * self.cols];
            for (dj, tij) in self.d.iter_mut().zip(row) {
                *dj -= cb * tij;
            }
        }
        for i in 0..self.m {
            self.d[self.basis[i]] = 0.0;
        }
    }

    /// Two rounds of iterative refinement of the basic values against the
    /// scaled rows, using the logical columns of the tableau as the basis
    /// inverse.
    fn refine(&mut self) {
        self.refresh_basic_values();
        for _ in 0..2 {
            let residual = self.original_residual();
            if residual.iter().all(|r| *r == 0.0) {
                break;
            }
            let n = self.n;
            let mut delta = vec![0.0; self.m];
            for (i, di) in delta.iter_mut().enumerate() {
                let row = &self.t[i * self.cols + n..(i + 1) * self.cols];
                *di = row.iter().zip(&residual).map(|(a, b)| a * b).sum();
            }
            for i in 0..self.m {
                let b = self.basis[i];
                self.x[b] += delta[i];
            }
        }
    }

    fn original_residual(&self) -> Vec<f64> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, terms)| {
                let ax: f64 = terms.iter().map(|(j, a)| a * self.x[*j]).sum();
                ax - self.x[self.n + i]
            })
            .collect()
    }

    fn structural_values(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| self.x[j].clamp(self.lb[j], self.ub[j]))
            .collect()
    }
}
