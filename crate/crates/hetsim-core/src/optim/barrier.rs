//! Primal log-barrier interior-point solver with damped Newton steps.
//!
//! The Hessian of the barrier-augmented objective is a positive diagonal
//! (variable bounds) plus positively-weighted outer products of constraint
//! and term rows. Rows confined to a single variable group are folded into
//! that group's dense block; rows spanning groups enter a Woodbury
//! correction whose core matrix is small (one column per spanning row).
//! Linear equalities are kept exactly via a Schur complement on the Newton
//! KKT system.

use std::time::{Duration, Instant};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::subproblem::ConvexSubproblem;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Initial barrier weight.
    pub mu0: f64,
    /// Multiplicative decrease per outer stage.
    pub mu_factor: f64,
    /// Final barrier weight.
    pub mu_min: f64,
    /// Total Newton-step budget across all stages.
    pub max_newton: usize,
    /// Relative KKT stationarity tolerance at the final stage.
    pub kkt_tol: f64,
    /// Polish from the start point at `mu_min` only, falling back to the
    /// full schedule if the polish does not reach stationarity.
    pub warm_start: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            mu0: 1.0,
            mu_factor: 0.2,
            mu_min: 1e-9,
            max_newton: 500,
            kkt_tol: 1e-6,
            warm_start: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub objective: f64,
    pub iterations: usize,
    /// Max constraint violation at the returned point.
    pub feasibility_residual: f64,
    /// Relative KKT stationarity residual at the returned point.
    pub stationarity: f64,
    pub converged: bool,
    pub wall_time: Duration,
}

const UNGROUPED: u32 = u32::MAX;
const STAGE_CAP_FULL: usize = 60;
const STAGE_CAP_POLISH: usize = 40;
const BOUNDARY_FRACTION: f64 = 0.99;
const ARMIJO_C: f64 = 1e-4;
const ARMIJO_BETA: f64 = 0.5;

/// Minimize the subproblem from a strictly feasible start.
pub fn solve_convex(
    sub: &ConvexSubproblem,
    start: &[f64],
    opts: &SolveOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let clock = Instant::now();
    sub.validate()?;
    if start.len() != sub.n_vars {
        return Err(Error::Solver(format!(
            "start has {} entries, problem has {} variables",
            start.len(),
            sub.n_vars
        )));
    }
    let obj_start = sub.objective(start);
    // Normalize the objective so barrier duals are O(1): otherwise a huge
    // objective scale would place centered slacks below f64 resolution.
    let solver = Solver::new(sub, 1.0 / obj_start.abs().max(1.0));
    solver.check_strictly_feasible(start)?;
    let mut z = start.to_vec();
    let mut iters = 0usize;
    let mut outcome;

    if opts.warm_start {
        outcome = solver.run_schedule(&mut z, &[opts.mu_min], STAGE_CAP_POLISH, opts, &mut iters);
        if !outcome.converged && iters < opts.max_newton {
            outcome = solver.run_schedule(&mut z, &full_schedule(opts), STAGE_CAP_FULL, opts, &mut iters);
        }
    } else {
        outcome = solver.run_schedule(&mut z, &full_schedule(opts), STAGE_CAP_FULL, opts, &mut iters);
    }

    let mut objective = sub.objective(&z);
    let mut converged = outcome.converged;
    if !(objective <= obj_start + 1e-12 * (1.0 + obj_start.abs())) {
        // A solve must never hand back something worse than it was given.
        z = start.to_vec();
        objective = obj_start;
        converged = false;
    }
    let feasibility_residual = sub.feasibility_residual(&z);
    // Stationarity alone is not convergence: the point must also sit on the
    // equality manifold (inequalities hold by construction of the barrier).
    let eq_scale = sub.equalities.iter().fold(1.0f64, |m, (_, b)| m.max(b.abs()));
    if !(feasibility_residual <= 1e-7 * eq_scale) {
        converged = false;
    }
    let report = SolveReport {
        objective,
        iterations: iters.max(1),
        feasibility_residual,
        stationarity: outcome.stationarity,
        converged,
        wall_time: clock.elapsed(),
    };
    Ok((z, report))
}

fn full_schedule(opts: &SolveOptions) -> Vec<f64> {
    let mut mus = Vec::new();
    let mut mu = opts.mu0;
    while mu > opts.mu_min {
        mus.push(mu);
        mu *= opts.mu_factor;
    }
    mus.push(opts.mu_min);
    mus
}

#[derive(Clone, Copy)]
struct ScheduleOutcome {
    converged: bool,
    stationarity: f64,
}

/// Static row classification: where a row's curvature contribution lands.
#[derive(Clone, Copy, PartialEq)]
enum RowHome {
    /// Single-column row; weight·a² folds into the Hessian diagonal.
    Diagonal,
    /// Support contained in one variable group; rank-1 update to its block.
    Block(u32),
    /// Spans groups or ungrouped variables; Woodbury column.
    Spanning,
}

struct Solver<'a> {
    sub: &'a ConvexSubproblem,
    /// Reciprocal of the objective normalization scale.
    inv_scale: f64,
    group_of: Vec<u32>,
    local_of: Vec<u32>,
    row_home: Vec<RowHome>,
    /// Row ids that can ever become Woodbury columns, in fixed order.
    spanning_rows: Vec<u32>,
    /// (row, shift) pairs whose affine value must stay strictly positive.
    pole_guards: Vec<(u32, f64)>,
}

struct Factors {
    /// Hessian diagonal for ungrouped variables (grouped ones live in blocks).
    diag: Vec<f64>,
    blocks: Vec<Cholesky<f64, Dyn>>,
    /// Woodbury columns: sparse rows by id plus dense smooth-gradient columns.
    wood_rows: Vec<(u32, f64)>,
    wood_dense: Vec<(Vec<f64>, f64)>,
    /// y_c = K⁻¹ u_c for every Woodbury column, dense.
    y_cols: Vec<Vec<f64>>,
    m_chol: Option<Cholesky<f64, Dyn>>,
}

struct EvalState {
    dots: Vec<f64>,
    phi: f64,
    grad_phi: Vec<f64>,
    grad_raw_inf: f64,
}

impl<'a> Solver<'a> {
    fn new(sub: &'a ConvexSubproblem, inv_scale: f64) -> Self {
        let mut group_of = vec![UNGROUPED; sub.n_vars];
        let mut local_of = vec![0u32; sub.n_vars];
        for (gi, g) in sub.groups.iter().enumerate() {
            for (li, &v) in g.iter().enumerate() {
                group_of[v as usize] = gi as u32;
                local_of[v as usize] = li as u32;
            }
        }
        let mut row_home = Vec::with_capacity(sub.rows.len());
        let mut spanning_rows = Vec::new();
        for (ri, row) in sub.rows.iter().enumerate() {
            let home = if row.idx.len() <= 1 {
                RowHome::Diagonal
            } else {
                let g0 = group_of[row.idx[0] as usize];
                if g0 != UNGROUPED && row.idx.iter().all(|&i| group_of[i as usize] == g0) {
                    RowHome::Block(g0)
                } else {
                    RowHome::Spanning
                }
            };
            if home == RowHome::Spanning {
                spanning_rows.push(ri as u32);
            }
            row_home.push(home);
        }
        let mut pole_guards = Vec::new();
        for q in &sub.ineqs {
            pole_guards.push((q.row, q.shift));
        }
        for t in &sub.terms {
            if t.c1 > 0.0 {
                pole_guards.push((t.row, t.shift));
            }
        }
        for s in &sub.smooth_ineqs {
            for a in &s.atoms {
                if a.c1 > 0.0 {
                    pole_guards.push((a.row, a.shift));
                }
            }
        }
        Solver { sub, inv_scale, group_of, local_of, row_home, spanning_rows, pole_guards }
    }

    fn check_strictly_feasible(&self, z: &[f64]) -> Result<()> {
        let sub = self.sub;
        for (i, &lb) in sub.lower_bounds.iter().enumerate() {
            if lb.is_finite() && z[i] <= lb {
                return Err(Error::InfeasibleStart(format!(
                    "variable {i} = {} not strictly above lower bound {lb}",
                    z[i]
                )));
            }
        }
        for (ri, &(row, shift)) in self.pole_guards.iter().enumerate() {
            let u = shift + sub.rows[row as usize].dot(z);
            if u <= 0.0 {
                return Err(Error::InfeasibleStart(format!(
                    "affine guard {ri} (row {row}) has nonpositive value {u}"
                )));
            }
        }
        for (si, s) in sub.smooth_ineqs.iter().enumerate() {
            let mut g = 0.0;
            for a in &s.atoms {
                if a.c1 == 0.0 {
                    continue;
                }
                let u = a.shift + sub.rows[a.row as usize].dot(z);
                g += a.c1 / u;
            }
            if g >= s.bound {
                return Err(Error::InfeasibleStart(format!(
                    "smooth inequality {si}: value {g} not strictly below bound {}",
                    s.bound
                )));
            }
        }
        for (ei, (row, b)) in sub.equalities.iter().enumerate() {
            let r = (row.dot(z) - b).abs();
            if r > 1e-8 * (1.0 + b.abs()) {
                return Err(Error::InfeasibleStart(format!(
                    "equality {ei} violated by {r}"
                )));
            }
        }
        Ok(())
    }

    /// Barrier merit value only; +∞ outside the strictly feasible set.
    fn eval_phi(&self, z: &[f64], mu: f64, dots: &mut Vec<f64>) -> f64 {
        let sub = self.sub;
        dots.clear();
        dots.extend(sub.rows.iter().map(|r| r.dot(z)));
        let mut obj = 0.0;
        for t in &sub.terms {
            let v = t.value(t.shift + dots[t.row as usize]);
            if !v.is_finite() {
                return f64::INFINITY;
            }
            obj += v;
        }
        for &(i, w) in &sub.linear {
            obj += w * z[i as usize];
        }
        obj *= self.inv_scale;
        let mut barrier = 0.0;
        for (i, &lb) in sub.lower_bounds.iter().enumerate() {
            if lb.is_finite() {
                let s = z[i] - lb;
                if s <= 0.0 {
                    return f64::INFINITY;
                }
                barrier -= s.ln();
            }
        }
        for q in &sub.ineqs {
            let s = q.shift + dots[q.row as usize];
            if s <= 0.0 {
                return f64::INFINITY;
            }
            barrier -= s.ln();
        }
        for s in &sub.smooth_ineqs {
            let mut g = 0.0;
            for a in &s.atoms {
                if a.c1 == 0.0 {
                    continue;
                }
                let u = a.shift + dots[a.row as usize];
                if u <= 0.0 {
                    return f64::INFINITY;
                }
                g += a.c1 / u;
            }
            let slack = s.bound - g;
            if slack <= 0.0 {
                return f64::INFINITY;
            }
            barrier -= slack.ln();
        }
        obj + mu * barrier
    }

    /// Merit, gradient, and the raw-objective gradient norm used for the
    /// relative stationarity scale.
    fn eval_full(&self, z: &[f64], mu: f64) -> EvalState {
        let sub = self.sub;
        let mut dots = Vec::new();
        let phi = self.eval_phi(z, mu, &mut dots);
        let n_rows = sub.rows.len();
        // Per-row gradient coefficients: raw objective part and barrier part.
        let mut coef_raw = vec![0.0; n_rows];
        let mut coef_bar = vec![0.0; n_rows];
        for t in &sub.terms {
            coef_raw[t.row as usize] += self.inv_scale * t.d1(t.shift + dots[t.row as usize]);
        }
        for q in &sub.ineqs {
            let s = q.shift + dots[q.row as usize];
            coef_bar[q.row as usize] += -mu / s;
        }
        for s in &sub.smooth_ineqs {
            let mut g = 0.0;
            for a in &s.atoms {
                if a.c1 == 0.0 {
                    continue;
                }
                g += a.c1 / (a.shift + dots[a.row as usize]);
            }
            let slack = s.bound - g;
            for a in &s.atoms {
                if a.c1 == 0.0 {
                    continue;
                }
                let u = a.shift + dots[a.row as usize];
                coef_bar[a.row as usize] += -mu * a.c1 / (u * u * slack);
            }
        }
        let mut grad_raw = vec![0.0; sub.n_vars];
        let mut grad_phi = vec![0.0; sub.n_vars];
        for ri in 0..n_rows {
            if coef_raw[ri] != 0.0 {
                sub.rows[ri].axpy(coef_raw[ri], &mut grad_raw);
            }
            let total = coef_raw[ri] + coef_bar[ri];
            if total != 0.0 {
                sub.rows[ri].axpy(total, &mut grad_phi);
            }
        }
        for &(i, w) in &sub.linear {
            grad_raw[i as usize] += self.inv_scale * w;
            grad_phi[i as usize] += self.inv_scale * w;
        }
        for (i, &lb) in sub.lower_bounds.iter().enumerate() {
            if lb.is_finite() {
                grad_phi[i] += -mu / (z[i] - lb);
            }
        }
        let grad_raw_inf = grad_raw.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        EvalState { dots, phi, grad_phi, grad_raw_inf }
    }

    /// Assemble and factor the barrier Hessian at `z`.
    fn factorize(&self, z: &[f64], mu: f64, dots: &[f64]) -> Result<Factors> {
        let sub = self.sub;
        let n_rows = sub.rows.len();
        let mut weights = vec![0.0; n_rows];
        for t in &sub.terms {
            weights[t.row as usize] += self.inv_scale * t.d2(t.shift + dots[t.row as usize]);
        }
        for q in &sub.ineqs {
            let s = q.shift + dots[q.row as usize];
            weights[q.row as usize] += mu / (s * s);
        }
        // Smooth inequalities: per-atom curvature merges into row weights;
        // the rank-1 gradient outer product becomes a dense Woodbury column.
        let mut wood_dense = Vec::with_capacity(sub.smooth_ineqs.len());
        for s in &sub.smooth_ineqs {
            let mut g = 0.0;
            for a in &s.atoms {
                if a.c1 == 0.0 {
                    continue;
                }
                g += a.c1 / (a.shift + dots[a.row as usize]);
            }
            let slack = s.bound - g;
            let mut dg = vec![0.0; sub.n_vars];
            for a in &s.atoms {
                if a.c1 == 0.0 {
                    continue;
                }
                let u = a.shift + dots[a.row as usize];
                weights[a.row as usize] += mu * 2.0 * a.c1 / (u * u * u * slack);
                sub.rows[a.row as usize].axpy(a.c1 / (u * u), &mut dg);
            }
            wood_dense.push((dg, mu / (slack * slack)));
        }

        let mut diag = vec![0.0; sub.n_vars];
        for (i, &lb) in sub.lower_bounds.iter().enumerate() {
            if lb.is_finite() {
                let s = z[i] - lb;
                diag[i] = mu / (s * s);
            }
        }
        for (ri, &w) in weights.iter().enumerate() {
            if w > 0.0 && self.row_home[ri] == RowHome::Diagonal {
                let row = &sub.rows[ri];
                if let (Some(&i), Some(&a)) = (row.idx.first(), row.val.first()) {
                    diag[i as usize] += w * a * a;
                }
            }
        }
        let wood_rows: Vec<(u32, f64)> = self
            .spanning_rows
            .iter()
            .filter(|&&ri| weights[ri as usize] > 0.0)
            .map(|&ri| (ri, weights[ri as usize]))
            .collect();

        let dmax = diag.iter().fold(0.0f64, |m, &v| m.max(v));
        let mut ridge = 0.0;
        for _attempt in 0..6 {
            match self.try_factor(&diag, &weights, &wood_rows, &wood_dense, ridge) {
                Some(f) => return Ok(f),
                None => ridge = (ridge * 100.0).max(1e-12 * (1.0 + dmax)),
            }
        }
        Err(Error::Solver("Hessian factorization failed despite regularization".into()))
    }

    fn try_factor(
        &self,
        diag: &[f64],
        weights: &[f64],
        wood_rows: &[(u32, f64)],
        wood_dense: &[(Vec<f64>, f64)],
        ridge: f64,
    ) -> Option<Factors> {
        let sub = self.sub;
        // Dense per-group blocks: diag + in-block rank-1 contributions.
        let mut blocks = Vec::with_capacity(sub.groups.len());
        let mut mats: Vec<DMatrix<f64>> = sub
            .groups
            .iter()
            .map(|g| {
                let mut m = DMatrix::zeros(g.len(), g.len());
                for (li, &v) in g.iter().enumerate() {
                    m[(li, li)] = diag[v as usize] + ridge;
                }
                m
            })
            .collect();
        for (ri, &w) in weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            if let RowHome::Block(gi) = self.row_home[ri] {
                let m = &mut mats[gi as usize];
                let row = &sub.rows[ri];
                for (p, &ip) in row.idx.iter().enumerate() {
                    let lp = self.local_of[ip as usize] as usize;
                    let wv = w * row.val[p];
                    for (q, &iq) in row.idx.iter().enumerate() {
                        m[(lp, self.local_of[iq as usize] as usize)] += wv * row.val[q];
                    }
                }
            }
        }
        for m in mats {
            blocks.push(Cholesky::new(m)?);
        }
        let diag_r: Vec<f64> = diag.iter().map(|&d| d + ridge).collect();
        // Ungrouped variables must carry positive curvature for K to be PD.
        for (i, &d) in diag_r.iter().enumerate() {
            if self.group_of[i] == UNGROUPED && d <= 0.0 {
                return None;
            }
        }

        let m_cols = wood_rows.len() + wood_dense.len();
        let mut y_cols = Vec::with_capacity(m_cols);
        let mut factors = Factors {
            diag: diag_r,
            blocks,
            wood_rows: wood_rows.to_vec(),
            wood_dense: wood_dense.to_vec(),
            y_cols: Vec::new(),
            m_chol: None,
        };
        if m_cols == 0 {
            return Some(factors);
        }
        let mut buf = vec![0.0; sub.n_vars];
        for &(ri, _) in wood_rows {
            buf.iter_mut().for_each(|v| *v = 0.0);
            sub.rows[ri as usize].axpy(1.0, &mut buf);
            self.kinv_in_place(&factors, &mut buf);
            y_cols.push(buf.clone());
        }
        for (dg, _) in wood_dense {
            let mut col = dg.clone();
            self.kinv_in_place(&factors, &mut col);
            y_cols.push(col);
        }
        // Core matrix M = W⁻¹ + Uᵀ K⁻¹ U.
        let mut m = DMatrix::zeros(m_cols, m_cols);
        for c in 0..m_cols {
            let y = &y_cols[c];
            for r in 0..=c {
                let dot = if r < wood_rows.len() {
                    sub.rows[wood_rows[r].0 as usize].dot(y)
                } else {
                    let dg = &wood_dense[r - wood_rows.len()].0;
                    dg.iter().zip(y).map(|(a, b)| a * b).sum()
                };
                m[(r, c)] = dot;
                m[(c, r)] = dot;
            }
        }
        let mut mdiag_max = 0.0f64;
        for c in 0..m_cols {
            let w = if c < wood_rows.len() { wood_rows[c].1 } else { wood_dense[c - wood_rows.len()].1 };
            m[(c, c)] += 1.0 / w;
            mdiag_max = mdiag_max.max(m[(c, c)]);
        }
        if ridge > 0.0 {
            for c in 0..m_cols {
                m[(c, c)] += ridge * mdiag_max.max(1.0) * 1e-3;
            }
        }
        factors.m_chol = Some(Cholesky::new(m)?);
        factors.y_cols = y_cols;
        Some(factors)
    }

    /// v ← K⁻¹ v (block-diagonal part only).
    fn kinv_in_place(&self, f: &Factors, v: &mut [f64]) {
        let sub = self.sub;
        for (gi, g) in sub.groups.iter().enumerate() {
            let mut local = DVector::zeros(g.len());
            for (li, &vi) in g.iter().enumerate() {
                local[li] = v[vi as usize];
            }
            f.blocks[gi].solve_mut(&mut local);
            for (li, &vi) in g.iter().enumerate() {
                v[vi as usize] = local[li];
            }
        }
        for (i, x) in v.iter_mut().enumerate() {
            if self.group_of[i] == UNGROUPED {
                *x /= f.diag[i];
            }
        }
    }

    /// H⁻¹ v via block solves plus the Woodbury correction.
    fn hinv(&self, f: &Factors, v: &[f64]) -> Vec<f64> {
        let mut t = v.to_vec();
        self.kinv_in_place(f, &mut t);
        let m_cols = f.y_cols.len();
        if m_cols == 0 {
            return t;
        }
        let mut q = DVector::zeros(m_cols);
        for c in 0..m_cols {
            q[c] = if c < f.wood_rows.len() {
                self.sub.rows[f.wood_rows[c].0 as usize].dot(&t)
            } else {
                f.wood_dense[c - f.wood_rows.len()].0.iter().zip(&t).map(|(a, b)| a * b).sum()
            };
        }
        let s = f.m_chol.as_ref().expect("M factor present when columns exist").solve(&q);
        for c in 0..m_cols {
            let sc = s[c];
            if sc != 0.0 {
                for (ti, yi) in t.iter_mut().zip(&f.y_cols[c]) {
                    *ti -= sc * yi;
                }
            }
        }
        t
    }

    /// Newton direction with equality correction; returns (dz, omega), or
    /// None when the equality Schur system cannot be factored (which would
    /// otherwise produce a direction that leaves the equality manifold).
    fn newton_direction(&self, f: &Factors, grad: &[f64], z: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let sub = self.sub;
        let neg_g: Vec<f64> = grad.iter().map(|&g| -g).collect();
        let t0 = self.hinv(f, &neg_g);
        let p = sub.equalities.len();
        if p == 0 {
            return Some((t0, Vec::new()));
        }
        let mut t_cols = Vec::with_capacity(p);
        for (row, _) in &sub.equalities {
            let mut dense = vec![0.0; sub.n_vars];
            row.axpy(1.0, &mut dense);
            t_cols.push(self.hinv(f, &dense));
        }
        let mut s = DMatrix::zeros(p, p);
        for r in 0..p {
            for c in 0..p {
                s[(r, c)] = sub.equalities[r].0.dot(&t_cols[c]);
            }
        }
        let mut rhs = DVector::zeros(p);
        for (r, (row, b)) in sub.equalities.iter().enumerate() {
            // Drift correction keeps iterates on the equality manifold.
            rhs[r] = row.dot(&t0) - (b - row.dot(z));
        }
        // A non-positive-definite S means the equality direction is not
        // numerically observable through H⁻¹; regularizing it would produce
        // a direction that leaves the manifold, so fail the stage instead.
        let omega = Cholesky::new(s).map(|ch| ch.solve(&rhs))?;
        let mut dz = t0;
        for c in 0..p {
            let oc = omega[c];
            if oc != 0.0 {
                for (di, ti) in dz.iter_mut().zip(&t_cols[c]) {
                    *di -= oc * ti;
                }
            }
        }
        Some((dz, omega.iter().copied().collect()))
    }

    /// Pull an iterate back onto the equality manifold with the minimum-norm
    /// correction z += Aᵀ(AAᵀ)⁻¹(b − Az). Skipped when the projected point
    /// would leave the barrier domain or the Gram matrix cannot be factored.
    fn project_equalities(&self, z: &mut Vec<f64>, mu: f64, scratch: &mut Vec<f64>) {
        let sub = self.sub;
        let p = sub.equalities.len();
        if p == 0 {
            return;
        }
        let mut resid = DVector::zeros(p);
        let mut worst = 0.0f64;
        for (r, (row, b)) in sub.equalities.iter().enumerate() {
            resid[r] = b - row.dot(z);
            worst = worst.max(resid[r].abs());
        }
        if worst == 0.0 {
            return;
        }
        let mut gram = DMatrix::zeros(p, p);
        for r in 0..p {
            for c in 0..=r {
                let d = sub.equalities[r].0.dot_sparse(&sub.equalities[c].0);
                gram[(r, c)] = d;
                gram[(c, r)] = d;
            }
        }
        let Some(ch) = Cholesky::new(gram) else { return };
        let coef = ch.solve(&resid);
        let mut trial = z.clone();
        for (r, (row, _)) in sub.equalities.iter().enumerate() {
            row.axpy(coef[r], &mut trial);
        }
        if self.eval_phi(&trial, mu, scratch).is_finite() {
            *z = trial;
        }
    }

    /// Largest step keeping every barrier slack at least 1% of its value.
    fn max_step(&self, z: &[f64], dz: &[f64], dots: &[f64]) -> f64 {
        let sub = self.sub;
        let mut alpha = 1.0f64;
        for (i, &lb) in sub.lower_bounds.iter().enumerate() {
            if lb.is_finite() && dz[i] < 0.0 {
                alpha = alpha.min(BOUNDARY_FRACTION * (z[i] - lb) / -dz[i]);
            }
        }
        for &(row, shift) in &self.pole_guards {
            let delta = sub.rows[row as usize].dot(dz);
            if delta < 0.0 {
                let s = shift + dots[row as usize];
                alpha = alpha.min(BOUNDARY_FRACTION * s / -delta);
            }
        }
        alpha
    }

    fn run_schedule(
        &self,
        z: &mut Vec<f64>,
        schedule: &[f64],
        stage_cap: usize,
        opts: &SolveOptions,
        iters: &mut usize,
    ) -> ScheduleOutcome {
        let mut stationarity = f64::INFINITY;
        let mut scratch = Vec::new();
        for (si, &mu) in schedule.iter().enumerate() {
            let final_stage = si + 1 == schedule.len();
            let mut stage_iters = 0usize;
            loop {
                if *iters >= opts.max_newton || stage_iters >= stage_cap {
                    return ScheduleOutcome { converged: false, stationarity };
                }
                let eval = self.eval_full(z, mu);
                if !eval.phi.is_finite() {
                    // Numerical drift pushed the iterate to the boundary.
                    return ScheduleOutcome { converged: false, stationarity };
                }
                let factors = match self.factorize(z, mu, &eval.dots) {
                    Ok(f) => f,
                    Err(_) => return ScheduleOutcome { converged: false, stationarity },
                };
                *iters += 1;
                stage_iters += 1;
                let Some((dz, omega)) = self.newton_direction(&factors, &eval.grad_phi, z) else {
                    return ScheduleOutcome { converged: false, stationarity };
                };
                // Stationarity of ∇φ against the equality multipliers.
                let mut res = vec![0.0; self.sub.n_vars];
                res.copy_from_slice(&eval.grad_phi);
                for (c, (row, _)) in self.sub.equalities.iter().enumerate() {
                    row.axpy(omega[c], &mut res);
                }
                let res_inf = res.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
                let rel = res_inf / (1.0 + eval.grad_raw_inf);
                stationarity = rel;
                if final_stage && rel <= opts.kkt_tol {
                    return ScheduleOutcome { converged: true, stationarity };
                }
                let descent: f64 = eval.grad_phi.iter().zip(&dz).map(|(g, d)| g * d).sum();
                let decrement2 = (-descent).max(0.0);
                if !final_stage && decrement2 * 0.5 <= (mu * 1e-3).max(1e-15 * (1.0 + eval.phi.abs())) {
                    break; // centered enough for this stage
                }
                if descent >= 0.0 {
                    // No descent direction left at this barrier weight.
                    if final_stage && rel <= opts.kkt_tol.max(1e-8) {
                        return ScheduleOutcome { converged: true, stationarity };
                    }
                    break;
                }
                let alpha_max = self.max_step(z, &dz, &eval.dots);
                let mut alpha = alpha_max.min(1.0);
                let mut accepted = false;
                for _ in 0..60 {
                    let trial: Vec<f64> =
                        z.iter().zip(&dz).map(|(zi, di)| zi + alpha * di).collect();
                    let phi_t = self.eval_phi(&trial, mu, &mut scratch);
                    if phi_t.is_finite() && phi_t <= eval.phi + ARMIJO_C * alpha * descent {
                        *z = trial;
                        accepted = true;
                        break;
                    }
                    alpha *= ARMIJO_BETA;
                }
                if !accepted {
                    break; // line search exhausted at this stage
                }
                self.project_equalities(z, mu, &mut scratch);
            }
        }
        ScheduleOutcome { converged: false, stationarity }
    }
}
