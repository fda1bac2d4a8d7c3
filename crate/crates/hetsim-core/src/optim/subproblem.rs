//! Problem description consumed by the barrier solver.
//!
//! Objectives are sums of scalar convex atoms f(u) = c0 + c1/u + c2·u
//! (c1, c2 ≥ 0, domain u > 0 when c1 > 0) over affine forms u = shift + a·z.
//! Every delay-mass term of the allocation problems fits this shape, in both
//! the rate direction (u = r(x) − λ) and the split direction (u = r − λ):
//!
//!   λ/(r−λ)                    → c1 = λ
//!   λ(2+rλν)/(2(r−λ))          → c0 = νλ²/2,        c1 = λ + νλ³/2
//!   v/(r−v)   at fixed r       → c0 = −1,           c1 = r        (u = r−v)
//!   v(2+rvν)/(2(r−v)) fixed r  → c0 = −1 − νr²/2,   c1 = r + νr³/2, c2 = νr/2
//!
//! so the Hessian is a positive diagonal plus positively-weighted outer
//! products of constraint/term rows — the structure the solver factors.

use crate::{Error, Result};

/// Sparse row over the variable vector; indices strictly ascending.
#[derive(Debug, Clone, Default)]
pub struct SparseRow {
    pub idx: Vec<u32>,
    pub val: Vec<f64>,
}

impl SparseRow {
    pub fn new(mut entries: Vec<(u32, f64)>) -> Self {
        entries.sort_by_key(|e| e.0);
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0), "duplicate column in row");
        SparseRow {
            idx: entries.iter().map(|e| e.0).collect(),
            val: entries.iter().map(|e| e.1).collect(),
        }
    }

    pub fn dot(&self, z: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (&i, &v) in self.idx.iter().zip(&self.val) {
            acc += v * z[i as usize];
        }
        acc
    }

    pub fn axpy(&self, w: f64, out: &mut [f64]) {
        if w == 0.0 {
            return;
        }
        for (&i, &v) in self.idx.iter().zip(&self.val) {
            out[i as usize] += w * v;
        }
    }

    /// Dot product of two sparse rows (both index-sorted).
    pub fn dot_sparse(&self, other: &SparseRow) -> f64 {
        let (mut a, mut b, mut acc) = (0usize, 0usize, 0.0);
        while a < self.idx.len() && b < other.idx.len() {
            match self.idx[a].cmp(&other.idx[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.val[a] * other.val[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        acc
    }
}

/// Objective atom weight·(c0 + c1/u + c2·u) with u = shift + rows[row]·z.
#[derive(Debug, Clone, Copy)]
pub struct Term {
    pub row: u32,
    pub shift: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Term {
    /// Mass-of-rate atom weight·λ·delay(u+λ, λ) for an M/M/1 queue, written
    /// over the slack u = r − λ.
    pub fn mm1_mass(row: u32, lambda: f64, weight: f64) -> Term {
        Term { row, shift: -lambda, c0: 0.0, c1: weight * lambda, c2: 0.0 }
    }

    /// Same for the vacation queue: weight·λ(2 + rλν)/(2(r−λ)).
    pub fn vacation_mass(row: u32, lambda: f64, nu: f64, weight: f64) -> Term {
        Term {
            row,
            shift: -lambda,
            c0: weight * nu * lambda * lambda / 2.0,
            c1: weight * (lambda + nu * lambda.powi(3) / 2.0),
            c2: 0.0,
        }
    }

    /// Mass-of-split atom weight·v/(r−v) at fixed rate r; the row must give
    /// u = r − v, i.e. carry −1 against the split variable with shift = r.
    pub fn mm1_mass_of_split(row: u32, r: f64, weight: f64) -> Term {
        Term { row, shift: r, c0: -weight, c1: weight * r, c2: 0.0 }
    }

    /// Vacation mass-of-split atom weight·v(2 + rvν)/(2(r−v)) at fixed r.
    pub fn vacation_mass_of_split(row: u32, r: f64, nu: f64, weight: f64) -> Term {
        Term {
            row,
            shift: r,
            c0: -weight * (1.0 + nu * r * r),
            c1: weight * (r + nu * r.powi(3) / 2.0),
            c2: weight * nu * r / 2.0,
        }
    }

    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        if self.c1 > 0.0 && u <= 0.0 {
            return f64::INFINITY;
        }
        self.c0 + if self.c1 != 0.0 { self.c1 / u } else { 0.0 } + self.c2 * u
    }

    #[inline]
    pub fn d1(&self, u: f64) -> f64 {
        -self.c1 / (u * u) + self.c2
    }

    #[inline]
    pub fn d2(&self, u: f64) -> f64 {
        2.0 * self.c1 / (u * u * u)
    }
}

/// Affine inequality shift + rows[row]·z ≥ 0, kept strictly positive by the
/// barrier.
#[derive(Debug, Clone, Copy)]
pub struct AffineIneq {
    pub row: u32,
    pub shift: f64,
}

/// One reciprocal atom c1/u of a smooth constraint, u = shift + rows[row]·z.
#[derive(Debug, Clone, Copy)]
pub struct SmoothAtom {
    pub row: u32,
    pub shift: f64,
    pub c1: f64,
}

/// Smooth convex inequality Σ_t c1_t/u_t ≤ bound (the utilization-budget
/// constraint family). All atoms must have c1 ≥ 0.
#[derive(Debug, Clone)]
pub struct SmoothIneq {
    pub bound: f64,
    pub atoms: Vec<SmoothAtom>,
}

/// Smooth convex minimization problem over z with barrier-handled
/// inequalities and a small number of linear equalities.
#[derive(Debug, Clone, Default)]
pub struct ConvexSubproblem {
    pub n_vars: usize,
    /// Per-variable lower bound; NEG_INFINITY disables the bound barrier.
    pub lower_bounds: Vec<f64>,
    /// Disjoint variable groups factored as dense blocks; variables outside
    /// any group carry diagonal curvature only.
    pub groups: Vec<Vec<u32>>,
    /// Shared row registry referenced by terms, inequalities and smooth atoms.
    pub rows: Vec<SparseRow>,
    pub terms: Vec<Term>,
    /// Linear objective part Σ w_i·z_i.
    pub linear: Vec<(u32, f64)>,
    pub ineqs: Vec<AffineIneq>,
    pub smooth_ineqs: Vec<SmoothIneq>,
    pub equalities: Vec<(SparseRow, f64)>,
}

impl ConvexSubproblem {
    pub fn new(n_vars: usize) -> Self {
        ConvexSubproblem {
            n_vars,
            lower_bounds: vec![f64::NEG_INFINITY; n_vars],
            ..Default::default()
        }
    }

    pub fn add_row(&mut self, row: SparseRow) -> u32 {
        self.rows.push(row);
        (self.rows.len() - 1) as u32
    }

    /// Raw objective (no barrier); +∞ outside the terms' domain.
    pub fn objective(&self, z: &[f64]) -> f64 {
        let mut vals = Vec::with_capacity(self.terms.len() + 1);
        for t in &self.terms {
            let u = t.shift + self.rows[t.row as usize].dot(z);
            let v = t.value(u);
            if !v.is_finite() {
                return f64::INFINITY;
            }
            vals.push(v);
        }
        let mut lin = 0.0;
        for &(i, w) in &self.linear {
            lin += w * z[i as usize];
        }
        vals.push(lin);
        crate::par::pairwise_sum(&vals)
    }

    /// Max violation over equality residuals, negative inequality slacks,
    /// bound violations and smooth-constraint excess.
    pub fn feasibility_residual(&self, z: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (row, b) in &self.equalities {
            worst = worst.max((row.dot(z) - b).abs());
        }
        for q in &self.ineqs {
            worst = worst.max(-(q.shift + self.rows[q.row as usize].dot(z)));
        }
        for (i, &lb) in self.lower_bounds.iter().enumerate() {
            if lb.is_finite() {
                worst = worst.max(lb - z[i]);
            }
        }
        for s in &self.smooth_ineqs {
            let mut g = -s.bound;
            for a in &s.atoms {
                if a.c1 == 0.0 {
                    continue;
                }
                let u = a.shift + self.rows[a.row as usize].dot(z);
                if u <= 0.0 {
                    return f64::INFINITY;
                }
                g += a.c1 / u;
            }
            worst = worst.max(g);
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_vars as u32;
        if self.lower_bounds.len() != self.n_vars {
            return Err(Error::Solver("lower_bounds length mismatch".into()));
        }
        let mut seen = vec![false; self.n_vars];
        for g in &self.groups {
            for &i in g {
                if i >= n || std::mem::replace(&mut seen[i as usize], true) {
                    return Err(Error::Solver("groups must be disjoint and in range".into()));
                }
            }
        }
        for r in &self.rows {
            if r.idx.iter().any(|&i| i >= n) {
                return Err(Error::Solver("row index out of range".into()));
            }
        }
        let rows = self.rows.len() as u32;
        let row_ok = |r: u32| r < rows;
        if !self.terms.iter().all(|t| row_ok(t.row) && t.c1 >= 0.0 && t.c2 >= 0.0)
            || !self.ineqs.iter().all(|q| row_ok(q.row))
            || !self
                .smooth_ineqs
                .iter()
                .all(|s| s.atoms.iter().all(|a| row_ok(a.row) && a.c1 >= 0.0))
        {
            return Err(Error::Solver("term/constraint refers to missing row or has negative curvature".into()));
        }
        Ok(())
    }
}
