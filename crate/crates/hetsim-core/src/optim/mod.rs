//! Constrained convex minimization engine and the alternating-minimization
//! driver shared by both allocation schemes.

mod barrier;
mod subproblem;

pub use barrier::{solve_convex, SolveOptions, SolveReport};
pub use subproblem::{AffineIneq, ConvexSubproblem, SmoothAtom, SmoothIneq, SparseRow, Term};

use crate::conservative::{Allocation, P1Config};
use crate::model::{EfficiencyTable, Topology};
use crate::Result;

/// A strictly feasible interior allocation to start block solves from:
/// near-orthogonal band fractions, every link share strictly positive with
/// emphasis on each group's best AP, and traffic splits slightly above half
/// the offered load. When that heuristic point is not strictly stable, a
/// max-margin linear program finds one (or proves none exists).
pub fn initial_feasible_allocation(top: &Topology, table: &EfficiencyTable) -> Result<Allocation> {
    crate::conservative::initial_allocation(top, table, &P1Config::default())
}

#[derive(Debug, Clone, Copy)]
pub struct AlternateOptions {
    /// Stop when the relative objective decrease over a full sweep drops
    /// below this.
    pub rel_tol: f64,
    pub max_sweeps: usize,
}

impl Default for AlternateOptions {
    fn default() -> Self {
        AlternateOptions { rel_tol: 1e-6, max_sweeps: 100 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct AlternateReport {
    /// Objective after the initial point and after each completed sweep.
    pub sweep_objectives: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// Set when a phase solve failed and the driver stopped early on the
    /// last feasible state.
    pub diagnostic: Option<String>,
}

/// Alternating minimization over block phases with accept-if-improved
/// semantics: each phase proposes a candidate state; it is adopted only if
/// it does not increase the objective, which makes the sweep objective
/// sequence nonincreasing by construction (and asserts it at runtime).
///
/// A phase failure stops the driver on the last feasible state with a
/// diagnostic rather than an error, so callers always get an allocation.
pub fn alternate<A: Clone>(
    initial: A,
    objective: impl Fn(&A) -> f64,
    phases: &mut [&mut dyn FnMut(&A, usize) -> Result<A>],
    opts: &AlternateOptions,
) -> (A, AlternateReport) {
    let mut state = initial;
    let mut obj = objective(&state);
    let mut report = AlternateReport {
        sweep_objectives: vec![obj],
        ..Default::default()
    };
    for sweep in 0..opts.max_sweeps {
        let prev = obj;
        for phase in phases.iter_mut() {
            match phase(&state, sweep) {
                Ok(candidate) => {
                    let cand_obj = objective(&candidate);
                    if cand_obj.is_finite() && cand_obj <= obj {
                        state = candidate;
                        obj = cand_obj;
                    }
                }
                Err(e) => {
                    report.diagnostic = Some(format!("sweep {sweep}: {e}"));
                    report.sweep_objectives.push(obj);
                    report.sweeps = sweep + 1;
                    return (state, report);
                }
            }
        }
        assert!(
            obj <= prev + 1e-12 * (1.0 + prev.abs()),
            "sweep objective increased: {prev} -> {obj}"
        );
        report.sweep_objectives.push(obj);
        report.sweeps = sweep + 1;
        if prev - obj < opts.rel_tol * prev.abs().max(1e-12) {
            report.converged = true;
            break;
        }
    }
    (state, report)
}
