//! Utilization-dependent allocation: the two-level iteration that couples a
//! product-form AP-activity model (σ/ρ/p fixed point) with a mixture-delay
//! allocation subproblem solved by the same convex machinery as the
//! conservative scheme.
//!
//! The activity model approximates the interactive queues by assuming APs
//! transmit independently: AP i is busy on RAT l with probability ρ[l][i],
//! so an active set I has probability p^{I,l} = Π_{i∈I} ρ_i Π_{i∉I} (1−ρ_i).
//! A queue's delay becomes a p-weighted mixture of closed-form delays at the
//! per-active-set service rates, which are linear in the link shares with
//! the serving AP always counted active.

use crate::conservative::{
    Allocation, CapacityVerdict, DelayReport, P1Config, P1Machine, Scheme,
};
use crate::model::{serving_active_rate, EfficiencyTable, Pattern, Topology};
use crate::optim::{
    alternate, solve_convex, AffineIneq, AlternateReport, ConvexSubproblem, SmoothAtom,
    SmoothIneq, SolveOptions, SparseRow, Term,
};
use crate::queueing::{delay_mm1, delay_vacation};
use crate::{Error, Result};

/// Active-set atoms with probability below this are treated as measure-zero
/// and dropped from mixture sums (their service rates would otherwise feed
/// 0/0 into utilization ratios).
pub const P_FLOOR: f64 = 1e-12;

/// The σ/ρ/p activity state of the product-form approximation.
#[derive(Debug, Clone)]
pub struct UtilizationState {
    /// σ[l][j]: fraction of time UE group j's RAT-l queue is in service.
    pub sigma: Vec<Vec<f64>>,
    /// ρ[l][i]: transmit utilization of AP i on RAT l.
    pub rho: Vec<Vec<f64>>,
    /// p[l][bits]: probability that exactly the APs in `bits` transmit.
    pub p: Vec<Vec<f64>>,
    /// Iterations the producing fixed-point run used.
    pub iterations: usize,
    /// False when the fixed point hit its iteration cap.
    pub converged: bool,
    /// Number of σ/ρ values clamped into [0,1] while iterating.
    pub clamped: usize,
}

impl UtilizationState {
    /// The state that makes the mixture model collapse to the conservative
    /// one: every AP always transmits.
    pub fn conservative_start(n: usize, k: usize) -> UtilizationState {
        let mut p = vec![vec![0.0; 1 << n]; 2];
        for pl in &mut p {
            pl[(1 << n) - 1] = 1.0;
        }
        UtilizationState {
            sigma: vec![vec![1.0; k]; 2],
            rho: vec![vec![1.0; n]; 2],
            p,
            iterations: 0,
            converged: true,
            clamped: 0,
        }
    }

    /// Checks the structural invariants: shapes, ranges, unit total
    /// probability, and exact product-form consistency of p with ρ.
    pub fn validate(&self, n: usize, k: usize) -> Result<()> {
        for l in 0..2 {
            if self.sigma[l].len() != k || self.rho[l].len() != n || self.p[l].len() != 1 << n {
                return Err(Error::Validation("activity state shape mismatch".into()));
            }
            for &s in &self.sigma[l] {
                if !(0.0..=1.0).contains(&s) {
                    return Err(Error::Validation(format!("service fraction {s} outside [0,1]")));
                }
            }
            for &r in &self.rho[l] {
                if !(0.0..=1.0).contains(&r) {
                    return Err(Error::Validation(format!("AP utilization {r} outside [0,1]")));
                }
            }
            let total: f64 = self.p[l].iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::Validation(format!(
                    "active-set probabilities sum to {total}, not 1"
                )));
            }
            let rebuilt = product_form(&self.rho[l]);
            for (bits, (&have, &want)) in self.p[l].iter().zip(rebuilt.iter()).enumerate() {
                if (have - want).abs() > 1e-12 {
                    return Err(Error::Validation(format!(
                        "active-set probability for bits {bits:b} is {have}, product form gives {want}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Atoms worth keeping in mixture sums: (active-set bits, probability).
    fn kept_atoms(&self, l: usize, floor: f64) -> Vec<(u32, f64)> {
        self.p[l]
            .iter()
            .enumerate()
            .filter(|&(_, &p)| p >= floor)
            .map(|(bits, &p)| (bits as u32, p))
            .collect()
    }
}

/// p^{I} for every subset by doubling: exact product form, total within a
/// few ulps of 1.
fn product_form(rho: &[f64]) -> Vec<f64> {
    let mut p = vec![1.0];
    for &r in rho {
        let m = p.len();
        let mut next = vec![0.0; 2 * m];
        for (bits, &q) in p.iter().enumerate() {
            next[bits] = q * (1.0 - r);
            next[bits | m] = q * r;
        }
        p = next;
    }
    p
}

/// Service rates of every (RAT, UE group) pair for every active AP set,
/// evaluated at a fixed allocation. Rates use the serving-active convention:
/// when group j is in service its serving APs transmit, so the efficiency of
/// a slice on pattern A under active set I is taken at (A ∩ I) ∪ {i}. This
/// keeps every atom's rate at least the conservative (all-active) rate and
/// strictly positive whenever the group holds spectrum.
#[derive(Debug, Clone)]
pub struct MixtureRates {
    n: usize,
    /// [l][j][active bits]
    r: Vec<Vec<Vec<f64>>>,
}

impl MixtureRates {
    #[inline]
    pub fn get(&self, l: usize, j: usize, active_bits: u32) -> f64 {
        self.r[l][j][active_bits as usize]
    }

    /// The all-active (conservative) rate, the smallest atom.
    #[inline]
    pub fn conservative(&self, l: usize, j: usize) -> f64 {
        self.r[l][j][(1 << self.n) - 1]
    }
}

/// Evaluates the full [l][j][I] rate tensor; each entry is independent, so
/// the parallel fill is bit-identical to the sequential one.
pub fn mixture_rates(table: &EfficiencyTable, alloc: &Allocation) -> MixtureRates {
    let (n, k) = (alloc.n, alloc.k);
    let per_group = crate::par::indexed_map(2 * k, |lj| {
        let (l, j) = (lj / k, lj % k);
        (0u32..1 << n)
            .map(|bits| serving_active_rate(table, &alloc.x[l], l, j, Pattern(bits)))
            .collect::<Vec<f64>>()
    });
    let mut r = vec![Vec::with_capacity(k), Vec::with_capacity(k)];
    for (lj, rates) in per_group.into_iter().enumerate() {
        r[lj / k].push(rates);
    }
    MixtureRates { n, r }
}

#[derive(Debug, Clone, Copy)]
pub struct FixedPointOptions {
    /// Stop when the sup-norm change of σ over one sweep drops below this.
    pub eps: f64,
    pub max_iterations: usize,
    /// Atom-probability floor for mixture sums.
    pub p_floor: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions { eps: 1e-6, max_iterations: 10_000, p_floor: P_FLOOR }
    }
}

/// Iterates the activity maps to a fixed point at a frozen allocation:
/// σ ← mixture utilization under p, ρ ← band-weighted average of its
/// groups' σ, p ← product form of ρ. Stops when σ changes by less than
/// `eps` *and* the utilization inequality σ ≥ Σ_I p λ/r holds within 1e-8
/// against the freshly rebuilt p, so the output is feasible for the
/// product-form block of the joint problem; a cap hit returns the last
/// iterate flagged non-converged.
pub fn fixed_point_srp(
    alloc: &Allocation,
    rates: &MixtureRates,
    start: &UtilizationState,
    opts: &FixedPointOptions,
) -> UtilizationState {
    let (n, k) = (alloc.n, alloc.k);
    // Per-AP constants of the ρ map: total band and per-group share sums.
    let mut y_used = vec![vec![0.0f64; n]; 2];
    let mut x_sum = vec![vec![vec![0.0f64; k]; n]; 2];
    for l in 0..2 {
        for bits in 1u32..1 << n {
            let a = Pattern(bits);
            let ya = alloc.y_val(l, a);
            for i in a.iter() {
                y_used[l][i] += ya;
                for j in 0..k {
                    x_sum[l][i][j] += alloc.x_val(l, a, i, j);
                }
            }
        }
    }

    let mixture_sigma = |p: &[Vec<f64>], clamped: &mut usize| -> Vec<Vec<f64>> {
        let mut sigma = vec![vec![0.0f64; k]; 2];
        for l in 0..2 {
            for j in 0..k {
                let v = alloc.lambda_split[l][j];
                let mut s = 0.0;
                if v > 0.0 {
                    for (bits, &pi) in p[l].iter().enumerate() {
                        if pi >= opts.p_floor {
                            s += pi * v / rates.get(l, j, bits as u32);
                        }
                    }
                }
                if s > 1.0 {
                    s = 1.0;
                    *clamped += 1;
                }
                sigma[l][j] = s;
            }
        }
        sigma
    };

    let mut sigma = start.sigma.clone();
    let mut rho = start.rho.clone();
    let mut p = start.p.clone();
    let mut clamped = 0usize;
    let mut iterations = 0usize;
    let mut converged = false;
    while iterations < opts.max_iterations {
        let next = mixture_sigma(&p, &mut clamped);
        let delta = next
            .iter()
            .zip(sigma.iter())
            .flat_map(|(a, b)| a.iter().zip(b.iter()))
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        sigma = next;
        for l in 0..2 {
            for i in 0..n {
                let mut r = if y_used[l][i] > 0.0 {
                    (0..k).map(|j| sigma[l][j] * x_sum[l][i][j]).sum::<f64>() / y_used[l][i]
                } else {
                    0.0
                };
                if !(0.0..=1.0).contains(&r) {
                    r = r.clamp(0.0, 1.0);
                    clamped += 1;
                }
                rho[l][i] = r;
            }
            p[l] = product_form(&rho[l]);
        }
        iterations += 1;
        if delta < opts.eps {
            // Output feasibility probe: the utilization inequality against
            // the rebuilt p equals the next σ iterate, so keep iterating
            // while it would still rise materially.
            let mut probe_clamps = 0usize;
            let probe = mixture_sigma(&p, &mut probe_clamps);
            let rising = probe
                .iter()
                .zip(sigma.iter())
                .flat_map(|(a, b)| a.iter().zip(b.iter()))
                .any(|(nxt, cur)| nxt - cur > 1e-8);
            if !rising {
                converged = true;
                break;
            }
        }
    }
    UtilizationState { sigma, rho, p, iterations, converged, clamped }
}

#[derive(Debug, Clone)]
pub struct P2Config {
    pub p1: P1Config,
    /// Outer stop: sup-norm change of the link shares between passes.
    pub eps_outer: f64,
    pub max_outer: usize,
    pub fixed_point: FixedPointOptions,
    /// Atom-probability floor shared by the allocation subproblem.
    pub p_floor: f64,
}

impl Default for P2Config {
    fn default() -> Self {
        P2Config {
            p1: P1Config::default(),
            eps_outer: 1e-4,
            max_outer: 50,
            fixed_point: FixedPointOptions::default(),
            p_floor: P_FLOOR,
        }
    }
}

#[derive(Debug)]
pub enum P2Outcome {
    Solved(Box<SolvedP2>),
    OverCapacity(CapacityVerdict),
}

#[derive(Debug, Clone)]
pub struct SolvedP2 {
    pub allocation: Allocation,
    pub state: UtilizationState,
    /// Mixture-model delay report at the returned allocation and state.
    pub delay: DelayReport,
    /// Analytic mixture objective after each outer pass.
    pub objective_trace: Vec<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
    /// Whether every activity fixed point run during the outer loop reached
    /// its tolerance within the iteration budget.
    pub fixed_point_all_converged: bool,
    /// Passes whose utilization bounds had to be uniformly relaxed to regain
    /// a feasible starting point after the activity state moved.
    pub relaxed_passes: usize,
}

/// Mixture atoms and relaxed utilization bounds frozen for one allocation
/// subproblem.
struct FrozenActivity {
    kept: [Vec<(u32, f64)>; 2],
    /// [l][j] upper bounds actually imposed on the mixture utilization.
    sigma_used: Vec<Vec<f64>>,
    /// [l][j] queues whose utilization bound is already implied by the
    /// stability-margin constraint and is therefore omitted from the
    /// subproblems (see [`freeze_activity`]).
    redundant: [Vec<bool>; 2],
    relaxed: bool,
}

fn freeze_activity(
    machine: &P1Machine,
    state: &UtilizationState,
    start: &Allocation,
    rates: &MixtureRates,
    p_floor: f64,
) -> FrozenActivity {
    let k = machine.k();
    let kept = [state.kept_atoms(0, p_floor), state.kept_atoms(1, p_floor)];
    // Uniform relaxation: the smallest factor making the start allocation
    // obey every utilization bound, padded so the barrier starts strictly
    // inside.
    let mut factor = 1.0f64;
    for l in 0..2 {
        for j in 0..k {
            let v = start.lambda_split[l][j];
            if v <= 0.0 {
                continue;
            }
            let g: f64 =
                kept[l].iter().map(|&(bits, p)| p * v / rates.get(l, j, bits)).sum();
            if state.sigma[l][j] > 0.0 {
                factor = factor.max(g / state.sigma[l][j]);
            }
        }
    }
    let relaxed = factor > 1.0 + 1e-12;
    let sigma_used: Vec<Vec<f64>> = (0..2)
        .map(|l| {
            (0..k)
                .map(|j| state.sigma[l][j] * factor * (1.0 + 1e-6) + 1e-9)
                .collect::<Vec<f64>>()
        })
        .collect();
    // Redundancy presolve: the margin rows keep every atom's rate at or above
    // (1 + ε)·v (atom rates dominate the conservative rate), so the mixture
    // utilization can never exceed (Σ kept p)/(1 + ε). Bounds at or above
    // that level are implied and get dropped — in particular at the all-active
    // state, where the subproblems then coincide exactly with the
    // conservative ones.
    let margin = 1.0 + machine.cfg().stability_margin;
    let redundant = [0, 1].map(|l| {
        let kept_mass: f64 = kept[l].iter().map(|&(_, p)| p).sum();
        (0..k).map(|j| sigma_used[l][j] * margin >= kept_mass).collect::<Vec<bool>>()
    });
    FrozenActivity { kept, sigma_used, redundant, relaxed }
}

/// One allocation subproblem at frozen activity: the same λ/x alternation as
/// the conservative solve, with every delay replaced by its active-set
/// mixture and one smooth utilization-budget constraint per queue.
fn solve_p3_at(
    machine: &P1Machine,
    activity: &FrozenActivity,
    start: Allocation,
) -> Result<(Allocation, AlternateReport)> {
    let k = machine.k();
    let top = machine.top();
    let table = machine.table();
    let w = machine.weight();
    let margin = 1.0 + machine.cfg().stability_margin;
    let full = Pattern(((1u64 << machine.n()) - 1) as u32);

    let xy_subproblem = |splits: &[[f64; 2]]| -> ConvexSubproblem {
        let mut sub = ConvexSubproblem::new(machine.xy_vars());
        sub.lower_bounds = vec![0.0; machine.xy_vars()];
        for l in 0..2 {
            for j in 0..k {
                sub.groups
                    .push((0..machine.slots().len()).map(|s| machine.x_var(l, s, j)).collect());
            }
        }
        for l in 0..2 {
            for j in 0..k {
                let v = splits[j][l];
                let nu = top.ue_groups[j].vacation_second_moment;
                let cons_row = sub.add_row(machine.rate_row(l, j));
                sub.ineqs.push(AffineIneq { row: cons_row, shift: -margin * v });
                let bounded = !activity.redundant[l][j];
                let mut atoms = Vec::with_capacity(activity.kept[l].len());
                for &(bits, p) in &activity.kept[l] {
                    let row = if bits == full.0 {
                        cons_row
                    } else {
                        sub.add_row(machine.atom_rate_row(l, j, Pattern(bits)))
                    };
                    if l == 0 {
                        sub.terms.push(Term::mm1_mass(row, v, w * p));
                    } else {
                        sub.terms.push(Term::vacation_mass(row, v, nu, w * p));
                    }
                    if bounded {
                        atoms.push(SmoothAtom { row, shift: 0.0, c1: p * v });
                    }
                }
                if bounded {
                    sub.smooth_ineqs
                        .push(SmoothIneq { bound: activity.sigma_used[l][j], atoms });
                }
            }
        }
        machine.push_xy_structure(&mut sub);
        sub
    };

    let lambda_subproblem = |j: usize, rates: &MixtureRates| -> ConvexSubproblem {
        let mut sub = ConvexSubproblem::new(2);
        sub.lower_bounds = vec![0.0, 0.0];
        let nu = top.ue_groups[j].vacation_second_moment;
        for l in 0..2 {
            let urow = sub.add_row(SparseRow::new(vec![(l as u32, -1.0)]));
            let mut util_per_unit = 0.0;
            for &(bits, p) in &activity.kept[l] {
                let r = rates.get(l, j, bits);
                if l == 0 {
                    sub.terms.push(Term::mm1_mass_of_split(urow, r, w * p));
                } else {
                    sub.terms.push(Term::vacation_mass_of_split(urow, r, nu, w * p));
                }
                util_per_unit += p / r;
            }
            let mrow = sub.add_row(SparseRow::new(vec![(l as u32, -margin)]));
            sub.ineqs.push(AffineIneq { row: mrow, shift: rates.conservative(l, j) });
            if !activity.redundant[l][j] {
                let prow = sub.add_row(SparseRow::new(vec![(l as u32, -util_per_unit)]));
                sub.ineqs.push(AffineIneq { row: prow, shift: activity.sigma_used[l][j] });
            }
        }
        let cover = sub.add_row(SparseRow::new(vec![(0, 1.0), (1, 1.0)]));
        sub.ineqs.push(AffineIneq { row: cover, shift: -top.ue_groups[j].arrival_rate });
        sub
    };

    let objective = |alloc: &Allocation| -> f64 {
        let rates = mixture_rates(table, alloc);
        mixture_mass(top, alloc, &activity.kept, &rates)
    };

    let mut xy_phase = |state: &Allocation, sweep: usize| -> Result<Allocation> {
        let splits: Vec<[f64; 2]> =
            (0..k).map(|j| [state.lambda_split[0][j], state.lambda_split[1][j]]).collect();
        let sub = xy_subproblem(&splits);
        let opts = SolveOptions { warm_start: sweep > 0, ..machine.cfg().solver };
        let (z, rep) = solve_convex(&sub, &machine.xy_start(state), &opts)?;
        if rep.feasibility_residual > 1e-6 {
            return Ok(state.clone());
        }
        let mut next = state.clone();
        machine.write_xy(&z, &mut next);
        Ok(next)
    };
    let mut split_phase = |state: &Allocation, _sweep: usize| -> Result<Allocation> {
        let rates = mixture_rates(table, state);
        let solved: Vec<Result<[f64; 2]>> = crate::par::indexed_map(k, |j| {
            let sub = lambda_subproblem(j, &rates);
            let start = [state.lambda_split[0][j], state.lambda_split[1][j]];
            let (z, rep) = solve_convex(&sub, &start, &machine.cfg().solver)?;
            if rep.feasibility_residual > 1e-6 {
                return Ok(start);
            }
            Ok([z[0], z[1]])
        });
        let mut next = state.clone();
        for (j, r) in solved.into_iter().enumerate() {
            let v = r?;
            next.lambda_split[0][j] = v[0];
            next.lambda_split[1][j] = v[1];
        }
        Ok(next)
    };

    let (state, report) = alternate(
        start,
        objective,
        &mut [&mut xy_phase, &mut split_phase],
        &machine.cfg().alternate,
    );
    Ok((state, report))
}

/// Arrival-weighted total mixture delay mass (Λ × objective) at stored
/// splits; +∞ when any loaded atom is unstable. Atom contributions are
/// combined by fixed-order pairwise summation so parallel and sequential
/// builds agree bitwise.
fn mixture_mass(
    top: &Topology,
    alloc: &Allocation,
    kept: &[Vec<(u32, f64)>; 2],
    rates: &MixtureRates,
) -> f64 {
    let w = 1.0 / top.total_arrival_rate().max(f64::MIN_POSITIVE);
    let mut parts = Vec::with_capacity(2 * alloc.k * kept[0].len().max(1));
    for j in 0..alloc.k {
        let nu = top.ue_groups[j].vacation_second_moment;
        for l in 0..2 {
            let v = alloc.lambda_split[l][j];
            if v == 0.0 {
                continue;
            }
            for &(bits, p) in &kept[l] {
                let r = rates.get(l, j, bits);
                let t = if l == 0 { delay_mm1(r, v) } else { delay_vacation(r, v, nu) };
                if !t.is_finite() {
                    return f64::INFINITY;
                }
                parts.push(w * p * v * t);
            }
        }
    }
    crate::par::pairwise_sum(&parts)
}

/// Arrival-weighted network mean delay under the mixture model at the given
/// allocation and activity state.
pub fn objective_p2(
    top: &Topology,
    table: &EfficiencyTable,
    alloc: &Allocation,
    state: &UtilizationState,
) -> Result<f64> {
    alloc.validate(top)?;
    state.validate(alloc.n, alloc.k)?;
    let rates = mixture_rates(table, alloc);
    let kept = [state.kept_atoms(0, P_FLOOR), state.kept_atoms(1, P_FLOOR)];
    Ok(mixture_mass(top, alloc, &kept, &rates))
}

/// Per-queue mixture delays, expected service rates, and the objective at
/// the given allocation and activity state.
pub fn delay_report_p2(
    top: &Topology,
    table: &EfficiencyTable,
    alloc: &Allocation,
    state: &UtilizationState,
) -> Result<DelayReport> {
    alloc.validate(top)?;
    state.validate(alloc.n, alloc.k)?;
    let rates = mixture_rates(table, alloc);
    let kept = [state.kept_atoms(0, P_FLOOR), state.kept_atoms(1, P_FLOOR)];
    let k = alloc.k;
    let mut delay_s = Vec::with_capacity(k);
    let mut rate_pkts_s = Vec::with_capacity(k);
    let mut mass = 0.0;
    for j in 0..k {
        let nu = top.ue_groups[j].vacation_second_moment;
        let mut d = [0.0f64; 2];
        let mut r = [0.0f64; 2];
        for l in 0..2 {
            let v = alloc.lambda_split[l][j];
            let mut t = 0.0;
            for &(bits, p) in &kept[l] {
                let ra = rates.get(l, j, bits);
                r[l] += p * ra;
                t += p * if l == 0 { delay_mm1(ra, v) } else { delay_vacation(ra, v, nu) };
            }
            d[l] = t;
            if v > 0.0 {
                mass += v * t;
            }
        }
        delay_s.push(d);
        rate_pkts_s.push(r);
    }
    let total = top.total_arrival_rate();
    let objective_s = if total > 0.0 { mass / total } else { 0.0 };
    Ok(DelayReport { delay_s, rate_pkts_s, objective_s })
}

/// Scales stored splits to cover each group's arrival rate with equality;
/// utilizations and loads only shrink, so feasibility is preserved.
fn project_coverage(top: &Topology, alloc: &mut Allocation) {
    for (j, ue) in top.ue_groups.iter().enumerate() {
        let sum = alloc.lambda_split[0][j] + alloc.lambda_split[1][j];
        if sum > 0.0 {
            let scale = ue.arrival_rate / sum;
            alloc.lambda_split[0][j] *= scale;
            alloc.lambda_split[1][j] *= scale;
        }
    }
}

/// Solves the allocation subproblem at a frozen activity state, starting
/// from a strictly feasible interior point (found by the shared heuristic
/// or max-margin program). With the all-active state the utilization bounds
/// are implied by the stability margins and dropped, so the solve reduces
/// exactly — same subproblems, same alternation path — to the conservative
/// one.
pub fn solve_p3(
    top: &Topology,
    table: &EfficiencyTable,
    state: &UtilizationState,
    cfg: &P2Config,
) -> Result<(Allocation, DelayReport)> {
    let machine = P1Machine::unrestricted(top, table, cfg.p1.clone(), Scheme::Utilization)?;
    state.validate(machine.n(), machine.k())?;
    if top.total_arrival_rate() <= 0.0 {
        // No traffic: every allocation has zero delay mass; return the
        // interior heuristic point.
        let alloc = machine.interior_init();
        let delay = delay_report_p2(top, table, &alloc, state)?;
        return Ok((alloc, delay));
    }
    let init = stable_start(&machine)?;
    let rates = mixture_rates(table, &init);
    let activity = freeze_activity(&machine, state, &init, &rates, cfg.p_floor);
    let (mut alloc, _report) = solve_p3_at(&machine, &activity, init)?;
    project_coverage(top, &mut alloc);
    let delay = delay_report_p2(top, table, &alloc, state)?;
    Ok((alloc, delay))
}

/// Strictly stable interior start or an infeasible-start error.
fn stable_start(machine: &P1Machine) -> Result<Allocation> {
    let init = machine.interior_init();
    if machine.strictly_stable(&init) {
        return Ok(init);
    }
    let (alloc, margin) = machine.margin_lp()?;
    if margin <= machine.margin_floor() {
        return Err(Error::InfeasibleStart(format!(
            "no strictly stable allocation exists (best margin {margin:.3e} packets/s)"
        )));
    }
    Ok(alloc)
}

/// Full utilization-dependent solve: alternate the allocation subproblem
/// with the activity fixed point, tracking the best analytic objective seen.
/// The first pass starts from the all-active state, making it exactly the
/// conservative solve; stability of every positive-probability atom requires
/// stability of the all-active atom, so the capacity region (and the
/// over-capacity verdict) coincides with the conservative one.
pub fn solve_p2(top: &Topology, table: &EfficiencyTable, cfg: &P2Config) -> Result<P2Outcome> {
    if !(top.total_arrival_rate() > 0.0) {
        return Err(Error::Domain("total arrival rate must be positive".into()));
    }
    let machine = P1Machine::unrestricted(top, table, cfg.p1.clone(), Scheme::Utilization)?;
    let init = match stable_start(&machine) {
        Ok(a) => a,
        Err(Error::InfeasibleStart(_)) => {
            let verdict = machine.capacity(&machine.loads())?;
            return Ok(P2Outcome::OverCapacity(CapacityVerdict {
                max_load_scale: verdict.max_load_scale.min(1.0),
                bottleneck: verdict.bottleneck,
            }));
        }
        Err(e) => return Err(e),
    };

    let mut state = UtilizationState::conservative_start(machine.n(), machine.k());
    let mut current = init;
    let mut prev_x: Option<Vec<Vec<f64>>> = None;
    let mut best: Option<(Allocation, UtilizationState, f64)> = None;
    let mut trace = Vec::new();
    let mut relaxed_passes = 0usize;
    let mut converged = false;
    let mut fixed_point_all_converged = true;
    let mut outer_iterations = 0usize;

    for _outer in 0..cfg.max_outer {
        let rates = mixture_rates(table, &current);
        let activity = freeze_activity(&machine, &state, &current, &rates, cfg.p_floor);
        if activity.relaxed {
            relaxed_passes += 1;
        }
        let (alloc, _report) = solve_p3_at(&machine, &activity, current.clone())?;

        let rates = mixture_rates(table, &alloc);
        let next_state = fixed_point_srp(&alloc, &rates, &state, &cfg.fixed_point);
        fixed_point_all_converged &= next_state.converged;
        let kept = [
            next_state.kept_atoms(0, cfg.p_floor),
            next_state.kept_atoms(1, cfg.p_floor),
        ];
        let objective = mixture_mass(top, &alloc, &kept, &rates);
        trace.push(objective);
        if best.as_ref().map_or(true, |(_, _, b)| objective < *b) {
            best = Some((alloc.clone(), next_state.clone(), objective));
        }

        let dx = prev_x.as_ref().map(|px| {
            px.iter()
                .zip(alloc.x.iter())
                .flat_map(|(a, b)| a.iter().zip(b.iter()))
                .fold(0.0f64, |m, (u, v)| m.max((u - v).abs()))
        });
        prev_x = Some(alloc.x.clone());
        state = next_state;
        current = alloc;
        outer_iterations += 1;
        if let Some(dx) = dx {
            if dx < cfg.eps_outer {
                converged = true;
                break;
            }
        }
    }

    let (mut allocation, state, _) = best.expect("at least one outer pass ran");
    project_coverage(top, &mut allocation);
    let delay = delay_report_p2(top, table, &allocation, &state)?;
    Ok(P2Outcome::Solved(Box::new(SolvedP2 {
        allocation,
        state,
        delay,
        objective_trace: trace,
        outer_iterations,
        converged,
        fixed_point_all_converged,
        relaxed_passes,
    })))
}

/// Largest uniform per-group load stabilizable under the utilization scheme.
/// Every positive-probability active set includes the all-active atom, whose
/// rate is the conservative one, so the stability region — and therefore the
/// capacity — equals the conservative scheme's.
pub fn uniform_capacity(top: &Topology, table: &EfficiencyTable, cfg: &P2Config) -> Result<f64> {
    let machine = P1Machine::unrestricted(top, table, cfg.p1.clone(), Scheme::Utilization)?;
    Ok(machine.capacity(&vec![1.0; top.k_groups()])?.max_load_scale)
}
