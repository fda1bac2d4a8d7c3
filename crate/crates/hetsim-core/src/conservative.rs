//! Conservative allocation: joint optimization of band fractions, link
//! shares, and traffic splits under all-active interference rates, plus the
//! sparsity audit of solutions (pattern counts and multi-AP service counts).

use crate::model::{
    conservative_rate, enumerate_patterns, x_index, x_len, EfficiencyTable, Pattern, Topology,
};
use crate::optim::{
    alternate, solve_convex, AffineIneq, AlternateOptions, AlternateReport, ConvexSubproblem,
    SolveOptions, SparseRow, Term,
};
use crate::queueing::{delay_mm1, delay_vacation};
use crate::{Error, Result};

/// Band fractions below this count as zero in sparsity accounting.
pub const ZERO_THRESHOLD: f64 = 1e-5;
/// Relative stability margin: solvers keep r ≥ (1+ε)·λ away from the pole.
pub const STABILITY_MARGIN: f64 = 1e-3;
/// Strictly positive floor for split variables of zero-traffic groups.
const SPLIT_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Conservative,
    Utilization,
    Orthogonal,
    FullReuse,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Conservative => "conservative",
            Scheme::Utilization => "utilization",
            Scheme::Orthogonal => "orthogonal",
            Scheme::FullReuse => "full-reuse",
        }
    }

    pub fn parse(s: &str) -> Result<Scheme> {
        match s {
            "conservative" => Ok(Scheme::Conservative),
            "utilization" => Ok(Scheme::Utilization),
            "orthogonal" => Ok(Scheme::Orthogonal),
            "full-reuse" | "full_reuse" => Ok(Scheme::FullReuse),
            other => Err(Error::Validation(format!("unknown scheme `{other}`"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A complete spectrum/association/traffic-split decision.
#[derive(Debug, Clone)]
pub struct Allocation {
    pub n: usize,
    pub k: usize,
    /// Band fraction per RAT, indexed by pattern bits (entry 0 stays 0).
    pub y: Vec<Vec<f64>>,
    /// Flat link shares per RAT, indexed by `model::x_index`.
    pub x: Vec<Vec<f64>>,
    /// Traffic split per RAT and UE group, packets/s.
    pub lambda_split: Vec<Vec<f64>>,
    pub scheme: Scheme,
}

impl Allocation {
    pub fn zeros(n: usize, k: usize, scheme: Scheme) -> Allocation {
        Allocation {
            n,
            k,
            y: vec![vec![0.0; 1 << n]; 2],
            x: vec![vec![0.0; x_len(n, k)]; 2],
            lambda_split: vec![vec![0.0; k]; 2],
            scheme,
        }
    }

    pub fn y_val(&self, l: usize, a: Pattern) -> f64 {
        self.y[l][a.0 as usize]
    }

    pub fn x_val(&self, l: usize, a: Pattern, i: usize, j: usize) -> f64 {
        self.x[l][x_index(self.n, self.k, a, i, j)]
    }

    /// Validate the allocation invariants, naming the violated constraint.
    pub fn validate(&self, top: &Topology) -> Result<()> {
        let (n, k) = (self.n, self.k);
        if n != top.n_aps() || k != top.k_groups() {
            return Err(Error::Validation(format!(
                "allocation is {n} APs x {k} groups, topology is {} x {}",
                top.n_aps(),
                top.k_groups()
            )));
        }
        if self.y.len() != 2 || self.x.len() != 2 || self.lambda_split.len() != 2 {
            return Err(Error::Validation("allocation must cover exactly 2 RATs".into()));
        }
        for l in 0..2 {
            if self.y[l].len() != 1 << n || self.x[l].len() != x_len(n, k) || self.lambda_split[l].len() != k {
                return Err(Error::Validation(format!("allocation arrays for RAT {l} have wrong length")));
            }
            if self.y[l][0] != 0.0 {
                return Err(Error::Validation(format!("RAT {l}: empty pattern has nonzero band fraction")));
            }
            let ysum: f64 = self.y[l].iter().sum();
            if (ysum - 1.0).abs() > 1e-6 {
                return Err(Error::Validation(format!(
                    "RAT {l}: band fractions sum to {ysum}, expected 1 (band-partition equality)"
                )));
            }
            for (idx, &v) in self.y[l].iter().enumerate() {
                if !(v >= -1e-12) {
                    return Err(Error::Validation(format!("RAT {l}: y[{idx}] = {v} is negative")));
                }
            }
            for a in enumerate_patterns(n)? {
                for i in 0..n {
                    let mut used = 0.0;
                    for j in 0..k {
                        let xv = self.x[l][x_index(n, k, a, i, j)];
                        if !(xv >= -1e-12) {
                            return Err(Error::Validation(format!(
                                "RAT {l}: x[pattern {:#b}, AP {i}, UE {j}] = {xv} is negative",
                                a.0
                            )));
                        }
                        if !a.contains(i) && xv != 0.0 {
                            return Err(Error::Validation(format!(
                                "RAT {l}: x[pattern {:#b}, AP {i}, UE {j}] = {xv} but AP {i} is not in the pattern",
                                a.0
                            )));
                        }
                        used += xv;
                    }
                    if used > self.y[l][a.0 as usize] + 1e-8 {
                        return Err(Error::Validation(format!(
                            "RAT {l}: pattern {:#b} AP {i} allocates {used} above its band fraction {} (slot-consistency inequality)",
                            a.0, self.y[l][a.0 as usize]
                        )));
                    }
                }
            }
        }
        for (j, ue) in top.ue_groups.iter().enumerate() {
            let split = self.lambda_split[0][j] + self.lambda_split[1][j];
            if split < ue.arrival_rate - 1e-6 * (1.0 + ue.arrival_rate) {
                return Err(Error::Validation(format!(
                    "UE group {j}: splits sum to {split} < arrival rate {} (traffic-coverage inequality)",
                    ue.arrival_rate
                )));
            }
            if self.lambda_split.iter().any(|s| s[j] < -1e-12) {
                return Err(Error::Validation(format!("UE group {j}: negative split")));
            }
        }
        Ok(())
    }
}

/// Analytic per-queue delays and rates under conservative (all-active) rates.
#[derive(Debug, Clone)]
pub struct DelayReport {
    /// Seconds, `[j][l]`.
    pub delay_s: Vec<[f64; 2]>,
    /// Packets/s, `[j][l]`.
    pub rate_pkts_s: Vec<[f64; 2]>,
    /// Arrival-weighted network mean delay in seconds.
    pub objective_s: f64,
}

#[derive(Debug, Clone)]
pub struct SparsityReport {
    /// Patterns with band fraction above threshold, per RAT.
    pub pattern_counts: [usize; 2],
    /// UE groups served by at least two APs, per RAT.
    pub multi_ap_groups: [usize; 2],
    pub zero_threshold: f64,
    /// Structural bound on patterns per RAT at an optimum (k).
    pub pattern_bound: usize,
    /// Structural bound on multi-AP UE groups per RAT at an optimum (n − 1).
    pub multi_ap_bound: usize,
    pub pattern_bound_holds: [bool; 2],
    pub multi_ap_bound_holds: [bool; 2],
}

pub fn sparsity_check(alloc: &Allocation, zero_threshold: f64) -> SparsityReport {
    let (n, k) = (alloc.n, alloc.k);
    let mut pattern_counts = [0usize; 2];
    let mut multi_ap_groups = [0usize; 2];
    for l in 0..2 {
        pattern_counts[l] = alloc.y[l].iter().filter(|&&v| v > zero_threshold).count();
        for j in 0..k {
            let mut serving = 0;
            for i in 0..n {
                let total: f64 = enumerate_patterns(n)
                    .expect("allocation n within pattern budget")
                    .iter()
                    .filter(|a| a.contains(i))
                    .map(|&a| alloc.x[l][x_index(n, k, a, i, j)])
                    .sum();
                if total > zero_threshold {
                    serving += 1;
                }
            }
            if serving >= 2 {
                multi_ap_groups[l] += 1;
            }
        }
    }
    let pattern_bound = k;
    let multi_ap_bound = n.saturating_sub(1);
    SparsityReport {
        pattern_counts,
        multi_ap_groups,
        zero_threshold,
        pattern_bound,
        multi_ap_bound,
        pattern_bound_holds: [pattern_counts[0] <= pattern_bound, pattern_counts[1] <= pattern_bound],
        multi_ap_bound_holds: [multi_ap_groups[0] <= multi_ap_bound, multi_ap_groups[1] <= multi_ap_bound],
    }
}

/// Per-queue delays, rates, and the arrival-weighted objective under
/// conservative rates; +∞ delays mark unstable queues with positive splits.
pub fn delay_report(top: &Topology, table: &EfficiencyTable, alloc: &Allocation) -> Result<DelayReport> {
    alloc.validate(top)?;
    let k = alloc.k;
    let mut delay_s = Vec::with_capacity(k);
    let mut rate_pkts_s = Vec::with_capacity(k);
    let mut mass = 0.0;
    let total: f64 = top.total_arrival_rate();
    for j in 0..k {
        let mut d = [0.0f64; 2];
        let mut r = [0.0f64; 2];
        for l in 0..2 {
            r[l] = conservative_rate(table, &alloc.x[l], l, j);
            let v = alloc.lambda_split[l][j];
            d[l] = if l == 0 {
                delay_mm1(r[l], v)
            } else {
                delay_vacation(r[l], v, top.ue_groups[j].vacation_second_moment)
            };
            if v > 0.0 {
                mass += v * d[l];
            }
        }
        delay_s.push(d);
        rate_pkts_s.push(r);
    }
    let objective_s = if total > 0.0 { mass / total } else { 0.0 };
    Ok(DelayReport { delay_s, rate_pkts_s, objective_s })
}

/// Arrival-weighted network mean delay; +∞ if any loaded queue is unstable.
pub fn objective_p1(top: &Topology, table: &EfficiencyTable, alloc: &Allocation) -> Result<f64> {
    Ok(delay_report(top, table, alloc)?.objective_s)
}

#[derive(Debug, Clone)]
pub struct P1Config {
    pub stability_margin: f64,
    /// Initial traffic splits sum to (1+this)·λ so the coverage constraint
    /// starts strictly inside the feasible set.
    pub split_inflation: f64,
    pub solver: SolveOptions,
    pub alternate: AlternateOptions,
}

impl Default for P1Config {
    fn default() -> Self {
        P1Config {
            stability_margin: STABILITY_MARGIN,
            split_inflation: 1e-6,
            solver: SolveOptions::default(),
            alternate: AlternateOptions::default(),
        }
    }
}

#[derive(Debug)]
pub enum P1Outcome {
    Solved(Box<SolvedP1>),
    OverCapacity(CapacityVerdict),
}

#[derive(Debug, Clone)]
pub struct SolvedP1 {
    pub allocation: Allocation,
    pub delay: DelayReport,
    pub alternation: AlternateReport,
}

#[derive(Debug, Clone)]
pub struct CapacityVerdict {
    /// Largest uniform scale of the offered loads that still admits a stable
    /// allocation under this scheme's constraint set.
    pub max_load_scale: f64,
    pub bottleneck: String,
}

/// Solve the conservative allocation problem over all patterns.
pub fn solve_p1(top: &Topology, table: &EfficiencyTable, cfg: &P1Config) -> Result<P1Outcome> {
    let machine = P1Machine::unrestricted(top, table, cfg.clone(), Scheme::Conservative)?;
    machine.solve()
}

/// Largest uniform scale ζ of the topology's own arrival rates that admits a
/// stable conservative allocation.
pub fn max_stabilizable_scale(top: &Topology, table: &EfficiencyTable, cfg: &P1Config) -> Result<CapacityVerdict> {
    let machine = P1Machine::unrestricted(top, table, cfg.clone(), Scheme::Conservative)?;
    let loads: Vec<f64> = top.ue_groups.iter().map(|u| u.arrival_rate).collect();
    machine.capacity(&loads)
}

/// Largest uniform per-group load (packets/s) that admits a stable
/// conservative allocation: the capacity notion behind load-sweep plots.
pub fn uniform_capacity(top: &Topology, table: &EfficiencyTable, cfg: &P1Config) -> Result<f64> {
    let machine = P1Machine::unrestricted(top, table, cfg.clone(), Scheme::Conservative)?;
    Ok(machine.capacity(&vec![1.0; top.k_groups()])?.max_load_scale)
}

/// Interior, strictly feasible starting allocation: near-orthogonal bands,
/// link shares centered on each group's best AP, equal traffic splits, and a
/// linear-programming fallback when the heuristic point is not stable.
pub(crate) fn initial_allocation(top: &Topology, table: &EfficiencyTable, cfg: &P1Config) -> Result<Allocation> {
    let machine = P1Machine::unrestricted(top, table, cfg.clone(), Scheme::Conservative)?;
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

/// Shared P1 solve machinery, optionally restricted to a pattern subset with
/// frozen band fractions (the baseline allocators reuse it unchanged).
pub(crate) struct P1Machine<'a> {
    top: &'a Topology,
    table: &'a EfficiencyTable,
    pub(crate) patterns: Vec<Pattern>,
    slots: Vec<(Pattern, usize)>,
    /// `[l][pattern index]`; when set, band fractions are constants.
    frozen_y: Option<Vec<Vec<f64>>>,
    cfg: P1Config,
    scheme: Scheme,
    n: usize,
    k: usize,
    /// Pattern bits → index into `patterns`.
    pattern_pos: Vec<usize>,
}

const NO_PATTERN: usize = usize::MAX;

impl<'a> P1Machine<'a> {
    pub(crate) fn new(
        top: &'a Topology,
        table: &'a EfficiencyTable,
        patterns: Vec<Pattern>,
        frozen_y: Option<Vec<Vec<f64>>>,
        cfg: P1Config,
        scheme: Scheme,
    ) -> Result<Self> {
        let n = top.n_aps();
        let k = top.k_groups();
        if patterns.is_empty() {
            return Err(Error::Validation("pattern set must be nonempty".into()));
        }
        if let Some(fy) = &frozen_y {
            for yl in fy {
                if yl.len() != patterns.len() {
                    return Err(Error::Validation("frozen band fractions must match the pattern set".into()));
                }
                let s: f64 = yl.iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return Err(Error::Validation("frozen band fractions must sum to 1".into()));
                }
            }
        }
        let mut slots = Vec::new();
        for &a in &patterns {
            for i in a.iter() {
                slots.push((a, i));
            }
        }
        let mut pattern_pos = vec![NO_PATTERN; 1 << n];
        for (p, &a) in patterns.iter().enumerate() {
            pattern_pos[a.0 as usize] = p;
        }
        Ok(P1Machine { top, table, patterns, slots, frozen_y, cfg, scheme, n, k, pattern_pos })
    }

    pub(crate) fn unrestricted(
        top: &'a Topology,
        table: &'a EfficiencyTable,
        cfg: P1Config,
        scheme: Scheme,
    ) -> Result<Self> {
        let patterns = enumerate_patterns(top.n_aps())?;
        Self::new(top, table, patterns, None, cfg, scheme)
    }

    fn x_count(&self) -> usize {
        self.slots.len() * self.k
    }

    /// Free band-fraction variables per RAT. The last pattern's fraction is
    /// eliminated as 1 − Σ others, which removes the band-partition equality
    /// from the solver entirely (its nonnegativity becomes one inequality,
    /// whose barrier term is exactly the eliminated bound's log term).
    fn y_count(&self) -> usize {
        if self.frozen_y.is_some() { 0 } else { self.patterns.len() - 1 }
    }

    /// Index (into `patterns`) of the eliminated band fraction.
    fn y_elim(&self) -> usize {
        self.patterns.len() - 1
    }

    pub(crate) fn x_var(&self, l: usize, s: usize, j: usize) -> u32 {
        (l * self.x_count() + s * self.k + j) as u32
    }

    fn y_var(&self, l: usize, p: usize) -> u32 {
        debug_assert!(p < self.y_count());
        (2 * self.x_count() + l * self.y_count() + p) as u32
    }

    pub(crate) fn xy_vars(&self) -> usize {
        2 * self.x_count() + 2 * self.y_count()
    }

    pub(crate) fn loads(&self) -> Vec<f64> {
        self.top.ue_groups.iter().map(|u| u.arrival_rate).collect()
    }

    pub(crate) fn weight(&self) -> f64 {
        1.0 / self.top.total_arrival_rate().max(f64::MIN_POSITIVE)
    }

    pub(crate) fn margin_floor(&self) -> f64 {
        let max_load = self.top.ue_groups.iter().map(|u| u.arrival_rate).fold(0.0f64, f64::max);
        1e-9 * (1.0 + max_load)
    }

    pub(crate) fn top(&self) -> &Topology {
        self.top
    }

    pub(crate) fn table(&self) -> &EfficiencyTable {
        self.table
    }

    pub(crate) fn cfg(&self) -> &P1Config {
        &self.cfg
    }

    pub(crate) fn slots(&self) -> &[(Pattern, usize)] {
        &self.slots
    }

    pub(crate) fn k(&self) -> usize {
        self.k
    }

    pub(crate) fn n(&self) -> usize {
        self.n
    }

    /// Rate row for (l, j): Σ over slots of s_{i,j}^{A,l}·x.
    pub(crate) fn rate_row(&self, l: usize, j: usize) -> SparseRow {
        SparseRow::new(self.rate_entries(l, j))
    }

    /// Rate row for (l, j) when exactly `active` APs transmit, with the
    /// serving AP always counted active: coefficients are the efficiencies
    /// at pattern (A ∩ active) ∪ {i} per slot.
    pub(crate) fn atom_rate_row(&self, l: usize, j: usize, active: Pattern) -> SparseRow {
        let mut entries = Vec::new();
        for (s, &(a, i)) in self.slots.iter().enumerate() {
            let coef = self.table.get(l, a.intersect(active).with(i), i, j);
            if coef > 0.0 {
                entries.push((self.x_var(l, s, j), coef));
            }
        }
        SparseRow::new(entries)
    }

    fn rate_entries(&self, l: usize, j: usize) -> Vec<(u32, f64)> {
        let mut entries = Vec::new();
        for (s, &(a, i)) in self.slots.iter().enumerate() {
            let coef = self.table.get(l, a, i, j);
            if coef > 0.0 {
                entries.push((self.x_var(l, s, j), coef));
            }
        }
        entries
    }

    /// Append the spectrum-structure inequalities shared by every variant of
    /// the (x, y) problem: per-slot consistency (link shares within the
    /// pattern's band fraction) and nonnegativity of the eliminated fraction.
    pub(crate) fn push_xy_structure(&self, sub: &mut ConvexSubproblem) {
        for l in 0..2 {
            for (s, &(a, _i)) in self.slots.iter().enumerate() {
                let mut entries: Vec<(u32, f64)> =
                    (0..self.k).map(|j| (self.x_var(l, s, j), -1.0)).collect();
                let p = self.pattern_pos[a.0 as usize];
                let shift = match &self.frozen_y {
                    Some(fy) => fy[l][p],
                    None if p < self.y_elim() => {
                        entries.push((self.y_var(l, p), 1.0));
                        0.0
                    }
                    None => {
                        // Eliminated fraction: y_e = 1 − Σ other fractions.
                        for q in 0..self.y_count() {
                            entries.push((self.y_var(l, q), -1.0));
                        }
                        1.0
                    }
                };
                let row = sub.add_row(SparseRow::new(entries));
                sub.ineqs.push(AffineIneq { row, shift });
            }
            if self.frozen_y.is_none() && self.y_count() > 0 {
                let entries: Vec<(u32, f64)> =
                    (0..self.y_count()).map(|q| (self.y_var(l, q), -1.0)).collect();
                let row = sub.add_row(SparseRow::new(entries));
                sub.ineqs.push(AffineIneq { row, shift: 1.0 });
            }
        }
    }

    /// The joint (x, y) subproblem at fixed traffic splits.
    fn xy_subproblem(&self, splits: &[[f64; 2]]) -> ConvexSubproblem {
        let mut sub = ConvexSubproblem::new(self.xy_vars());
        sub.lower_bounds = vec![0.0; self.xy_vars()];
        for l in 0..2 {
            for j in 0..self.k {
                sub.groups.push((0..self.slots.len()).map(|s| self.x_var(l, s, j)).collect());
            }
        }
        let w = self.weight();
        let margin = 1.0 + self.cfg.stability_margin;
        for l in 0..2 {
            for j in 0..self.k {
                let row = sub.add_row(self.rate_row(l, j));
                let v = splits[j][l];
                if l == 0 {
                    sub.terms.push(Term::mm1_mass(row, v, w));
                } else {
                    sub.terms.push(Term::vacation_mass(row, v, self.top.ue_groups[j].vacation_second_moment, w));
                }
                sub.ineqs.push(AffineIneq { row, shift: -margin * v });
            }
        }
        self.push_xy_structure(&mut sub);
        sub
    }

    pub(crate) fn xy_start(&self, alloc: &Allocation) -> Vec<f64> {
        let mut z = vec![0.0; self.xy_vars()];
        for l in 0..2 {
            for (s, &(a, i)) in self.slots.iter().enumerate() {
                for j in 0..self.k {
                    z[self.x_var(l, s, j) as usize] = alloc.x_val(l, a, i, j);
                }
            }
            if self.frozen_y.is_none() {
                for p in 0..self.y_count() {
                    z[self.y_var(l, p) as usize] = alloc.y_val(l, self.patterns[p]);
                }
            }
        }
        z
    }

    pub(crate) fn write_xy(&self, z: &[f64], alloc: &mut Allocation) {
        for l in 0..2 {
            alloc.x[l].iter_mut().for_each(|v| *v = 0.0);
            for (s, &(a, i)) in self.slots.iter().enumerate() {
                for j in 0..self.k {
                    alloc.x[l][x_index(self.n, self.k, a, i, j)] = z[self.x_var(l, s, j) as usize];
                }
            }
            if self.frozen_y.is_none() {
                alloc.y[l].iter_mut().for_each(|v| *v = 0.0);
                let mut rest = 1.0;
                for p in 0..self.y_count() {
                    let v = z[self.y_var(l, p) as usize];
                    alloc.y[l][self.patterns[p].0 as usize] = v;
                    rest -= v;
                }
                alloc.y[l][self.patterns[self.y_elim()].0 as usize] = rest.max(0.0);
            }
        }
    }

    fn rates(&self, alloc: &Allocation) -> Vec<[f64; 2]> {
        (0..self.k)
            .map(|j| {
                [
                    conservative_rate(self.table, &alloc.x[0], 0, j),
                    conservative_rate(self.table, &alloc.x[1], 1, j),
                ]
            })
            .collect()
    }

    /// Per-group traffic-split subproblem at fixed rates: two variables.
    fn lambda_subproblem(&self, j: usize, rates: [f64; 2]) -> ConvexSubproblem {
        let mut sub = ConvexSubproblem::new(2);
        sub.lower_bounds = vec![0.0, 0.0];
        let w = self.weight();
        let margin = 1.0 + self.cfg.stability_margin;
        let nu = self.top.ue_groups[j].vacation_second_moment;
        for l in 0..2 {
            let urow = sub.add_row(SparseRow::new(vec![(l as u32, -1.0)]));
            if l == 0 {
                sub.terms.push(Term::mm1_mass_of_split(urow, rates[l], w));
            } else {
                sub.terms.push(Term::vacation_mass_of_split(urow, rates[l], nu, w));
            }
            let mrow = sub.add_row(SparseRow::new(vec![(l as u32, -margin)]));
            sub.ineqs.push(AffineIneq { row: mrow, shift: rates[l] });
        }
        let cover = sub.add_row(SparseRow::new(vec![(0, 1.0), (1, 1.0)]));
        sub.ineqs.push(AffineIneq { row: cover, shift: -self.top.ue_groups[j].arrival_rate });
        sub
    }

    /// Objective used during alternation: splits as stored (coverage still
    /// an inequality), conservative rates, exact closed-form delay masses.
    ///
    /// The mixture objective of the utilization solve degenerates to this one
    /// when every AP is always active; the accumulation (part order and the
    /// pairwise reduction) must stay structurally identical to its mixture
    /// counterpart so both solvers trace the same alternation path in that
    /// limit.
    fn alternation_objective(&self, alloc: &Allocation) -> f64 {
        let w = self.weight();
        let mut parts = Vec::with_capacity(2 * self.k);
        for j in 0..self.k {
            let nu = self.top.ue_groups[j].vacation_second_moment;
            for l in 0..2 {
                let v = alloc.lambda_split[l][j];
                if v == 0.0 {
                    continue;
                }
                let r = conservative_rate(self.table, &alloc.x[l], l, j);
                let t = if l == 0 { delay_mm1(r, v) } else { delay_vacation(r, v, nu) };
                if !t.is_finite() {
                    return f64::INFINITY;
                }
                parts.push(w * v * t);
            }
        }
        crate::par::pairwise_sum(&parts)
    }

    /// Heuristic interior point: near-orthogonal bands (or the frozen ones),
    /// every slot share strictly positive with emphasis on each group's best
    /// AP, splits slightly inflated above half the offered load.
    pub(crate) fn interior_init(&self) -> Allocation {
        let (gamma, delta, spread) = (1e-3, 1e-3, 1e-3);
        let mut alloc = Allocation::zeros(self.n, self.k, self.scheme);
        for l in 0..2 {
            match &self.frozen_y {
                Some(fy) => {
                    for (p, &a) in self.patterns.iter().enumerate() {
                        alloc.y[l][a.0 as usize] = fy[l][p];
                    }
                }
                None => {
                    let singles: Vec<usize> = self
                        .patterns
                        .iter()
                        .enumerate()
                        .filter(|(_, a)| a.len() == 1)
                        .map(|(p, _)| p)
                        .collect();
                    for (p, &a) in self.patterns.iter().enumerate() {
                        let ortho = if singles.contains(&p) { 1.0 / singles.len() as f64 } else { 0.0 };
                        alloc.y[l][a.0 as usize] =
                            (1.0 - gamma) * ortho + gamma / self.patterns.len() as f64;
                    }
                    if singles.is_empty() {
                        // No singleton patterns available: uniform spread.
                        for &a in &self.patterns {
                            alloc.y[l][a.0 as usize] = 1.0 / self.patterns.len() as f64;
                        }
                    }
                }
            }
            for &(a, i) in &self.slots {
                let ya = alloc.y[l][a.0 as usize];
                for j in 0..self.k {
                    let best = a
                        .iter()
                        .max_by(|&p, &q| {
                            self.table
                                .get(l, a, p, j)
                                .partial_cmp(&self.table.get(l, a, q, j))
                                .expect("efficiencies are finite")
                        })
                        .expect("pattern is nonempty");
                    let emphasis = if i == best { 1.0 - spread } else { 0.0 };
                    let share = (emphasis + spread / a.len() as f64) * (1.0 - delta) / self.k as f64;
                    alloc.x[l][x_index(self.n, self.k, a, i, j)] = ya * share;
                }
            }
        }
        for (j, ue) in self.top.ue_groups.iter().enumerate() {
            let v = (ue.arrival_rate * (1.0 + self.cfg.split_inflation) / 2.0).max(SPLIT_FLOOR);
            alloc.lambda_split[0][j] = v;
            alloc.lambda_split[1][j] = v;
        }
        alloc
    }

    /// True when every queue's rate strictly clears the margined split.
    pub(crate) fn strictly_stable(&self, alloc: &Allocation) -> bool {
        let margin = 1.0 + self.cfg.stability_margin;
        let rates = self.rates(alloc);
        (0..self.k).all(|j| {
            (0..2).all(|l| rates[j][l] - margin * alloc.lambda_split[l][j] > 0.0)
        })
    }

    /// Max-margin linear program: the largest uniform slack m such that every
    /// queue satisfies r ≥ (1+ε)·v + m with coverage and consistency intact.
    pub(crate) fn margin_lp(&self) -> Result<(Allocation, f64)> {
        let base = self.xy_vars();
        let v_var = |l: usize, j: usize| (base + l * self.k + j) as u32;
        let m_var = (base + 2 * self.k) as u32;
        let mut sub = ConvexSubproblem::new(base + 2 * self.k + 1);
        let max_load = self.loads().iter().fold(0.0f64, |m, &v| m.max(v));
        sub.lower_bounds = vec![0.0; sub.n_vars];
        sub.lower_bounds[m_var as usize] = -10.0 * (1.0 + max_load);
        sub.linear.push((m_var, -1.0));
        let margin = 1.0 + self.cfg.stability_margin;
        for l in 0..2 {
            for j in 0..self.k {
                let mut entries = self.rate_entries(l, j);
                entries.push((v_var(l, j), -margin));
                entries.push((m_var, -1.0));
                let row = sub.add_row(SparseRow::new(entries));
                sub.ineqs.push(AffineIneq { row, shift: 0.0 });
            }
        }
        self.push_xy_structure(&mut sub);
        for (j, ue) in self.top.ue_groups.iter().enumerate() {
            let row = sub.add_row(SparseRow::new(vec![(v_var(0, j), 1.0), (v_var(1, j), 1.0)]));
            sub.ineqs.push(AffineIneq { row, shift: -ue.arrival_rate });
        }

        let init = self.interior_init();
        let mut z0 = self.xy_start(&init);
        z0.resize(sub.n_vars, 0.0);
        for l in 0..2 {
            for j in 0..self.k {
                z0[v_var(l, j) as usize] = init.lambda_split[l][j];
            }
        }
        let rates = self.rates(&init);
        let worst = (0..self.k)
            .flat_map(|j| (0..2).map(move |l| (j, l)))
            .map(|(j, l)| rates[j][l] - margin * init.lambda_split[l][j])
            .fold(f64::INFINITY, f64::min);
        z0[m_var as usize] = worst - 0.1 * (1.0 + worst.abs());

        let (z, _rep) = solve_convex(&sub, &z0, &SolveOptions::default())?;
        let mut alloc = Allocation::zeros(self.n, self.k, self.scheme);
        self.write_xy(&z, &mut alloc);
        if let Some(fy) = &self.frozen_y {
            for l in 0..2 {
                for (p, &a) in self.patterns.iter().enumerate() {
                    alloc.y[l][a.0 as usize] = fy[l][p];
                }
            }
        }
        for l in 0..2 {
            for j in 0..self.k {
                alloc.lambda_split[l][j] = z[v_var(l, j) as usize];
            }
        }
        Ok((alloc, z[m_var as usize]))
    }

    /// Max-scale linear program: the largest ζ such that splits covering
    /// ζ·base_loads stay within margined rates. Exact analogue of a
    /// feasibility bisection, solved directly.
    pub(crate) fn capacity(&self, base_loads: &[f64]) -> Result<CapacityVerdict> {
        let base = self.xy_vars();
        let v_var = |l: usize, j: usize| (base + l * self.k + j) as u32;
        let zeta_var = (base + 2 * self.k) as u32;
        let mut sub = ConvexSubproblem::new(base + 2 * self.k + 1);
        sub.lower_bounds = vec![0.0; sub.n_vars];
        sub.linear.push((zeta_var, -1.0));
        let margin = 1.0 + self.cfg.stability_margin;
        for l in 0..2 {
            for j in 0..self.k {
                let mut entries = self.rate_entries(l, j);
                entries.push((v_var(l, j), -margin));
                let row = sub.add_row(SparseRow::new(entries));
                sub.ineqs.push(AffineIneq { row, shift: 0.0 });
            }
        }
        self.push_xy_structure(&mut sub);
        for (j, &bl) in base_loads.iter().enumerate() {
            if bl > 0.0 {
                let row = sub.add_row(SparseRow::new(vec![
                    (v_var(0, j), 1.0),
                    (v_var(1, j), 1.0),
                    (zeta_var, -bl),
                ]));
                sub.ineqs.push(AffineIneq { row, shift: 0.0 });
            }
        }

        let init = self.interior_init();
        let mut z0 = self.xy_start(&init);
        z0.resize(sub.n_vars, 0.0);
        let rates = self.rates(&init);
        for l in 0..2 {
            for j in 0..self.k {
                z0[v_var(l, j) as usize] = rates[j][l] / (2.0 * margin);
            }
        }
        let mut zeta0 = f64::INFINITY;
        for (j, &bl) in base_loads.iter().enumerate() {
            if bl > 0.0 {
                let cover = (z0[v_var(0, j) as usize] + z0[v_var(1, j) as usize]) / bl;
                zeta0 = zeta0.min(cover);
            }
        }
        if !zeta0.is_finite() {
            return Err(Error::Domain("capacity query needs at least one positive base load".into()));
        }
        z0[zeta_var as usize] = 0.5 * zeta0;

        let (z, _rep) = solve_convex(&sub, &z0, &SolveOptions::default())?;
        let zeta = z[zeta_var as usize];
        // Bottleneck: the queue with the least margined-rate slack per unit
        // of carried load at the capacity point.
        let mut worst = (0.0f64, f64::INFINITY);
        for j in 0..self.k {
            for l in 0..2 {
                let mut r = 0.0;
                for (s, &(a, i)) in self.slots.iter().enumerate() {
                    r += self.table.get(l, a, i, j) * z[self.x_var(l, s, j) as usize];
                }
                let v = z[v_var(l, j) as usize];
                let slack = (r - margin * v) / (1.0 + v);
                if slack < worst.1 {
                    worst = ((j * 2 + l) as f64, slack);
                }
            }
        }
        let (bj, bl) = ((worst.0 as usize) / 2, (worst.0 as usize) % 2);
        let rat = if bl == 0 { "licensed" } else { "unlicensed" };
        Ok(CapacityVerdict {
            max_load_scale: zeta,
            bottleneck: format!(
                "UE group {bj} on the {rat} RAT exhausts its margined service rate at load scale {zeta:.4}"
            ),
        })
    }

    /// Full alternating solve: x/y block then split block per sweep, final
    /// projection of excess split mass, delay report at the projected point.
    pub(crate) fn solve(&self) -> Result<P1Outcome> {
        if !(self.top.total_arrival_rate() > 0.0) {
            return Err(Error::Domain("total arrival rate must be positive".into()));
        }
        let mut init = self.interior_init();
        if !self.strictly_stable(&init) {
            let (lp_alloc, margin) = self.margin_lp()?;
            if margin <= self.margin_floor() {
                let loads = self.loads();
                let verdict = self.capacity(&loads)?;
                return Ok(P1Outcome::OverCapacity(CapacityVerdict {
                    max_load_scale: verdict.max_load_scale.min(1.0),
                    bottleneck: verdict.bottleneck,
                }));
            }
            init = lp_alloc;
        }

        let objective = |a: &Allocation| self.alternation_objective(a);
        let mut xy_phase = |state: &Allocation, sweep: usize| -> Result<Allocation> {
            let splits: Vec<[f64; 2]> = (0..self.k)
                .map(|j| [state.lambda_split[0][j], state.lambda_split[1][j]])
                .collect();
            let sub = self.xy_subproblem(&splits);
            let opts = SolveOptions { warm_start: sweep > 0, ..self.cfg.solver };
            let (z, rep) = solve_convex(&sub, &self.xy_start(state), &opts)?;
            if rep.feasibility_residual > 1e-6 {
                return Ok(state.clone()); // keep the last consistent point
            }
            let mut next = state.clone();
            self.write_xy(&z, &mut next);
            Ok(next)
        };
        let mut split_phase = |state: &Allocation, _sweep: usize| -> Result<Allocation> {
            let rates = self.rates(state);
            let solved: Vec<Result<[f64; 2]>> = crate::par::indexed_map(self.k, |j| {
                let sub = self.lambda_subproblem(j, rates[j]);
                let start = [state.lambda_split[0][j], state.lambda_split[1][j]];
                let (z, rep) = solve_convex(&sub, &start, &self.cfg.solver)?;
                if rep.feasibility_residual > 1e-6 {
                    return Ok([start[0], start[1]]);
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
        let (mut state, report) = alternate(
            init,
            objective,
            &mut [&mut xy_phase, &mut split_phase],
            &self.cfg.alternate,
        );

        // Coverage holds with equality at any optimum: project the barrier's
        // excess split mass out, which can only reduce every queue's load.
        for (j, ue) in self.top.ue_groups.iter().enumerate() {
            let sum = state.lambda_split[0][j] + state.lambda_split[1][j];
            if sum > 0.0 {
                let scale = ue.arrival_rate / sum;
                state.lambda_split[0][j] *= scale;
                state.lambda_split[1][j] *= scale;
            }
        }
        let delay = delay_report(self.top, self.table, &state)?;
        Ok(P1Outcome::Solved(Box::new(SolvedP1 { allocation: state, delay, alternation: report })))
    }
}
