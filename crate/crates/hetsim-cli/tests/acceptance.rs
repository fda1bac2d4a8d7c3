//! End-to-end acceptance gate.
//!
//! Nine checks, one test each, covering: the queueing closed forms against
//! event simulation, the general-service extension and its reductions, the
//! adaptive solver's collapse to the worst-case solver under a frozen
//! all-active state, alternation monotonicity and activity fixed-point
//! convergence, structural sparsity of worst-case optima, capacity and
//! simulated-delay orderings across schemes, mixture-model accuracy against
//! the adaptive simulation at low load, convexity of the delay objective
//! terms, and byte-level reproducibility of CLI output.
//!
//! Every test prints its measurements; a violated bound fails with the full
//! measured table in the panic message. Bounds are stated inline and are
//! never loosened to fit the implementation: a failure here is a real
//! disagreement between the analytic model and the simulated system.

use std::fmt::Write as _;
use std::process::Command;

use hetsim_core::baseline::{full_reuse_uniform_capacity, orthogonal_uniform_capacity};
use hetsim_core::conservative::{
    solve_p1, sparsity_check, uniform_capacity, Allocation, P1Config, P1Outcome, Scheme,
};
use hetsim_core::model::{build_efficiency_table, x_index, EfficiencyTable, Pattern, Topology};
use hetsim_core::queueing::{
    convexity_probe, delay_general, delay_mm1, delay_vacation, DelayFormula, ProbeRegion,
    ServiceMoments,
};
use hetsim_core::scenario::seeded_topology;
use hetsim_core::sim::{
    simulate, PacketLengthDist, QueueStats, QueueVerdict, SimConfig, SimMode, SimResult,
    VacationDist,
};
use hetsim_core::utilization::{
    delay_report_p2, fixed_point_srp, mixture_rates, solve_p2, solve_p3, FixedPointOptions,
    P2Config, P2Outcome, UtilizationState,
};

/// Fixed service rate used by the single-queue oracle fixtures, packets/s.
const ORACLE_RATE: f64 = 10.0;

fn rel(measured: f64, reference: f64) -> f64 {
    (measured - reference).abs() / reference.abs()
}

/// One AP, one UE group, exact all-active service rate of 10 packets/s on
/// both RATs; the traffic split selects which RAT's queue carries load.
fn single_queue_setup(nu: f64, lambda: f64, licensed: bool) -> (Topology, EfficiencyTable, Allocation) {
    let mut top = seeded_topology(60, 1, 1);
    top.ue_groups[0].arrival_rate = lambda;
    top.ue_groups[0].vacation_second_moment = nu;
    let table = build_efficiency_table(&top).unwrap();
    let mut alloc = Allocation::zeros(1, 1, Scheme::Conservative);
    for l in 0..2 {
        alloc.y[l][1] = 1.0;
        let s = table.get(l, Pattern(1), 0, 0);
        assert!(s > ORACLE_RATE, "fixture efficiency {s} cannot host rate {ORACLE_RATE}");
        alloc.x[l][x_index(1, 1, Pattern(1), 0, 0)] = ORACLE_RATE / s;
    }
    let l = usize::from(!licensed);
    alloc.lambda_split[l][0] = lambda;
    alloc.validate(&top).unwrap();
    (top, table, alloc)
}

/// Runs the single-queue fixture for `packets` arrivals and returns the
/// stats of its only loaded queue.
fn oracle_sim(
    nu: f64,
    lambda: f64,
    licensed: bool,
    packets: u64,
    lengths: PacketLengthDist,
    seed: u64,
) -> QueueStats {
    let (top, table, alloc) = single_queue_setup(nu, lambda, licensed);
    let cfg = SimConfig {
        mode: SimMode::Conservative,
        packets,
        seed,
        packet_length: lengths,
        vacation: VacationDist::Deterministic,
        ..SimConfig::default()
    };
    let res = simulate(&top, &table, &alloc, &cfg).unwrap();
    let l = usize::from(!licensed);
    res.queues
        .iter()
        .find(|q| q.rat == l && q.group == 0)
        .cloned()
        .expect("loaded queue present")
}

/// Topology for `seed` with every group's arrival rate set to `load`.
fn topology_at_uniform_load(seed: u64, n: usize, k: usize, load: f64) -> Topology {
    let mut top = seeded_topology(seed, n, k);
    for ue in &mut top.ue_groups {
        ue.arrival_rate = load;
    }
    top
}

fn all_queues_stable(res: &SimResult) -> bool {
    res.queues
        .iter()
        .all(|q| matches!(q.verdict, QueueVerdict::Stable | QueueVerdict::NoTraffic))
}

/// Simulated mean sojourn time check of the memoryless and vacation queue
/// formulas at fixed service rate 10 packets/s, one million packets per
/// point.
///
/// Memoryless points: utilizations 0.3, 0.5, 0.7, tolerance 3% relative.
/// Vacation points: deterministic pause of √ν seconds after every service
/// completion, ν ∈ {0.0025, 0.01}, restricted to loads with
/// λ(1/r + √ν) < 0.9, tolerance 5% relative.
#[test]
fn fixed_rate_sims_match_the_closed_forms() {
    let packets = 1_000_000;
    let mut report = String::new();
    let mut failures = Vec::new();

    for rho in [0.3, 0.5, 0.7] {
        let lambda = rho * ORACLE_RATE;
        let started = std::time::Instant::now();
        let q = oracle_sim(0.0, lambda, true, packets, PacketLengthDist::Exponential, 11);
        let secs = started.elapsed().as_secs_f64();
        let reference = delay_mm1(ORACLE_RATE, lambda);
        let err = rel(q.mean_sojourn_s, reference);
        let verdict = if err <= 0.03 { "pass" } else { "FAIL" };
        let _ = writeln!(
            report,
            "memoryless rho={rho}: sim {:.6} s, closed form {:.6} s, rel err {:.4} (tol 0.03) {verdict} [{secs:.1} s run]",
            q.mean_sojourn_s, reference
        );
        assert!(secs <= 120.0, "oracle point exceeded the 2-minute budget: {secs:.1} s");
        if err > 0.03 {
            failures.push(format!("memoryless rho={rho} rel err {err:.4}"));
        }
    }

    // Loads admitted by the stability margin λ(1/r + √ν) < 0.9.
    for (nu, rho) in [(0.01, 0.3), (0.0025, 0.3), (0.0025, 0.5)] {
        let lambda = rho * ORACLE_RATE;
        assert!(lambda * (1.0 / ORACLE_RATE + nu.sqrt()) < 0.9, "point outside restriction");
        let started = std::time::Instant::now();
        let q = oracle_sim(nu, lambda, false, packets, PacketLengthDist::Exponential, 13);
        let secs = started.elapsed().as_secs_f64();
        let reference = delay_vacation(ORACLE_RATE, lambda, nu);
        let err = rel(q.mean_sojourn_s, reference);
        let verdict = if err <= 0.05 { "pass" } else { "FAIL" };
        let _ = writeln!(
            report,
            "vacation nu={nu} rho={rho}: sim {:.6} s, closed form {:.6} s, rel err {:.4} (tol 0.05) {verdict} [{secs:.1} s run]",
            q.mean_sojourn_s, reference
        );
        assert!(secs <= 120.0, "oracle point exceeded the 2-minute budget: {secs:.1} s");
        if err > 0.05 {
            failures.push(format!("vacation nu={nu} rho={rho} rel err {err:.4}"));
        }
    }

    println!("{report}");
    assert!(
        failures.is_empty(),
        "closed-form oracle mismatches:\n{report}\nThe vacation formula's waiting term \
         drops the pause's contribution to server occupancy (its denominator keeps 1 - λ/r \
         rather than 1 - λ(1/r + E[V])) and the cross moment 2·E[X]·E[V] of the effective \
         service, so it understates the simulated per-packet-vacation queue; see the \
         in-repo truth oracle in the simulator's unit tests."
    );
}

/// General-service extension: constant packet lengths (work moments β=1,
/// η=1) simulated at utilization 0.5 against the general-form delay, 5%
/// relative, with the classical constant-service closed form as a second
/// reference; and exact reduction identities of the general form back to
/// the memoryless and vacation forms at β=1, η=2, to 1e-12.
#[test]
fn deterministic_lengths_match_the_general_form_and_reductions() {
    let lambda = 0.5 * ORACLE_RATE;
    let moments = ServiceMoments::deterministic();
    let q = oracle_sim(0.0, lambda, true, 1_000_000, PacketLengthDist::Deterministic, 17);
    let reference = delay_general(ORACLE_RATE, lambda, moments, 0.0);
    // Classical constant-service mean sojourn: 1/r + ρ/(2r(1-ρ)).
    let rho = lambda / ORACLE_RATE;
    let classical = 1.0 / ORACLE_RATE + rho / (2.0 * ORACLE_RATE * (1.0 - rho));
    let err = rel(q.mean_sojourn_s, reference);
    println!(
        "constant lengths rho=0.5: sim {:.6} s, general form {:.6} s, classical {:.6} s, rel err {:.4}",
        q.mean_sojourn_s, reference, classical
    );
    assert!(
        rel(reference, classical) <= 1e-12,
        "general form disagrees with the classical constant-service form: {reference} vs {classical}"
    );
    assert!(err <= 0.05, "simulated constant-service sojourn off by {err:.4} (tol 0.05)");

    let mut worst: f64 = 0.0;
    for r in [2.0, 5.0, 10.0, 20.0] {
        for tenths in 1..=9 {
            let lam = r * tenths as f64 / 10.0;
            let exp = ServiceMoments::exponential();
            worst = worst.max(rel(delay_general(r, lam, exp, 0.0), delay_mm1(r, lam)));
            for nu in [0.0025, 0.01, 1.0] {
                worst = worst.max(rel(delay_general(r, lam, exp, nu), delay_vacation(r, lam, nu)));
            }
        }
    }
    println!("reduction identities worst rel err {worst:.2e} (tol 1e-12)");
    assert!(worst <= 1e-12, "β=1, η=2 reductions drifted: worst rel err {worst:.2e}");
}

/// With the all-active activity state frozen (the busiest admissible state:
/// every AP transmitting with probability one), the adaptive allocation
/// subproblem must coincide with the worst-case problem; their objectives
/// on the default seeded 5-AP / 15-group scenario agree to 1e-6 relative.
#[test]
fn adaptive_solver_reduces_to_the_worst_case_solver_when_frozen_all_active() {
    let top = seeded_topology(42, 5, 15);
    let table = build_efficiency_table(&top).unwrap();
    let p1 = match solve_p1(&top, &table, &P1Config::default()).unwrap() {
        P1Outcome::Solved(s) => s,
        P1Outcome::OverCapacity(v) => panic!("seeded scenario over capacity: {v:?}"),
    };
    let state = UtilizationState::conservative_start(5, 15);
    let (_, delay) = solve_p3(&top, &table, &state, &P2Config::default()).unwrap();
    let err = rel(delay.objective_s, p1.delay.objective_s);
    println!(
        "worst-case objective {:.9} s, frozen-all-active adaptive objective {:.9} s, rel err {:.2e}",
        p1.delay.objective_s, delay.objective_s, err
    );
    assert!(err <= 1e-6, "frozen reduction drifted: rel err {err:.2e} (tol 1e-6)");
}

/// On 20 seeded 4-AP / 10-group instances: every alternating sweep of the
/// worst-case solver is nonincreasing in objective (tolerance 1e-12), and
/// every activity fixed point encountered by the adaptive solver converges
/// (sup-norm step < 1e-6) within 10⁴ iterations, including a standalone
/// run at the returned allocation.
#[test]
fn alternation_is_monotone_and_the_activity_fixed_point_converges() {
    let mut failures = Vec::new();
    for seed in 1..=20u64 {
        let mut top = seeded_topology(seed, 4, 10);
        let table = build_efficiency_table(&top).unwrap();
        let p1cfg = P1Config::default();
        let mut outcome = solve_p1(&top, &table, &p1cfg).unwrap();
        if let P1Outcome::OverCapacity(v) = &outcome {
            // Natural rates exceed capacity on this draw: rescale to 80% of
            // the stabilizable margin so the solvers still face a real
            // instance under load.
            let scale = 0.8 * v.max_load_scale;
            for ue in &mut top.ue_groups {
                ue.arrival_rate *= scale;
            }
            outcome = solve_p1(&top, &table, &p1cfg).unwrap();
        }
        let solved = match outcome {
            P1Outcome::Solved(s) => s,
            P1Outcome::OverCapacity(v) => {
                failures.push(format!("seed {seed}: still over capacity after rescale: {v:?}"));
                continue;
            }
        };
        let sweeps = &solved.alternation.sweep_objectives;
        for w in sweeps.windows(2) {
            if w[1] > w[0] + 1e-12 * (1.0 + w[0].abs()) {
                failures.push(format!(
                    "seed {seed}: alternation increased {:.15} -> {:.15}",
                    w[0], w[1]
                ));
            }
        }
        if !solved.alternation.converged {
            failures.push(format!("seed {seed}: alternation did not converge"));
        }

        match solve_p2(&top, &table, &P2Config::default()).unwrap() {
            P2Outcome::Solved(s) => {
                if !s.fixed_point_all_converged {
                    failures.push(format!("seed {seed}: an inner activity fixed point hit its cap"));
                }
                let rates = mixture_rates(&table, &s.allocation);
                let fp = fixed_point_srp(
                    &s.allocation,
                    &rates,
                    &UtilizationState::conservative_start(4, 10),
                    &FixedPointOptions::default(),
                );
                if !fp.converged || fp.iterations > 10_000 {
                    failures.push(format!(
                        "seed {seed}: standalone fixed point: converged={} iterations={}",
                        fp.converged, fp.iterations
                    ));
                }
            }
            P2Outcome::OverCapacity(v) => {
                failures.push(format!("seed {seed}: adaptive solver over capacity: {v:?}"))
            }
        }
    }
    assert!(failures.is_empty(), "monotonicity/fixed-point failures:\n{}", failures.join("\n"));
    println!("20 seeds: alternation monotone, all activity fixed points converged within budget");
}

/// Structural sparsity of worst-case optima on 50 seeded 5-AP / 15-group
/// instances at zero threshold 1e-5: at most k = 15 patterns per RAT and at
/// most n − 1 = 4 multi-AP groups per RAT, on at least 95% of instances.
#[test]
fn worst_case_optima_are_sparse() {
    let seeds: Vec<u64> = (1..=50).collect();
    let reports = hetsim_core::par::indexed_map(seeds.len(), |idx| {
        let seed = seeds[idx];
        let mut top = seeded_topology(seed, 5, 15);
        let table = build_efficiency_table(&top).unwrap();
        let cfg = P1Config::default();
        let mut outcome = solve_p1(&top, &table, &cfg).unwrap();
        if let P1Outcome::OverCapacity(v) = &outcome {
            let scale = 0.8 * v.max_load_scale;
            for ue in &mut top.ue_groups {
                ue.arrival_rate *= scale;
            }
            outcome = solve_p1(&top, &table, &cfg).unwrap();
        }
        match outcome {
            P1Outcome::Solved(s) => Some(sparsity_check(&s.allocation, 1e-5)),
            P1Outcome::OverCapacity(_) => None,
        }
    });
    let mut ok = 0usize;
    let mut rows = String::new();
    let mut instances = 0usize;
    for (seed, rep) in seeds.iter().zip(&reports) {
        let Some(r) = rep else {
            let _ = writeln!(rows, "seed {seed}: unsolvable even after rescale");
            continue;
        };
        instances += 1;
        let pass = r.pattern_bound_holds[0]
            && r.pattern_bound_holds[1]
            && r.multi_ap_bound_holds[0]
            && r.multi_ap_bound_holds[1];
        if pass {
            ok += 1;
        } else {
            let _ = writeln!(
                rows,
                "seed {seed}: patterns {}/{} (bound {}), multi-AP groups {}/{} (bound {})",
                r.pattern_counts[0],
                r.pattern_counts[1],
                r.pattern_bound,
                r.multi_ap_groups[0],
                r.multi_ap_groups[1],
                r.multi_ap_bound
            );
        }
    }
    println!("sparsity census: {ok}/{instances} instances inside both bounds on both RATs\n{rows}");
    assert!(instances == 50, "expected 50 solvable instances, got {instances}:\n{rows}");
    // ≥ 95% of 50 instances.
    assert!(
        ok * 20 >= instances * 19,
        "sparsity held on {ok}/{instances} instances (< 95%):\n{rows}"
    );
}

/// Scheme orderings on the default seeded scenario. Capacities: full reuse
/// and orthogonal reuse must both stabilize strictly less uniform load than
/// the optimized worst-case scheme. Simulated delays: at every sweep load
/// where both schemes are solvable and their simulations are stable, the
/// adaptive scheme's simulated mean sojourn must not exceed the worst-case
/// scheme's (violations counted only with non-overlapping 95% CIs), with a
/// soft low-traffic target of ≤ 0.8× at the lightest point (reported, not
/// failed, when the ratio lands in (0.8, 1.0]).
#[test]
fn scheme_capacities_and_simulated_delays_order_correctly() {
    let top = seeded_topology(42, 5, 15);
    let table = build_efficiency_table(&top).unwrap();
    let p1cfg = P1Config::default();
    let cons_cap = uniform_capacity(&top, &table, &p1cfg).unwrap();
    let orth_cap = orthogonal_uniform_capacity(&top, &table, &p1cfg).unwrap();
    let full_cap = full_reuse_uniform_capacity(&top, &table, &p1cfg).unwrap();
    println!(
        "uniform capacities: optimized worst-case {cons_cap:.4}, orthogonal {orth_cap:.4}, full reuse {full_cap:.4} packets/s/group"
    );
    assert!(
        full_cap < cons_cap,
        "full reuse should stabilize less load than the optimized scheme: {full_cap} vs {cons_cap}"
    );
    assert!(
        orth_cap < cons_cap,
        "orthogonal reuse should stabilize less load than the optimized scheme: {orth_cap} vs {cons_cap}"
    );

    let loads = [1.0, 2.0, 3.0, 4.5, 6.0];
    let mut table_rows = String::new();
    let mut violations = Vec::new();
    let mut lightest: Option<(f64, f64)> = None;
    for load in loads {
        let top_l = topology_at_uniform_load(42, 5, 15, load);
        let table_l = build_efficiency_table(&top_l).unwrap();
        let cons = match solve_p1(&top_l, &table_l, &p1cfg).unwrap() {
            P1Outcome::Solved(s) => s,
            P1Outcome::OverCapacity(_) => {
                let _ = writeln!(table_rows, "load {load}: worst-case scheme over capacity, skipped");
                continue;
            }
        };
        let util = match solve_p2(&top_l, &table_l, &P2Config::default()).unwrap() {
            P2Outcome::Solved(s) => s,
            P2Outcome::OverCapacity(_) => {
                let _ = writeln!(table_rows, "load {load}: adaptive scheme over capacity, skipped");
                continue;
            }
        };
        // Common random numbers: same physics, same seed, same horizon.
        let cfg = SimConfig {
            mode: SimMode::Utilization,
            packets: 150_000,
            seed: 1,
            ..SimConfig::default()
        };
        let cons_sim = simulate(&top_l, &table_l, &cons.allocation, &cfg).unwrap();
        let util_sim = simulate(&top_l, &table_l, &util.allocation, &cfg).unwrap();
        if !all_queues_stable(&cons_sim) || !all_queues_stable(&util_sim) {
            let _ = writeln!(
                table_rows,
                "load {load}: saturated queues (worst-case stable: {}, adaptive stable: {}), skipped",
                all_queues_stable(&cons_sim),
                all_queues_stable(&util_sim)
            );
            continue;
        }
        let (cm, ch) = (cons_sim.network_mean_sojourn_s, cons_sim.network_ci_s);
        let (um, uh) = (util_sim.network_mean_sojourn_s, util_sim.network_ci_s);
        let _ = writeln!(
            table_rows,
            "load {load}: worst-case sim {cm:.5} ± {ch:.5} s, adaptive sim {um:.5} ± {uh:.5} s, ratio {:.3}",
            um / cm
        );
        if lightest.is_none() {
            lightest = Some((um, cm));
        }
        let cis_overlap = um - uh <= cm + ch;
        if um > cm && !cis_overlap {
            violations.push(format!(
                "load {load}: adaptive {um:.5} ± {uh:.5} s exceeds worst-case {cm:.5} ± {ch:.5} s with non-overlapping CIs"
            ));
        }
    }
    println!("{table_rows}");
    if let Some((um, cm)) = lightest {
        let ratio = um / cm;
        if ratio <= 0.8 {
            println!("low-traffic target met: adaptive/worst-case ratio {ratio:.3} ≤ 0.8");
        } else if ratio <= 1.0 {
            println!("low-traffic target soft-missed (reported, not failed): ratio {ratio:.3} in (0.8, 1.0]");
        } else {
            println!("low-traffic target missed: ratio {ratio:.3} > 1.0 (counted in the ordering check)");
        }
    }
    assert!(
        violations.is_empty(),
        "adaptive scheme simulated worse than the worst-case scheme:\n{}\n{table_rows}\n\
         Diagnosis: at light load the mixture model prices idle APs as nearly free, so its \
         optimizer spreads every group's traffic across many APs; under the simulator's \
         activity rule (an AP is active whenever any of its queues is in service) those \
         striped allocations keep most APs busy most of the time, the realized rates drop \
         to the crowded-set efficiencies, and the simulated sojourn lands above the \
         worst-case scheme's, inverting the model-predicted ordering. The allocations are \
         the model's true optima; the gap is between the model's independent-activity \
         approximation and the simulated coupled system."
    );
}

/// Mixture-model accuracy against the adaptive simulation on the default
/// seeded scenario, holding one spectrum allocation fixed while sweeping
/// load: analytic mixture delay within 20% of the simulated mean at loads
/// of 10/20/30% of the worst-case uniform capacity; the gap at 50/70% is
/// reported and allowed to grow.
#[test]
fn mixture_model_tracks_the_adaptive_simulation_at_low_load() {
    let top = seeded_topology(42, 5, 15);
    let table = build_efficiency_table(&top).unwrap();
    let capacity = uniform_capacity(&top, &table, &P1Config::default()).unwrap();
    let base = match solve_p2(&top, &table, &P2Config::default()).unwrap() {
        P2Outcome::Solved(s) => s,
        P2Outcome::OverCapacity(v) => panic!("seeded scenario over capacity: {v:?}"),
    };
    let natural: Vec<f64> = top.ue_groups.iter().map(|u| u.arrival_rate).collect();

    let mut rows = String::new();
    let mut failures = Vec::new();
    let mut previous_gap = 0.0;
    let mut growth_noted = true;
    for frac in [0.1, 0.2, 0.3, 0.5, 0.7] {
        let load = frac * capacity;
        let top_l = topology_at_uniform_load(42, 5, 15, load);
        // Keep the allocation's spectrum shares; rescale only its traffic
        // splits to the swept load, preserving each group's split mix.
        let mut alloc = base.allocation.clone();
        for (j, lam0) in natural.iter().enumerate() {
            let scale = load / lam0;
            for l in 0..2 {
                alloc.lambda_split[l][j] *= scale;
            }
        }
        let table_l = build_efficiency_table(&top_l).unwrap();
        let rates = mixture_rates(&table_l, &alloc);
        let state = fixed_point_srp(
            &alloc,
            &rates,
            &UtilizationState::conservative_start(5, 15),
            &FixedPointOptions::default(),
        );
        assert!(state.converged, "activity fixed point failed at {frac:.0}% load");
        let analytic = delay_report_p2(&top_l, &table_l, &alloc, &state).unwrap().objective_s;
        let cfg = SimConfig {
            mode: SimMode::Utilization,
            packets: 150_000,
            seed: 1,
            ..SimConfig::default()
        };
        let sim = simulate(&top_l, &table_l, &alloc, &cfg).unwrap();
        let stable = all_queues_stable(&sim);
        let gap = rel(analytic, sim.network_mean_sojourn_s);
        let asserted = frac <= 0.3 + 1e-12;
        let _ = writeln!(
            rows,
            "load {:.3} pkts/s/group ({:.0}% of capacity {capacity:.3}): analytic {:.5} s, sim {:.5} ± {:.5} s, gap {:.3} ({}){}",
            load,
            frac * 100.0,
            analytic,
            sim.network_mean_sojourn_s,
            sim.network_ci_s,
            gap,
            if asserted { "asserted ≤ 0.20" } else { "reported" },
            if stable { "" } else { " [saturated queues]" }
        );
        if asserted {
            if gap > 0.20 {
                failures.push(format!("{:.0}% load gap {gap:.3} > 0.20", frac * 100.0));
            }
            if gap + 1e-9 < previous_gap {
                growth_noted = false;
            }
            previous_gap = gap;
        }
    }
    println!("{rows}");
    if !growth_noted {
        println!("note: the gap did not grow monotonically over the asserted points");
    }
    assert!(
        failures.is_empty(),
        "mixture model outside 20% of simulation at low load:\n{}\n{rows}\n\
         Diagnosis: two structural channels separate the mixture model from the simulated \
         system even at light load. (1) The model weights each AP's interference by the \
         x-share-weighted fraction of time it transmits, while the simulator marks an AP \
         active whenever any of its queues is in service; with the optimizer's striped \
         shares the union of service windows far exceeds the share-weighted fraction, so \
         realized efficiencies sit below the mixture's. (2) On the unlicensed RAT the \
         closed form understates the vacation queue (see the fixed-rate oracle test), and \
         its per-packet pauses also shrink the stable region, so those queues run hotter \
         than predicted. Both channels follow from the pinned activity and vacation \
         disciplines; the qualitative behavior — the gap growing with load as AP \
         interactions multiply — is reproduced and reported above."
    );
}

/// Axis-wise convexity of λ · delay(r, λ) over stable-region grids of 400
/// points for the four closed forms: memoryless, vacation, constant-length,
/// and general service moments; centered second differences must be
/// ≥ −1e-7 (scaled).
#[test]
fn delay_objective_terms_are_convex_along_each_axis() {
    let region = ProbeRegion { r_min: 6.0, r_max: 30.0, lambda_min: 0.2, lambda_max: 4.0, grid: 20 };
    let heavy = ServiceMoments::new(1.3, 2.2).unwrap();
    let cases: [(&str, DelayFormula); 4] = [
        ("memoryless", DelayFormula::Mm1),
        ("vacation nu=0.01", DelayFormula::Vacation { nu: 0.01 }),
        (
            "constant lengths",
            DelayFormula::General { moments: ServiceMoments::deterministic(), nu: 0.0 },
        ),
        ("general beta=1.3 eta=2.2 nu=0.01", DelayFormula::General { moments: heavy, nu: 0.01 }),
    ];
    for (label, formula) in cases {
        let ok = convexity_probe(formula, region);
        println!("convexity {label}: {}", if ok { "pass" } else { "FAIL" });
        assert!(ok, "second-difference probe failed for {label}");
    }
}

/// Byte-level reproducibility: the same CLI sweep run twice into different
/// directories produces identical numeric output.
#[test]
fn identical_manifests_reproduce_identical_bytes() {
    let run = |dir: &std::path::Path| {
        let status = Command::new(env!("CARGO_BIN_EXE_hetsim"))
            .args([
                "sweep",
                "--scheme",
                "conservative",
                "--loads",
                "5,9",
                "--packets",
                "40000",
                "--seed",
                "7",
                "--out",
            ])
            .arg(dir)
            .status()
            .expect("run sweep");
        assert!(status.success(), "sweep run failed");
        std::fs::read(dir.join("sweep.csv")).expect("sweep.csv written")
    };
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let first = run(d1.path());
    let second = run(d2.path());
    println!("sweep.csv: {} bytes, reruns byte-identical: {}", first.len(), first == second);
    assert_eq!(first, second, "repeated sweep produced different bytes");
}
