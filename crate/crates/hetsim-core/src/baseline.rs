//! Reference allocators with fixed spectrum plans: orthogonal per-AP bands
//! and full frequency reuse.
//!
//! Both baselines freeze the band fractions and hand the remaining variables
//! (link shares and traffic splits) to the same convex machinery the
//! optimized scheme uses. Comparisons against the optimized allocator
//! therefore isolate the value of pattern selection alone; giving the
//! baselines optimized association and splits is the most favorable
//! treatment they can receive.

use crate::conservative::{P1Config, P1Machine, P1Outcome, Scheme};
use crate::model::{EfficiencyTable, Pattern, Topology};
use crate::Result;

fn orthogonal_machine<'a>(
    top: &'a Topology,
    table: &'a EfficiencyTable,
    cfg: &P1Config,
) -> Result<P1Machine<'a>> {
    let n = top.n_aps();
    let patterns: Vec<Pattern> = (0..n).map(|i| Pattern(1 << i)).collect();
    let frozen = vec![vec![1.0 / n as f64; n]; 2];
    P1Machine::new(top, table, patterns, Some(frozen), cfg.clone(), Scheme::Orthogonal)
}

fn full_reuse_machine<'a>(
    top: &'a Topology,
    table: &'a EfficiencyTable,
    cfg: &P1Config,
) -> Result<P1Machine<'a>> {
    let n = top.n_aps();
    let patterns = vec![Pattern(((1u64 << n) - 1) as u32)];
    let frozen = vec![vec![1.0]; 2];
    P1Machine::new(top, table, patterns, Some(frozen), cfg.clone(), Scheme::FullReuse)
}

/// Orthogonal reuse: each AP gets an equal, exclusive band slice per RAT
/// (`y = 1/n` on every singleton pattern), then link shares and traffic
/// splits are optimized with the bands frozen.
pub fn allocate_orthogonal(
    top: &Topology,
    table: &EfficiencyTable,
    cfg: &P1Config,
) -> Result<P1Outcome> {
    orthogonal_machine(top, table, cfg)?.solve()
}

/// Full reuse: every AP transmits on the whole band of each RAT (`y = 1` on
/// the all-APs pattern), then link shares and traffic splits are optimized
/// with the bands frozen.
pub fn allocate_full_reuse(
    top: &Topology,
    table: &EfficiencyTable,
    cfg: &P1Config,
) -> Result<P1Outcome> {
    full_reuse_machine(top, table, cfg)?.solve()
}

/// Largest uniform per-group load (packets/s) stabilizable under orthogonal
/// reuse.
pub fn orthogonal_uniform_capacity(
    top: &Topology,
    table: &EfficiencyTable,
    cfg: &P1Config,
) -> Result<f64> {
    let machine = orthogonal_machine(top, table, cfg)?;
    Ok(machine.capacity(&vec![1.0; top.k_groups()])?.max_load_scale)
}

/// Largest uniform per-group load (packets/s) stabilizable under full reuse.
pub fn full_reuse_uniform_capacity(
    top: &Topology,
    table: &EfficiencyTable,
    cfg: &P1Config,
) -> Result<f64> {
    let machine = full_reuse_machine(top, table, cfg)?;
    Ok(machine.capacity(&vec![1.0; top.k_groups()])?.max_load_scale)
}
