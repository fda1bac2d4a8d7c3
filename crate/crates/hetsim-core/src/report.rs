//! Report emission: allocation files with an exact-round-trip text format,
//! flat CSVs for analytic delays, simulation results, and load sweeps, and a
//! run manifest whose hash ties every artifact to the configuration that
//! produced it.
//!
//! Every number is rendered with the shortest representation that parses back
//! to the identical `f64`, so rewriting a parsed document is byte-stable and
//! repeated runs with the same manifest produce byte-identical columns.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::conservative::{Allocation, DelayReport, Scheme, SparsityReport};
use crate::model::{enumerate_patterns, x_index, Pattern};
use crate::sim::{QueueVerdict, SimResult};
use crate::{Error, Result};

/// Shortest decimal form that round-trips to the same `f64` (the standard
/// `Display` guarantee); infinities render as `inf`/`-inf`, NaN as `NaN`.
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Hex SHA-256 of arbitrary bytes; used to fingerprint manifests and
/// scenario documents.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        write!(out, "{b:02x}").expect("writing to a String cannot fail");
    }
    out
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

/// Everything needed to reproduce a run byte-for-byte: tool identity, the
/// scenario fingerprint, seeds, budgets, and solver tolerances. Serialized as
/// JSON with fields in declaration order; the manifest hash is the SHA-256 of
/// that JSON and is embedded in every emitted CSV.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// CLI verb that produced the artifacts.
    pub command: String,
    pub scheme: String,
    pub seed: u64,
    /// SHA-256 of the scenario document text driving the run.
    pub scenario_sha256: String,
    /// Uniform per-group loads swept, packets/s; empty when the topology's
    /// own rates are used.
    pub loads_pkts_s: Vec<f64>,
    pub packets: u64,
    pub warmup_fraction: f64,
    pub packet_length: String,
    pub vacation: String,
    pub stability_margin: f64,
    pub eps_alternation: f64,
    pub eps_fixed_point: f64,
    pub eps_outer: f64,
}

impl RunManifest {
    /// Deterministic pretty JSON (struct declaration order, shortest-form
    /// numbers, trailing newline).
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self)
            .expect("manifest serialization cannot fail");
        s.push('\n');
        s
    }

    /// Hex SHA-256 of [`RunManifest::to_json`].
    pub fn hash(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }
}

// ---------------------------------------------------------------------------
// Allocation text format
// ---------------------------------------------------------------------------

/// Serializes an allocation as line-oriented structured text: a header
/// (version, scheme, sizes), the nonzero band fractions `y <rat> <pattern>
/// <fraction>`, the nonzero link shares `x <rat> <pattern> <ap> <group>
/// <share>`, every traffic split `split <rat> <group> <pkts_s>`, and a
/// terminating `end`. Patterns are AP-index bitmasks. The output is canonical:
/// parsing and rewriting reproduces it byte-for-byte.
pub fn write_allocation(alloc: &Allocation) -> String {
    let (n, k) = (alloc.n, alloc.k);
    let mut s = String::new();
    s.push_str("# spectrum allocation; patterns are AP-index bitmasks\n");
    s.push_str("version 1\n");
    let _ = writeln!(s, "scheme {}", alloc.scheme.as_str());
    let _ = writeln!(s, "aps {n}");
    let _ = writeln!(s, "groups {k}");
    for l in 0..2 {
        for bits in 1..(1u32 << n) {
            let v = alloc.y[l][bits as usize];
            if v != 0.0 {
                let _ = writeln!(s, "y {l} {bits} {}", fmt_f64(v));
            }
        }
    }
    for l in 0..2 {
        for bits in 1..(1u32 << n) {
            let a = Pattern(bits);
            for i in a.iter() {
                for j in 0..k {
                    let v = alloc.x[l][x_index(n, k, a, i, j)];
                    if v != 0.0 {
                        let _ = writeln!(s, "x {l} {bits} {i} {j} {}", fmt_f64(v));
                    }
                }
            }
        }
    }
    for l in 0..2 {
        for j in 0..k {
            let _ = writeln!(s, "split {l} {j} {}", fmt_f64(alloc.lambda_split[l][j]));
        }
    }
    s.push_str("end\n");
    s
}

/// Parses the text format written by [`write_allocation`]. Errors carry the
/// offending line number and field. Structural checks only (indices in range,
/// serving AP inside its pattern, finite nonnegative values, no duplicate
/// records); physical feasibility is checked against a topology by
/// [`Allocation::validate`].
pub fn parse_allocation(text: &str) -> Result<Allocation> {
    fn bad(lineno: usize, msg: impl std::fmt::Display) -> Error {
        Error::Validation(format!("allocation line {lineno}: {msg}"))
    }
    fn field<T: std::str::FromStr>(
        lineno: usize,
        it: &mut std::str::SplitWhitespace<'_>,
        name: &str,
    ) -> Result<T> {
        let tok = it
            .next()
            .ok_or_else(|| bad(lineno, format!("missing field `{name}`")))?;
        tok.parse::<T>()
            .map_err(|_| bad(lineno, format!("field `{name}`: cannot parse `{tok}`")))
    }
    fn finite(lineno: usize, name: &str, v: f64) -> Result<f64> {
        if !v.is_finite() || v < 0.0 {
            return Err(bad(lineno, format!("field `{name}`: `{v}` must be finite and >= 0")));
        }
        Ok(v)
    }

    let mut version: Option<u32> = None;
    let mut scheme: Option<Scheme> = None;
    let mut n: Option<usize> = None;
    let mut k: Option<usize> = None;
    let mut alloc: Option<Allocation> = None;
    let mut seen: BTreeSet<(u8, usize, u32, usize, usize)> = BTreeSet::new();
    let mut ended = false;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if ended {
            return Err(bad(lineno, "content after `end`"));
        }
        let mut it = line.split_whitespace();
        let tag = it.next().expect("non-empty line has a first token");
        if version.is_none() && tag != "version" {
            return Err(bad(lineno, "first record must be `version 1`"));
        }
        match tag {
            "version" => {
                let v: u32 = field(lineno, &mut it, "version")?;
                if v != 1 {
                    return Err(bad(lineno, format!("unsupported version {v}")));
                }
                version = Some(v);
            }
            "scheme" => {
                let tok: String = field(lineno, &mut it, "scheme")?;
                scheme = Some(Scheme::parse(&tok).map_err(|e| bad(lineno, e))?);
            }
            "aps" => {
                let v: usize = field(lineno, &mut it, "aps")?;
                enumerate_patterns(v).map_err(|e| bad(lineno, e))?;
                n = Some(v);
            }
            "groups" => {
                let v: usize = field(lineno, &mut it, "groups")?;
                if v == 0 {
                    return Err(bad(lineno, "groups must be >= 1"));
                }
                k = Some(v);
            }
            "y" | "x" | "split" => {
                if alloc.is_none() {
                    let (Some(n), Some(k), Some(scheme)) = (n, k, scheme) else {
                        return Err(bad(
                            lineno,
                            "scheme/aps/groups must all appear before data records",
                        ));
                    };
                    alloc = Some(Allocation::zeros(n, k, scheme));
                }
                let a = alloc.as_mut().expect("just initialized");
                let l: usize = field(lineno, &mut it, "rat")?;
                if l > 1 {
                    return Err(bad(lineno, format!("rat `{l}` must be 0 or 1")));
                }
                match tag {
                    "y" => {
                        let bits: u32 = field(lineno, &mut it, "pattern")?;
                        if bits == 0 || bits >= 1 << a.n {
                            return Err(bad(lineno, format!("pattern `{bits}` out of range")));
                        }
                        let v = finite(lineno, "fraction", field(lineno, &mut it, "fraction")?)?;
                        if !seen.insert((0, l, bits, 0, 0)) {
                            return Err(bad(lineno, "duplicate band-fraction record"));
                        }
                        a.y[l][bits as usize] = v;
                    }
                    "x" => {
                        let bits: u32 = field(lineno, &mut it, "pattern")?;
                        if bits == 0 || bits >= 1 << a.n {
                            return Err(bad(lineno, format!("pattern `{bits}` out of range")));
                        }
                        let i: usize = field(lineno, &mut it, "ap")?;
                        let j: usize = field(lineno, &mut it, "group")?;
                        if !Pattern(bits).contains(i) {
                            return Err(bad(
                                lineno,
                                format!("serving AP {i} is not in pattern {bits}"),
                            ));
                        }
                        if j >= a.k {
                            return Err(bad(lineno, format!("group `{j}` out of range")));
                        }
                        let v = finite(lineno, "share", field(lineno, &mut it, "share")?)?;
                        if !seen.insert((1, l, bits, i, j)) {
                            return Err(bad(lineno, "duplicate link-share record"));
                        }
                        a.x[l][x_index(a.n, a.k, Pattern(bits), i, j)] = v;
                    }
                    _ => {
                        let j: usize = field(lineno, &mut it, "group")?;
                        if j >= a.k {
                            return Err(bad(lineno, format!("group `{j}` out of range")));
                        }
                        let v = finite(lineno, "pkts_s", field(lineno, &mut it, "pkts_s")?)?;
                        if !seen.insert((2, l, 0, 0, j)) {
                            return Err(bad(lineno, "duplicate traffic-split record"));
                        }
                        a.lambda_split[l][j] = v;
                    }
                }
            }
            "end" => ended = true,
            other => return Err(bad(lineno, format!("unknown record `{other}`"))),
        }
        if let Some(extra) = it.next() {
            return Err(bad(lineno, format!("unexpected trailing field `{extra}`")));
        }
    }
    if !ended {
        return Err(Error::Validation("allocation document is missing `end`".into()));
    }
    alloc.ok_or_else(|| Error::Validation("allocation document has no data records".into()))
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

/// `#`-comment preamble plus escaped records; all emitters funnel through
/// this so every CSV carries the manifest hash on its first line.
struct CsvDoc {
    out: String,
}

impl CsvDoc {
    fn new(manifest_hash: &str) -> CsvDoc {
        CsvDoc { out: format!("# manifest_sha256 {manifest_hash}\n") }
    }

    fn comment(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.out, "# {key} {value}");
    }

    fn rows(mut self, records: Vec<Vec<String>>) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for rec in records {
            w.write_record(&rec).expect("writing CSV to memory cannot fail");
        }
        let bytes = w.into_inner().expect("flushing CSV to memory cannot fail");
        self.out.push_str(&String::from_utf8(bytes).expect("CSV output is UTF-8"));
        self.out
    }
}

fn verdict_token(v: QueueVerdict) -> &'static str {
    match v {
        QueueVerdict::Stable => "stable",
        QueueVerdict::Saturated => "saturated",
        QueueVerdict::ZeroCapacity => "zero-capacity",
        QueueVerdict::NoTraffic => "no-traffic",
    }
}

/// Analytic per-queue delay CSV: one row per (group, RAT) with the offered
/// split, the model's service rate, and the closed-form delay. The network
/// objective rides in the preamble.
pub fn delay_csv(report: &DelayReport, alloc: &Allocation, manifest_hash: &str) -> String {
    let mut doc = CsvDoc::new(manifest_hash);
    doc.comment("objective_s", fmt_f64(report.objective_s));
    let mut records =
        vec![vec!["group".into(), "rat".into(), "offered_pkts_s".into(), "rate_pkts_s".into(), "delay_s".into()]];
    for (j, (d, r)) in report.delay_s.iter().zip(report.rate_pkts_s.iter()).enumerate() {
        for l in 0..2 {
            records.push(vec![
                j.to_string(),
                l.to_string(),
                fmt_f64(alloc.lambda_split[l][j]),
                fmt_f64(r[l]),
                fmt_f64(d[l]),
            ]);
        }
    }
    doc.rows(records)
}

/// Simulated per-queue CSV: one row per (group, RAT) with arrivals, the mean
/// sojourn and its 95% half-width, the mean transmission time, and the
/// stability verdict. Network-level aggregates ride in the preamble.
pub fn sim_csv(result: &SimResult, manifest_hash: &str) -> String {
    let mut doc = CsvDoc::new(manifest_hash);
    doc.comment("mode", match result.mode {
        crate::sim::SimMode::Conservative => "conservative",
        crate::sim::SimMode::Utilization => "utilization",
    });
    doc.comment("seed", result.seed);
    doc.comment("horizon_s", fmt_f64(result.horizon_s));
    doc.comment("warmup_s", fmt_f64(result.warmup_s));
    doc.comment("total_packets", result.total_packets);
    doc.comment("network_mean_sojourn_s", fmt_f64(result.network_mean_sojourn_s));
    doc.comment("network_ci_s", fmt_f64(result.network_ci_s));
    let mut records = vec![vec![
        "group".into(),
        "rat".into(),
        "offered_pkts_s".into(),
        "arrivals".into(),
        "mean_sojourn_s".into(),
        "ci_sojourn_s".into(),
        "mean_service_s".into(),
        "stable".into(),
        "verdict".into(),
    ]];
    let k = result.queues.len() / 2;
    for j in 0..k {
        for l in 0..2 {
            let q = &result.queues[l * k + j];
            debug_assert_eq!((q.group, q.rat), (j, l));
            let stable = matches!(q.verdict, QueueVerdict::Stable | QueueVerdict::NoTraffic);
            records.push(vec![
                q.group.to_string(),
                q.rat.to_string(),
                fmt_f64(q.offered_pkts_s),
                q.arrivals.to_string(),
                fmt_f64(q.mean_sojourn_s),
                fmt_f64(q.ci_sojourn_s),
                fmt_f64(q.mean_service_s),
                stable.to_string(),
                verdict_token(q.verdict).into(),
            ]);
        }
    }
    doc.rows(records)
}

/// One load-sweep point for one scheme. `multi_ap_groups` is the larger
/// multi-AP UE-group count of the two RATs (the one the structural bound
/// must hold for).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scheme: String,
    pub load_pkts_s: f64,
    /// Analytic network mean delay; +inf marks an over-capacity point.
    pub objective_s: f64,
    /// Simulated network mean sojourn; NaN when the point was not simulated.
    pub simulated_mean_s: f64,
    pub simulated_ci_s: f64,
    /// Fraction of loaded queues the simulator found stable (1 when the
    /// point was not simulated but is analytically stable, 0 over capacity).
    pub stable_fraction: f64,
    pub licensed_pattern_count: usize,
    pub unlicensed_pattern_count: usize,
    pub multi_ap_groups: usize,
}

/// The documented fixed column set of the sweep surface.
pub const SWEEP_COLUMNS: [&str; 9] = [
    "scheme",
    "load_pkts_s",
    "objective_s",
    "simulated_mean_s",
    "simulated_ci_s",
    "stable_fraction",
    "licensed_pattern_count",
    "unlicensed_pattern_count",
    "multi_ap_groups",
];

/// Load-sweep CSV with the fixed, documented columns; rows are emitted in
/// the caller's order (the CLI sorts by scheme then load). `notes` become
/// `# note …` preamble lines — the sweep audit (e.g. analytic-objective
/// monotonicity violations) reports through them rather than failing.
pub fn sweep_csv(rows: &[SweepRow], manifest_hash: &str, notes: &[String]) -> String {
    let mut doc = CsvDoc::new(manifest_hash);
    for note in notes {
        doc.comment("note", note);
    }
    let mut records = vec![SWEEP_COLUMNS.iter().map(|c| c.to_string()).collect::<Vec<_>>()];
    for r in rows {
        records.push(vec![
            r.scheme.clone(),
            fmt_f64(r.load_pkts_s),
            fmt_f64(r.objective_s),
            fmt_f64(r.simulated_mean_s),
            fmt_f64(r.simulated_ci_s),
            fmt_f64(r.stable_fraction),
            r.licensed_pattern_count.to_string(),
            r.unlicensed_pattern_count.to_string(),
            r.multi_ap_groups.to_string(),
        ]);
    }
    doc.rows(records)
}

/// Key-value text form of the sparsity audit.
pub fn sparsity_text(rep: &SparsityReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "zero_threshold {}", fmt_f64(rep.zero_threshold));
    let _ = writeln!(s, "pattern_bound {}", rep.pattern_bound);
    let _ = writeln!(s, "multi_ap_bound {}", rep.multi_ap_bound);
    for l in 0..2 {
        let rat = if l == 0 { "licensed" } else { "unlicensed" };
        let _ = writeln!(s, "{rat}_pattern_count {}", rep.pattern_counts[l]);
        let _ = writeln!(s, "{rat}_multi_ap_groups {}", rep.multi_ap_groups[l]);
        let _ = writeln!(s, "{rat}_pattern_bound_holds {}", rep.pattern_bound_holds[l]);
        let _ = writeln!(s, "{rat}_multi_ap_bound_holds {}", rep.multi_ap_bound_holds[l]);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conservative::{solve_p1, sparsity_check, P1Config, P1Outcome};
    use crate::model::build_efficiency_table;
    use crate::scenario::seeded_topology;
    use crate::sim::{simulate, SimConfig, SimMode};

    fn manifest() -> RunManifest {
        RunManifest {
            tool: "hetsim".into(),
            version: "0.1.0".into(),
            command: "sweep".into(),
            scheme: "all".into(),
            seed: 7,
            scenario_sha256: sha256_hex(b"scenario"),
            loads_pkts_s: vec![5.0, 10.0],
            packets: 200_000,
            warmup_fraction: 0.1,
            packet_length: "exponential".into(),
            vacation: "deterministic".into(),
            stability_margin: 1e-3,
            eps_alternation: 1e-6,
            eps_fixed_point: 1e-6,
            eps_outer: 1e-4,
        }
    }

    #[test]
    fn allocation_text_round_trips_bit_exactly() {
        let top = seeded_topology(8, 3, 5);
        let table = build_efficiency_table(&top).unwrap();
        let P1Outcome::Solved(sol) = solve_p1(&top, &table, &P1Config::default()).unwrap()
        else {
            panic!("seeded scenario must be solvable");
        };
        let text = write_allocation(&sol.allocation);
        let parsed = parse_allocation(&text).unwrap();
        assert_eq!(parsed.n, sol.allocation.n);
        assert_eq!(parsed.k, sol.allocation.k);
        assert_eq!(parsed.scheme, sol.allocation.scheme);
        assert_eq!(parsed.y, sol.allocation.y, "band fractions must round-trip exactly");
        assert_eq!(parsed.x, sol.allocation.x, "link shares must round-trip exactly");
        assert_eq!(parsed.lambda_split, sol.allocation.lambda_split);
        // Canonical form: rewriting the parsed document is byte-identical.
        assert_eq!(write_allocation(&parsed), text);
    }

    #[test]
    fn awkward_floats_survive_the_text_format() {
        let mut alloc = Allocation::zeros(2, 1, Scheme::FullReuse);
        let values = [0.1 + 0.2, 1.0e-300, f64::MIN_POSITIVE, 2.0 / 3.0, 1.0 - 1e-16];
        alloc.y[0][3] = values[0];
        alloc.y[1][1] = values[1];
        alloc.x[0][x_index(2, 1, Pattern(3), 0, 0)] = values[2];
        alloc.x[1][x_index(2, 1, Pattern(1), 0, 0)] = values[3];
        alloc.lambda_split[0][0] = values[4];
        let parsed = parse_allocation(&write_allocation(&alloc)).unwrap();
        assert_eq!(parsed.y, alloc.y);
        assert_eq!(parsed.x, alloc.x);
        assert_eq!(parsed.lambda_split, alloc.lambda_split);
    }

    #[test]
    fn parse_errors_name_the_line_and_field() {
        let cases: [(&str, &str); 6] = [
            ("scheme conservative\n", "line 1: first record must be `version 1`"),
            ("version 1\nscheme conservative\naps 2\ngroups 1\ny 0 9 0.5\nend\n", "line 5"),
            ("version 1\nscheme conservative\naps 2\ngroups 1\nx 0 1 1 0 0.5\nend\n", "not in pattern"),
            ("version 1\nscheme conservative\naps 2\ngroups 1\nsplit 0 0 1.0\nsplit 0 0 2.0\nend\n", "duplicate"),
            ("version 1\nscheme conservative\naps 2\ngroups 1\nsplit 0 0 1.0\n", "missing `end`"),
            ("version 1\nwat 3\n", "unknown record `wat`"),
        ];
        for (text, needle) in cases {
            let err = parse_allocation(text).unwrap_err().to_string();
            assert!(err.contains(needle), "`{err}` should contain `{needle}`");
        }
    }

    #[test]
    fn manifest_json_and_hash_are_deterministic() {
        let m = manifest();
        assert_eq!(m.to_json(), m.to_json());
        assert_eq!(m.hash(), m.hash());
        let mut changed = m.clone();
        changed.seed = 8;
        assert_ne!(m.hash(), changed.hash(), "any field change must change the hash");
        assert!(m.to_json().contains("\"scenario_sha256\""));
    }

    #[test]
    fn sweep_csv_has_the_documented_columns_and_the_manifest_hash() {
        let hash = manifest().hash();
        let rows = vec![
            SweepRow {
                scheme: "conservative".into(),
                load_pkts_s: 5.0,
                objective_s: 0.125,
                simulated_mean_s: 0.13,
                simulated_ci_s: 0.004,
                stable_fraction: 1.0,
                licensed_pattern_count: 7,
                unlicensed_pattern_count: 6,
                multi_ap_groups: 2,
            },
            SweepRow {
                scheme: "conservative".into(),
                load_pkts_s: 60.0,
                objective_s: f64::INFINITY,
                simulated_mean_s: f64::NAN,
                simulated_ci_s: f64::NAN,
                stable_fraction: 0.0,
                licensed_pattern_count: 0,
                unlicensed_pattern_count: 0,
                multi_ap_groups: 0,
            },
        ];
        let note = "objective not monotone for conservative between 5 and 60".to_string();
        let text = sweep_csv(&rows, &hash, std::slice::from_ref(&note));
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), format!("# manifest_sha256 {hash}"));
        assert_eq!(lines.next().unwrap(), format!("# note {note}"));
        assert_eq!(lines.next().unwrap(), SWEEP_COLUMNS.join(","));
        let first = lines.next().unwrap();
        assert_eq!(first, "conservative,5,0.125,0.13,0.004,1,7,6,2");
        let over = lines.next().unwrap();
        assert!(over.contains("inf") && over.contains("NaN"), "{over}");
        assert_eq!(
            sweep_csv(&rows, &hash, std::slice::from_ref(&note)),
            text,
            "emission must be deterministic"
        );
    }

    #[test]
    fn sim_and_delay_csvs_cover_every_queue_once() {
        let top = seeded_topology(9, 2, 3);
        let table = build_efficiency_table(&top).unwrap();
        let P1Outcome::Solved(sol) = solve_p1(&top, &table, &P1Config::default()).unwrap()
        else {
            panic!("seeded scenario must be solvable");
        };
        let cfg = SimConfig { packets: 20_000, mode: SimMode::Conservative, ..SimConfig::default() };
        let result = simulate(&top, &table, &sol.allocation, &cfg).unwrap();
        let hash = manifest().hash();

        let sim_text = sim_csv(&result, &hash);
        let data_rows =
            sim_text.lines().filter(|l| !l.starts_with('#')).count() - 1;
        assert_eq!(data_rows, 6, "one row per (group, RAT)");
        assert!(sim_text.starts_with(&format!("# manifest_sha256 {hash}\n")));
        assert!(sim_text.contains("# network_mean_sojourn_s "));

        let delay_text = delay_csv(&sol.delay, &sol.allocation, &hash);
        let data_rows =
            delay_text.lines().filter(|l| !l.starts_with('#')).count() - 1;
        assert_eq!(data_rows, 6);
        assert!(delay_text.contains(&format!("# objective_s {}", fmt_f64(sol.delay.objective_s))));
    }

    #[test]
    fn sparsity_text_is_complete_and_parseable_as_key_values() {
        let top = seeded_topology(10, 2, 3);
        let table = build_efficiency_table(&top).unwrap();
        let P1Outcome::Solved(sol) = solve_p1(&top, &table, &P1Config::default()).unwrap()
        else {
            panic!("seeded scenario must be solvable");
        };
        let rep = sparsity_check(&sol.allocation, 1e-5);
        let text = sparsity_text(&rep);
        assert_eq!(text.lines().count(), 11);
        for line in text.lines() {
            let mut parts = line.split_whitespace();
            let (key, value) = (parts.next().unwrap(), parts.next().unwrap());
            assert!(parts.next().is_none(), "exactly two fields per line: {line}");
            assert!(!key.is_empty() && !value.is_empty());
        }
        assert!(text.contains(&format!("pattern_bound {}\n", rep.pattern_bound)));
    }
}
