//! Command-line driver around the spectrum-allocation engine: scenario
//! generation, scheme execution, packet simulation, load sweeps, and
//! allocation-file audits. All numeric outputs flow through the report
//! module, so repeated runs with the same manifest are byte-identical.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hetsim_core::baseline::{allocate_full_reuse, allocate_orthogonal};
use hetsim_core::conservative::{
    sparsity_check, Allocation, CapacityVerdict, DelayReport, P1Config, P1Outcome, Scheme,
};
use hetsim_core::model::{build_efficiency_table, EfficiencyTable, Topology};
use hetsim_core::par;
use hetsim_core::report::{
    delay_csv, parse_allocation, sha256_hex, sim_csv, sparsity_text, sweep_csv, write_allocation,
    RunManifest, SweepRow,
};
use hetsim_core::scenario::{GenerateSpec, Scenario, SimSpec};
use hetsim_core::sim::{
    simulate, PacketLengthDist, QueueVerdict, SimConfig, SimMode, VacationDist,
};
use hetsim_core::utilization::{solve_p2, P2Config, P2Outcome};

/// Band fractions and link shares below this count as zero in sparsity
/// audits and sweep reports.
pub const ZERO_THRESHOLD: f64 = 1e-5;

#[derive(Parser)]
#[command(
    name = "hetsim",
    version,
    about = "Spectrum allocation and packet simulation for two-RAT heterogeneous networks"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Write a scenario document with a seeded topology generator block.
    Generate(GenerateArgs),
    /// Solve the selected scheme(s); write allocation files, analytic delay
    /// CSVs, sparsity audits, and the run manifest.
    Allocate(RunArgs),
    /// Solve the selected scheme(s) and packet-simulate each allocation.
    Simulate(RunArgs),
    /// Sweep uniform per-group loads over the selected scheme(s) and emit
    /// the fixed-column comparison surface (analytic + simulated delays).
    Sweep(SweepArgs),
    /// Audit an allocation file: structural parse, physical invariants
    /// against the scenario's topology, sparsity report.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Topology generator seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    aps: usize,
    #[arg(long, default_value_t = 15)]
    groups: usize,
    /// Output directory for scenario.toml.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Conservative,
    Utilization,
    Orthogonal,
    #[value(name = "full-reuse")]
    FullReuse,
    All,
}

impl SchemeArg {
    fn token(self) -> &'static str {
        match self {
            SchemeArg::Conservative => "conservative",
            SchemeArg::Utilization => "utilization",
            SchemeArg::Orthogonal => "orthogonal",
            SchemeArg::FullReuse => "full-reuse",
            SchemeArg::All => "all",
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Scenario document; omitted, a default seeded scenario is used.
    #[arg(long, value_name = "PATH")]
    scenario: Option<PathBuf>,
    /// Scheme selection; omitted, the scenario's `run.scheme` applies.
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    /// Simulation seed override (and generator seed of the default scenario
    /// when --scenario is omitted).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the scenario's `out_dir`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Simulated packet budget override.
    #[arg(long)]
    packets: Option<u64>,
    /// Alternation relative-improvement stop tolerance.
    #[arg(long, value_name = "EPS")]
    eps_alt: Option<f64>,
    /// Activity fixed-point tolerance (utilization scheme).
    #[arg(long, value_name = "EPS")]
    eps_fp: Option<f64>,
    /// Outer-loop movement tolerance (utilization scheme).
    #[arg(long, value_name = "EPS")]
    eps_outer: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Uniform per-group loads in packets/s: `start:step:end` or a comma
    /// list like `5,10,20`; omitted, the scenario's sweep list applies.
    #[arg(long, value_name = "LOADS")]
    loads: Option<String>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Allocation document to audit.
    #[arg(long, value_name = "PATH")]
    allocation: PathBuf,
    /// Scenario providing the topology; omitted, the default seeded
    /// scenario is used.
    #[arg(long, value_name = "PATH")]
    scenario: Option<PathBuf>,
}

/// Library entry point for the binary; returns the process exit code.
pub fn main_with<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(2));
        }
    };
    let result = match cli.verb {
        Verb::Generate(a) => generate(a),
        Verb::Allocate(a) => allocate(a),
        Verb::Simulate(a) => simulate_verb(a),
        Verb::Sweep(a) => sweep(a),
        Verb::Validate(a) => validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

// ---------------------------------------------------------------------------
// Scenario loading and configuration plumbing
// ---------------------------------------------------------------------------

struct Loaded {
    scenario: Scenario,
    /// Exact document text, the manifest's scenario fingerprint.
    text: String,
    topology: Topology,
    table: EfficiencyTable,
}

fn default_scenario(seed: u64) -> Scenario {
    let mut s = Scenario::default();
    s.topology.generate = Some(GenerateSpec { seed, ..GenerateSpec::default() });
    s
}

fn load(scenario_path: Option<&Path>, seed: Option<u64>) -> Result<Loaded> {
    let (text, mut scenario) = match scenario_path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading scenario {}", p.display()))?;
            let scenario = Scenario::from_toml_str(&text)?;
            (text, scenario)
        }
        None => {
            let scenario = default_scenario(seed.unwrap_or(42));
            let text = toml::to_string_pretty(&scenario)
                .context("serializing the default scenario")?;
            (text, scenario)
        }
    };
    if let Some(seed) = seed {
        scenario.sim.seed = seed;
    }
    scenario.validate()?;
    let topology = scenario.build_topology()?;
    let table = build_efficiency_table(&topology)?;
    Ok(Loaded { scenario, text, topology, table })
}

fn out_dir(cli_out: Option<&Path>, scenario: &Scenario) -> Result<PathBuf> {
    let dir = cli_out
        .map(Path::to_path_buf)
        .or_else(|| scenario.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir)
}

fn p1_config(a: &RunArgs) -> P1Config {
    let mut c = P1Config::default();
    if let Some(e) = a.eps_alt {
        c.alternate.rel_tol = e;
    }
    c
}

fn p2_config(a: &RunArgs) -> P2Config {
    let mut c = P2Config { p1: p1_config(a), ..P2Config::default() };
    if let Some(e) = a.eps_fp {
        c.fixed_point.eps = e;
    }
    if let Some(e) = a.eps_outer {
        c.eps_outer = e;
    }
    c
}

fn sim_config(spec: &SimSpec, packets: Option<u64>, seed: Option<u64>) -> Result<SimConfig> {
    let mode = match spec.mode.as_str() {
        "conservative" => SimMode::Conservative,
        "utilization" => SimMode::Utilization,
        other => bail!("unknown sim.mode `{other}` (expected conservative|utilization)"),
    };
    let packet_length = match spec.packet_length.as_str() {
        "exponential" => PacketLengthDist::Exponential,
        "deterministic" => PacketLengthDist::Deterministic,
        other => bail!("unknown sim.packet_length `{other}` (expected exponential|deterministic)"),
    };
    let vacation = match spec.vacation.as_str() {
        "deterministic" => VacationDist::Deterministic,
        "exponential" => VacationDist::Exponential,
        other => bail!("unknown sim.vacation `{other}` (expected deterministic|exponential)"),
    };
    Ok(SimConfig {
        mode,
        packets: packets.unwrap_or(spec.packets),
        duration_s: None,
        warmup_fraction: spec.warmup_fraction,
        seed: seed.unwrap_or(spec.seed),
        packet_length,
        vacation,
    })
}

fn scheme_selection(token: &str) -> Result<Vec<Scheme>> {
    if token == "all" {
        return Ok(vec![
            Scheme::Conservative,
            Scheme::Utilization,
            Scheme::Orthogonal,
            Scheme::FullReuse,
        ]);
    }
    Ok(vec![Scheme::parse(token)?])
}

fn effective_scheme_token<'a>(a: &RunArgs, scenario: &'a Scenario) -> &'a str {
    match a.scheme {
        Some(s) => s.token(),
        None => scenario.run.scheme.as_str(),
    }
}

fn manifest(
    command: &str,
    scheme_token: &str,
    loaded: &Loaded,
    sim_cfg: &SimConfig,
    loads: &[f64],
    p1: &P1Config,
    p2: &P2Config,
) -> RunManifest {
    RunManifest {
        tool: "hetsim".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        scheme: scheme_token.into(),
        seed: sim_cfg.seed,
        scenario_sha256: sha256_hex(loaded.text.as_bytes()),
        loads_pkts_s: loads.to_vec(),
        packets: sim_cfg.packets,
        warmup_fraction: sim_cfg.warmup_fraction,
        packet_length: loaded.scenario.sim.packet_length.clone(),
        vacation: loaded.scenario.sim.vacation.clone(),
        stability_margin: p1.stability_margin,
        eps_alternation: p1.alternate.rel_tol,
        eps_fixed_point: p2.fixed_point.eps,
        eps_outer: p2.eps_outer,
    }
}

// ---------------------------------------------------------------------------
// Scheme execution
// ---------------------------------------------------------------------------

enum SchemeRun {
    Solved { allocation: Allocation, delay: DelayReport },
    OverCapacity(CapacityVerdict),
}

fn run_scheme(
    scheme: Scheme,
    top: &Topology,
    table: &EfficiencyTable,
    p1: &P1Config,
    p2: &P2Config,
) -> Result<SchemeRun> {
    let from_p1 = |outcome: P1Outcome| match outcome {
        P1Outcome::Solved(s) => SchemeRun::Solved { allocation: s.allocation, delay: s.delay },
        P1Outcome::OverCapacity(v) => SchemeRun::OverCapacity(v),
    };
    Ok(match scheme {
        Scheme::Conservative => from_p1(hetsim_core::conservative::solve_p1(top, table, p1)?),
        Scheme::Orthogonal => from_p1(allocate_orthogonal(top, table, p1)?),
        Scheme::FullReuse => from_p1(allocate_full_reuse(top, table, p1)?),
        Scheme::Utilization => match solve_p2(top, table, p2)? {
            P2Outcome::Solved(s) => {
                SchemeRun::Solved { allocation: s.allocation, delay: s.delay }
            }
            P2Outcome::OverCapacity(v) => SchemeRun::OverCapacity(v),
        },
    })
}

// ---------------------------------------------------------------------------
// Verbs
// ---------------------------------------------------------------------------

fn generate(a: GenerateArgs) -> Result<()> {
    let mut scenario = default_scenario(a.seed);
    scenario.topology.generate = Some(GenerateSpec {
        seed: a.seed,
        n_aps: a.aps,
        k_ue_groups: a.groups,
        ..GenerateSpec::default()
    });
    scenario.validate()?;
    scenario.build_topology().context("generated scenario must build")?;
    fs::create_dir_all(&a.out)
        .with_context(|| format!("creating output directory {}", a.out.display()))?;
    let path = a.out.join("scenario.toml");
    fs::write(&path, toml::to_string_pretty(&scenario).context("serializing scenario")?)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn allocate(a: RunArgs) -> Result<()> {
    let loaded = load(a.scenario.as_deref(), a.seed)?;
    let out = out_dir(a.out.as_deref(), &loaded.scenario)?;
    let (p1, p2) = (p1_config(&a), p2_config(&a));
    let sim_cfg = sim_config(&loaded.scenario.sim, a.packets, a.seed)?;
    let token = effective_scheme_token(&a, &loaded.scenario);
    let schemes = scheme_selection(token)?;
    let man = manifest("allocate", token, &loaded, &sim_cfg, &[], &p1, &p2);
    fs::write(out.join("manifest.json"), man.to_json())?;
    let hash = man.hash();

    for scheme in schemes {
        match run_scheme(scheme, &loaded.topology, &loaded.table, &p1, &p2)? {
            SchemeRun::Solved { allocation, delay } => {
                let text = write_allocation(&allocation);
                parse_allocation(&text)
                    .context("internal: emitted allocation must re-parse")?;
                let s = scheme.as_str();
                fs::write(out.join(format!("allocation-{s}.txt")), &text)?;
                fs::write(
                    out.join(format!("delay-{s}.csv")),
                    delay_csv(&delay, &allocation, &hash),
                )?;
                let sparsity = sparsity_check(&allocation, ZERO_THRESHOLD);
                fs::write(out.join(format!("sparsity-{s}.txt")), sparsity_text(&sparsity))?;
                println!("{s}: objective {} s", delay.objective_s);
            }
            SchemeRun::OverCapacity(v) => {
                println!(
                    "{}: over capacity (max load scale {}) — {}",
                    scheme.as_str(),
                    v.max_load_scale,
                    v.bottleneck
                );
            }
        }
    }
    Ok(())
}

fn simulate_verb(a: RunArgs) -> Result<()> {
    let loaded = load(a.scenario.as_deref(), a.seed)?;
    let out = out_dir(a.out.as_deref(), &loaded.scenario)?;
    let (p1, p2) = (p1_config(&a), p2_config(&a));
    let sim_cfg = sim_config(&loaded.scenario.sim, a.packets, a.seed)?;
    let token = effective_scheme_token(&a, &loaded.scenario);
    let schemes = scheme_selection(token)?;
    let man = manifest("simulate", token, &loaded, &sim_cfg, &[], &p1, &p2);
    fs::write(out.join("manifest.json"), man.to_json())?;
    let hash = man.hash();

    for scheme in schemes {
        match run_scheme(scheme, &loaded.topology, &loaded.table, &p1, &p2)? {
            SchemeRun::Solved { allocation, delay } => {
                let result = simulate(&loaded.topology, &loaded.table, &allocation, &sim_cfg)?;
                let s = scheme.as_str();
                fs::write(out.join(format!("sim-{s}.csv")), sim_csv(&result, &hash))?;
                println!(
                    "{s}: analytic {} s, simulated {} ± {} s over {} packets",
                    delay.objective_s,
                    result.network_mean_sojourn_s,
                    result.network_ci_s,
                    result.total_packets
                );
            }
            SchemeRun::OverCapacity(v) => {
                println!(
                    "{}: over capacity (max load scale {}) — {}",
                    scheme.as_str(),
                    v.max_load_scale,
                    v.bottleneck
                );
            }
        }
    }
    Ok(())
}

/// Parses `start:step:end` (inclusive, step > 0) or a comma list; every
/// load must be positive and finite.
fn parse_loads(text: &str) -> Result<Vec<f64>> {
    let parse_one = |tok: &str| -> Result<f64> {
        let v: f64 = tok
            .trim()
            .parse()
            .with_context(|| format!("cannot parse load `{tok}`"))?;
        if !v.is_finite() || v <= 0.0 {
            bail!("load `{tok}` must be positive and finite");
        }
        Ok(v)
    };
    let loads = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            bail!("range form is start:step:end, got `{text}`");
        }
        let (start, step, end) = (parse_one(parts[0])?, parse_one(parts[1])?, parse_one(parts[2])?);
        if end < start {
            bail!("range end {end} is below start {start}");
        }
        let count = ((end - start) / step + 1.0 + 1e-9).floor() as usize;
        (0..count).map(|i| start + step * i as f64).collect()
    } else {
        text.split(',').map(parse_one).collect::<Result<Vec<f64>>>()?
    };
    if loads.is_empty() {
        bail!("no loads given");
    }
    Ok(loads)
}

fn sweep(a: SweepArgs) -> Result<()> {
    let loaded = load(a.run.scenario.as_deref(), a.run.seed)?;
    let out = out_dir(a.run.out.as_deref(), &loaded.scenario)?;
    let (p1, p2) = (p1_config(&a.run), p2_config(&a.run));
    let sim_cfg = sim_config(&loaded.scenario.sim, a.run.packets, a.run.seed)?;
    let token = effective_scheme_token(&a.run, &loaded.scenario);
    let schemes = scheme_selection(token)?;
    let mut loads = match &a.loads {
        Some(text) => parse_loads(text)?,
        None => loaded.scenario.run.sweep_loads_pkts_s.clone(),
    };
    if loads.is_empty() {
        bail!("no sweep loads: pass --loads or set run.sweep_loads_pkts_s in the scenario");
    }
    if loads.iter().any(|&v| !v.is_finite() || v <= 0.0) {
        bail!("sweep loads must be positive and finite");
    }
    loads.sort_by(f64::total_cmp);
    loads.dedup();

    let man = manifest("sweep", token, &loaded, &sim_cfg, &loads, &p1, &p2);
    fs::write(out.join("manifest.json"), man.to_json())?;
    let hash = man.hash();

    // Points run in parallel; the row order is fixed by construction
    // (scheme-major, loads ascending), not by completion.
    let points: Vec<(Scheme, f64)> = schemes
        .iter()
        .flat_map(|&s| loads.iter().map(move |&v| (s, v)))
        .collect();
    let rows: Vec<Result<SweepRow>> = par::indexed_map(points.len(), |idx| {
        let (scheme, load) = points[idx];
        sweep_point(scheme, load, &loaded, &p1, &p2, &sim_cfg)
    });
    let rows = rows.into_iter().collect::<Result<Vec<SweepRow>>>()?;

    let notes = monotonicity_notes(&rows);
    for note in &notes {
        eprintln!("warning: {note}");
    }
    fs::write(out.join("sweep.csv"), sweep_csv(&rows, &hash, &notes))?;
    println!(
        "wrote {} rows ({} schemes x {} loads) to {}",
        rows.len(),
        schemes.len(),
        loads.len(),
        out.join("sweep.csv").display()
    );
    Ok(())
}

/// One sweep point: set every group's arrival rate to `load`, solve, and
/// simulate the solved allocation under adaptive-rate physics. Every scheme
/// is simulated in utilization mode — the simulator models the realized
/// network, where service rates depend on who is actually transmitting,
/// regardless of which optimizer produced the allocation; fixed worst-case
/// rates exist only as an analytic oracle harness.
fn sweep_point(
    scheme: Scheme,
    load: f64,
    loaded: &Loaded,
    p1: &P1Config,
    p2: &P2Config,
    sim_cfg: &SimConfig,
) -> Result<SweepRow> {
    let mut top = loaded.topology.clone();
    for ue in &mut top.ue_groups {
        ue.arrival_rate = load;
    }
    // The efficiency table depends on geometry and radio parameters only,
    // so the base one is reused across loads.
    match run_scheme(scheme, &top, &loaded.table, p1, p2)? {
        SchemeRun::OverCapacity(_) => Ok(SweepRow {
            scheme: scheme.as_str().into(),
            load_pkts_s: load,
            objective_s: f64::INFINITY,
            simulated_mean_s: f64::NAN,
            simulated_ci_s: f64::NAN,
            stable_fraction: 0.0,
            licensed_pattern_count: 0,
            unlicensed_pattern_count: 0,
            multi_ap_groups: 0,
        }),
        SchemeRun::Solved { allocation, delay } => {
            let sparsity = sparsity_check(&allocation, ZERO_THRESHOLD);
            let cfg = SimConfig { mode: SimMode::Utilization, ..*sim_cfg };
            let result = simulate(&top, &loaded.table, &allocation, &cfg)?;
            let loaded_queues: Vec<_> =
                result.queues.iter().filter(|q| q.offered_pkts_s > 0.0).collect();
            let stable = loaded_queues
                .iter()
                .filter(|q| matches!(q.verdict, QueueVerdict::Stable))
                .count();
            let stable_fraction = if loaded_queues.is_empty() {
                1.0
            } else {
                stable as f64 / loaded_queues.len() as f64
            };
            Ok(SweepRow {
                scheme: scheme.as_str().into(),
                load_pkts_s: load,
                objective_s: delay.objective_s,
                simulated_mean_s: result.network_mean_sojourn_s,
                simulated_ci_s: result.network_ci_s,
                stable_fraction,
                licensed_pattern_count: sparsity.pattern_counts[0],
                unlicensed_pattern_count: sparsity.pattern_counts[1],
                multi_ap_groups: sparsity.multi_ap_groups.into_iter().max().unwrap_or(0),
            })
        }
    }
}

/// Analytic objectives should not decrease with load within a scheme;
/// violations are reported, never silently accepted.
fn monotonicity_notes(rows: &[SweepRow]) -> Vec<String> {
    let mut notes = Vec::new();
    let mut prev: Option<&SweepRow> = None;
    for row in rows {
        if let Some(p) = prev {
            if p.scheme == row.scheme
                && p.objective_s.is_finite()
                && row.objective_s.is_finite()
                && row.objective_s < p.objective_s * (1.0 - 1e-9)
            {
                notes.push(format!(
                    "analytic objective decreases for {}: {} s at load {} -> {} s at load {}",
                    row.scheme, p.objective_s, p.load_pkts_s, row.objective_s, row.load_pkts_s
                ));
            }
        }
        prev = Some(row);
    }
    notes
}

fn validate(a: ValidateArgs) -> Result<()> {
    let text = fs::read_to_string(&a.allocation)
        .with_context(|| format!("reading allocation {}", a.allocation.display()))?;
    let alloc = parse_allocation(&text)?;
    let loaded = load(a.scenario.as_deref(), None)?;
    alloc.validate(&loaded.topology)?;
    let sparsity = sparsity_check(&alloc, ZERO_THRESHOLD);
    print!("{}", sparsity_text(&sparsity));
    println!(
        "allocation ok: scheme {}, {} APs, {} groups",
        alloc.scheme.as_str(),
        alloc.n,
        alloc.k
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn load_ranges_and_lists_parse() {
        assert_eq!(parse_loads("5:5:20").unwrap(), vec![5.0, 10.0, 15.0, 20.0]);
        assert_eq!(parse_loads("5,2.5,7").unwrap(), vec![5.0, 2.5, 7.0]);
        assert_eq!(parse_loads("3:10:4").unwrap(), vec![3.0]);
        assert!(parse_loads("0:5:10").is_err(), "zero start rejected");
        assert!(parse_loads("5:5").is_err(), "two-part range rejected");
        assert!(parse_loads("a,b").is_err());
        assert!(parse_loads("10:5:5").is_err(), "descending range rejected");
    }

    #[test]
    fn scheme_selection_expands_all_in_fixed_order() {
        let all = scheme_selection("all").unwrap();
        assert_eq!(
            all,
            vec![Scheme::Conservative, Scheme::Utilization, Scheme::Orthogonal, Scheme::FullReuse]
        );
        assert_eq!(scheme_selection("full-reuse").unwrap(), vec![Scheme::FullReuse]);
        assert!(scheme_selection("bogus").is_err());
    }

    #[test]
    fn sim_config_rejects_unknown_tokens() {
        let mut spec = SimSpec::default();
        spec.mode = "psychic".into();
        assert!(sim_config(&spec, None, None).is_err());
        let spec = SimSpec::default();
        let cfg = sim_config(&spec, Some(1000), Some(9)).unwrap();
        assert_eq!(cfg.packets, 1000);
        assert_eq!(cfg.seed, 9);
        assert!(matches!(cfg.mode, SimMode::Utilization));
    }

    #[test]
    fn monotonicity_notes_flag_only_decreases_within_a_scheme() {
        let row = |scheme: &str, load: f64, obj: f64| SweepRow {
            scheme: scheme.into(),
            load_pkts_s: load,
            objective_s: obj,
            simulated_mean_s: f64::NAN,
            simulated_ci_s: f64::NAN,
            stable_fraction: 1.0,
            licensed_pattern_count: 0,
            unlicensed_pattern_count: 0,
            multi_ap_groups: 0,
        };
        let rows = vec![
            row("conservative", 5.0, 0.10),
            row("conservative", 10.0, 0.09),
            row("conservative", 15.0, f64::INFINITY),
            row("utilization", 5.0, 0.05),
            row("utilization", 10.0, 0.06),
        ];
        let notes = monotonicity_notes(&rows);
        assert_eq!(notes.len(), 1, "{notes:?}");
        assert!(notes[0].contains("conservative"));
        // The scheme boundary (0.05 after inf) and the increase are clean.
    }
}
