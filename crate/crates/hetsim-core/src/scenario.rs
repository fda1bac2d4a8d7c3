//! Scenario ingestion: seeded topology generation plus a human-editable
//! structured-text schema with explicit units in every field name.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Ap, Rat, Topology, UeGroup};
use crate::{Error, Result};

pub const DEFAULT_AREA_M: (f64, f64) = (100.0, 200.0);
pub const DEFAULT_N_APS: usize = 5;
pub const DEFAULT_K_GROUPS: usize = 15;
/// Per-group arrival-rate range (packets/s) used when generating topologies;
/// configurable per scenario.
pub const DEFAULT_LAMBDA_RANGE_PKTS_S: (f64, f64) = (5.0, 25.0);
/// Second moments of the listen-before-talk vacation, heavy/medium/light.
pub const DEFAULT_NU_LEVELS_S2: [f64; 3] = [1.0, 0.01, 0.0025];

/// Physical-layer parameters; defaults follow the standard dense-deployment
/// configuration (23 dBm transmit power, 10 MHz per RAT, 0.5 Mbit packets).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioSpec {
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub pathloss_offset_db: f64,
    pub pathloss_slope_db_per_decade: f64,
    pub mean_packet_bits: f64,
    pub sinr_cap_db: f64,
    /// Medium-share discount of the unlicensed RAT (α).
    pub unlicensed_discount: f64,
}

impl Default for RadioSpec {
    fn default() -> Self {
        RadioSpec {
            bandwidth_hz: 1.0e7,
            tx_power_dbm: 23.0,
            noise_psd_dbm_hz: -174.0,
            pathloss_offset_db: 140.7,
            pathloss_slope_db_per_decade: 36.7,
            mean_packet_bits: 5.0e5,
            sinr_cap_db: 30.0,
            unlicensed_discount: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateSpec {
    pub seed: u64,
    pub area_width_m: f64,
    pub area_height_m: f64,
    pub n_aps: usize,
    pub k_ue_groups: usize,
    pub lambda_min_pkts_s: f64,
    pub lambda_max_pkts_s: f64,
    pub nu_levels_s2: Vec<f64>,
}

impl Default for GenerateSpec {
    fn default() -> Self {
        GenerateSpec {
            seed: 42,
            area_width_m: DEFAULT_AREA_M.0,
            area_height_m: DEFAULT_AREA_M.1,
            n_aps: DEFAULT_N_APS,
            k_ue_groups: DEFAULT_K_GROUPS,
            lambda_min_pkts_s: DEFAULT_LAMBDA_RANGE_PKTS_S.0,
            lambda_max_pkts_s: DEFAULT_LAMBDA_RANGE_PKTS_S.1,
            nu_levels_s2: DEFAULT_NU_LEVELS_S2.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApSpec {
    pub x_m: f64,
    pub y_m: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeGroupSpec {
    pub x_m: f64,
    pub y_m: f64,
    pub arrival_rate_pkts_s: f64,
    pub nu_s2: f64,
}

/// Topology source: a seeded generator block, or explicit AP/UE lists.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologySpec {
    pub generate: Option<GenerateSpec>,
    pub aps: Option<Vec<ApSpec>>,
    pub ue_groups: Option<Vec<UeGroupSpec>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSpec {
    /// conservative | utilization | orthogonal | full-reuse | all
    pub scheme: String,
    /// Uniform per-group loads (packets/s) swept in order; empty means "use
    /// the topology's own per-group rates".
    pub sweep_loads_pkts_s: Vec<f64>,
    /// Multiplier applied to every per-group arrival rate before solving.
    pub load_multiplier: f64,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec { scheme: "all".into(), sweep_loads_pkts_s: Vec::new(), load_multiplier: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSpec {
    /// conservative | utilization
    pub mode: String,
    pub packets: u64,
    pub warmup_fraction: f64,
    pub seed: u64,
    /// exponential | deterministic
    pub packet_length: String,
    /// deterministic | exponential
    pub vacation: String,
}

impl Default for SimSpec {
    fn default() -> Self {
        SimSpec {
            mode: "utilization".into(),
            packets: 200_000,
            warmup_fraction: 0.1,
            seed: 1,
            packet_length: "exponential".into(),
            vacation: "deterministic".into(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub topology: TopologySpec,
    pub radio: RadioSpec,
    pub run: RunSpec,
    pub sim: SimSpec,
    /// Output directory for report files; CLI `--out` overrides.
    pub out_dir: Option<String>,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Scenario> {
        let sc: Scenario = toml::from_str(text)
            .map_err(|e| Error::Scenario(format!("scenario parse error: {e}")))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.topology;
        if t.generate.is_some() && (t.aps.is_some() || t.ue_groups.is_some()) {
            return Err(Error::Scenario(
                "topology: give either `generate` or explicit `aps`/`ue_groups`, not both".into(),
            ));
        }
        if t.generate.is_none() {
            match (&t.aps, &t.ue_groups) {
                (Some(aps), Some(ues)) => {
                    if aps.is_empty() {
                        return Err(Error::Scenario("topology.aps: empty AP list".into()));
                    }
                    if ues.is_empty() {
                        return Err(Error::Scenario("topology.ue_groups: empty UE group list".into()));
                    }
                }
                _ => {
                    return Err(Error::Scenario(
                        "topology: need a `generate` block or both `aps` and `ue_groups`".into(),
                    ));
                }
            }
        }
        if let Some(g) = &t.generate {
            if g.n_aps < 1 || g.k_ue_groups < 1 {
                return Err(Error::Scenario("topology.generate: n_aps and k_ue_groups must be ≥ 1".into()));
            }
            if !(g.lambda_min_pkts_s >= 0.0 && g.lambda_max_pkts_s >= g.lambda_min_pkts_s) {
                return Err(Error::Scenario("topology.generate: invalid lambda range".into()));
            }
            if g.nu_levels_s2.is_empty() || g.nu_levels_s2.iter().any(|&v| v < 0.0) {
                return Err(Error::Scenario("topology.generate: nu_levels_s2 must be nonempty and ≥ 0".into()));
            }
            if !(g.area_width_m > 0.0 && g.area_height_m > 0.0) {
                return Err(Error::Scenario("topology.generate: area must be positive".into()));
            }
        }
        if !(self.run.load_multiplier > 0.0) {
            return Err(Error::Scenario("run.load_multiplier must be > 0".into()));
        }
        if self.run.sweep_loads_pkts_s.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Scenario("run.sweep_loads_pkts_s entries must be > 0".into()));
        }
        match self.run.scheme.as_str() {
            "conservative" | "utilization" | "orthogonal" | "full-reuse" | "all" => {}
            other => {
                return Err(Error::Scenario(format!(
                    "run.scheme: unknown scheme `{other}` (expected conservative, utilization, orthogonal, full-reuse, or all)"
                )))
            }
        }
        if !(0.0..=0.5).contains(&self.sim.warmup_fraction) {
            return Err(Error::Scenario("sim.warmup_fraction must lie in [0, 0.5]".into()));
        }
        match self.sim.mode.as_str() {
            "conservative" | "utilization" => {}
            other => return Err(Error::Scenario(format!("sim.mode: unknown mode `{other}`"))),
        }
        match self.sim.packet_length.as_str() {
            "exponential" | "deterministic" => {}
            other => return Err(Error::Scenario(format!("sim.packet_length: unknown choice `{other}`"))),
        }
        match self.sim.vacation.as_str() {
            "deterministic" | "exponential" => {}
            other => return Err(Error::Scenario(format!("sim.vacation: unknown choice `{other}`"))),
        }
        Ok(())
    }

    /// Materialize the topology (generated or explicit) with the radio
    /// parameters applied and the load multiplier folded into arrival rates.
    pub fn build_topology(&self) -> Result<Topology> {
        let mut top = match (&self.topology.generate, &self.topology.aps, &self.topology.ue_groups) {
            (Some(g), None, None) => generate_topology(g, &self.radio)?,
            (None, Some(aps), Some(ues)) => {
                let aps = aps
                    .iter()
                    .enumerate()
                    .map(|(i, a)| Ap { id: i, x_m: a.x_m, y_m: a.y_m })
                    .collect();
                let ue_groups = ues
                    .iter()
                    .enumerate()
                    .map(|(j, u)| UeGroup {
                        id: j,
                        x_m: u.x_m,
                        y_m: u.y_m,
                        arrival_rate: u.arrival_rate_pkts_s,
                        vacation_second_moment: u.nu_s2,
                    })
                    .collect();
                let top = Topology {
                    aps,
                    ue_groups,
                    rats: rats_from_radio(&self.radio),
                    noise_psd_w_hz: dbm_per_hz_to_w(self.radio.noise_psd_dbm_hz),
                    pathloss_offset_db: self.radio.pathloss_offset_db,
                    pathloss_slope_db_per_decade: self.radio.pathloss_slope_db_per_decade,
                    mean_packet_bits: self.radio.mean_packet_bits,
                    sinr_cap_db: self.radio.sinr_cap_db,
                };
                top.validate()?;
                top
            }
            _ => return Err(Error::Scenario("topology: inconsistent specification".into())),
        };
        if self.run.load_multiplier != 1.0 {
            for ue in &mut top.ue_groups {
                ue.arrival_rate *= self.run.load_multiplier;
            }
        }
        Ok(top)
    }
}

fn dbm_per_hz_to_w(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn rats_from_radio(radio: &RadioSpec) -> Vec<Rat> {
    let tx_psd_w_hz = 10f64.powf((radio.tx_power_dbm - 30.0) / 10.0) / radio.bandwidth_hz;
    vec![
        Rat {
            index: 0,
            bandwidth_hz: radio.bandwidth_hz,
            discount: 1.0,
            licensed: true,
            tx_psd_w_hz,
        },
        Rat {
            index: 1,
            bandwidth_hz: radio.bandwidth_hz,
            discount: radio.unlicensed_discount,
            licensed: false,
            tx_psd_w_hz,
        },
    ]
}

/// Seeded uniform drop of APs and UE groups over the area; arrival rates are
/// uniform over the configured range and each group gets one of the vacation
/// second-moment levels. Deterministic for a fixed seed: draws happen in a
/// fixed order (AP positions, then per-UE position/rate/level).
pub fn generate_topology(g: &GenerateSpec, radio: &RadioSpec) -> Result<Topology> {
    if g.n_aps < 1 || g.k_ue_groups < 1 {
        return Err(Error::Scenario("generate_topology: n_aps and k_ue_groups must be ≥ 1".into()));
    }
    if !(g.lambda_max_pkts_s >= g.lambda_min_pkts_s && g.lambda_min_pkts_s >= 0.0) {
        return Err(Error::Scenario("generate_topology: invalid lambda range".into()));
    }
    if g.nu_levels_s2.is_empty() {
        return Err(Error::Scenario("generate_topology: nu_levels_s2 must be nonempty".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(g.seed);
    let aps = (0..g.n_aps)
        .map(|i| Ap {
            id: i,
            x_m: rng.gen_range(0.0..g.area_width_m),
            y_m: rng.gen_range(0.0..g.area_height_m),
        })
        .collect();
    let ue_groups = (0..g.k_ue_groups)
        .map(|j| {
            let x_m = rng.gen_range(0.0..g.area_width_m);
            let y_m = rng.gen_range(0.0..g.area_height_m);
            let arrival_rate = if g.lambda_max_pkts_s > g.lambda_min_pkts_s {
                rng.gen_range(g.lambda_min_pkts_s..g.lambda_max_pkts_s)
            } else {
                g.lambda_min_pkts_s
            };
            let level = rng.gen_range(0..g.nu_levels_s2.len());
            UeGroup {
                id: j,
                x_m,
                y_m,
                arrival_rate,
                vacation_second_moment: g.nu_levels_s2[level],
            }
        })
        .collect();
    let top = Topology {
        aps,
        ue_groups,
        rats: rats_from_radio(radio),
        noise_psd_w_hz: dbm_per_hz_to_w(radio.noise_psd_dbm_hz),
        pathloss_offset_db: radio.pathloss_offset_db,
        pathloss_slope_db_per_decade: radio.pathloss_slope_db_per_decade,
        mean_packet_bits: radio.mean_packet_bits,
        sinr_cap_db: radio.sinr_cap_db,
    };
    top.validate()?;
    Ok(top)
}

/// Convenience constructor used by tests and benchmarks: a generated
/// topology with default radio parameters.
pub fn seeded_topology(seed: u64, n_aps: usize, k_ue_groups: usize) -> Topology {
    let g = GenerateSpec { seed, n_aps, k_ue_groups, ..Default::default() };
    generate_topology(&g, &RadioSpec::default()).expect("default generation parameters are valid")
}
