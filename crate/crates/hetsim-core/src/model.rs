//! Network model: APs, UE groups, RATs, interference patterns, and the
//! per-link spectral-efficiency table.
//!
//! A pattern is a subset of APs sharing a slice of spectrum; the efficiency
//! of a link depends on which other pattern members interfere. Patterns are
//! bitmasks over AP indices, enumerated exhaustively (hence the n ≤ 12 cap).

use crate::{Error, Result};

/// Hard cap on AP count: every structure below materializes all 2^n patterns.
pub const MAX_PATTERN_APS: usize = 12;

/// Distances are floored at 1 m before entering the log-distance pathloss
/// model, which is not calibrated below that range.
pub const MIN_DISTANCE_M: f64 = 1.0;

/// A subset of APs sharing a spectrum resource, as a bitmask over AP indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pattern(pub u32);

impl Pattern {
    pub const EMPTY: Pattern = Pattern(0);

    pub fn full(n: usize) -> Pattern {
        Pattern(((1u64 << n) - 1) as u32)
    }

    pub fn contains(self, ap: usize) -> bool {
        self.0 >> ap & 1 == 1
    }

    pub fn with(self, ap: usize) -> Pattern {
        Pattern(self.0 | (1 << ap))
    }

    pub fn intersect(self, other: Pattern) -> Pattern {
        Pattern(self.0 & other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Member AP indices in ascending order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..u32::BITS as usize).filter(move |&i| self.contains(i))
    }
}

/// All 2^n − 1 nonempty patterns in ascending bitmask order.
pub fn enumerate_patterns(n: usize) -> Result<Vec<Pattern>> {
    if n == 0 || n > MAX_PATTERN_APS {
        return Err(Error::PatternBudget { n });
    }
    Ok((1u32..1 << n).map(Pattern).collect())
}

/// All (pattern, member AP) pairs in ascending (pattern, AP) order — the
/// canonical flat enumeration of the x decision variables for one RAT/UE.
pub fn enumerate_slots(n: usize) -> Result<Vec<(Pattern, usize)>> {
    let pats = enumerate_patterns(n)?;
    let mut slots = Vec::with_capacity(n * (1 << (n - 1)));
    for a in pats {
        for i in a.iter() {
            slots.push((a, i));
        }
    }
    Ok(slots)
}

/// One radio access technology.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rat {
    /// The formulation's superscript l (1-based, for display only).
    pub index: usize,
    pub bandwidth_hz: f64,
    /// Spectral-efficiency discount α ∈ (0, 1]; models unlicensed-band
    /// overheads as a rate derating.
    pub discount: f64,
    pub licensed: bool,
    /// Flat transmit PSD of every AP on this RAT, W/Hz.
    pub tx_psd_w_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ap {
    pub id: usize,
    pub x_m: f64,
    pub y_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeGroup {
    pub id: usize,
    pub x_m: f64,
    pub y_m: f64,
    /// Aggregate Poisson packet arrival rate λ_j, packets/s.
    pub arrival_rate: f64,
    /// Second moment of the unlicensed-band vacation duration, ν_j = E[V²], s².
    pub vacation_second_moment: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub aps: Vec<Ap>,
    pub ue_groups: Vec<UeGroup>,
    /// Exactly 2 RATs in this release: rats[0] licensed, rats[1] unlicensed.
    pub rats: Vec<Rat>,
    pub noise_psd_w_hz: f64,
    /// Pathloss in dB: offset + slope · log10(distance_km).
    pub pathloss_offset_db: f64,
    pub pathloss_slope_db_per_decade: f64,
    /// Mean packet length L, bits.
    pub mean_packet_bits: f64,
    pub sinr_cap_db: f64,
}

impl Topology {
    pub fn n_aps(&self) -> usize {
        self.aps.len()
    }

    pub fn k_groups(&self) -> usize {
        self.ue_groups.len()
    }

    pub fn n_rats(&self) -> usize {
        self.rats.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_aps();
        if n == 0 || n > MAX_PATTERN_APS {
            return Err(Error::PatternBudget { n });
        }
        if self.ue_groups.is_empty() {
            return Err(Error::Validation("at least one UE group is required".into()));
        }
        if self.rats.len() != 2 {
            return Err(Error::Validation(format!(
                "exactly 2 RATs are supported in this release, got {}",
                self.rats.len()
            )));
        }
        for rat in &self.rats {
            if !(rat.bandwidth_hz > 0.0) {
                return Err(Error::Validation(format!("RAT {}: bandwidth_hz must be > 0", rat.index)));
            }
            if !(rat.discount > 0.0 && rat.discount <= 1.0) {
                return Err(Error::Validation(format!("RAT {}: discount must be in (0, 1]", rat.index)));
            }
            if !(rat.tx_psd_w_hz >= 0.0) {
                return Err(Error::Validation(format!("RAT {}: negative transmit PSD", rat.index)));
            }
        }
        for ue in &self.ue_groups {
            if !(ue.arrival_rate >= 0.0) {
                return Err(Error::Validation(format!("UE group {}: arrival rate must be ≥ 0", ue.id)));
            }
            if !(ue.vacation_second_moment >= 0.0) {
                return Err(Error::Validation(format!("UE group {}: ν must be ≥ 0", ue.id)));
            }
        }
        if !(self.noise_psd_w_hz > 0.0) {
            return Err(Error::Validation("noise PSD must be > 0 W/Hz".into()));
        }
        if !(self.mean_packet_bits > 0.0) {
            return Err(Error::Validation("mean packet length must be > 0 bits".into()));
        }
        Ok(())
    }

    /// Linear pathloss gain from AP i to UE group j.
    pub fn gain(&self, ap: usize, ue: usize) -> f64 {
        let a = &self.aps[ap];
        let u = &self.ue_groups[ue];
        let d_m = ((a.x_m - u.x_m).powi(2) + (a.y_m - u.y_m).powi(2)).sqrt().max(MIN_DISTANCE_M);
        let pl_db = self.pathloss_offset_db + self.pathloss_slope_db_per_decade * (d_m / 1000.0).log10();
        10f64.powf(-pl_db / 10.0)
    }

    pub fn sinr_cap_linear(&self) -> f64 {
        10f64.powf(self.sinr_cap_db / 10.0)
    }

    pub fn total_arrival_rate(&self) -> f64 {
        crate::par::pairwise_sum(&self.ue_groups.iter().map(|u| u.arrival_rate).collect::<Vec<_>>())
    }
}

/// Noise-plus-interference PSD at UE j when AP i serves it inside pattern `a`:
/// every other pattern member is assumed to transmit.
pub fn interference_psd(top: &Topology, l: usize, a: Pattern, i: usize, j: usize) -> Result<f64> {
    if !a.contains(i) {
        return Err(Error::Domain(format!(
            "serving AP {i} is not a member of pattern {:#b}",
            a.0
        )));
    }
    let psd = top.rats[l].tx_psd_w_hz;
    let mut acc = top.noise_psd_w_hz;
    for other in a.iter() {
        if other != i {
            acc += psd * top.gain(other, j);
        }
    }
    Ok(acc)
}

/// Link spectral efficiency in packets/s: (α·w/L)·log2(1 + min(SINR, cap)),
/// zero when the serving AP is not a pattern member.
pub fn spectral_efficiency(top: &Topology, l: usize, a: Pattern, i: usize, j: usize) -> f64 {
    if !a.contains(i) {
        return 0.0;
    }
    let rat = &top.rats[l];
    let interference = interference_psd(top, l, a, i, j).expect("membership checked above");
    let sinr = (rat.tx_psd_w_hz * top.gain(i, j) / interference).min(top.sinr_cap_linear());
    rat.discount * rat.bandwidth_hz / top.mean_packet_bits * (1.0 + sinr).log2()
}

/// Dense per-link efficiencies s[l][A][i][j], packets/s.
#[derive(Debug, Clone)]
pub struct EfficiencyTable {
    n: usize,
    k: usize,
    m: usize,
    s: Vec<f64>,
}

impl EfficiencyTable {
    pub fn n_aps(&self) -> usize {
        self.n
    }

    pub fn k_groups(&self) -> usize {
        self.k
    }

    pub fn n_rats(&self) -> usize {
        self.m
    }

    #[inline]
    fn idx(&self, l: usize, a: Pattern, i: usize, j: usize) -> usize {
        ((l << self.n | a.0 as usize) * self.n + i) * self.k + j
    }

    #[inline]
    pub fn get(&self, l: usize, a: Pattern, i: usize, j: usize) -> f64 {
        self.s[self.idx(l, a, i, j)]
    }
}

/// Evaluates spectral_efficiency for every (RAT, pattern, AP, UE) tuple.
pub fn build_efficiency_table(top: &Topology) -> Result<EfficiencyTable> {
    top.validate()?;
    let (n, k, m) = (top.n_aps(), top.k_groups(), top.n_rats());
    let per_l = (1usize << n) * n * k;
    // Pattern-major parallel fill; entries for i ∉ A stay zero.
    let chunks = crate::par::indexed_map(m << n, |la| {
        let (l, a) = (la >> n, Pattern((la & ((1 << n) - 1)) as u32));
        let mut block = vec![0.0; n * k];
        for i in a.iter() {
            for j in 0..k {
                block[i * k + j] = spectral_efficiency(top, l, a, i, j);
            }
        }
        block
    });
    let mut s = Vec::with_capacity(m * per_l);
    for block in chunks {
        s.extend_from_slice(&block);
    }
    Ok(EfficiencyTable { n, k, m, s })
}

/// Index into a dense per-RAT x slice laid out as [pattern][ap][ue].
#[inline]
pub fn x_index(n: usize, k: usize, a: Pattern, i: usize, j: usize) -> usize {
    (a.0 as usize * n + i) * k + j
}

/// Length of a dense per-RAT x slice.
pub fn x_len(n: usize, k: usize) -> usize {
    (1 << n) * n * k
}

fn rate_with<F>(table: &EfficiencyTable, x_l: &[f64], l: usize, j: usize, eff_pattern: F) -> f64
where
    F: Fn(Pattern, usize) -> Pattern,
{
    let (n, k) = (table.n, table.k);
    debug_assert_eq!(x_l.len(), x_len(n, k));
    let mut acc = 0.0;
    for a in 1u32..1 << n {
        let a = Pattern(a);
        for i in a.iter() {
            let x = x_l[x_index(n, k, a, i, j)];
            if x != 0.0 {
                acc += table.get(l, eff_pattern(a, i), i, j) * x;
            }
        }
    }
    acc
}

/// Worst-case service rate of UE j on RAT l: every pattern member of every
/// allocated slice is assumed to transmit.
pub fn conservative_rate(table: &EfficiencyTable, x_l: &[f64], l: usize, j: usize) -> f64 {
    rate_with(table, x_l, l, j, |a, _| a)
}

/// Service rate of UE j on RAT l when exactly the APs in `active` transmit:
/// each slice's efficiency is looked up at pattern A ∩ active (zero when the
/// serving AP itself is inactive).
pub fn utilization_rate(table: &EfficiencyTable, x_l: &[f64], l: usize, j: usize, active: Pattern) -> f64 {
    rate_with(table, x_l, l, j, |a, _| a.intersect(active))
}

/// Like [`utilization_rate`] but with UE j's serving AP always counted
/// active: the efficiency of each slice is looked up at (A ∩ active) ∪ {i}.
///
/// This is the realized rate of a busy queue — whenever j is in service its
/// serving APs are transmitting, so they belong to the true active set. It is
/// linear in x, ≥ the conservative rate for any `active`, and strictly
/// positive whenever the UE holds any spectrum; the analytic mixtures and the
/// simulator both use it.
pub fn serving_active_rate(table: &EfficiencyTable, x_l: &[f64], l: usize, j: usize, active: Pattern) -> f64 {
    rate_with(table, x_l, l, j, |a, i| a.intersect(active).with(i))
}
