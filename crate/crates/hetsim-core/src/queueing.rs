//! Analytic delay and utilization formulas: M/M/1, M/M/1 with per-packet
//! vacations, general service-time moments, and the active-set mixtures used
//! by the utilization-dependent model.
//!
//! Instability is encoded as +∞ rather than an error so the optimizer can
//! treat delays as extended-real barrier objectives.

use crate::model::Pattern;
use crate::{Error, Result};

/// Mean sojourn time of an M/M/1 queue: 1/(r − λ), +∞ when r ≤ λ.
pub fn delay_mm1(r: f64, lambda: f64) -> f64 {
    if r > lambda {
        1.0 / (r - lambda)
    } else {
        f64::INFINITY
    }
}

/// Mean sojourn time of an M/M/1 queue whose server takes one vacation with
/// E[V²] = ν after each service: (2 + rλν) / (2(r − λ)), +∞ when r ≤ λ.
pub fn delay_vacation(r: f64, lambda: f64, nu: f64) -> f64 {
    if r > lambda {
        (2.0 + r * lambda * nu) / (2.0 * (r - lambda))
    } else {
        f64::INFINITY
    }
}

/// Service-time moment coefficients: E[X] = β/r and E[X²] = η/r².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceMoments {
    beta: f64,
    eta: f64,
}

impl ServiceMoments {
    pub fn new(beta: f64, eta: f64) -> Result<Self> {
        if !(beta > 0.0) || !(eta > 0.0) {
            return Err(Error::Domain("service moments must be positive".into()));
        }
        if eta < beta * beta {
            return Err(Error::Domain(format!(
                "η = {eta} < β² = {}: no service distribution has these moments",
                beta * beta
            )));
        }
        Ok(ServiceMoments { beta, eta })
    }

    /// Exponential service times (the M/M/1 case).
    pub fn exponential() -> Self {
        ServiceMoments { beta: 1.0, eta: 2.0 }
    }

    /// Deterministic service times (the M/D/1 case).
    pub fn deterministic() -> Self {
        ServiceMoments { beta: 1.0, eta: 1.0 }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

/// Mean sojourn time of an M/G/1 queue with service moments (β, η) and
/// per-packet vacations of second moment ν:
/// [(η/2 − β²)λ + βr + (ν/2)λr²] / [r(r − βλ)], +∞ when r ≤ βλ.
pub fn delay_general(r: f64, lambda: f64, moments: ServiceMoments, nu: f64) -> f64 {
    let (beta, eta) = (moments.beta, moments.eta);
    if r > beta * lambda && r > 0.0 {
        ((eta / 2.0 - beta * beta) * lambda + beta * r + nu / 2.0 * lambda * r * r) / (r * (r - beta * lambda))
    } else {
        f64::INFINITY
    }
}

/// Probability that exactly the APs in `set` are busy, under independent
/// per-AP busy probabilities ρ: Π_{i∈set} ρ_i · Π_{i∉set} (1 − ρ_i).
pub fn active_set_probability(rho: &[f64], set: Pattern) -> Result<f64> {
    let mut p = 1.0;
    for (i, &r) in rho.iter().enumerate() {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Domain(format!("ρ[{i}] = {r} outside [0, 1]")));
        }
        p *= if set.contains(i) { r } else { 1.0 - r };
    }
    Ok(p)
}

fn mixture_delay<F>(rates: &[f64], rho: &[f64], per_term: F) -> f64
where
    F: Fn(f64) -> f64,
{
    let n = rho.len();
    debug_assert_eq!(rates.len(), 1 << n);
    let terms: Vec<f64> = (0..1usize << n)
        .map(|mask| {
            let p = active_set_probability(rho, Pattern(mask as u32)).expect("validated by caller");
            if p == 0.0 {
                0.0
            } else {
                p * per_term(rates[mask])
            }
        })
        .collect();
    crate::par::pairwise_sum(&terms)
}

/// Expected M/M/1 sojourn over the active-set mixture: Σ_I p^I/(r^I − λ).
/// Any unstable term with positive probability makes the result +∞.
pub fn expected_delay_licensed(rates: &[f64], lambda: f64, rho: &[f64]) -> f64 {
    mixture_delay(rates, rho, |r| delay_mm1(r, lambda))
}

/// Expected vacation-queue sojourn over the active-set mixture:
/// Σ_I p^I (2 + r^I λν)/(2(r^I − λ)).
pub fn expected_delay_unlicensed(rates: &[f64], lambda: f64, nu: f64, rho: &[f64]) -> f64 {
    mixture_delay(rates, rho, |r| delay_vacation(r, lambda, nu))
}

/// Expected utilization of a UE queue over the active-set mixture:
/// Σ_I p^I · λ/r^I. A zero rate with positive probability is undefined.
pub fn ue_utilization(rates: &[f64], lambda: f64, rho: &[f64]) -> Result<f64> {
    let n = rho.len();
    debug_assert_eq!(rates.len(), 1 << n);
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let mut terms = Vec::with_capacity(1 << n);
    for mask in 0..1usize << n {
        let p = active_set_probability(rho, Pattern(mask as u32))?;
        if p == 0.0 {
            terms.push(0.0);
            continue;
        }
        if !(rates[mask] > 0.0) {
            return Err(Error::Domain(format!(
                "zero service rate with positive probability p = {p} at active set {mask:#b}"
            )));
        }
        terms.push(p * lambda / rates[mask]);
    }
    Ok(crate::par::pairwise_sum(&terms))
}

/// Outcome flags of an AP-utilization evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ApUtilizationFlags {
    /// The AP holds no bandwidth on this RAT; the value was defined as 0.
    pub degenerate: bool,
    /// The raw ratio fell outside [0, 1] and was clamped.
    pub clamped: bool,
}

/// Average busy fraction of AP i on RAT l implied by per-UE utilizations σ:
/// (Σ_{A∋i} Σ_j σ_j x_{i→j}^{A}) / (Σ_{A∋i} y^{A}), clamped to [0, 1].
///
/// `x_l` is the dense per-RAT x slice, `y_l[mask]` the per-pattern bandwidth
/// shares (index 0, the empty pattern, unused).
pub fn ap_utilization(
    x_l: &[f64],
    y_l: &[f64],
    sigma_l: &[f64],
    n: usize,
    i: usize,
) -> (f64, ApUtilizationFlags) {
    let k = sigma_l.len();
    let mut num = 0.0;
    let mut den = 0.0;
    for mask in 1u32..1 << n {
        let a = Pattern(mask);
        if !a.contains(i) {
            continue;
        }
        den += y_l[mask as usize];
        for (j, &sig) in sigma_l.iter().enumerate() {
            num += sig * x_l[crate::model::x_index(n, k, a, i, j)];
        }
    }
    let mut flags = ApUtilizationFlags::default();
    if den <= 0.0 {
        flags.degenerate = true;
        return (0.0, flags);
    }
    let raw = num / den;
    let clamped = raw.clamp(0.0, 1.0);
    if clamped != raw {
        flags.clamped = true;
    }
    (clamped, flags)
}

/// Closed delay formulas usable as convexity-probe targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DelayFormula {
    Mm1,
    Vacation { nu: f64 },
    General { moments: ServiceMoments, nu: f64 },
}

impl DelayFormula {
    pub fn eval(&self, r: f64, lambda: f64) -> f64 {
        match *self {
            DelayFormula::Mm1 => delay_mm1(r, lambda),
            DelayFormula::Vacation { nu } => delay_vacation(r, lambda, nu),
            DelayFormula::General { moments, nu } => delay_general(r, lambda, moments, nu),
        }
    }

    fn beta(&self) -> f64 {
        match *self {
            DelayFormula::General { moments, .. } => moments.beta,
            _ => 1.0,
        }
    }
}

/// Rectangular sample region strictly inside the stability set r > βλ.
#[derive(Debug, Clone, Copy)]
pub struct ProbeRegion {
    pub r_min: f64,
    pub r_max: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Grid points per axis.
    pub grid: usize,
}

/// Finite-difference convexity check of (r, λ) ↦ λ·delay(r, λ) along each
/// axis: true iff every centered second difference is ≥ −1e-7·(1 + |f|).
pub fn convexity_probe(formula: DelayFormula, region: ProbeRegion) -> bool {
    let beta = formula.beta();
    convexity_probe_fn(|r, lambda| lambda * formula.eval(r, lambda), region, beta)
}

/// Axis-wise convexity probe for an arbitrary objective term; `beta` defines
/// the stability boundary r > βλ that samples (including the finite
/// difference stencils) must stay strictly inside.
pub fn convexity_probe_fn<F>(f: F, region: ProbeRegion, beta: f64) -> bool
where
    F: Fn(f64, f64) -> f64,
{
    assert!(region.grid >= 2, "probe grid needs at least 2 points per axis");
    let hr = (region.r_max - region.r_min) / 1e3;
    let hl = (region.lambda_max - region.lambda_min).max(region.lambda_max * 1e-3) / 1e3;
    let tol = 1e-7;
    let steps = region.grid - 1;
    for a in 0..region.grid {
        for b in 0..region.grid {
            let r = region.r_min + (region.r_max - region.r_min) * a as f64 / steps as f64;
            let lambda =
                region.lambda_min + (region.lambda_max - region.lambda_min) * b as f64 / steps as f64;
            // Skip stencils that would leave the stable region.
            if r - hr <= beta * (lambda + hl) {
                continue;
            }
            let f0 = f(r, lambda);
            let scale = 1.0 + f0.abs();
            let d2r = (f(r + hr, lambda) - 2.0 * f0 + f(r - hr, lambda)) / (hr * hr);
            if d2r < -tol * scale {
                return false;
            }
            let d2l = if lambda - hl >= 0.0 {
                (f(r, lambda + hl) - 2.0 * f0 + f(r, lambda - hl)) / (hl * hl)
            } else {
                0.0
            };
            if d2l < -tol * scale {
                return false;
            }
        }
    }
    true
}
