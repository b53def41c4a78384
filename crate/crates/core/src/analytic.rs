//! Closed-form expectations for the constrained attack.
//!
//! All counts are expectations per block of `m` pulses and are therefore
//! real-valued. Attack parameters are returned unclamped; feasibility is
//! reported through [`AttackPlan`] rather than enforced.

use crate::error::{Error, Result};
use crate::params::{AttackPlan, SystemParams};
use crate::poisson::{pmf, tail};
use crate::strategy::DirectAttackTable;

/// Which constraints Eve satisfies when choosing her parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttackMode {
    /// Count rate and error rate both match the undisturbed channel.
    Matched,
    /// Error rate matches; no blocking is done, so `p_b = 0`.
    ErrorOnly,
}

impl AttackMode {
    pub const ALL: [AttackMode; 2] = [AttackMode::Matched, AttackMode::ErrorOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            AttackMode::Matched => "matched",
            AttackMode::ErrorOnly => "error-only",
        }
    }

    pub fn matches_count_rate(self) -> bool {
        matches!(self, AttackMode::Matched)
    }
}

impl std::fmt::Display for AttackMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AttackMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "matched" => Ok(AttackMode::Matched),
            "error-only" => Ok(AttackMode::ErrorOnly),
            other => Err(format!("unknown attack mode `{other}` (expected matched or error-only)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticReport {
    /// Sifted bits per block without Eve.
    pub n: f64,
    /// Sifted bits per block under attack.
    pub n_hat: f64,
    /// Errors per block without Eve.
    pub e_t: f64,
    /// Errors per block under attack.
    pub e_t_hat: f64,
    /// Sifted bits per block known to Eve.
    pub s_partial: f64,
    /// Per-pulse direct-attack success probability used for this report.
    pub z_e: f64,
    pub plan: AttackPlan,
    pub mode: AttackMode,
    /// Block size the counts refer to.
    pub m: u64,
    pub fingerprint: u64,
}

fn half_block(p: &SystemParams) -> f64 {
    p.m() as f64 / 2.0
}

/// Probability that a 1- or 2-photon pulse reaches and registers at Bob.
fn weak_pulse_detection(p: &SystemParams) -> f64 {
    (pmf(p.mu(), 1) + pmf(p.mu(), 2)) * p.eta() * p.alpha()
}

pub fn sifted_bits_baseline(p: &SystemParams) -> f64 {
    half_block(p) * tail(p.detected_mean(), 1)
}

pub fn n_hat_attacked(p: &SystemParams, p_b: f64, z_e: f64) -> f64 {
    half_block(p) * (weak_pulse_detection(p) * (1.0 - p_b) + z_e * p.eta())
}

/// Blocking probability that makes the attacked sifted-bit count equal the
/// undisturbed one.
pub fn solve_p_b(p: &SystemParams, z_e: f64) -> Result<f64> {
    let denom = weak_pulse_detection(p);
    if !(denom > 0.0 && denom.is_finite()) {
        return Err(Error::Degenerate(format!("no 1- or 2-photon pulses at mu = {} (denominator {denom:e})", p.mu())));
    }
    Ok(1.0 - (tail(p.detected_mean(), 1) - z_e * p.eta()) / denom)
}

pub fn errors_baseline(p: &SystemParams) -> f64 {
    sifted_bits_baseline(p) * p.r_c()
}

/// Errors per block when Eve removes intrinsic errors and only her wrong-basis
/// resends on single-photon pulses disturb the key.
pub fn e_t_hat_attacked(p: &SystemParams, p_b: f64, p_m: f64) -> f64 {
    p.m() as f64 / 8.0 * pmf(p.mu(), 1) * (1.0 - p_b) * p_m * p.eta() * p.alpha()
}

/// Measuring probability that reproduces the undisturbed error count for a
/// given blocking probability.
pub fn solve_p_m(p: &SystemParams, p_b: f64) -> Result<f64> {
    if p_b == 1.0 {
        return Err(Error::Degenerate(
            "p_b = 1 blocks every single-photon pulse; no measuring rate reproduces the error count".into(),
        ));
    }
    let single = pmf(p.mu(), 1) * p.eta() * p.alpha();
    if !(single > 0.0 && single.is_finite()) {
        return Err(Error::Degenerate(format!("no single-photon pulses at mu = {}", p.mu())));
    }
    Ok(tail(p.detected_mean(), 1) / single * (4.0 * p.r_c() / (1.0 - p_b)))
}

/// Sifted bits per block that Eve knows, before error correction.
pub fn eve_information(p: &SystemParams, plan: &AttackPlan, z_e: f64) -> f64 {
    let ea = p.eta() * p.alpha();
    let kept = 1.0 - plan.p_b;
    let intercepted = 0.5 * pmf(p.mu(), 1) * kept * plan.p_m * ea;
    let split = pmf(p.mu(), 2) * kept * ea;
    let direct = z_e * p.eta();
    half_block(p) * (intercepted + split + direct)
}

/// Solves the attack for `mode` and evaluates every expectation.
///
/// Infeasible plans are a result, not an error: the report carries raw
/// parameters and cleared feasibility flags.
pub fn full_report(p: &SystemParams, table: &DirectAttackTable, mode: AttackMode) -> Result<AnalyticReport> {
    let z_e = table.z_e(p.mu())?;
    let p_b = if mode.matches_count_rate() { solve_p_b(p, z_e)? } else { 0.0 };
    let p_m = solve_p_m(p, p_b)?;
    let plan = AttackPlan::new(p_b, p_m);
    Ok(AnalyticReport {
        n: sifted_bits_baseline(p),
        n_hat: n_hat_attacked(p, p_b, z_e),
        e_t: errors_baseline(p),
        e_t_hat: e_t_hat_attacked(p, p_b, p_m),
        s_partial: eve_information(p, &plan, z_e),
        z_e,
        plan,
        mode,
        m: p.m(),
        fingerprint: p.fingerprint(),
    })
}
