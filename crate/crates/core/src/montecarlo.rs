//! Pulse-level replay of the attack, used as an independent check on the
//! closed-form expectations.
//!
//! Pulses are grouped into fixed chunks and each chunk draws from its own
//! ChaCha8 stream selected by chunk index, so the tally depends only on the
//! seed and never on how chunks are spread across threads.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::analytic::AnalyticReport;
use crate::error::{Error, Result};
use crate::params::{AttackPlan, SystemParams};
use crate::strategy::DirectAttackTable;

const CHUNK_PULSES: u64 = 1 << 16;

pub const DEFAULT_SIGMA_THRESHOLD: f64 = 3.5;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub params: SystemParams,
    /// Eve's parameters; `None` simulates the undisturbed channel.
    pub plan: Option<AttackPlan>,
    pub table: DirectAttackTable,
    pub n_pulses: u64,
    pub seed: u64,
}

impl SimConfig {
    pub fn baseline(params: SystemParams, table: DirectAttackTable, n_pulses: u64, seed: u64) -> Self {
        Self { params, plan: None, table, n_pulses, seed }
    }

    pub fn attacked(
        params: SystemParams,
        plan: AttackPlan,
        table: DirectAttackTable,
        n_pulses: u64,
        seed: u64,
    ) -> Self {
        Self { params, plan: Some(plan), table, n_pulses, seed }
    }

    pub fn eve_active(&self) -> bool {
        self.plan.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pulses == 0 {
            return Err(Error::InvalidConfig("n_pulses must be >= 1".into()));
        }
        if let Some(plan) = &self.plan {
            if !plan.is_feasible() {
                return Err(Error::InvalidConfig(format!(
                    "attack plan is not executable: p_b = {}, p_m = {} (both must lie in [0, 1])",
                    plan.p_b, plan.p_m
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Counts {
    pulses: u64,
    photon_pulses: u64,
    sifted: u64,
    errors: u64,
    eve_known: u64,
    bob_multi_photon_events: u64,
    blocked_1: u64,
    blocked_2: u64,
    measured_1: u64,
    passed_1: u64,
    indirect_2: u64,
    direct_success: u64,
    direct_fail: u64,
}

impl std::ops::Add for Counts {
    type Output = Counts;

    fn add(self, o: Counts) -> Counts {
        Counts {
            pulses: self.pulses + o.pulses,
            photon_pulses: self.photon_pulses + o.photon_pulses,
            sifted: self.sifted + o.sifted,
            errors: self.errors + o.errors,
            eve_known: self.eve_known + o.eve_known,
            bob_multi_photon_events: self.bob_multi_photon_events + o.bob_multi_photon_events,
            blocked_1: self.blocked_1 + o.blocked_1,
            blocked_2: self.blocked_2 + o.blocked_2,
            measured_1: self.measured_1 + o.measured_1,
            passed_1: self.passed_1 + o.passed_1,
            indirect_2: self.indirect_2 + o.indirect_2,
            direct_success: self.direct_success + o.direct_success,
            direct_fail: self.direct_fail + o.direct_fail,
        }
    }
}

/// Totals of a simulation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimTally {
    pub pulses: u64,
    /// Pulses that carried at least one photon.
    pub photon_pulses: u64,
    pub sifted: u64,
    pub errors: u64,
    pub eve_known: u64,
    /// Pulses in which Bob registered two or more photons.
    pub bob_multi_photon_events: u64,
    pub blocked_1: u64,
    pub blocked_2: u64,
    pub measured_1: u64,
    pub passed_1: u64,
    pub indirect_2: u64,
    pub direct_success: u64,
    pub direct_fail: u64,
    pub sifted_se: f64,
    pub errors_se: f64,
    pub eve_known_se: f64,
    pub eve_active: bool,
    pub fingerprint: u64,
}

/// Binomial standard error of a count observed in `n` trials.
fn binomial_se(count: u64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = count as f64 / n as f64;
    (p * (1.0 - p) * n as f64).sqrt()
}

impl SimTally {
    pub const CSV_HEADER: [&'static str; 19] = [
        "eve_active",
        "pulses",
        "photon_pulses",
        "sifted",
        "errors",
        "eve_known",
        "bob_multi_photon_events",
        "blocked_1",
        "blocked_2",
        "measured_1",
        "passed_1",
        "indirect_2",
        "direct_success",
        "direct_fail",
        "sifted_se",
        "errors_se",
        "eve_known_se",
        "fingerprint",
        "branch_total",
    ];

    fn from_counts(c: Counts, eve_active: bool, fingerprint: u64) -> Self {
        Self {
            pulses: c.pulses,
            photon_pulses: c.photon_pulses,
            sifted: c.sifted,
            errors: c.errors,
            eve_known: c.eve_known,
            bob_multi_photon_events: c.bob_multi_photon_events,
            blocked_1: c.blocked_1,
            blocked_2: c.blocked_2,
            measured_1: c.measured_1,
            passed_1: c.passed_1,
            indirect_2: c.indirect_2,
            direct_success: c.direct_success,
            direct_fail: c.direct_fail,
            sifted_se: binomial_se(c.sifted, c.pulses),
            errors_se: binomial_se(c.errors, c.pulses),
            eve_known_se: binomial_se(c.eve_known, c.pulses),
            eve_active,
            fingerprint,
        }
    }

    /// Sum of the per-branch counters. Equals `photon_pulses` when Eve is active
    /// and zero otherwise.
    pub fn branch_total(&self) -> u64 {
        self.blocked_1
            + self.blocked_2
            + self.measured_1
            + self.passed_1
            + self.indirect_2
            + self.direct_success
            + self.direct_fail
    }

    /// One flat CSV row in [`Self::CSV_HEADER`] order.
    pub fn csv_record(&self) -> Vec<String> {
        let ints = [
            self.pulses,
            self.photon_pulses,
            self.sifted,
            self.errors,
            self.eve_known,
            self.bob_multi_photon_events,
            self.blocked_1,
            self.blocked_2,
            self.measured_1,
            self.passed_1,
            self.indirect_2,
            self.direct_success,
            self.direct_fail,
        ];
        let mut row = vec![self.eve_active.to_string()];
        row.extend(ints.iter().map(u64::to_string));
        row.extend([self.sifted_se, self.errors_se, self.eve_known_se].iter().map(|v| format!("{v:.16e}")));
        row.push(format!("{:016x}", self.fingerprint));
        row.push(self.branch_total().to_string());
        row
    }
}

/// Writes a header and one row per tally.
pub fn write_tally_csv<W: std::io::Write>(tallies: &[SimTally], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SimTally::CSV_HEADER)?;
    for t in tallies {
        w.write_record(t.csv_record())?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the simulation on the current rayon pool.
pub fn simulate(config: &SimConfig) -> Result<SimTally> {
    config.validate()?;
    let poisson = Poisson::new(config.params.mu())
        .map_err(|e| Error::InvalidConfig(format!("cannot sample Poisson({}): {e}", config.params.mu())))?;
    let chunks = config.n_pulses.div_ceil(CHUNK_PULSES);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * CHUNK_PULSES;
            let len = CHUNK_PULSES.min(config.n_pulses - start);
            run_chunk(config, &poisson, chunk, len)
        })
        .reduce(Counts::default, |a, b| a + b);
    Ok(SimTally::from_counts(counts, config.eve_active(), config.params.fingerprint()))
}

/// Runs the simulation on a dedicated pool of `threads` workers.
pub fn simulate_with_threads(config: &SimConfig, threads: usize) -> Result<SimTally> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(|| simulate(config))
}

fn run_chunk(config: &SimConfig, poisson: &Poisson<f64>, chunk: u64, len: u64) -> Counts {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(chunk);
    let mut c = Counts::default();
    for _ in 0..len {
        pulse(config, poisson, &mut rng, &mut c);
    }
    c
}

fn chance<R: Rng>(rng: &mut R, p: f64) -> bool {
    rng.random::<f64>() < p
}

fn pulse<R: Rng>(config: &SimConfig, poisson: &Poisson<f64>, rng: &mut R, c: &mut Counts) {
    let p = &config.params;
    c.pulses += 1;
    let photons = poisson.sample(rng) as u64;
    let alice_basis: bool = rng.random();
    let alice_bit: bool = rng.random();
    let bob_basis: bool = rng.random();
    let sifting = bob_basis == alice_basis;
    if photons == 0 {
        return;
    }
    c.photon_pulses += 1;

    let Some(plan) = &config.plan else {
        let survive = p.eta() * p.alpha();
        let detected = (0..photons).filter(|_| chance(rng, survive)).count();
        if detected >= 2 {
            c.bob_multi_photon_events += 1;
        }
        if detected >= 1 && sifting {
            c.sifted += 1;
            let bob_bit = alice_bit ^ chance(rng, p.r_c());
            if bob_bit != alice_bit {
                c.errors += 1;
            }
        }
        return;
    };

    // Every branch below delivers at most one photon to Bob, so Bob never
    // sees a multi-photon event while Eve is active.
    match photons {
        1 => {
            if chance(rng, plan.p_b) {
                c.blocked_1 += 1;
            } else if chance(rng, plan.p_m) {
                c.measured_1 += 1;
                let eve_basis: bool = rng.random();
                let eve_bit = if eve_basis == alice_basis { alice_bit } else { rng.random() };
                let arrives = chance(rng, p.alpha()) && chance(rng, p.eta());
                if arrives && sifting {
                    c.sifted += 1;
                    // Bob measures in Alice's basis; a photon prepared in the
                    // other basis gives him a coin flip.
                    let bob_bit = if eve_basis == bob_basis { eve_bit } else { rng.random() };
                    if bob_bit != alice_bit {
                        c.errors += 1;
                    }
                    if eve_basis == alice_basis {
                        c.eve_known += 1;
                    }
                }
            } else {
                c.passed_1 += 1;
                if chance(rng, p.alpha()) && chance(rng, p.eta()) && sifting {
                    c.sifted += 1;
                }
            }
        }
        2 => {
            if chance(rng, plan.p_b) {
                c.blocked_2 += 1;
            } else {
                c.indirect_2 += 1;
                // The stored photon is read after sifting announces the basis.
                if chance(rng, p.alpha()) && chance(rng, p.eta()) && sifting {
                    c.sifted += 1;
                    c.eve_known += 1;
                }
            }
        }
        l => {
            if chance(rng, config.table.success(l)) {
                c.direct_success += 1;
                // Injected next to Bob's detector: no channel loss.
                if chance(rng, p.eta()) && sifting {
                    c.sifted += 1;
                    c.eve_known += 1;
                }
            } else {
                c.direct_fail += 1;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatComparison {
    pub name: &'static str,
    pub observed: f64,
    pub expected: f64,
    pub stderr: f64,
    pub z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonVerdict {
    pub rows: Vec<StatComparison>,
    pub sigma_threshold: f64,
    pub passed: bool,
}

impl ComparisonVerdict {
    pub fn row(&self, name: &str) -> Option<&StatComparison> {
        self.rows.iter().find(|r| r.name == name)
    }
}

impl fmt::Display for ComparisonVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<10} {:>14} {:>16} {:>12} {:>9}  verdict (|z| < {})",
            "statistic", "observed", "expected", "stderr", "z", self.sigma_threshold
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<10} {:>14} {:>16.3} {:>12.3} {:>9.3}  {}",
                r.name,
                r.observed,
                r.expected,
                r.stderr,
                r.z,
                if r.pass { "ok" } else { "FAIL" }
            )?;
        }
        write!(f, "overall: {}", if self.passed { "PASS" } else { "FAIL" })
    }
}

/// z-scores of the simulated sifted, error and Eve-known counts against the
/// attacked expectations of `report`, rescaled from `m` pulses to the
/// number of simulated pulses.
pub fn compare_to_analytic(tally: &SimTally, report: &AnalyticReport, sigma: f64) -> Result<ComparisonVerdict> {
    if tally.fingerprint != report.fingerprint {
        return Err(Error::Mismatch { tally: tally.fingerprint, report: report.fingerprint });
    }
    let scale = tally.pulses as f64 / report.m as f64;
    let stats = [
        ("sifted", tally.sifted, tally.sifted_se, report.n_hat),
        ("errors", tally.errors, tally.errors_se, report.e_t_hat),
        ("eve_known", tally.eve_known, tally.eve_known_se, report.s_partial),
    ];
    let rows: Vec<_> = stats
        .into_iter()
        .map(|(name, observed, se, per_block)| {
            let expected = per_block * scale;
            let stderr = if se > 0.0 { se } else { expected_se(expected, tally.pulses) };
            let diff = observed as f64 - expected;
            let z = if diff == 0.0 { 0.0 } else { diff / stderr };
            StatComparison { name, observed: observed as f64, expected, stderr, z, pass: z.abs() < sigma }
        })
        .collect();
    let passed = rows.iter().all(|r| r.pass);
    Ok(ComparisonVerdict { rows, sigma_threshold: sigma, passed })
}

fn expected_se(expected: f64, n: u64) -> f64 {
    let p = (expected / n as f64).clamp(0.0, 1.0);
    (p * (1.0 - p) * n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{full_report, AttackMode};
    use crate::strategy::{build_default_table, DEFAULT_L_MAX};

    fn params(mu: f64) -> SystemParams {
        SystemParams::new(mu, 0.01, 0.5, 0.01, 1_000_000).unwrap()
    }

    #[test]
    fn rejects_bad_configs() {
        let t = build_default_table(DEFAULT_L_MAX).unwrap();
        let zero = SimConfig::baseline(params(1.0), t.clone(), 0, 1);
        assert!(matches!(simulate(&zero), Err(Error::InvalidConfig(_))));
        let bad_plan = SimConfig::attacked(params(1.0), AttackPlan::new(1.3, 0.1), t, 10, 1);
        assert!(matches!(simulate(&bad_plan), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn same_seed_same_tally() {
        let t = build_default_table(DEFAULT_L_MAX).unwrap();
        let cfg = SimConfig::attacked(params(0.5), AttackPlan::new(0.4, 0.2), t, 300_000, 99);
        assert_eq!(simulate(&cfg).unwrap(), simulate(&cfg).unwrap());
        let other = SimConfig { seed: 100, ..cfg.clone() };
        assert_ne!(simulate(&cfg).unwrap(), simulate(&other).unwrap());
    }

    #[test]
    fn vanishing_mean_yields_nothing() {
        let t = build_default_table(DEFAULT_L_MAX).unwrap();
        for plan in [None, Some(AttackPlan::new(0.0, 0.0))] {
            let cfg = SimConfig { params: params(1e-6), plan, table: t.clone(), n_pulses: 100_000, seed: 3 };
            let tally = simulate(&cfg).unwrap();
            assert_eq!(tally.pulses, 100_000);
            assert_eq!(tally.sifted, 0);
            assert_eq!(tally.errors, 0);
            assert_eq!(tally.eve_known, 0);
        }
    }

    #[test]
    fn branch_counters_cover_every_photon_pulse() {
        let t = build_default_table(DEFAULT_L_MAX).unwrap();
        let cfg = SimConfig::attacked(params(1.5), AttackPlan::new(0.3, 0.5), t.clone(), 200_000, 5);
        let tally = simulate(&cfg).unwrap();
        assert_eq!(tally.branch_total(), tally.photon_pulses);
        assert!(tally.eve_known <= tally.sifted && tally.errors <= tally.sifted);
        let base = simulate(&SimConfig::baseline(params(1.5), t, 200_000, 5)).unwrap();
        assert_eq!(base.branch_total(), 0);
    }

    #[test]
    fn csv_row_matches_header() {
        let t = build_default_table(DEFAULT_L_MAX).unwrap();
        let tally = simulate(&SimConfig::baseline(params(1.0), t, 1000, 1)).unwrap();
        let row = tally.csv_record();
        assert_eq!(row.len(), SimTally::CSV_HEADER.len());
        assert_eq!(row[0], "false");
        assert_eq!(row[1], "1000");
    }

    #[test]
    fn mismatched_parameters_are_refused() {
        let t = build_default_table(DEFAULT_L_MAX).unwrap();
        let tally = simulate(&SimConfig::baseline(params(1.0), t.clone(), 1000, 1)).unwrap();
        let report = full_report(&params(0.5), &t, AttackMode::Matched).unwrap();
        assert!(matches!(compare_to_analytic(&tally, &report, 3.5), Err(Error::Mismatch { .. })));
    }

    #[test]
    fn zero_counts_against_zero_expectation_pass() {
        let t = build_default_table(DEFAULT_L_MAX).unwrap();
        let p = SystemParams::new(0.5, 0.01, 0.5, 0.0, 1_000_000).unwrap();
        let report = full_report(&p, &t, AttackMode::ErrorOnly).unwrap();
        let tally = simulate(&SimConfig::attacked(p, report.plan, t, 200_000, 8)).unwrap();
        let verdict = compare_to_analytic(&tally, &report, 3.5).unwrap();
        let errors = verdict.row("errors").unwrap();
        assert_eq!((errors.observed, errors.expected, errors.z), (0.0, 0.0, 0.0));
    }
}
