//! Eve's direct attack on pulses of three or more photons.
//!
//! How often Eve can conclusively read the polarization of an `l`-photon
//! pulse depends on the measurement she performs. That success
//! probability is modelled as a [`DirectAttackStrategy`]; strategies are
//! registered by name in a [`StrategyRegistry`] and each one is frozen into
//! a [`DirectAttackTable`] before the analytic engine or the simulator
//! touches it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::poisson;

pub const DEFAULT_L_MAX: usize = 64;

/// Upper bound on the probability mass ignored past `l_max`.
pub const DEFAULT_TRUNCATION_TOLERANCE: f64 = 1e-12;

/// Largest mean photon number the tables are sized for.
const MU_OF_INTEREST: f64 = 5.0;

/// Photon numbers below this can never be attacked directly.
const MIN_DIRECT_PHOTONS: usize = 3;

pub const DEFAULT_STRATEGY: &str = "conclusive-exclusion";

/// A rule for Eve's probability of conclusively determining the state of an
/// `l`-photon pulse.
pub trait DirectAttackStrategy: Send + Sync {
    fn name(&self) -> &str;

    fn description(&self) -> &str;

    /// Success probability for an `l`-photon pulse. Only consulted for
    /// `l >= 3`; the table forces smaller photon numbers to zero.
    fn success_probability(&self, photons: usize) -> f64;

    fn build_table(&self, l_max: usize) -> Result<DirectAttackTable> {
        if l_max < MIN_DIRECT_PHOTONS {
            return Err(Error::Domain(format!("l_max must be >= 3, got {l_max}")));
        }
        let probs =
            (0..=l_max).map(|l| if l < MIN_DIRECT_PHOTONS { 0.0 } else { self.success_probability(l) }).collect();
        DirectAttackTable::new(self.name(), probs)
    }
}

/// Eve measures every photon in an independently chosen random basis. She
/// learns the state when two photons measured in the wrong basis disagree
/// (exposing that basis) and at least one photon was measured in the right
/// one (which then reads the bit deterministically).
#[derive(Debug, Clone, Copy, Default)]
pub struct ConclusiveExclusion;

impl DirectAttackStrategy for ConclusiveExclusion {
    fn name(&self) -> &str {
        DEFAULT_STRATEGY
    }

    fn description(&self) -> &str {
        "random per-photon bases; conclusive when wrong-basis outcomes disagree and a right-basis photon exists"
    }

    fn success_probability(&self, photons: usize) -> f64 {
        let l = photons as i32;
        // k photons land in the wrong basis with weight C(l, k) / 2^l. Their
        // outcomes are uniform, so they disagree with probability 1 - 2^(1-k).
        (2..l).map(|k| binomial(photons as u64, k as u64) * 2f64.powi(-l) * (1.0 - 2f64.powi(1 - k))).sum()
    }
}

/// Pessimistic bound: every pulse with three or more photons is read.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysSucceed;

impl DirectAttackStrategy for AlwaysSucceed {
    fn name(&self) -> &str {
        "always"
    }

    fn description(&self) -> &str {
        "upper bound: every pulse with three or more photons is read"
    }

    fn success_probability(&self, _photons: usize) -> f64 {
        1.0
    }
}

/// Direct attacks never succeed; multi-photon pulses are simply absorbed.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeverSucceed;

impl DirectAttackStrategy for NeverSucceed {
    fn name(&self) -> &str {
        "never"
    }

    fn description(&self) -> &str {
        "direct attacks always fail; pulses with three or more photons are absorbed"
    }

    fn success_probability(&self, _photons: usize) -> f64 {
        0.0
    }
}

/// A strategy backed by an explicit table, typically loaded from a file.
/// Photon numbers past the end of the table reuse its last entry.
#[derive(Debug, Clone)]
pub struct TabulatedStrategy {
    name: String,
    probs: Vec<f64>,
}

impl TabulatedStrategy {
    pub fn new(table: &DirectAttackTable) -> Self {
        Self { name: table.strategy_name.clone(), probs: table.probs.clone() }
    }
}

impl DirectAttackStrategy for TabulatedStrategy {
    fn name(&self) -> &str {
        &self.name
    }

    fn description(&self) -> &str {
        "externally supplied table"
    }

    fn success_probability(&self, photons: usize) -> f64 {
        self.probs.get(photons).or(self.probs.last()).copied().unwrap_or(0.0)
    }
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Direct-attack success probabilities indexed by photon number `0..=l_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectAttackTable {
    pub probs: Vec<f64>,
    pub l_max: usize,
    /// Poisson mass beyond `l_max` at the largest mean photon number the
    /// table is meant for.
    pub tail_bound: f64,
    pub strategy_name: String,
}

impl DirectAttackTable {
    pub fn new(strategy_name: impl Into<String>, probs: Vec<f64>) -> Result<Self> {
        if probs.len() <= MIN_DIRECT_PHOTONS {
            return Err(Error::InvalidTable(format!(
                "need entries up to at least l = 3, got l_max = {}",
                probs.len() as isize - 1
            )));
        }
        if let Some(l) = probs[..MIN_DIRECT_PHOTONS].iter().position(|&p| p != 0.0) {
            return Err(Error::InvalidTable(format!(
                "direct attacks on {l}-photon pulses are impossible, got probability {}",
                probs[l]
            )));
        }
        if let Some(l) = probs.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidTable(format!("probability at l = {l} is {}", probs[l])));
        }
        let l_max = probs.len() - 1;
        Ok(Self {
            probs,
            l_max,
            tail_bound: poisson::tail(MU_OF_INTEREST, l_max as u64 + 1),
            strategy_name: strategy_name.into(),
        })
    }

    /// Parses `l probability` pairs, one per line. `#` starts a comment;
    /// photon numbers that are not listed get probability zero.
    pub fn parse(text: &str, strategy_name: &str, source: &Path) -> Result<Self> {
        let format_err =
            |line: usize, message: String| Error::TableFormat { path: source.to_path_buf(), line, message };
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut fields = content.split_whitespace();
            let (Some(l), Some(p), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(format_err(lineno, format!("expected `l probability`, got `{content}`")));
            };
            let l: usize = l
                .parse()
                .map_err(|_| format_err(lineno, format!("photon number `{l}` is not a non-negative integer")))?;
            let p: f64 = p.parse().map_err(|_| format_err(lineno, format!("probability `{p}` is not a number")))?;
            if entries.insert(l, p).is_some() {
                return Err(format_err(lineno, format!("duplicate entry for l = {l}")));
            }
        }
        let l_max = entries.keys().next_back().copied().unwrap_or(0);
        let mut probs = vec![0.0; l_max + 1];
        for (l, p) in entries {
            probs[l] = p;
        }
        Self::new(strategy_name, probs)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let name =
            path.file_stem().map(|s| format!("file:{}", s.to_string_lossy())).unwrap_or_else(|| "file".to_owned());
        Self::parse(&text, &name, path)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# strategy: {}\n# l probability\n", self.strategy_name);
        for (l, p) in self.probs.iter().enumerate() {
            let _ = writeln!(out, "{l} {p:.17e}");
        }
        out
    }

    /// Poisson average of the success probabilities at mean photon number `mu`,
    /// i.e. the per-pulse probability of a successful direct attack.
    pub fn z_e(&self, mu: f64) -> Result<f64> {
        self.z_e_with_tolerance(mu, DEFAULT_TRUNCATION_TOLERANCE)
    }

    pub fn z_e_with_tolerance(&self, mu: f64, tolerance: f64) -> Result<f64> {
        let mass = poisson::psi_tail(mu, self.l_max as u64 + 1)?;
        if mass > tolerance {
            return Err(Error::Truncation { mu, l_max: self.l_max, mass, tolerance });
        }
        Ok((MIN_DIRECT_PHOTONS..=self.l_max).map(|l| poisson::pmf(mu, l as u64) * self.probs[l]).sum())
    }

    /// Success probability for an `l`-photon pulse; photon numbers past the
    /// table reuse the last entry.
    pub fn success(&self, photons: u64) -> f64 {
        let idx = (photons as usize).min(self.l_max);
        self.probs[idx]
    }
}

/// The conclusive-exclusion table out to `l_max`.
pub fn build_default_table(l_max: usize) -> Result<DirectAttackTable> {
    ConclusiveExclusion.build_table(l_max)
}

/// Per-pulse direct-attack success probability at mean photon number `mu`.
pub fn z_e_of_mu(table: &DirectAttackTable, mu: f64) -> Result<f64> {
    table.z_e(mu)
}

/// Name-keyed set of available strategies.
#[derive(Clone)]
pub struct StrategyRegistry {
    entries: BTreeMap<String, Arc<dyn DirectAttackStrategy>>,
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self { entries: BTreeMap::new() }
    }

    /// Registry holding the built-in strategies.
    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register(ConclusiveExclusion);
        reg.register(AlwaysSucceed);
        reg.register(NeverSucceed);
        reg
    }

    /// Adds a strategy, replacing any earlier one with the same name.
    pub fn register<S: DirectAttackStrategy + 'static>(&mut self, strategy: S) {
        self.entries.insert(strategy.name().to_owned(), Arc::new(strategy));
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn DirectAttackStrategy>> {
        self.entries.get(name).cloned().ok_or_else(|| Error::UnknownStrategy(name.to_owned()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn DirectAttackStrategy> {
        self.entries.values().map(|s| s.as_ref())
    }

    pub fn table(&self, name: &str, l_max: usize) -> Result<DirectAttackTable> {
        self.get(name)?.build_table(l_max)
    }
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl std::fmt::Debug for StrategyRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.entries.keys()).finish()
    }
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    #[test]
    fn default_table_low_photon_numbers() {
        let t = build_default_table(DEFAULT_L_MAX).unwrap();
        assert_eq!(&t.probs[..3], &[0.0, 0.0, 0.0]);
        assert_eq!(t.probs[3], 0.1875);
        assert_eq!(t.probs[4], 0.375);
        assert_eq!(t.l_max, 64);
        assert!(t.tail_bound < 1e-30);
    }

    #[test]
    fn default_table_is_monotone_and_bounded() {
        let t = build_default_table(DEFAULT_L_MAX).unwrap();
        assert!(t.probs.windows(2).all(|w| w[0] <= w[1]));
        assert!(t.probs.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn rejects_small_l_max() {
        assert!(matches!(build_default_table(2), Err(Error::Domain(_))));
        assert!(build_default_table(3).is_ok());
    }

    #[test]
    fn table_rejects_two_photon_success() {
        let err = DirectAttackTable::new("bad", vec![0.0, 0.0, 0.1, 0.5]).unwrap_err();
        assert!(matches!(err, Error::InvalidTable(_)));
        let err = DirectAttackTable::new("bad", vec![0.0, 0.0, 0.0, 1.5]).unwrap_err();
        assert!(matches!(err, Error::InvalidTable(_)));
    }

    #[test]
    fn z_e_vanishes_without_multi_photon_pulses() {
        let t = build_default_table(DEFAULT_L_MAX).unwrap();
        let z = t.z_e(1e-6).unwrap();
        assert!(z <= poisson::tail(1e-6, 3));
        assert!(z < 1e-19);
    }

    #[test]
    fn z_e_of_certain_success_is_the_tail() {
        let t = AlwaysSucceed.build_table(DEFAULT_L_MAX).unwrap();
        assert!((t.z_e(1.0).unwrap() - 0.080_301_397_071_394_196).abs() < 1e-14);
    }

    #[test]
    fn z_e_reference_values() {
        // 50-digit reference values.
        let t = build_default_table(DEFAULT_L_MAX).unwrap();
        assert!((t.z_e(0.1).unwrap() / 2.973_056_448_087_401_5e-5 - 1.0).abs() < 1e-12);
        assert!((t.z_e(0.5).unwrap() / 3.054_092_700_120_167_8e-3 - 1.0).abs() < 1e-12);
        assert!((t.z_e(1.0).unwrap() / 1.925_209_816_777_735_6e-2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncation_is_reported() {
        let t = build_default_table(5).unwrap();
        let err = t.z_e(2.0).unwrap_err();
        assert!(matches!(err, Error::Truncation { l_max: 5, .. }), "{err}");
        assert!(t.z_e_with_tolerance(2.0, 1.0).is_ok());
    }

    #[test]
    fn parses_table_files() {
        let text = "# my strategy\n3 0.25\n\n5 0.5 # trailing\n4 0.3\n";
        let t = DirectAttackTable::parse(text, "mine", Path::new("m.txt")).unwrap();
        assert_eq!(t.probs, vec![0.0, 0.0, 0.0, 0.25, 0.3, 0.5]);
        assert_eq!(t.l_max, 5);
        assert_eq!(t.strategy_name, "mine");
    }

    #[test]
    fn table_text_round_trips() {
        let t = build_default_table(12).unwrap();
        let back = DirectAttackTable::parse(&t.to_text(), &t.strategy_name, Path::new("x")).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("3 0.2\n2 0.1\n", None),
            ("3 0.2\nfoo\n", Some(2)),
            ("3 x\n", Some(1)),
            ("3 0.1\n3 0.2\n", Some(2)),
            ("-1 0.0\n", Some(1)),
            ("3 0.1 7\n", Some(1)),
        ];
        for (text, line) in cases {
            let err = DirectAttackTable::parse(text, "t", Path::new("t.txt")).unwrap_err();
            match (err, line) {
                (Error::TableFormat { line: got, .. }, Some(want)) => assert_eq!(got, want, "{text}"),
                (Error::InvalidTable(_), None) => {}
                (other, _) => panic!("{text:?}: unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn registry_lookup() {
        let reg = StrategyRegistry::builtin();
        assert_eq!(reg.names().collect::<Vec<_>>(), ["always", "conclusive-exclusion", "never"]);
        assert_eq!(reg.table(DEFAULT_STRATEGY, 64).unwrap(), build_default_table(64).unwrap());
        assert!(matches!(reg.get("optimal").err(), Some(Error::UnknownStrategy(_))));
    }

    #[test]
    fn registry_accepts_loaded_tables() {
        let loaded = DirectAttackTable::new("file:x", vec![0.0, 0.0, 0.0, 0.4, 0.6]).unwrap();
        let mut reg = StrategyRegistry::builtin();
        reg.register(TabulatedStrategy::new(&loaded));
        let t = reg.table("file:x", 6).unwrap();
        assert_eq!(t.probs, vec![0.0, 0.0, 0.0, 0.4, 0.6, 0.6, 0.6]);
    }
}
