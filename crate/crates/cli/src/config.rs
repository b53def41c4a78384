//! Resolution of run settings from flags, a config file, the environment
//! and built-in defaults, in that order of precedence.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use bb84_eve::strategy::{StrategyRegistry, DEFAULT_L_MAX, DEFAULT_STRATEGY};
use bb84_eve::sweep::TableSource;
use bb84_eve::{DirectAttackTable, SystemParams};

pub const ENV_PREFIX: &str = "BB84_";

pub const DEFAULT_MU: f64 = 0.5;
pub const DEFAULT_ALPHA: f64 = 0.01;
pub const DEFAULT_ETA: f64 = 0.5;
pub const DEFAULT_R_C: f64 = 0.01;
pub const DEFAULT_M: u64 = 1_000_000;
pub const DEFAULT_PULSES: u64 = 10_000_000;
pub const DEFAULT_SEED: u64 = 84;

const KNOWN_KEYS: [&str; 11] =
    ["mu", "alpha", "eta", "r_c", "m", "pulses", "seed", "sigma", "threads", "strategy", "table"];

/// Flat `key = value` file; `#` starts a comment.
#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}:{}: expected `key = value`, got `{line}`", origin.display(), idx + 1);
            };
            let key = key.trim().to_owned();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                bail!("{}:{}: unknown key `{key}`", origin.display(), idx + 1);
            }
            values.insert(key, value.trim().to_owned());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text, path)
    }
}

/// Looks a setting up in the config file, then the environment.
#[derive(Debug, Default, Clone)]
pub struct Layers {
    file: ConfigFile,
    env: BTreeMap<String, String>,
}

impl Layers {
    pub fn new(file: ConfigFile) -> Self {
        let env = KNOWN_KEYS
            .iter()
            .filter_map(|k| std::env::var(format!("{ENV_PREFIX}{}", k.to_uppercase())).ok().map(|v| (k.to_string(), v)))
            .collect();
        Self { file, env }
    }

    fn lookup(&self, key: &str) -> Option<(&str, String)> {
        if let Some(v) = self.file.values.get(key) {
            return Some((v, format!("config key `{key}`")));
        }
        self.env.get(key).map(|v| (v.as_str(), format!("environment variable {ENV_PREFIX}{}", key.to_uppercase())))
    }

    /// Flag value if given, else config file, else environment, else `default`.
    pub fn resolve<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.lookup(key) {
            Some((raw, source)) => raw.parse().map_err(|e| anyhow::anyhow!("{source}: cannot parse `{raw}`: {e}")),
            None => Ok(default),
        }
    }

    pub fn resolve_opt<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.lookup(key) {
            Some((raw, source)) => {
                raw.parse().map(Some).map_err(|e| anyhow::anyhow!("{source}: cannot parse `{raw}`: {e}"))
            }
            None => Ok(None),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScenarioFlags {
    pub mu: Option<f64>,
    pub alpha: Option<f64>,
    pub eta: Option<f64>,
    pub r_c: Option<f64>,
    pub m: Option<u64>,
    pub strategy: Option<String>,
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub params: SystemParams,
    pub source: TableSource,
}

impl Scenario {
    pub fn resolve(flags: &ScenarioFlags, layers: &Layers) -> Result<Self> {
        let params = SystemParams::new(
            layers.resolve("mu", flags.mu, DEFAULT_MU)?,
            layers.resolve("alpha", flags.alpha, DEFAULT_ALPHA)?,
            layers.resolve("eta", flags.eta, DEFAULT_ETA)?,
            layers.resolve("r_c", flags.r_c, DEFAULT_R_C)?,
            layers.resolve("m", flags.m, DEFAULT_M)?,
        )?;
        let table = layers.resolve_opt("table", flags.table.clone())?;
        let strategy = layers.resolve_opt("strategy", flags.strategy.clone())?;
        let source = match (table, strategy) {
            (Some(_), Some(_)) if flags.table.is_some() && flags.strategy.is_some() => {
                bail!("--table and --strategy are mutually exclusive")
            }
            // An explicit flag beats a lower-precedence setting of the other kind.
            (Some(_), Some(s)) if flags.strategy.is_some() => TableSource::Strategy(s),
            (Some(path), _) => TableSource::File(path),
            (None, Some(s)) => TableSource::Strategy(s),
            (None, None) => TableSource::Strategy(DEFAULT_STRATEGY.to_owned()),
        };
        Ok(Self { params, source })
    }

    pub fn table(&self) -> Result<DirectAttackTable> {
        let registry = StrategyRegistry::builtin();
        Ok(match &self.source {
            TableSource::Strategy(name) => registry.table(name, DEFAULT_L_MAX)?,
            TableSource::File(path) => DirectAttackTable::load(path)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layers(text: &str) -> Layers {
        Layers { file: ConfigFile::parse(text, Path::new("test.conf")).unwrap(), env: BTreeMap::new() }
    }

    #[test]
    fn parses_flat_files() {
        let l = layers("# scenario\nmu = 0.3\n\nalpha=0.02 # lossy\n");
        assert_eq!(l.resolve("mu", None, 1.0).unwrap(), 0.3);
        assert_eq!(l.resolve("alpha", None, 1.0).unwrap(), 0.02);
        assert_eq!(l.resolve("eta", None, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn flags_beat_file_beats_env() {
        let mut l = layers("mu = 0.3\n");
        l.env.insert("mu".into(), "0.9".into());
        l.env.insert("eta".into(), "0.7".into());
        assert_eq!(l.resolve("mu", Some(0.2), 1.0).unwrap(), 0.2);
        assert_eq!(l.resolve("mu", None, 1.0).unwrap(), 0.3);
        assert_eq!(l.resolve("eta", None, 0.5).unwrap(), 0.7);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        assert!(ConfigFile::parse("nu = 1\n", Path::new("c")).is_err());
        assert!(ConfigFile::parse("mu 1\n", Path::new("c")).is_err());
        let l = layers("mu = abc\n");
        assert!(l.resolve::<f64>("mu", None, 1.0).is_err());
    }

    #[test]
    fn scenario_defaults_are_the_canonical_values() {
        let s = Scenario::resolve(&ScenarioFlags::default(), &layers("")).unwrap();
        assert_eq!(
            (s.params.mu(), s.params.alpha(), s.params.eta(), s.params.r_c(), s.params.m()),
            (DEFAULT_MU, 0.01, 0.5, 0.01, 1_000_000)
        );
        assert_eq!(s.source, TableSource::Strategy(DEFAULT_STRATEGY.into()));
    }

    #[test]
    fn table_flag_and_strategy_flag_conflict() {
        let flags =
            ScenarioFlags { strategy: Some("always".into()), table: Some("t.txt".into()), ..ScenarioFlags::default() };
        assert!(Scenario::resolve(&flags, &layers("")).is_err());
        let flags = ScenarioFlags { strategy: Some("always".into()), ..ScenarioFlags::default() };
        let s = Scenario::resolve(&flags, &layers("table = t.txt\n")).unwrap();
        assert_eq!(s.source, TableSource::Strategy("always".into()));
    }
}
