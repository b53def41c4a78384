use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParam { name: &'static str, value: f64, reason: &'static str },

    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "photon-number table truncated at l_max = {l_max}: mass {mass:e} beyond it at mu = {mu} exceeds tolerance {tolerance:e}"
    )]
    Truncation { mu: f64, l_max: usize, mass: f64, tolerance: f64 },

    #[error("degenerate attack model: {0}")]
    Degenerate(String),

    #[error("invalid attack table: {0}")]
    InvalidTable(String),

    #[error("{path}:{line}: {message}")]
    TableFormat { path: PathBuf, line: usize, message: String },

    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("parameter fingerprint mismatch: tally {tally:016x}, report {report:016x}")]
    Mismatch { tally: u64, report: u64 },

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("nothing to plot: {0}")]
    Plot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
