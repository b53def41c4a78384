//! Closed-form and Monte Carlo analysis of a photon-number-splitting attack
//! on weak-coherent-pulse BB84 in which Eve hides her presence by matching
//! the undisturbed count rate and error rate.

pub mod analytic;
pub mod error;
pub mod montecarlo;
pub mod params;
pub mod poisson;
pub mod strategy;
pub mod svg;
pub mod sweep;

pub use analytic::{full_report, AnalyticReport, AttackMode};
pub use error::{Error, Result};
pub use montecarlo::{compare_to_analytic, simulate, ComparisonVerdict, SimConfig, SimTally};
pub use params::{AttackPlan, SystemParams};
pub use poisson::{poisson_pmf, psi_tail};
pub use strategy::{build_default_table, z_e_of_mu, DirectAttackStrategy, DirectAttackTable, StrategyRegistry};
pub use sweep::{run_sweep, CurvePoint, SweepSpec};
