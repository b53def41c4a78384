mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::ScenarioFlags;

/// Count-rate and error-rate constrained eavesdropping on weak-pulse BB84.
///
/// Numeric settings fall back to a `key = value` config file, then to
/// BB84_<KEY> environment variables (e.g. BB84_MU, BB84_R_C), then to
/// built-in defaults (mu 0.5, alpha 0.01, eta 0.5, r_c 0.01, m 1e6).
#[derive(Debug, Parser)]
#[command(name = "bb84-eve", version)]
struct Cli {
    /// Flat `key = value` settings file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for sweeps and simulations (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct ScenarioArgs {
    /// Mean photons per pulse.
    #[arg(long)]
    mu: Option<f64>,
    /// Channel transmittivity.
    #[arg(long)]
    alpha: Option<f64>,
    /// Detector quantum efficiency.
    #[arg(long)]
    eta: Option<f64>,
    /// Intrinsic error probability per sifted bit.
    #[arg(long = "r-c")]
    r_c: Option<f64>,
    /// Pulses per block.
    #[arg(long)]
    m: Option<u64>,
    /// Registered direct-attack strategy (see `strategies`).
    #[arg(long)]
    strategy: Option<String>,
    /// Direct-attack table file of `l probability` lines.
    #[arg(long)]
    table: Option<PathBuf>,
}

impl From<&ScenarioArgs> for ScenarioFlags {
    fn from(a: &ScenarioArgs) -> Self {
        ScenarioFlags {
            mu: a.mu,
            alpha: a.alpha,
            eta: a.eta,
            r_c: a.r_c,
            m: a.m,
            strategy: a.strategy.clone(),
            table: a.table.clone(),
        }
    }
}

#[derive(Debug, Clone, Args)]
struct SimArgs {
    /// Number of simulated pulses.
    #[arg(long)]
    pulses: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Replace the solved blocking probability.
    #[arg(long)]
    p_b_override: Option<f64>,
    /// Replace the solved measuring probability.
    #[arg(long)]
    p_m_override: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form report at a single point.
    Eval {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// matched, error-only or both.
        #[arg(long, default_value = "both")]
        mode: String,
        /// Print the sweep CSV row instead of the text report.
        #[arg(long)]
        csv: bool,
    },
    /// Evaluate one or two swept axes and write CSV (and optionally SVG).
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// name:start:stop:points[:lin|log], e.g. mu:0.01:1:50:log. Repeat for a second axis.
        #[arg(long = "axis", required = true)]
        axes: Vec<String>,
        #[arg(long, default_value = "both")]
        mode: String,
        /// CSV destination (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also render a plot (one-axis sweeps only).
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Classify the matched attack over a two-axis grid.
    Feasibility {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long = "axis", default_values_t = ["mu:0.01:5:60:log".to_string(), "alpha:0.001:1:13:log".to_string()])]
        axes: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo tally as a CSV row.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// none (no eavesdropper), matched or error-only.
        #[arg(long, default_value = "matched")]
        attack: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the Monte Carlo tally with the closed form. Exit 0 on
    /// agreement, 2 on statistical disagreement, 1 on bad input.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value = "matched")]
        mode: String,
        /// Pass threshold on |z|.
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Reproduce the canonical s_partial-versus-mu curves (CSV and SVG).
    Figure {
        /// Direct-attack strategy for the figure.
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// List registered direct-attack strategies, or dump one as a table file.
    Strategies {
        #[arg(long)]
        dump: Option<String>,
        #[arg(long, default_value_t = bb84_eve::strategy::DEFAULT_L_MAX)]
        l_max: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
