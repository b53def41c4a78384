use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bb84_eve::analytic::{full_report, AttackMode};
use bb84_eve::montecarlo::write_tally_csv;
use bb84_eve::montecarlo::{simulate, DEFAULT_SIGMA_THRESHOLD};
use bb84_eve::strategy::StrategyRegistry;
use bb84_eve::svg::{render_svg, PlotStyle};
use bb84_eve::sweep::{
    feasibility_atlas, figure_base, figure_spec, run_sweep_with_table, write_atlas_csv, write_sweep_csv, Axis,
    ModeSelection, Param, Spacing, SweepSpec,
};
use bb84_eve::{compare_to_analytic, AttackPlan, SimConfig};

use crate::config::{ConfigFile, Layers, Scenario, ScenarioFlags, DEFAULT_PULSES, DEFAULT_SEED};
use crate::{Cli, Command, ScenarioArgs, SimArgs};

/// Exit status for a statistical disagreement in `validate`.
const EXIT_DISAGREEMENT: u8 = 2;

pub fn run(cli: Cli) -> Result<ExitCode> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let layers = Layers::new(file);
    if let Some(threads) = layers.resolve_opt("threads", cli.threads)? {
        if threads == 0 {
            bail!("--threads must be >= 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().context("starting worker pool")?;
    }

    match cli.command {
        Command::Eval { scenario, mode, csv } => eval(&scenario, &layers, &mode, csv),
        Command::Sweep { scenario, axes, mode, out, svg } => {
            sweep(&scenario, &layers, &axes, &mode, out.as_deref(), svg.as_deref())
        }
        Command::Feasibility { scenario, axes, out } => feasibility(&scenario, &layers, &axes, out.as_deref()),
        Command::Simulate { scenario, sim, attack, out } => {
            simulate_cmd(&scenario, &sim, &layers, &attack, out.as_deref())
        }
        Command::Validate { scenario, sim, mode, sigma } => validate(&scenario, &sim, &layers, &mode, sigma),
        Command::Figure { strategy, table, out_dir } => figure(strategy, table, &layers, &out_dir),
        Command::Strategies { dump, l_max } => strategies(dump.as_deref(), l_max),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn scenario(args: &ScenarioArgs, layers: &Layers) -> Result<Scenario> {
    Scenario::resolve(&ScenarioFlags::from(args), layers)
}

fn annotation(s: &Scenario, strategy: &str, swept: &[Param]) -> String {
    let p = &s.params;
    let mut parts: Vec<String> =
        [(Param::Mu, p.mu()), (Param::Alpha, p.alpha()), (Param::Eta, p.eta()), (Param::RC, p.r_c())]
            .into_iter()
            .filter(|(k, _)| !swept.contains(k))
            .map(|(k, v)| format!("{k} = {v}"))
            .collect();
    parts.push(format!("m = {}", p.m()));
    parts.push(format!("strategy = {strategy}"));
    parts.join(", ")
}

fn eval(args: &ScenarioArgs, layers: &Layers, mode: &str, csv: bool) -> Result<ExitCode> {
    let s = scenario(args, layers)?;
    let table = s.table()?;
    let modes: ModeSelection = mode.parse()?;
    if csv {
        let spec = SweepSpec::from_base(
            vec![Axis::new(Param::Mu, s.params.mu(), s.params.mu(), 1, Spacing::Linear)],
            &s.params,
            modes,
            s.source.clone(),
        );
        let rows = run_sweep_with_table(&spec, &table)?;
        write_sweep_csv(&spec.axis_names(), &rows, output(None)?)?;
        return Ok(ExitCode::SUCCESS);
    }
    let mut out = output(None)?;
    let p = &s.params;
    writeln!(
        out,
        "scenario: mu = {}, alpha = {}, eta = {}, r_c = {}, m = {}",
        p.mu(),
        p.alpha(),
        p.eta(),
        p.r_c(),
        p.m()
    )?;
    writeln!(out, "strategy: {} (l_max = {})", table.strategy_name, table.l_max)?;
    for &mode in modes.modes() {
        let r = full_report(p, &table, mode)?;
        writeln!(out, "\n[{mode}]")?;
        writeln!(out, "z_E          {:.10e}", r.z_e)?;
        writeln!(out, "p_b          {:.10e}  feasible = {}", r.plan.p_b, r.plan.feasible_pb)?;
        writeln!(out, "p_m          {:.10e}  feasible = {}", r.plan.p_m, r.plan.feasible_pm)?;
        writeln!(out, "n            {:.10e}", r.n)?;
        writeln!(out, "n_hat        {:.10e}", r.n_hat)?;
        writeln!(out, "e_T          {:.10e}", r.e_t)?;
        writeln!(out, "e_T_hat      {:.10e}", r.e_t_hat)?;
        writeln!(out, "s_partial    {:.10e}", r.s_partial)?;
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn sweep_spec(s: &Scenario, axes: &[String], modes: ModeSelection) -> Result<SweepSpec> {
    let axes = axes.iter().map(|a| Axis::parse(a)).collect::<bb84_eve::Result<Vec<_>>>()?;
    let spec = SweepSpec::from_base(axes, &s.params, modes, s.source.clone());
    spec.validate()?;
    Ok(spec)
}

fn sweep(
    args: &ScenarioArgs,
    layers: &Layers,
    axes: &[String],
    mode: &str,
    out: Option<&Path>,
    svg: Option<&Path>,
) -> Result<ExitCode> {
    let s = scenario(args, layers)?;
    let table = s.table()?;
    let spec = sweep_spec(&s, axes, mode.parse()?)?;
    if svg.is_some() && spec.axes.len() != 1 {
        bail!("--svg needs a one-axis sweep; two-axis sweeps are CSV only");
    }
    let rows = run_sweep_with_table(&spec, &table)?;
    if let Some(path) = svg {
        let axis = &spec.axes[0];
        let style = PlotStyle {
            log_x: axis.spacing == Spacing::Log,
            x_label: axis.param.to_string(),
            annotation: annotation(&s, &table.strategy_name, &[axis.param]),
            ..PlotStyle::default()
        };
        std::fs::write(path, render_svg(&rows, &style)?).with_context(|| format!("writing {}", path.display()))?;
    }
    write_sweep_csv(&spec.axis_names(), &rows, output(out)?)?;
    Ok(ExitCode::SUCCESS)
}

fn feasibility(args: &ScenarioArgs, layers: &Layers, axes: &[String], out: Option<&Path>) -> Result<ExitCode> {
    let s = scenario(args, layers)?;
    let table = s.table()?;
    let spec = sweep_spec(&s, axes, ModeSelection::Matched)?;
    let cells = feasibility_atlas(&spec, &table)?;
    write_atlas_csv(&spec.axis_names(), &cells, output(out)?)?;
    Ok(ExitCode::SUCCESS)
}

struct SimSetup {
    config: SimConfig,
    pulses: u64,
}

fn sim_setup(s: &Scenario, sim: &SimArgs, layers: &Layers, plan: Option<AttackPlan>) -> Result<SimSetup> {
    let pulses = layers.resolve("pulses", sim.pulses, DEFAULT_PULSES)?;
    if pulses == 0 {
        bail!("--pulses must be >= 1");
    }
    let seed = layers.resolve("seed", sim.seed, DEFAULT_SEED)?;
    let plan = plan.map(|p| AttackPlan::new(sim.p_b_override.unwrap_or(p.p_b), sim.p_m_override.unwrap_or(p.p_m)));
    let config = SimConfig { params: s.params, plan, table: s.table()?, n_pulses: pulses, seed };
    config.validate()?;
    Ok(SimSetup { config, pulses })
}

fn simulate_cmd(
    args: &ScenarioArgs,
    sim: &SimArgs,
    layers: &Layers,
    attack: &str,
    out: Option<&Path>,
) -> Result<ExitCode> {
    let s = scenario(args, layers)?;
    let plan = match attack {
        "none" => None,
        other => {
            let mode: AttackMode = other.parse().map_err(anyhow::Error::msg)?;
            Some(full_report(&s.params, &s.table()?, mode)?.plan)
        }
    };
    let setup = sim_setup(&s, sim, layers, plan)?;
    let tally = simulate(&setup.config)?;
    debug_assert_eq!(tally.pulses, setup.pulses);
    write_tally_csv(&[tally], output(out)?)?;
    Ok(ExitCode::SUCCESS)
}

fn validate(args: &ScenarioArgs, sim: &SimArgs, layers: &Layers, mode: &str, sigma: Option<f64>) -> Result<ExitCode> {
    let s = scenario(args, layers)?;
    let mode: AttackMode = mode.parse().map_err(anyhow::Error::msg)?;
    let sigma = layers.resolve("sigma", sigma, DEFAULT_SIGMA_THRESHOLD)?;
    if sigma.is_nan() || sigma <= 0.0 {
        bail!("--sigma must be > 0");
    }
    let table = s.table()?;
    let report = full_report(&s.params, &table, mode)?;
    if !report.plan.is_feasible() && sim.p_b_override.is_none() && sim.p_m_override.is_none() {
        bail!(
            "the {mode} attack is not executable here (p_b = {:.6}, p_m = {:.6}); choose another point or override the plan",
            report.plan.p_b,
            report.plan.p_m
        );
    }
    let setup = sim_setup(&s, sim, layers, Some(report.plan))?;
    let tally = simulate(&setup.config)?;
    let verdict = compare_to_analytic(&tally, &report, sigma)?;
    let plan = setup.config.plan.expect("validate always simulates an attack");
    println!(
        "{mode} attack at mu = {}, alpha = {}, eta = {}, r_c = {}; simulated p_b = {:.6}, p_m = {:.6}; {} pulses, seed {}",
        s.params.mu(),
        s.params.alpha(),
        s.params.eta(),
        s.params.r_c(),
        plan.p_b,
        plan.p_m,
        setup.pulses,
        setup.config.seed
    );
    println!("{verdict}");
    Ok(if verdict.passed { ExitCode::SUCCESS } else { ExitCode::from(EXIT_DISAGREEMENT) })
}

fn figure(strategy: Option<String>, table: Option<PathBuf>, layers: &Layers, out_dir: &Path) -> Result<ExitCode> {
    let flags = ScenarioFlags { strategy, table, ..ScenarioFlags::default() };
    let s = Scenario { params: figure_base(), source: Scenario::resolve(&flags, layers)?.source };
    let table = s.table()?;
    let spec = SweepSpec { table: s.source.clone(), ..figure_spec() };
    let rows = run_sweep_with_table(&spec, &table)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let csv_path = out_dir.join("figure.csv");
    let svg_path = out_dir.join("figure.svg");
    write_sweep_csv(&spec.axis_names(), &rows, BufWriter::new(File::create(&csv_path)?))?;
    let style = PlotStyle { annotation: annotation(&s, &table.strategy_name, &[Param::Mu]), ..PlotStyle::default() };
    std::fs::write(&svg_path, render_svg(&rows, &style)?)?;
    println!("wrote {} and {}", csv_path.display(), svg_path.display());
    Ok(ExitCode::SUCCESS)
}

fn strategies(dump: Option<&str>, l_max: usize) -> Result<ExitCode> {
    let registry = StrategyRegistry::builtin();
    let mut out = output(None)?;
    match dump {
        Some(name) => write!(out, "{}", registry.table(name, l_max)?.to_text())?,
        None => {
            for s in registry.iter() {
                writeln!(out, "{:<22} {}", s.name(), s.description())?;
            }
        }
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}
