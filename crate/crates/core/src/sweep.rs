//! Parameter sweeps and feasibility atlases over the analytic model.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;

use crate::analytic::{self, full_report, AttackMode};
use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::strategy::{DirectAttackTable, StrategyRegistry, DEFAULT_L_MAX, DEFAULT_STRATEGY};

/// A physical parameter that can be swept or held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Param {
    Mu,
    Alpha,
    Eta,
    RC,
}

impl Param {
    pub const ALL: [Param; 4] = [Param::Mu, Param::Alpha, Param::Eta, Param::RC];

    pub fn as_str(self) -> &'static str {
        match self {
            Param::Mu => "mu",
            Param::Alpha => "alpha",
            Param::Eta => "eta",
            Param::RC => "r_c",
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Param::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::InvalidSweep(format!("unknown parameter `{s}` (expected mu, alpha, eta or r_c)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub param: Param,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl Axis {
    pub fn new(param: Param, start: f64, stop: f64, points: usize, spacing: Spacing) -> Self {
        Self { param, start, stop, points, spacing }
    }

    /// Parses `name:start:stop:points[:lin|log]`, e.g. `mu:0.01:1:50:log`.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |why: &str| Error::InvalidSweep(format!("axis `{text}`: {why}"));
        let parts: Vec<_> = text.split(':').collect();
        if !(4..=5).contains(&parts.len()) {
            return Err(bad("expected name:start:stop:points[:lin|log]"));
        }
        let param = parts[0].parse()?;
        let start = parts[1].parse().map_err(|_| bad("start is not a number"))?;
        let stop = parts[2].parse().map_err(|_| bad("stop is not a number"))?;
        let points = parts[3].parse().map_err(|_| bad("points is not a positive integer"))?;
        let spacing = match parts.get(4).copied() {
            None | Some("lin") | Some("linear") => Spacing::Linear,
            Some("log") => Spacing::Log,
            Some(other) => return Err(bad(&format!("unknown spacing `{other}`"))),
        };
        Ok(Self { param, start, stop, points, spacing })
    }

    fn validate(&self) -> Result<()> {
        let bad = |why: String| Error::InvalidSweep(format!("axis {}: {why}", self.param));
        if self.points == 0 {
            return Err(bad("needs at least one point".into()));
        }
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(bad("bounds must be finite".into()));
        }
        if self.spacing == Spacing::Log && !(self.start > 0.0 && self.stop > 0.0) {
            return Err(bad("log spacing needs positive bounds".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        if n == 1 {
            return vec![self.start];
        }
        let last = (n - 1) as f64;
        (0..n)
            .map(|i| {
                if i == n - 1 {
                    return self.stop;
                }
                let t = i as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.start + t * (self.stop - self.start),
                    Spacing::Log => (self.start.ln() + t * (self.stop.ln() - self.start.ln())).exp(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeSelection {
    Matched,
    ErrorOnly,
    Both,
}

impl ModeSelection {
    pub fn modes(self) -> &'static [AttackMode] {
        match self {
            ModeSelection::Matched => &[AttackMode::Matched],
            ModeSelection::ErrorOnly => &[AttackMode::ErrorOnly],
            ModeSelection::Both => &AttackMode::ALL,
        }
    }
}

impl FromStr for ModeSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matched" => Ok(ModeSelection::Matched),
            "error-only" => Ok(ModeSelection::ErrorOnly),
            "both" => Ok(ModeSelection::Both),
            other => Err(Error::InvalidSweep(format!("unknown mode `{other}` (expected matched, error-only or both)"))),
        }
    }
}

/// Where the direct-attack table comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum TableSource {
    Strategy(String),
    File(PathBuf),
}

impl Default for TableSource {
    fn default() -> Self {
        TableSource::Strategy(DEFAULT_STRATEGY.to_owned())
    }
}

impl TableSource {
    pub fn resolve(&self, registry: &StrategyRegistry) -> Result<DirectAttackTable> {
        match self {
            TableSource::Strategy(name) => registry.table(name, DEFAULT_L_MAX),
            TableSource::File(path) => DirectAttackTable::load(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axes: Vec<Axis>,
    /// Values of the parameters that are not swept.
    pub fixed: BTreeMap<Param, f64>,
    pub m: u64,
    pub modes: ModeSelection,
    pub table: TableSource,
}

impl SweepSpec {
    /// Sweep over `axes`, drawing every other parameter from `base`.
    pub fn from_base(axes: Vec<Axis>, base: &SystemParams, modes: ModeSelection, table: TableSource) -> Self {
        let fixed = Param::ALL
            .into_iter()
            .filter(|p| axes.iter().all(|a| a.param != *p))
            .map(|p| (p, param_value(base, p)))
            .collect();
        Self { axes, fixed, m: base.m(), modes, table }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.axes.len()) {
            return Err(Error::InvalidSweep(format!("need 1 or 2 swept axes, got {}", self.axes.len())));
        }
        if self.axes.len() == 2 && self.axes[0].param == self.axes[1].param {
            return Err(Error::InvalidSweep(format!("axis {} is swept twice", self.axes[0].param)));
        }
        for axis in &self.axes {
            axis.validate()?;
            if self.fixed.contains_key(&axis.param) {
                return Err(Error::InvalidSweep(format!("{} is both swept and fixed", axis.param)));
            }
        }
        for p in Param::ALL {
            if !self.fixed.contains_key(&p) && self.axes.iter().all(|a| a.param != p) {
                return Err(Error::InvalidSweep(format!("{p} is neither swept nor fixed")));
            }
        }
        Ok(())
    }

    pub fn axis_names(&self) -> Vec<&'static str> {
        self.axes.iter().map(|a| a.param.as_str()).collect()
    }

    /// Grid coordinates in emission order; the first axis varies slowest.
    pub fn grid(&self) -> Vec<Vec<f64>> {
        let mut grid: Vec<Vec<f64>> = vec![Vec::new()];
        for axis in &self.axes {
            let values = axis.values();
            grid = grid
                .into_iter()
                .flat_map(|prefix| {
                    values.iter().map(move |v| {
                        let mut c = prefix.clone();
                        c.push(*v);
                        c
                    })
                })
                .collect();
        }
        grid
    }

    fn params_at(&self, coords: &[f64]) -> Result<SystemParams> {
        let mut values = self.fixed.clone();
        for (axis, v) in self.axes.iter().zip(coords) {
            values.insert(axis.param, *v);
        }
        SystemParams::new(values[&Param::Mu], values[&Param::Alpha], values[&Param::Eta], values[&Param::RC], self.m)
            .map_err(|e| Error::InvalidSweep(format!("grid point {coords:?}: {e}")))
    }
}

fn param_value(p: &SystemParams, which: Param) -> f64 {
    match which {
        Param::Mu => p.mu(),
        Param::Alpha => p.alpha(),
        Param::Eta => p.eta(),
        Param::RC => p.r_c(),
    }
}

/// One evaluated grid point for one attack mode.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    /// Swept parameter values, in axis order.
    pub coords: Vec<f64>,
    pub mode: AttackMode,
    pub s_partial: f64,
    pub p_b: f64,
    pub p_m: f64,
    pub feasible_pb: bool,
    pub feasible_pm: bool,
    pub n: f64,
    pub e_t: f64,
    /// The analytic model could not be evaluated here; unavailable fields are NaN.
    pub degenerate: bool,
}

impl CurvePoint {
    pub fn is_feasible(&self) -> bool {
        !self.degenerate && self.feasible_pb && self.feasible_pm
    }

    fn evaluate(coords: Vec<f64>, p: &SystemParams, table: &DirectAttackTable, mode: AttackMode) -> Self {
        match full_report(p, table, mode) {
            Ok(r) => CurvePoint {
                coords,
                mode,
                s_partial: r.s_partial,
                p_b: r.plan.p_b,
                p_m: r.plan.p_m,
                feasible_pb: r.plan.feasible_pb,
                feasible_pm: r.plan.feasible_pm,
                n: r.n,
                e_t: r.e_t,
                degenerate: false,
            },
            Err(_) => {
                let p_b = match mode {
                    AttackMode::ErrorOnly => 0.0,
                    AttackMode::Matched => {
                        table.z_e(p.mu()).and_then(|z| analytic::solve_p_b(p, z)).unwrap_or(f64::NAN)
                    }
                };
                CurvePoint {
                    coords,
                    mode,
                    s_partial: f64::NAN,
                    p_b,
                    p_m: f64::NAN,
                    feasible_pb: (0.0..=1.0).contains(&p_b),
                    feasible_pm: false,
                    n: analytic::sifted_bits_baseline(p),
                    e_t: analytic::errors_baseline(p),
                    degenerate: true,
                }
            }
        }
    }
}

/// Evaluates every grid point for each requested mode. Rows come back in
/// grid order, modes interleaved per point.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<CurvePoint>> {
    let table = spec.table.resolve(&StrategyRegistry::builtin())?;
    run_sweep_with_table(spec, &table)
}

pub fn run_sweep_with_table(spec: &SweepSpec, table: &DirectAttackTable) -> Result<Vec<CurvePoint>> {
    spec.validate()?;
    let points: Vec<(Vec<f64>, SystemParams)> =
        spec.grid().into_iter().map(|c| spec.params_at(&c).map(|p| (c, p))).collect::<Result<_>>()?;
    let modes = spec.modes.modes();
    let rows: Vec<Vec<CurvePoint>> = points
        .into_par_iter()
        .map(|(coords, p)| modes.iter().map(|&mode| CurvePoint::evaluate(coords.clone(), &p, table, mode)).collect())
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub const SWEEP_VALUE_COLUMNS: [&str; 9] =
    ["mode", "s_partial", "p_b", "p_m", "feasible_pb", "feasible_pm", "n", "e_T", "degenerate"];

/// Writes sweep rows as CSV: swept parameters, then [`SWEEP_VALUE_COLUMNS`].
/// Reals carry 17 significant digits.
pub fn write_sweep_csv<W: Write>(axis_names: &[&str], points: &[CurvePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<&str> = axis_names.iter().copied().chain(SWEEP_VALUE_COLUMNS).collect();
    w.write_record(&header)?;
    for pt in points {
        let mut row: Vec<String> = pt.coords.iter().map(|&v| fmt_real(v)).collect();
        row.push(pt.mode.to_string());
        row.extend([pt.s_partial, pt.p_b, pt.p_m].map(fmt_real));
        row.push(pt.feasible_pb.to_string());
        row.push(pt.feasible_pm.to_string());
        row.extend([pt.n, pt.e_t].map(fmt_real));
        row.push(pt.degenerate.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads CSV produced by [`write_sweep_csv`]. Returns the swept parameter
/// names and the rows.
pub fn read_sweep_csv<R: Read>(input: R) -> Result<(Vec<String>, Vec<CurvePoint>)> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let n_axes = header
        .len()
        .checked_sub(SWEEP_VALUE_COLUMNS.len())
        .ok_or_else(|| Error::InvalidSweep("CSV header too short".into()))?;
    if header.iter().skip(n_axes).ne(SWEEP_VALUE_COLUMNS) {
        return Err(Error::InvalidSweep(format!("unexpected CSV header {header:?}")));
    }
    let names = header.iter().take(n_axes).map(str::to_owned).collect();
    let bad = |field: &str, v: &str| Error::InvalidSweep(format!("bad {field} value `{v}`"));
    let real =
        |rec: &csv::StringRecord, i: usize| -> Result<f64> { rec[i].parse().map_err(|_| bad(&header[i], &rec[i])) };
    let flag =
        |rec: &csv::StringRecord, i: usize| -> Result<bool> { rec[i].parse().map_err(|_| bad(&header[i], &rec[i])) };
    let mut points = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let coords = (0..n_axes).map(|i| real(&rec, i)).collect::<Result<_>>()?;
        let k = n_axes;
        points.push(CurvePoint {
            coords,
            mode: rec[k].parse().map_err(|_| bad("mode", &rec[k]))?,
            s_partial: real(&rec, k + 1)?,
            p_b: real(&rec, k + 2)?,
            p_m: real(&rec, k + 3)?,
            feasible_pb: flag(&rec, k + 4)?,
            feasible_pm: flag(&rec, k + 5)?,
            n: real(&rec, k + 6)?,
            e_t: real(&rec, k + 7)?,
            degenerate: flag(&rec, k + 8)?,
        });
    }
    Ok((names, points))
}

/// Which constraint, if any, rules out the matched attack at a grid cell.
/// Blocking is checked first because the measuring probability is solved
/// for a given blocking probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeasibilityClass {
    BothFeasible,
    PbInfeasible,
    PmInfeasible,
}

impl FeasibilityClass {
    pub fn of(point: &CurvePoint) -> Self {
        if !point.feasible_pb {
            FeasibilityClass::PbInfeasible
        } else if point.degenerate || !point.feasible_pm {
            FeasibilityClass::PmInfeasible
        } else {
            FeasibilityClass::BothFeasible
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeasibilityClass::BothFeasible => "both_feasible",
            FeasibilityClass::PbInfeasible => "pb_infeasible",
            FeasibilityClass::PmInfeasible => "pm_infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtlasCell {
    pub point: CurvePoint,
    pub class: FeasibilityClass,
}

/// Classifies the matched attack over a two-axis grid.
pub fn feasibility_atlas(spec: &SweepSpec, table: &DirectAttackTable) -> Result<Vec<AtlasCell>> {
    if spec.axes.len() != 2 {
        return Err(Error::InvalidSweep(format!("a feasibility atlas needs 2 axes, got {}", spec.axes.len())));
    }
    let spec = SweepSpec { modes: ModeSelection::Matched, ..spec.clone() };
    Ok(run_sweep_with_table(&spec, table)?
        .into_iter()
        .map(|point| AtlasCell { class: FeasibilityClass::of(&point), point })
        .collect())
}

pub fn write_atlas_csv<W: Write>(axis_names: &[&str], cells: &[AtlasCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<&str> =
        axis_names.iter().copied().chain(["p_b", "p_m", "feasible_pb", "feasible_pm", "degenerate", "class"]).collect();
    w.write_record(&header)?;
    for cell in cells {
        let pt = &cell.point;
        let mut row: Vec<String> = pt.coords.iter().map(|&v| fmt_real(v)).collect();
        row.extend([pt.p_b, pt.p_m].map(fmt_real));
        row.push(pt.feasible_pb.to_string());
        row.push(pt.feasible_pm.to_string());
        row.push(pt.degenerate.to_string());
        row.push(cell.class.as_str().to_owned());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed values of the canonical figure; `mu` is swept over it.
pub fn figure_base() -> SystemParams {
    SystemParams::new(0.1, 0.01, 0.5, 0.01, 1_000_000).expect("static parameters are valid")
}

/// The canonical figure: `mu` log-spaced over [0.01, 1], both attack modes.
pub fn figure_spec() -> SweepSpec {
    SweepSpec::from_base(
        vec![Axis::new(Param::Mu, 0.01, 1.0, 50, Spacing::Log)],
        &figure_base(),
        ModeSelection::Both,
        TableSource::default(),
    )
}
