//! Config-driven runs: initial data, integration, event scan, verification
//! and file output.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    integrate_refined, ConservationReport, IntegratorConfig, IntegratorKind, Precision, State,
    Termination, Trajectory,
};
use crate::events::{scan_degenerations, symbol_sequence, DegenerationEvent};
use crate::potentials::PairPotentialSpec;
use crate::reduction::{
    linear_momentum, zero_am_projection, FullConfiguration, FullVelocity, MassSystem,
};
use crate::scenarios::scenario;
use crate::verify::{
    check_window_bound, concavity_segments, default_stencil, escape_suspected,
    estimate_g_adaptive, estimate_g_series, window_report, GEstimate, HypothesisFlags,
    OscillationReport, SPoint, SegmentReport, WindowInputs, NONZERO_J_REL,
    STENCIL_OMEGA_FRACTION,
};
use crate::{Error, Result};

pub const CONFIG_VERSION: u32 = 1;
pub const SERIES_HEADER: [&str; 9] = [
    "t", "S", "det", "margin", "energy", "J_norm", "p_norm", "r_max", "r_min_pair",
];

/// Process exit codes.
pub mod status {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const IO: i32 = 3;
    pub const INTEGRATOR: i32 = 4;
    /// A window without a degeneration instant on a run meeting the
    /// hypotheses of the bound.
    pub const VIOLATION: i32 = 5;
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::UnknownScenario { .. } => status::CONFIG,
        Error::Io { .. } => status::IO,
        Error::StepUnderflow { .. } | Error::Integrator(_) => status::INTEGRATOR,
        _ => status::OTHER,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum PotentialConfig {
    #[default]
    Newtonian,
    PowerLaw {
        alpha: f64,
        /// One coefficient for all pairs, or one per pair in `a < b` order.
        k: Coefficients,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficients {
    Uniform(f64),
    PerPair(Vec<f64>),
}


impl PotentialConfig {
    pub fn build(&self) -> Result<PairPotentialSpec> {
        match self {
            Self::Newtonian => Ok(PairPotentialSpec::Newtonian),
            Self::PowerLaw { alpha, k } => match k {
                Coefficients::Uniform(k) => PairPotentialSpec::power_law(*alpha, *k),
                Coefficients::PerPair(k) => PairPotentialSpec::power_law_pairs(*alpha, k.clone()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialData {
    Scenario {
        scenario: String,
        #[serde(default)]
        seed: u64,
    },
    Explicit {
        /// One position vector per body.
        positions: Vec<Vec<f64>>,
        velocities: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub kind: Option<IntegratorKind>,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub max_step: Option<f64>,
    pub step: Option<f64>,
    /// Defaults to the scenario's suggested end time.
    pub t_end: Option<f64>,
    pub sample_interval: Option<f64>,
    pub collision_radius: Option<f64>,
    /// Defaults to the scenario's precision, else double.
    pub precision: Option<Precision>,
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub series_csv: PathBuf,
    pub events_jsonl: PathBuf,
    pub report_json: PathBuf,
    /// Positions and velocities per sample, for plotting.
    #[serde(default)]
    pub plot_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub dimension: usize,
    /// Required for explicit initial data; checked against the scenario
    /// otherwise.
    #[serde(default)]
    pub masses: Option<Vec<f64>>,
    #[serde(rename = "G", default = "one")]
    pub g: f64,
    #[serde(default)]
    pub potential: PotentialConfig,
    pub initial: InitialData,
    #[serde(default)]
    pub project_zero_am: bool,
    #[serde(default)]
    pub zero_linear_momentum: bool,
    #[serde(default)]
    pub integrator: IntegratorSection,
    pub outputs: OutputPaths,
}

fn one() -> f64 {
    1.0
}

const DEFAULT_SAMPLE_INTERVAL: f64 = 0.01;

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::from_json(&text)
    }

    fn check(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {}, expected {CONFIG_VERSION}",
                self.version
            )));
        }
        if self.dimension == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        if let Some(m) = &self.masses {
            if m.len() != self.dimension + 1 {
                return Err(Error::Config(format!(
                    "{} masses given for dimension {}; need d + 1 = {}",
                    m.len(),
                    self.dimension,
                    self.dimension + 1
                )));
            }
        }
        if let InitialData::Explicit { positions, velocities } = &self.initial {
            if self.masses.is_none() {
                return Err(Error::Config("explicit initial data needs masses".into()));
            }
            let n = self.dimension + 1;
            let shaped = |v: &Vec<Vec<f64>>| v.len() == n && v.iter().all(|x| x.len() == self.dimension);
            if !shaped(positions) || !shaped(velocities) {
                return Err(Error::Config(format!(
                    "positions and velocities need {n} vectors of length {}",
                    self.dimension
                )));
            }
            if self.integrator.t_end.is_none() {
                return Err(Error::Config("explicit initial data needs integrator.t_end".into()));
            }
        }
        Ok(())
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Initial-value problem resolved from a config.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub mass: MassSystem,
    pub state: State,
    pub correction: Option<Vec<f64>>,
    pub potential: PairPotentialSpec,
    pub integrator: IntegratorConfig,
    pub scenario: Option<String>,
    pub seed: Option<u64>,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let potential = cfg.potential.build().map_err(|e| Error::Config(e.to_string()))?;
    let (mass, mut state, mut correction, t_end, precision, name, seed) = match &cfg.initial {
        InitialData::Scenario { scenario: name, seed } => {
            let s = scenario(name, *seed)?;
            if s.mass.dim() != cfg.dimension {
                return Err(Error::Config(format!(
                    "scenario {name} has dimension {}, config says {}",
                    s.mass.dim(),
                    cfg.dimension
                )));
            }
            if let Some(m) = &cfg.masses {
                if m.as_slice() != s.mass.masses() {
                    return Err(Error::Config(format!("masses do not match scenario {name}")));
                }
            }
            if cfg.g != s.mass.g() {
                return Err(Error::Config(format!("G does not match scenario {name}")));
            }
            (s.mass, s.state, s.correction, s.t_end, s.precision, Some(name.clone()), s.seed)
        }
        InitialData::Explicit { positions, velocities } => {
            let masses = cfg.masses.clone().expect("checked");
            let mass = MassSystem::new(masses, cfg.g).map_err(|e| Error::Config(e.to_string()))?;
            let q = FullConfiguration::from_columns(positions)
                .map_err(|e| Error::Config(e.to_string()))?;
            let v = FullVelocity::from_columns(velocities)
                .map_err(|e| Error::Config(e.to_string()))?;
            let state = State::new(0.0, q, v)?;
            let t_end = cfg.integrator.t_end.expect("checked");
            (mass, state, None, t_end, Precision::Double, None, None)
        }
    };
    potential
        .validate_for(mass.bodies())
        .map_err(|e| Error::Config(e.to_string()))?;

    if cfg.zero_linear_momentum {
        let p = linear_momentum(&state.v, &mass);
        let total = mass.total_mass();
        let mut v = state.v.matrix().clone();
        for mut col in v.column_iter_mut() {
            for (x, pi) in col.iter_mut().zip(&p) {
                *x -= pi / total;
            }
        }
        state.v = FullVelocity::new(v)?;
    }
    if cfg.project_zero_am {
        state.v = zero_am_projection(&state.q, &state.v, &mass)?;
    }
    if correction.is_some() && (cfg.zero_linear_momentum || cfg.project_zero_am) {
        warn!("initial data modified; dropping the double-double correction");
        correction = None;
    }

    let sec = &cfg.integrator;
    let mut integrator = IntegratorConfig::adaptive(
        sec.t_end.unwrap_or(t_end),
        sec.sample_interval.unwrap_or(DEFAULT_SAMPLE_INTERVAL),
    );
    integrator.kind = sec.kind.unwrap_or(integrator.kind);
    integrator.rel_tol = sec.rel_tol.unwrap_or(integrator.rel_tol);
    integrator.abs_tol = sec.abs_tol.unwrap_or(integrator.abs_tol);
    integrator.max_step = sec.max_step.or(integrator.max_step);
    integrator.step = sec.step.unwrap_or(integrator.step);
    integrator.collision_radius = sec.collision_radius;
    integrator.precision = sec.precision.unwrap_or(precision);
    integrator.max_steps = sec.max_steps.unwrap_or(integrator.max_steps);

    Ok(Prepared {
        mass,
        state,
        correction,
        potential,
        integrator,
        scenario: name,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GSummary {
    pub stencil_h: f64,
    pub lower_bound: f64,
    pub unmasked: usize,
    pub min_g: Option<f64>,
    pub all_positive: bool,
    pub below_bound: usize,
    pub diagnostic_only: bool,
}

impl From<&GEstimate> for GSummary {
    fn from(est: &GEstimate) -> Self {
        Self {
            stencil_h: est.stencil_h,
            lower_bound: est.lower_bound,
            unmasked: est.unmasked().count(),
            min_g: est.min_g,
            all_positive: est.all_positive,
            below_bound: est.below_bound,
            diagnostic_only: est.diagnostic_only,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCounts {
    pub accepted: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: u32,
    pub scenario: Option<String>,
    pub seed: Option<u64>,
    pub dimension: usize,
    pub masses: Vec<f64>,
    #[serde(rename = "G")]
    pub g: f64,
    pub potential: PotentialConfig,
    pub t_start: f64,
    pub t_end: f64,
    pub samples: usize,
    /// Absent when the report comes from a series re-analysis.
    pub steps: Option<StepCounts>,
    pub termination: Option<Termination>,
    pub conservation: Option<ConservationReport>,
    pub oscillation: OscillationReport,
    pub g_estimate: GSummary,
    pub segments: SegmentReport,
    pub event_count: usize,
    pub word: String,
    pub exit_status: i32,
}

impl RunReport {
    fn status(osc: &OscillationReport) -> i32 {
        if osc.hypotheses_met && !osc.violations.is_empty() {
            status::VIOLATION
        } else {
            status::OK
        }
    }
}

/// Full analysis of a finished run.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub events: Vec<DegenerationEvent>,
    pub oscillation: OscillationReport,
    pub g_estimate: GEstimate,
    pub segments: SegmentReport,
}

pub fn analyze(traj: &Trajectory, p: &PairPotentialSpec) -> Result<Analysis> {
    let m = traj.mass_system();
    let events = scan_degenerations(traj, m)?;
    let oscillation = check_window_bound(traj, &events, m, p)?;
    let g_estimate = estimate_g_series(traj, p)?;
    let times: Vec<f64> = events.iter().map(|e| e.t_star).collect();
    let segments = concavity_segments(&g_estimate, (traj.t_start(), traj.t_end()), &times);
    Ok(Analysis {
        events,
        oscillation,
        g_estimate,
        segments,
    })
}

/// Result of [`run_pipeline`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub trajectory: Trajectory,
    pub analysis: Analysis,
}

impl RunOutcome {
    pub fn exit_status(&self) -> i32 {
        self.report.exit_status
    }
}

pub fn run_pipeline(cfg: &RunConfig) -> Result<RunOutcome> {
    let prep = prepare(cfg)?;
    info!(
        "integrating {} to t = {}",
        prep.scenario.as_deref().unwrap_or("explicit initial data"),
        prep.integrator.t_end
    );
    let traj = integrate_refined(
        &prep.state,
        prep.correction.as_deref(),
        &prep.mass,
        &prep.potential,
        &prep.integrator,
    )
    .map_err(|e| match e {
        Error::StepUnderflow { .. } | Error::Integrator(_) => e,
        Error::InvalidArgument(msg) => Error::Config(msg),
        other => other,
    })?;
    let analysis = analyze(&traj, &prep.potential)?;
    info!(
        "{} samples, {} events, {} window violations",
        traj.samples().len(),
        analysis.events.len(),
        analysis.oscillation.violations.len()
    );

    let (accepted, rejected) = traj.step_counts();
    let report = RunReport {
        version: CONFIG_VERSION,
        scenario: prep.scenario.clone(),
        seed: prep.seed,
        dimension: prep.mass.dim(),
        masses: prep.mass.masses().to_vec(),
        g: prep.mass.g(),
        potential: cfg.potential.clone(),
        t_start: traj.t_start(),
        t_end: traj.t_end(),
        samples: traj.samples().len(),
        steps: Some(StepCounts { accepted, rejected }),
        termination: Some(traj.termination()),
        conservation: Some(*traj.conservation()),
        exit_status: RunReport::status(&analysis.oscillation),
        oscillation: analysis.oscillation.clone(),
        g_estimate: GSummary::from(&analysis.g_estimate),
        segments: analysis.segments.clone(),
        event_count: analysis.events.len(),
        word: symbol_sequence(&analysis.events),
    };

    write_series(&cfg.outputs.series_csv, &traj)?;
    write_events(&cfg.outputs.events_jsonl, &analysis.events)?;
    write_report(&cfg.outputs.report_json, &report)?;
    if let Some(path) = &cfg.outputs.plot_csv {
        write_plot_data(path, &traj)?;
    }
    Ok(RunOutcome {
        report,
        trajectory: traj,
        analysis,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?))
}

fn fmt(x: f64) -> String {
    if x.is_finite() {
        ryu::Buffer::new().format_finite(x).to_string()
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn write_series(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let csv_err = |e: csv::Error| Error::Io {
        path: path.display().to_string(),
        source: e.into(),
    };
    w.write_record(SERIES_HEADER).map_err(csv_err)?;
    for (s, d) in traj.samples().iter().zip(traj.diagnostics()) {
        let row = [
            s.t, d.s, d.det, d.margin, d.energy, d.j_norm, d.p_norm, d.r_max, d.r_min_pair,
        ];
        w.write_record(row.iter().map(|x| fmt(*x))).map_err(csv_err)?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_plot_data(path: &Path, traj: &Trajectory) -> Result<()> {
    let m = traj.mass_system();
    let (d, n) = (m.dim(), m.bodies());
    let mut w = csv::Writer::from_writer(create(path)?);
    let csv_err = |e: csv::Error| Error::Io {
        path: path.display().to_string(),
        source: e.into(),
    };
    let mut header = vec!["t".to_string()];
    for kind in ["q", "v"] {
        for a in 1..=n {
            for i in 1..=d {
                header.push(format!("{kind}{a}_{i}"));
            }
        }
    }
    w.write_record(&header).map_err(csv_err)?;
    for s in traj.samples() {
        let mut row = vec![fmt(s.t)];
        row.extend(s.q.matrix().iter().map(|x| fmt(*x)));
        row.extend(s.v.matrix().iter().map(|x| fmt(*x)));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_events(path: &Path, events: &[DegenerationEvent]) -> Result<()> {
    let mut w = create(path)?;
    for e in events {
        let line = serde_json::to_string(e).map_err(|e| Error::Config(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_events(path: &Path) -> Result<Vec<DegenerationEvent>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            Error::Config(format!("{}:{}: {e}", path.display(), i + 1))
        })?);
    }
    Ok(out)
}

pub fn write_report(path: &Path, report: &RunReport) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, report).map_err(|e| Error::Config(e.to_string()))?;
    writeln!(w).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

/// One row of a series CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: f64,
    #[serde(rename = "S")]
    pub s: f64,
    pub det: f64,
    pub margin: f64,
    pub energy: f64,
    #[serde(rename = "J_norm")]
    pub j_norm: f64,
    pub p_norm: f64,
    pub r_max: f64,
    pub r_min_pair: f64,
}

pub fn read_series(path: &Path) -> Result<Vec<SeriesRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e.into(),
    })?;
    let headers = r
        .headers()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        .clone();
    if headers.iter().ne(SERIES_HEADER) {
        return Err(Error::Config(format!("{}: unexpected header", path.display())));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Config(format!("{}: {e}", path.display()))))
        .collect()
}

/// Event times from sign changes of `S` between rows, by linear
/// interpolation, for series without an event file.
pub fn series_event_times(rows: &[SeriesRow]) -> Vec<f64> {
    let mut out = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        if r.s == 0.0 {
            out.push(r.t);
        } else if let Some(n) = rows.get(i + 1) {
            if n.s != 0.0 && (n.s > 0.0) != (r.s > 0.0) {
                out.push(r.t + (n.t - r.t) * r.s / (r.s - n.s));
            }
        }
    }
    out
}

/// Re-analysis of a stored series. The reduced-configuration scale is
/// not stored, so `|S| + margin` stands in for it; likewise the
/// angular-momentum scale is taken as `r_max·√(2M|E|)`. The stencil is
/// restricted to multiples of the sample interval, and nodes whose local
/// time scale is shorter than the sample interval are masked.
pub fn verify_series(
    cfg: &RunConfig,
    rows: &[SeriesRow],
    events: Option<&[DegenerationEvent]>,
) -> Result<RunReport> {
    if rows.len() < 2 {
        return Err(Error::Config("series needs at least two rows".into()));
    }
    let prep = prepare(cfg)?;
    let (m, p) = (&prep.mass, &prep.potential);
    let gm = m.g() * m.total_mass();

    let c = rows.iter().map(|r| r.r_max).fold(0.0, f64::max);
    let e0 = rows[0].energy;
    let j_scale = c * (2.0 * m.total_mass() * e0.abs()).sqrt();
    let max_j = rows.iter().map(|r| r.j_norm).fold(0.0, f64::max);
    let r_max: Vec<f64> = rows.iter().map(|r| r.r_max).collect();
    let t_start = rows[0].t;
    let t_end = rows[rows.len() - 1].t;
    let dt = prep.integrator.sample_interval;
    let flags = HypothesisFlags {
        nonzero_j: max_j > NONZERO_J_REL * j_scale,
        unbounded_suspected: e0 >= 0.0 || escape_suspected(&r_max),
        collision_truncated: t_end < prep.integrator.t_end - 1e-9 * prep.integrator.t_end.abs().max(1.0),
    };
    let event_times: Vec<f64> = match events {
        Some(ev) => ev.iter().map(|e| e.t_star).collect(),
        None => series_event_times(rows),
    };
    let oscillation = window_report(
        WindowInputs {
            t_start,
            t_end,
            c,
            flags,
        },
        &event_times,
        m,
        p,
    )?;

    // the stencil is restricted to the uniform sample grid
    let grid: Vec<&SeriesRow> = rows
        .iter()
        .filter(|r| {
            let k = ((r.t - t_start) / dt).round();
            (r.t - (t_start + k * dt)).abs() <= 1e-6 * dt
        })
        .collect();
    let last = grid.last().map_or(t_start, |r| r.t);
    let lookup = |t: f64| -> Result<SPoint> {
        let k = ((t - t_start) / dt).round() as usize;
        let r = grid
            .get(k)
            .filter(|r| (r.t - t).abs() <= 1e-6 * dt)
            .ok_or_else(|| Error::Config(format!("series has no sample at t = {t}")))?;
        Ok(SPoint {
            s: r.s,
            margin: r.margin,
            scale: r.s.abs() + r.margin,
        })
    };
    let h_cap = (default_stencil(m, p, c)? / dt).round().max(1.0) * dt;
    let h_at = |t: f64| {
        let k = ((t - t_start) / dt).round() as usize;
        let local = grid
            .get(k)
            .and_then(|r| crate::potentials::delta_bound(p, r.r_min_pair).ok())
            .map_or(h_cap, |delta| STENCIL_OMEGA_FRACTION / (gm * delta).sqrt());
        let k = (local / dt).round();
        if k >= 1.0 {
            k * dt
        } else {
            f64::NAN
        }
    };
    let nodes: Vec<f64> = grid.iter().map(|r| r.t).collect();
    let lower = gm * crate::potentials::delta_bound(p, c)?;
    let mut g_est = estimate_g_adaptive(&nodes, (t_start, last), h_cap, h_at, lower, lookup)?;
    g_est.diagnostic_only = flags.nonzero_j;
    let segments = concavity_segments(&g_est, (t_start, last), &event_times);

    let word = events.map(symbol_sequence).unwrap_or_default();
    Ok(RunReport {
        version: CONFIG_VERSION,
        scenario: prep.scenario,
        seed: prep.seed,
        dimension: m.dim(),
        masses: m.masses().to_vec(),
        g: m.g(),
        potential: cfg.potential.clone(),
        t_start,
        t_end,
        samples: rows.len(),
        steps: None,
        termination: None,
        conservation: None,
        exit_status: RunReport::status(&oscillation),
        oscillation,
        g_estimate: GSummary::from(&g_est),
        segments,
        event_count: event_times.len(),
        word,
    })
}

/// Reads the series and (if present) the events named in `cfg` and
/// re-runs the verification on them.
pub fn verify_outputs(cfg: &RunConfig) -> Result<RunReport> {
    let rows = read_series(&cfg.outputs.series_csv)?;
    let events = if cfg.outputs.events_jsonl.exists() {
        Some(read_events(&cfg.outputs.events_jsonl)?)
    } else {
        None
    };
    verify_series(cfg, &rows, events.as_deref())
}
