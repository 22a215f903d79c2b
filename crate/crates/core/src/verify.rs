//! Checks of the oscillation estimates along computed solutions.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{dense_eval, Termination, Trajectory};
use crate::events::DegenerationEvent;
use crate::linalg::{pseudo_svd, SquareMatrix};
use crate::potentials::{delta_bound, pair_index, potential_value, window_length, PairPotentialSpec};
use crate::reduction::{
    angular_momentum, center_of_mass, embed, reduce, FullConfiguration, FullVelocity, MassSystem,
};
use crate::{Error, Result};

/// Stencil points closer than this fraction of scale to the degeneration
/// locus are excluded from `g` estimates.
pub const EPS_S_REL: f64 = 1e-3;
/// Same for the singular margin.
pub const EPS_MARGIN_REL: f64 = 1e-3;
/// Default half-spacing of the five-point stencil in units of `1/ω`.
pub const STENCIL_OMEGA_FRACTION: f64 = 0.02;
/// Fraction of interior nodes that must carry the expected curvature sign.
pub const CONCAVITY_PASS_FRACTION: f64 = 0.99;
/// `‖J‖` above this fraction of the run's angular-momentum scale counts as
/// nonzero.
pub const NONZERO_J_REL: f64 = 1e-8;

/// Values of `S` and its conditioning at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SPoint {
    pub s: f64,
    pub margin: f64,
    pub scale: f64,
}

impl SPoint {
    fn masked(&self, eps_s: f64, eps_m: f64) -> bool {
        self.s.abs() <= eps_s * self.scale || self.margin <= eps_m * self.scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GEstimate {
    pub times: Vec<f64>,
    /// `−S̈/S`; `None` where the node is masked or the stencil leaves the span.
    pub g_values: Vec<Option<f64>>,
    pub masked: Vec<bool>,
    /// Second derivative of `S`, available wherever the stencil fits.
    #[serde(skip)]
    pub s_ddot: Vec<Option<f64>>,
    #[serde(skip)]
    pub s_values: Vec<f64>,
    /// Stencil spacing used at each node.
    #[serde(skip)]
    pub h_values: Vec<f64>,
    /// Largest stencil spacing.
    pub stencil_h: f64,
    /// `G M δ(c_observed)`.
    pub lower_bound: f64,
    pub min_g: Option<f64>,
    pub all_positive: bool,
    /// Unmasked samples with `g < lower_bound·(1 − 1e-3)`.
    pub below_bound: usize,
    /// Set when the run does not have zero angular momentum.
    pub diagnostic_only: bool,
}

impl GEstimate {
    pub fn unmasked(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times
            .iter()
            .zip(&self.g_values)
            .filter_map(|(t, g)| g.map(|g| (*t, g)))
    }
}

/// Estimates `g = −S̈/S` at `nodes` with a five-point stencil of spacing
/// `h` applied to `eval`.
pub fn estimate_g<F>(
    nodes: &[f64],
    span: (f64, f64),
    h: f64,
    lower_bound: f64,
    eval: F,
) -> Result<GEstimate>
where
    F: Fn(f64) -> Result<SPoint> + Sync,
{
    estimate_g_adaptive(nodes, span, h, |_| h, lower_bound, eval)
}

/// Like [`estimate_g`] with a node-dependent spacing `h_at(t) ≤ h`. Nodes
/// where `h_at` is not a positive number are masked.
pub fn estimate_g_adaptive<F, H>(
    nodes: &[f64],
    span: (f64, f64),
    h: f64,
    h_at: H,
    lower_bound: f64,
    eval: F,
) -> Result<GEstimate>
where
    F: Fn(f64) -> Result<SPoint> + Sync,
    H: Fn(f64) -> f64 + Sync,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("stencil spacing must be positive, got {h}")));
    }
    if span.1 - span.0 < 4.0 * h {
        return Err(Error::InvalidArgument(format!(
            "span {:?} is shorter than the stencil width {}",
            span,
            4.0 * h
        )));
    }
    let rows: Vec<(f64, Option<f64>, bool, f64)> = nodes
        .par_iter()
        .map(|&t| {
            let centre = eval(t)?;
            let local = h_at(t);
            if !(local > 0.0) {
                return Ok((centre.s, None, true, h));
            }
            let h = local.min(h);
            if t - 2.0 * h < span.0 || t + 2.0 * h > span.1 {
                return Ok((centre.s, None, true, h));
            }
            let mut pts = [centre; 5];
            for (k, off) in [-2.0, -1.0, 1.0, 2.0].into_iter().enumerate() {
                let idx = if k < 2 { k } else { k + 1 };
                pts[idx] = eval(t + off * h)?;
            }
            let sdd = (-pts[0].s + 16.0 * pts[1].s - 30.0 * pts[2].s + 16.0 * pts[3].s
                - pts[4].s)
                / (12.0 * h * h);
            let masked = pts.iter().any(|p| p.masked(EPS_S_REL, EPS_MARGIN_REL));
            Ok((centre.s, Some(sdd), masked, h))
        })
        .collect::<Result<_>>()?;

    let mut est = GEstimate {
        times: nodes.to_vec(),
        g_values: Vec::with_capacity(nodes.len()),
        masked: Vec::with_capacity(nodes.len()),
        s_ddot: Vec::with_capacity(nodes.len()),
        s_values: Vec::with_capacity(nodes.len()),
        h_values: Vec::with_capacity(nodes.len()),
        stencil_h: h,
        lower_bound,
        min_g: None,
        all_positive: true,
        below_bound: 0,
        diagnostic_only: false,
    };
    for (s, sdd, masked, h) in rows {
        let g = if masked { None } else { sdd.map(|v| -v / s) };
        if let Some(g) = g {
            est.all_positive &= g > 0.0;
            est.min_g = Some(est.min_g.map_or(g, |m: f64| m.min(g)));
            if g < lower_bound * (1.0 - 1e-3) {
                est.below_bound += 1;
            }
        }
        est.g_values.push(g);
        est.masked.push(masked);
        est.s_ddot.push(sdd);
        est.s_values.push(s);
        est.h_values.push(h);
    }
    Ok(est)
}

fn trajectory_point(traj: &Trajectory, t: f64) -> Result<SPoint> {
    let state = dense_eval(traj, t)?;
    let r = reduce(&state.q, traj.mass_system())?;
    let svd = pseudo_svd(&r);
    Ok(SPoint {
        s: svd.signed_distance(),
        margin: svd.margin(),
        scale: r.norm(),
    })
}

/// Default stencil spacing for a run bounded by `c`.
pub fn default_stencil(m: &MassSystem, p: &PairPotentialSpec, c: f64) -> Result<f64> {
    let omega = (m.g() * m.total_mass() * delta_bound(p, c)?).sqrt();
    Ok(STENCIL_OMEGA_FRACTION / omega)
}

/// `g` along a trajectory, evaluated at its sample nodes.
pub fn estimate_g_series(traj: &Trajectory, p: &PairPotentialSpec) -> Result<GEstimate> {
    let m = traj.mass_system();
    let c = traj.max_pair_distance();
    let h = default_stencil(m, p, c)?;
    estimate_g_series_with(traj, p, h)
}

/// Same with a cap `h` on the stencil spacing. Near close approaches the
/// spacing shrinks to the same fraction of the local period set by the
/// smallest mutual distance.
pub fn estimate_g_series_with(
    traj: &Trajectory,
    p: &PairPotentialSpec,
    h: f64,
) -> Result<GEstimate> {
    let m = traj.mass_system();
    let c = traj.max_pair_distance();
    let gm = m.g() * m.total_mass();
    let lower = gm * delta_bound(p, c)?;
    let h_at = |t: f64| {
        let local = dense_eval(traj, t).ok().and_then(|s| {
            let r = s.q.pair_distances().into_iter().fold(f64::INFINITY, f64::min);
            delta_bound(p, r).ok()
        });
        local.map_or(h, |delta| h.min(STENCIL_OMEGA_FRACTION / (gm * delta).sqrt()))
    };
    let mut est = estimate_g_adaptive(
        &traj.times(),
        (traj.t_start(), traj.t_end()),
        h,
        h_at,
        lower,
        |t| trajectory_point(traj, t),
    )?;
    est.diagnostic_only = nonzero_j(traj);
    Ok(est)
}

fn nonzero_j(traj: &Trajectory) -> bool {
    let c = traj.conservation();
    c.max_j_norm > NONZERO_J_REL * c.j_scale
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentStat {
    pub t_start: f64,
    pub t_end: f64,
    pub sign: i8,
    /// Unmasked nodes inside the guard band.
    pub nodes: usize,
    pub agreeing: usize,
    pub fraction: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub segments: Vec<SegmentStat>,
    /// Segments without any usable node.
    pub skipped: usize,
    pub total_nodes: usize,
    pub total_agreeing: usize,
    pub overall_fraction: f64,
    pub all_passed: bool,
}

/// Checks that `S̈` has sign `−sign(S)` on each maximal interval between
/// consecutive event times, using the curvature values of `est`. Nodes
/// within twice the stencil width of a segment end are left out.
pub fn concavity_segments(est: &GEstimate, span: (f64, f64), event_times: &[f64]) -> SegmentReport {
    let mut cuts = vec![span.0];
    cuts.extend(event_times.iter().copied().filter(|t| *t > span.0 && *t < span.1));
    cuts.push(span.1);
    let mut report = SegmentReport {
        segments: Vec::new(),
        skipped: 0,
        total_nodes: 0,
        total_agreeing: 0,
        overall_fraction: 1.0,
        all_passed: true,
    };
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut stat = SegmentStat {
            t_start: a,
            t_end: b,
            sign: 0,
            nodes: 0,
            agreeing: 0,
            fraction: 1.0,
            passed: true,
        };
        for i in 0..est.times.len() {
            let t = est.times[i];
            let guard = 8.0 * est.h_values[i];
            if t <= a + guard || t >= b - guard || est.masked[i] {
                continue;
            }
            let Some(sdd) = est.s_ddot[i] else { continue };
            let s = est.s_values[i];
            stat.sign = if s > 0.0 { 1 } else { -1 };
            stat.nodes += 1;
            if sdd * s < 0.0 {
                stat.agreeing += 1;
            }
        }
        if stat.nodes == 0 {
            report.skipped += 1;
            continue;
        }
        stat.fraction = stat.agreeing as f64 / stat.nodes as f64;
        stat.passed = stat.fraction >= CONCAVITY_PASS_FRACTION;
        report.all_passed &= stat.passed;
        report.total_nodes += stat.nodes;
        report.total_agreeing += stat.agreeing;
        report.segments.push(stat);
    }
    if report.total_nodes > 0 {
        report.overall_fraction = report.total_agreeing as f64 / report.total_nodes as f64;
    }
    report
}

/// Curvature-sign check on the segments of a trajectory cut at `events`.
pub fn check_concavity_segments(
    traj: &Trajectory,
    events: &[DegenerationEvent],
    p: &PairPotentialSpec,
) -> Result<SegmentReport> {
    let est = estimate_g_series(traj, p)?;
    let times: Vec<f64> = events.iter().map(|e| e.t_star).collect();
    Ok(concavity_segments(&est, (traj.t_start(), traj.t_end()), &times))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSweep {
    /// Maximal event-free stretches longer than the window.
    pub violations: Vec<Window>,
    /// Swept windows of the regular grid.
    pub windows_checked: usize,
    /// Swept windows that contain no event.
    pub violating_windows: usize,
    /// Longest event-free stretch, including the ends of the span.
    pub max_gap: f64,
}

/// Slides a closed window of length `window` over `[t_start, t_end]` in
/// steps of `window / 100` and records event-free windows.
///
/// Violations are reported as the event-free stretches that strictly
/// exceed `window`, so stretches narrower than a sweep step are not missed.
pub fn sweep_windows(t_start: f64, t_end: f64, window: f64, event_times: &[f64]) -> WindowSweep {
    let mut times: Vec<f64> = event_times
        .iter()
        .copied()
        .filter(|t| *t >= t_start && *t <= t_end)
        .collect();
    times.sort_by(f64::total_cmp);

    let step = window / 100.0;
    let count = if t_end - t_start >= window {
        ((t_end - t_start - window) / step).floor() as usize + 1
    } else {
        0
    };
    let contains = |s: f64| {
        let i = times.partition_point(|t| *t < s);
        i < times.len() && times[i] <= s + window
    };
    let violating_windows = (0..count)
        .into_par_iter()
        .filter(|k| !contains(t_start + *k as f64 * step))
        .count();

    let mut bounds = vec![t_start];
    bounds.extend(&times);
    bounds.push(t_end);
    let mut violations = Vec::new();
    let mut max_gap: f64 = 0.0;
    for w in bounds.windows(2) {
        let gap = w[1] - w[0];
        max_gap = max_gap.max(gap);
        if gap > window {
            violations.push(Window { start: w[0], end: w[1] });
        }
    }
    WindowSweep {
        violations,
        windows_checked: count,
        violating_windows,
        max_gap,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisFlags {
    #[serde(rename = "nonzero_J")]
    pub nonzero_j: bool,
    pub unbounded_suspected: bool,
    pub collision_truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationReport {
    pub c_observed: f64,
    pub delta: f64,
    pub omega: f64,
    pub window: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub event_count: usize,
    pub max_gap: f64,
    pub windows_checked: usize,
    pub violating_windows: usize,
    pub violations: Vec<Window>,
    pub hypothesis_flags: HypothesisFlags,
    /// Zero angular momentum holds, so violations would contradict the bound.
    pub hypotheses_met: bool,
}

impl OscillationReport {
    pub fn confirmed(&self) -> bool {
        self.hypotheses_met && self.violations.is_empty()
    }
}

/// Inputs of the window check that do not depend on the trajectory type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowInputs {
    pub t_start: f64,
    pub t_end: f64,
    pub c: f64,
    pub flags: HypothesisFlags,
}

pub fn window_report(
    inputs: WindowInputs,
    event_times: &[f64],
    m: &MassSystem,
    p: &PairPotentialSpec,
) -> Result<OscillationReport> {
    let delta = delta_bound(p, inputs.c)?;
    let omega = (m.g() * m.total_mass() * delta).sqrt();
    let window = window_length(omega);
    let sweep = sweep_windows(inputs.t_start, inputs.t_end, window, event_times);
    Ok(OscillationReport {
        c_observed: inputs.c,
        delta,
        omega,
        window,
        t_start: inputs.t_start,
        t_end: inputs.t_end,
        event_count: event_times.len(),
        max_gap: sweep.max_gap,
        windows_checked: sweep.windows_checked,
        violating_windows: sweep.violating_windows,
        violations: sweep.violations,
        hypothesis_flags: inputs.flags,
        hypotheses_met: !inputs.flags.nonzero_j,
    })
}

/// Flags for a trajectory: angular momentum from its conservation report,
/// collision from its termination, and escape from energy and growth of the
/// largest distance.
pub fn hypothesis_flags(traj: &Trajectory) -> HypothesisFlags {
    let diags = traj.diagnostics();
    let r: Vec<f64> = diags.iter().map(|d| d.r_max).collect();
    HypothesisFlags {
        nonzero_j: nonzero_j(traj),
        unbounded_suspected: diags.first().is_some_and(|d| d.energy >= 0.0)
            || escape_suspected(&r),
        collision_truncated: matches!(traj.termination(), Termination::Collision { .. }),
    }
}

/// The largest distance peaks in the final 5% of samples after more than
/// doubling.
pub fn escape_suspected(r_max: &[f64]) -> bool {
    let n = r_max.len();
    if n < 2 {
        return false;
    }
    let (imax, rmax) = r_max
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &r)| if r >= acc.1 { (i, r) } else { acc });
    imax as f64 >= 0.95 * (n - 1) as f64 && rmax > 2.0 * r_max[0]
}

/// Window check with `c` taken as the largest mutual distance of the run.
pub fn check_window_bound(
    traj: &Trajectory,
    events: &[DegenerationEvent],
    m: &MassSystem,
    p: &PairPotentialSpec,
) -> Result<OscillationReport> {
    check_window_bound_with_c(traj, events, m, p, traj.max_pair_distance())
}

pub fn check_window_bound_with_c(
    traj: &Trajectory,
    events: &[DegenerationEvent],
    m: &MassSystem,
    p: &PairPotentialSpec,
    c: f64,
) -> Result<OscillationReport> {
    let times: Vec<f64> = events.iter().map(|e| e.t_star).collect();
    let inputs = WindowInputs {
        t_start: traj.t_start(),
        t_end: traj.t_end(),
        c,
        flags: hypothesis_flags(traj),
    };
    window_report(inputs, &times, m, p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSample {
    pub t: f64,
    pub s: f64,
    pub g_analytic: f64,
    pub g_numeric: f64,
    /// `max |r_ab(t)² − r_ab(0)² − t²|v_ab|²| / r_ab(t)²`.
    pub distance_law_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalGeodesicProbe {
    /// Centered planar configuration.
    pub base: FullConfiguration,
    pub velocity: FullVelocity,
    /// Unit normal of the common hyperplane.
    pub normal: Vec<f64>,
    /// Normal speed of each body.
    pub weights: Vec<f64>,
    pub j_norm: f64,
    pub momentum_norm: f64,
    pub samples: Vec<ProbeSample>,
}

impl NormalGeodesicProbe {
    pub fn max_distance_law_error(&self) -> f64 {
        self.samples.iter().map(|s| s.distance_law_error).fold(0.0, f64::max)
    }

    pub fn max_relative_g_error(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| ((s.g_numeric - s.g_analytic) / s.g_analytic).abs())
            .fold(0.0, f64::max)
    }
}

/// Moves a planar configuration off its hyperplane along the normal
/// direction with zero momentum and zero angular momentum, and compares the
/// closed-form `g₁` with a finite-difference estimate of `⟨∇S, ∇V⟩ / S`.
pub fn normal_geodesic_probe(
    q0: &FullConfiguration,
    m: &MassSystem,
    p: &PairPotentialSpec,
    t_values: &[f64],
) -> Result<NormalGeodesicProbe> {
    let (d, n) = (m.dim(), m.bodies());
    if q0.dim() != d || q0.bodies() != n {
        return Err(Error::Dimension(format!(
            "expected {d}x{n} configuration, got {}x{}",
            q0.dim(),
            q0.bodies()
        )));
    }
    let r0 = reduce(q0, m)?;
    let s0 = pseudo_svd(&r0).signed_distance();
    if s0.abs() > 1e-12 * r0.norm() {
        return Err(Error::NotPlanar { s: s0 });
    }
    let cm = center_of_mass(q0, m);
    let base = q0.translated(&cm.iter().map(|c| -c).collect::<Vec<_>>());
    let x = base.matrix();

    let svd = x.clone().svd(true, false);
    let u = svd.u.as_ref().expect("u requested");
    let k_min = svd.singular_values.imin();
    let normal: Vec<f64> = u.column(k_min).iter().copied().collect();

    // Σ m_a w_a = 0 and Σ m_a w_a q_a = 0
    let masses = m.masses();
    let a = DMatrix::from_fn(d + 1, n, |i, b| {
        if i == 0 {
            masses[b]
        } else {
            masses[b] * x[(i - 1, b)]
        }
    });
    let null = a.svd(false, true);
    let vt = null.v_t.as_ref().expect("v requested");
    let row = null.singular_values.imin();
    let mut w: Vec<f64> = vt.row(row).iter().copied().collect();
    let norm = w.iter().zip(masses).map(|(w, m)| m * w * w).sum::<f64>().sqrt();
    w.iter_mut().for_each(|v| *v /= norm);

    let velocity_of = |w: &[f64]| {
        FullVelocity::new(DMatrix::from_fn(d, n, |i, b| w[b] * normal[i]))
    };
    let mut velocity = velocity_of(&w)?;
    let ahead = FullConfiguration::new(x + velocity.matrix() * (1e-3 * r0.norm()))?;
    if pseudo_svd(&reduce(&ahead, m)?).signed_distance() < 0.0 {
        w.iter_mut().for_each(|v| *v = -*v);
        velocity = velocity_of(&w)?;
    }

    let j_norm = angular_momentum(&base, &velocity, m).norm();
    let momentum_norm = (0..d)
        .map(|i| (0..n).map(|b| masses[b] * velocity.matrix()[(i, b)]).sum::<f64>().powi(2))
        .sum::<f64>()
        .sqrt();

    let samples = t_values
        .iter()
        .map(|&t| probe_sample(&base, &velocity, &w, m, p, t))
        .collect::<Result<_>>()?;
    Ok(NormalGeodesicProbe {
        base,
        velocity,
        normal,
        weights: w,
        j_norm,
        momentum_norm,
        samples,
    })
}

fn probe_sample(
    base: &FullConfiguration,
    v: &FullVelocity,
    w: &[f64],
    m: &MassSystem,
    p: &PairPotentialSpec,
    t: f64,
) -> Result<ProbeSample> {
    if t == 0.0 {
        return Err(Error::InvalidArgument("probe time must be nonzero".into()));
    }
    let q = FullConfiguration::new(base.matrix() + v.matrix() * t)?;
    let n = m.bodies();
    let masses = m.masses();
    let mut g1 = 0.0;
    let mut law: f64 = 0.0;
    for a in 0..n {
        for b in a + 1..n {
            let r = q.distance(a, b);
            let r0 = base.distance(a, b);
            let vab = w[a] - w[b];
            law = law.max((r * r - r0 * r0 - t * t * vab * vab).abs() / (r * r));
            g1 += masses[a] * masses[b] * p.df(pair_index(n, a, b), r) / r * vab * vab;
        }
    }
    g1 *= m.g();

    let x = reduce(&q, m)?;
    let svd = pseudo_svd(&x);
    let s = svd.signed_distance();
    // a reduced displacement of size ε moves r_ab by at most ε·√(1/m_a + 1/m_b)
    let pair_length = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .map(|(a, b)| q.distance(a, b) / (1.0 / masses[a] + 1.0 / masses[b]).sqrt())
        .fold(f64::INFINITY, f64::min);
    let h = 1e-3 * x.norm().min(svd.margin()).min(s.abs()).min(pair_length);
    let s_of = |y: &DMatrix<f64>| -> Result<f64> {
        Ok(pseudo_svd(&SquareMatrix::new(y.clone())?).signed_distance())
    };
    let v_of = |y: &DMatrix<f64>| -> Result<f64> {
        potential_value(&embed(&SquareMatrix::new(y.clone())?, m)?, m, p)
    };
    let mut dot = 0.0;
    let d = x.dim();
    for i in 0..d {
        for j in 0..d {
            let mut pts = Vec::with_capacity(4);
            for off in [-2.0, -1.0, 1.0, 2.0] {
                let mut y = x.as_matrix().clone();
                y[(i, j)] += off * h;
                pts.push((s_of(&y)?, v_of(&y)?));
            }
            let diff = |f: fn(&(f64, f64)) -> f64| {
                (f(&pts[0]) - 8.0 * f(&pts[1]) + 8.0 * f(&pts[2]) - f(&pts[3])) / (12.0 * h)
            };
            dot += diff(|p| p.0) * diff(|p| p.1);
        }
    }
    Ok(ProbeSample {
        t,
        s,
        g_analytic: g1,
        g_numeric: dot / s,
        distance_law_error: law,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    fn synthetic(f: fn(f64) -> f64) -> impl Fn(f64) -> Result<SPoint> + Sync {
        move |t| {
            Ok(SPoint {
                s: f(t),
                margin: 1.0,
                scale: 1.0,
            })
        }
    }

    #[test]
    fn pure_oscillator_has_constant_g() {
        let nodes = linspace(0.0, 10.0, 1001);
        let est = estimate_g(&nodes, (0.0, 10.0), 0.01, 4.0, synthetic(|t| (2.0 * t).sin())).unwrap();
        let mut count = 0;
        for (_, g) in est.unmasked() {
            assert!((g - 4.0).abs() <= 1e-6, "{g}");
            count += 1;
        }
        assert!(count > 900);
        assert!(est.all_positive);
        assert_eq!(est.below_bound, 0);
        // stencil cannot be centred at the ends
        assert!(est.g_values[0].is_none() && est.g_values[1000].is_none());
    }

    #[test]
    fn stencil_longer_than_span_is_an_error() {
        let err = estimate_g(&[0.0, 0.1], (0.0, 0.1), 0.05, 1.0, synthetic(f64::sin));
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn sine_is_concave_where_positive() {
        let nodes = linspace(0.0, 20.0, 2001);
        let est = estimate_g(&nodes, (0.0, 20.0), 0.01, 0.0, synthetic(f64::sin)).unwrap();
        for (i, sdd) in est.s_ddot.iter().enumerate() {
            if let Some(sdd) = sdd {
                if est.s_values[i] > 1e-3 {
                    assert!(*sdd <= 0.0);
                }
            }
        }
        let zeros: Vec<f64> = (1..7).map(|k| k as f64 * std::f64::consts::PI).collect();
        let report = concavity_segments(&est, (0.0, 20.0), &zeros);
        assert!(report.all_passed);
        assert_eq!(report.segments.len(), 7);
        assert_eq!(report.skipped, 0);
        assert!(report.segments.iter().all(|s| s.fraction == 1.0));
    }

    #[test]
    fn short_segments_are_skipped() {
        let nodes = linspace(0.0, 4.0, 401);
        let est = estimate_g(&nodes, (0.0, 4.0), 0.01, 0.0, synthetic(f64::sin)).unwrap();
        let report = concavity_segments(&est, (0.0, 4.0), &[1.0, 1.05, 3.0]);
        assert_eq!(report.skipped, 1);
        assert_eq!(report.segments.len(), 3);
    }

    #[test]
    fn evenly_spaced_events_inside_the_window_pass() {
        let window = 2.0;
        let times: Vec<f64> = (0..50).map(|k| 0.3 + k as f64 * 0.99 * window).collect();
        let sweep = sweep_windows(0.0, times[49], window, &times);
        assert!(sweep.violations.is_empty());
        assert_eq!(sweep.violating_windows, 0);
        assert!(sweep.windows_checked > 1000);
        assert!((sweep.max_gap - 0.99 * window).abs() < 1e-12);
    }

    #[test]
    fn gaps_and_empty_runs_are_violations() {
        let sweep = sweep_windows(0.0, 10.0, 1.0, &[0.5, 1.2, 4.0, 4.5, 9.5]);
        assert_eq!(
            sweep.violations,
            vec![Window { start: 1.2, end: 4.0 }, Window { start: 4.5, end: 9.5 }]
        );
        assert!(sweep.violating_windows > 0);
        let empty = sweep_windows(0.0, 10.0, 1.0, &[]);
        assert_eq!(empty.violations.len(), 1);
        assert_eq!(empty.windows_checked, 901);
        assert_eq!(empty.violating_windows, 901);
        let short = sweep_windows(0.0, 0.5, 1.0, &[]);
        assert!(short.violations.is_empty() && short.windows_checked == 0);
    }

    proptest! {
        #[test]
        fn larger_windows_never_add_violations(
            mut times in prop::collection::vec(0.0f64..50.0, 0..40),
            window in 0.1f64..10.0,
            growth in 1.0f64..3.0,
        ) {
            times.sort_by(f64::total_cmp);
            let small = sweep_windows(0.0, 50.0, window, &times);
            let large = sweep_windows(0.0, 50.0, window * growth, &times);
            prop_assert!(large.violations.len() <= small.violations.len());
            if small.violations.is_empty() {
                prop_assert!(large.violations.is_empty());
            }
        }
    }

    #[test]
    fn escape_heuristic() {
        assert!(escape_suspected(&[1.0, 1.5, 2.0, 3.0]));
        assert!(!escape_suspected(&[1.0, 3.0, 1.5, 1.2]));
        assert!(!escape_suspected(&[1.0, 1.2, 1.5, 1.9]));
    }

    fn unit_square() -> FullConfiguration {
        FullConfiguration::from_columns(&[
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![1.0, 1.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn square_probe_moves_alternate_corners() {
        let m = MassSystem::new(vec![1.0; 4], 1.0).unwrap();
        let probe =
            normal_geodesic_probe(&unit_square(), &m, &PairPotentialSpec::Newtonian, &[0.1]).unwrap();
        let w = &probe.weights;
        for a in 0..4 {
            assert!((w[a].abs() - 0.5).abs() < 1e-14, "{w:?}");
            assert!((w[a] + w[(a + 1) % 4]).abs() < 1e-14);
        }
        assert!((probe.normal[2].abs() - 1.0).abs() < 1e-14);
        assert!(probe.j_norm < 1e-15 && probe.momentum_norm < 1e-15);
        assert!(probe.max_distance_law_error() <= 1e-13);
        let s = &probe.samples[0];
        assert!((s.s - 0.1).abs() < 1e-12, "S = t along the normal: {}", s.s);
    }

    #[test]
    fn probe_g_matches_hand_sum_for_the_square() {
        // with w = ±1/2 alternating: sides have |v_ab| = 1, diagonals 0
        let m = MassSystem::new(vec![1.0; 4], 1.0).unwrap();
        let t: f64 = 0.1;
        let probe = normal_geodesic_probe(&unit_square(), &m, &PairPotentialSpec::Newtonian, &[t]).unwrap();
        let r = (1.0 + t * t).sqrt();
        let expect = 4.0 / (r * r * r);
        let s = &probe.samples[0];
        assert!((s.g_analytic - expect).abs() < 1e-14);
        assert!(((s.g_numeric - expect) / expect).abs() < 1e-8, "{s:?}");
    }

    #[test]
    fn nonplanar_base_is_rejected() {
        let m = MassSystem::new(vec![1.0; 4], 1.0).unwrap();
        let mut q = unit_square().into_matrix();
        q[(2, 2)] = 0.1;
        let q = FullConfiguration::new(q).unwrap();
        assert!(matches!(
            normal_geodesic_probe(&q, &m, &PairPotentialSpec::Newtonian, &[0.1]),
            Err(Error::NotPlanar { .. })
        ));
    }
}
