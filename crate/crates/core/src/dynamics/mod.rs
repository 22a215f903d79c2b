//! Integration of Newton's equations with dense output, conservation
//! monitoring and a collision guard.

mod rk;

use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::linalg::pseudo_svd;
use crate::potentials::{accelerate, potential_value, PairPotentialSpec};
use crate::real::Real;
use crate::reduction::{
    angular_momentum, kinetic_energy, linear_momentum, mass_norm_sq, reduce, FullConfiguration, FullVelocity,
    MassSystem,
};
use crate::{Error, Result};
use rk::{interpolate, DormandPrince, Rhs, Rk4};

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub q: FullConfiguration,
    pub v: FullVelocity,
}

impl State {
    pub fn new(t: f64, q: FullConfiguration, v: FullVelocity) -> Result<Self> {
        if !t.is_finite() {
            return Err(Error::NonFinite("time"));
        }
        if q.dim() != v.dim() || q.bodies() != v.bodies() {
            return Err(Error::Dimension(format!(
                "positions {}x{} vs velocities {}x{}",
                q.dim(),
                q.bodies(),
                v.dim(),
                v.bodies()
            )));
        }
        Ok(Self { t, q, v })
    }

    fn flat(&self) -> Vec<f64> {
        let mut y = self.q.to_flat();
        y.extend(self.v.matrix().iter());
        y
    }

    fn from_flat(t: f64, d: usize, n: usize, y: &[f64]) -> Result<Self> {
        let k = d * n;
        Ok(Self {
            t,
            q: FullConfiguration::from_flat(d, n, &y[..k])?,
            v: FullVelocity::from_flat(d, n, &y[k..])?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorKind {
    Rk4Fixed,
    #[default]
    AdaptiveEmbedded,
}

/// Arithmetic used for the internal state. Samples and dense coefficients
/// are always stored as `f64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    Double,
    DoubleDouble,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub kind: IntegratorKind,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: Option<f64>,
    /// Step of the fixed-step method.
    pub step: f64,
    pub t_end: f64,
    pub sample_interval: f64,
    /// Minimum allowed pair distance; defaults to `1e-6 × max r_ab(0)`.
    pub collision_radius: Option<f64>,
    pub precision: Precision,
    pub max_steps: usize,
}

impl IntegratorConfig {
    pub fn adaptive(t_end: f64, sample_interval: f64) -> Self {
        Self {
            kind: IntegratorKind::AdaptiveEmbedded,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: None,
            step: 1e-3,
            t_end,
            sample_interval,
            collision_radius: None,
            precision: Precision::Double,
            max_steps: 50_000_000,
        }
    }

    pub fn rk4(t_end: f64, step: f64, sample_interval: f64) -> Self {
        Self {
            kind: IntegratorKind::Rk4Fixed,
            step,
            ..Self::adaptive(t_end, sample_interval)
        }
    }

    fn validate(&self, t0: f64) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !(self.t_end.is_finite() && self.t_end > t0) {
            return Err(Error::InvalidArgument(format!(
                "t_end = {} must exceed the start time {t0}",
                self.t_end
            )));
        }
        if !positive(self.sample_interval) {
            return Err(Error::InvalidArgument("sample_interval must be positive".into()));
        }
        match self.kind {
            IntegratorKind::AdaptiveEmbedded => {
                if !positive(self.rel_tol) || !positive(self.abs_tol) {
                    return Err(Error::InvalidArgument("tolerances must be positive".into()));
                }
                if let Some(h) = self.max_step {
                    if !positive(h) {
                        return Err(Error::InvalidArgument("max_step must be positive".into()));
                    }
                }
            }
            IntegratorKind::Rk4Fixed => {
                if !positive(self.step) {
                    return Err(Error::InvalidArgument("step must be positive".into()));
                }
            }
        }
        if let Some(r) = self.collision_radius {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::InvalidArgument("collision_radius must be >= 0".into()));
            }
        }
        Ok(())
    }
}

/// Per-sample observables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub energy: f64,
    pub j_norm: f64,
    pub p_norm: f64,
    pub r_max: f64,
    pub r_min_pair: f64,
    /// Signed distance of the reduced configuration.
    pub s: f64,
    pub det: f64,
    pub margin: f64,
    /// Frobenius norm of the reduced configuration.
    pub scale: f64,
}

impl Diagnostics {
    pub fn of(state: &State, m: &MassSystem, p: &PairPotentialSpec) -> Result<Self> {
        let r = reduce(&state.q, m)?;
        let svd = pseudo_svd(&r);
        let dist = state.q.pair_distances();
        let energy = kinetic_energy(&state.v, m) + potential_value(&state.q, m, p)?;
        Ok(Self {
            energy,
            j_norm: angular_momentum(&state.q, &state.v, m).norm(),
            p_norm: norm(&linear_momentum(&state.v, m)),
            r_max: dist.iter().copied().fold(0.0, f64::max),
            r_min_pair: dist.iter().copied().fold(f64::INFINITY, f64::min),
            s: svd.signed_distance(),
            det: svd.determinant(),
            margin: svd.margin(),
            scale: r.norm(),
        })
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub max_rel_energy_drift: f64,
    pub max_j_norm: f64,
    /// Angular-momentum scale of the run, `max_t ‖q − q_cm‖_mass ‖v‖_mass`,
    /// an upper bound for `‖J‖`.
    pub j_scale: f64,
    /// `max ‖J(t) − J(0)‖ / ‖J(0)‖`, or the absolute drift when `J(0) = 0`.
    pub max_rel_j_drift: f64,
    pub max_p_norm: f64,
    pub max_p_drift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Collision { t: f64, a: usize, b: usize, r: f64 },
}

#[derive(Debug, Clone)]
struct DenseStep {
    t0: f64,
    h: f64,
    coeffs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    mass: MassSystem,
    samples: Vec<State>,
    diagnostics: Vec<Diagnostics>,
    dense: Vec<DenseStep>,
    conservation: ConservationReport,
    termination: Termination,
    collision_radius: f64,
    steps: usize,
    rejected: usize,
}

impl Trajectory {
    pub fn samples(&self) -> &[State] {
        &self.samples
    }

    pub fn diagnostics(&self) -> &[Diagnostics] {
        &self.diagnostics
    }

    pub fn conservation(&self) -> &ConservationReport {
        &self.conservation
    }

    pub fn termination(&self) -> Termination {
        self.termination
    }

    pub fn mass_system(&self) -> &MassSystem {
        &self.mass
    }

    pub fn collision_radius(&self) -> f64 {
        self.collision_radius
    }

    pub fn t_start(&self) -> f64 {
        self.samples[0].t
    }

    pub fn t_end(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// Accepted and rejected step counts.
    pub fn step_counts(&self) -> (usize, usize) {
        (self.steps, self.rejected)
    }

    pub fn max_pair_distance(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.r_max).fold(0.0, f64::max)
    }

    /// Largest accepted step.
    pub fn max_step_taken(&self) -> f64 {
        self.dense.iter().map(|s| s.h).fold(0.0, f64::max)
    }
}

/// Interpolated state at time `t`; sample nodes are returned verbatim.
pub fn dense_eval(traj: &Trajectory, t: f64) -> Result<State> {
    let (start, end) = (traj.t_start(), traj.t_end());
    if !(t >= start && t <= end) {
        return Err(Error::OutOfRange { t, start, end });
    }
    if let Ok(i) = traj.samples.binary_search_by(|s| s.t.total_cmp(&t)) {
        return Ok(traj.samples[i].clone());
    }
    let idx = traj
        .dense
        .partition_point(|s| s.t0 <= t)
        .saturating_sub(1);
    let seg = &traj.dense[idx];
    let n = seg.coeffs.len() / 5;
    let mut y = vec![0.0; n];
    let theta = ((t - seg.t0) / seg.h).clamp(0.0, 1.0);
    interpolate(&seg.coeffs, theta, &mut y);
    State::from_flat(t, traj.mass.dim(), traj.mass.bodies(), &y)
}

struct Newton<'a> {
    d: usize,
    k: usize,
    masses: &'a [f64],
    g: f64,
    potential: &'a PairPotentialSpec,
}

impl<R: Real> Rhs<R> for Newton<'_> {
    fn eval(&self, y: &[R], out: &mut [R]) -> std::result::Result<(), (usize, usize)> {
        let (pos, vel) = y.split_at(self.k);
        out[..self.k].copy_from_slice(vel);
        accelerate(pos, self.d, self.masses, self.g, self.potential, &mut out[self.k..])
    }
}

fn closest_pair(y: &[f64], d: usize, n: usize) -> (f64, usize, usize) {
    let mut best = (f64::INFINITY, 0, 0);
    for a in 0..n {
        for b in a + 1..n {
            let r: f64 = (0..d)
                .map(|i| (y[a * d + i] - y[b * d + i]).powi(2))
                .sum::<f64>()
                .sqrt();
            if r < best.0 {
                best = (r, a, b);
            }
        }
    }
    best
}

/// Integrates from `s0` until `cfg.t_end` or until the collision guard trips.
pub fn integrate(
    s0: &State,
    m: &MassSystem,
    p: &PairPotentialSpec,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    integrate_refined(s0, None, m, p, cfg)
}

/// As [`integrate`], with an optional low-order correction to the initial
/// state (flat `[q; v]`, column-major) that is honoured in double-double
/// mode so that initial data can be specified beyond `f64` resolution.
pub fn integrate_refined(
    s0: &State,
    correction: Option<&[f64]>,
    m: &MassSystem,
    p: &PairPotentialSpec,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let (d, n) = (m.dim(), m.bodies());
    if s0.q.dim() != d || s0.q.bodies() != n || s0.v.dim() != d || s0.v.bodies() != n {
        return Err(Error::Dimension(format!(
            "state is {}x{}, mass system expects {d}x{n}",
            s0.q.dim(),
            s0.q.bodies()
        )));
    }
    p.validate_for(n)?;
    cfg.validate(s0.t)?;
    let y0 = s0.flat();
    if let Some(c) = correction {
        if c.len() != y0.len() {
            return Err(Error::Dimension("initial-state correction length".into()));
        }
    }
    let (r0, a, b) = closest_pair(&y0, d, n);
    let scale = s0.q.pair_distances().into_iter().fold(0.0, f64::max);
    let r_min = cfg.collision_radius.unwrap_or(1e-6 * scale);
    if r0 <= r_min {
        return Err(Error::InvalidArgument(format!(
            "bodies {a} and {b} start within the collision radius ({r0} <= {r_min})"
        )));
    }

    let sys = Newton {
        d,
        k: d * n,
        masses: m.masses(),
        g: m.g(),
        potential: p,
    };
    let mut rec = Recorder::new(s0.t, cfg, d, n);
    let run = match cfg.precision {
        Precision::Double => drive::<f64>(y0, &sys, cfg, r_min, &mut rec),
        Precision::DoubleDouble => {
            let mut y: Vec<TwoFloat> = y0.iter().map(|&x| TwoFloat::from(x)).collect();
            if let Some(c) = correction {
                for (yi, ci) in y.iter_mut().zip(c) {
                    *yi += *ci;
                }
            }
            drive::<TwoFloat>(y, &sys, cfg, r_min, &mut rec)
        }
    };
    let termination = match run {
        Ok(t) => t,
        Err(Fail::Underflow(t, y)) => {
            return Err(Error::StepUnderflow {
                last: Box::new(State::from_flat(t, d, n, &y)?),
            })
        }
        Err(Fail::Steps(t)) => {
            return Err(Error::Integrator(format!(
                "step budget of {} exhausted at t = {t}",
                cfg.max_steps
            )))
        }
        Err(Fail::Coincident(a, b)) => return Err(Error::Collision(a, b)),
    };

    let mut samples = Vec::with_capacity(rec.samples.len());
    for (t, y) in rec.samples {
        samples.push(State::from_flat(t, d, n, &y)?);
    }
    let diagnostics = samples
        .iter()
        .map(|s| Diagnostics::of(s, m, p))
        .collect::<Result<Vec<_>>>()?;
    let conservation = conservation(&samples, &diagnostics, m);
    Ok(Trajectory {
        mass: m.clone(),
        samples,
        diagnostics,
        dense: rec.dense,
        conservation,
        termination,
        collision_radius: r_min,
        steps: rec.steps,
        rejected: rec.rejected,
    })
}

fn conservation(samples: &[State], diag: &[Diagnostics], m: &MassSystem) -> ConservationReport {
    let e0 = diag[0].energy;
    let j0 = angular_momentum(&samples[0].q, &samples[0].v, m);
    let p0 = linear_momentum(&samples[0].v, m);
    let j0n = j0.norm();
    let mut rep = ConservationReport {
        max_rel_energy_drift: 0.0,
        max_j_norm: 0.0,
        j_scale: 0.0,
        max_rel_j_drift: 0.0,
        max_p_norm: 0.0,
        max_p_drift: 0.0,
    };
    for (s, dg) in samples.iter().zip(diag) {
        let de = (dg.energy - e0).abs();
        let de = if e0 != 0.0 { de / e0.abs() } else { de };
        rep.max_rel_energy_drift = rep.max_rel_energy_drift.max(de);
        rep.max_j_norm = rep.max_j_norm.max(dg.j_norm);
        let qn = dg.scale;
        let vn = mass_norm_sq(s.v.matrix(), m).sqrt();
        rep.j_scale = rep.j_scale.max(qn * vn);
        let j = angular_momentum(&s.q, &s.v, m);
        let dj = (j.matrix() - j0.matrix()).norm() / std::f64::consts::SQRT_2;
        let dj = if j0n > 0.0 { dj / j0n } else { dj };
        rep.max_rel_j_drift = rep.max_rel_j_drift.max(dj);
        rep.max_p_norm = rep.max_p_norm.max(dg.p_norm);
        let p = linear_momentum(&s.v, m);
        let dp: Vec<f64> = p.iter().zip(&p0).map(|(a, b)| a - b).collect();
        rep.max_p_drift = rep.max_p_drift.max(norm(&dp));
    }
    rep
}

enum Fail {
    Underflow(f64, Vec<f64>),
    Steps(f64),
    Coincident(usize, usize),
}

/// Collects samples on the output grid and the dense coefficients of every
/// accepted step.
struct Recorder {
    t0: f64,
    dt: f64,
    t_end: f64,
    next: usize,
    d: usize,
    n: usize,
    samples: Vec<(f64, Vec<f64>)>,
    dense: Vec<DenseStep>,
    steps: usize,
    rejected: usize,
}

impl Recorder {
    fn new(t0: f64, cfg: &IntegratorConfig, d: usize, n: usize) -> Self {
        Self {
            t0,
            dt: cfg.sample_interval,
            t_end: cfg.t_end,
            next: 0,
            d,
            n,
            samples: Vec::new(),
            dense: Vec::new(),
            steps: 0,
            rejected: 0,
        }
    }

    fn grid(&self, k: usize) -> f64 {
        let t = self.t0 + k as f64 * self.dt;
        // the last grid point may land a hair past t_end through rounding
        if t > self.t_end || self.t_end - t < 1e-9 * self.dt {
            self.t_end
        } else {
            t
        }
    }

    /// Records the step `[t, t + h]`; `last` forces a sample at its end.
    fn push<R: Real>(&mut self, t: f64, h: f64, y0: &[R], y1: &[R], coeffs: &[R], last: bool) {
        let t1 = t + h;
        let mut buf = vec![R::zero(); y0.len()];
        loop {
            let ts = self.grid(self.next);
            if ts > t1 || self.samples.last().is_some_and(|(tl, _)| *tl >= self.t_end) {
                break;
            }
            let y: Vec<f64> = if ts == t {
                y0.iter().map(|v| v.f64()).collect()
            } else if ts == t1 {
                y1.iter().map(|v| v.f64()).collect()
            } else {
                interpolate(coeffs, R::of((ts - t) / h), &mut buf);
                buf.iter().map(|v| v.f64()).collect()
            };
            self.samples.push((ts, y));
            self.next += 1;
        }
        if last && self.samples.last().is_none_or(|(tl, _)| *tl < t1) {
            self.samples.push((t1, y1.iter().map(|v| v.f64()).collect()));
        }
        self.dense.push(DenseStep {
            t0: t,
            h,
            coeffs: coeffs.iter().map(|v| v.f64()).collect(),
        });
        self.steps += 1;
    }

    fn guard<R: Real>(&self, y: &[R], r_min: f64) -> Option<(f64, usize, usize)> {
        let k = self.d * self.n;
        let pos: Vec<f64> = y[..k].iter().map(|v| v.f64()).collect();
        let (r, a, b) = closest_pair(&pos, self.d, self.n);
        (r < r_min).then_some((r, a, b))
    }
}

fn drive<R: Real>(
    mut y: Vec<R>,
    sys: &Newton<'_>,
    cfg: &IntegratorConfig,
    r_min: f64,
    rec: &mut Recorder,
) -> std::result::Result<Termination, Fail> {
    let mut t = rec.t0;
    let t_end = cfg.t_end;
    let nn = y.len();
    let mut coeffs = Vec::with_capacity(5 * nn);

    match cfg.kind {
        IntegratorKind::Rk4Fixed => {
            let steps = ((t_end - t) / cfg.step).ceil().max(1.0) as usize;
            let h = (t_end - t) / steps as f64;
            let mut rk = Rk4::<R>::new(nn);
            rk.prime(sys, &y).map_err(|(a, b)| Fail::Coincident(a, b))?;
            for i in 0..steps {
                if i >= cfg.max_steps {
                    return Err(Fail::Steps(t));
                }
                let t1 = if i + 1 == steps { t_end } else { rec.t0 + (i + 1) as f64 * h };
                let hi = t1 - t;
                rk.step(sys, &y, hi).map_err(|(a, b)| Fail::Coincident(a, b))?;
                rk.dense(&y, hi, &mut coeffs);
                let hit = rec.guard(&rk.y1, r_min);
                rec.push(t, hi, &y, &rk.y1, &coeffs, hit.is_some() || i + 1 == steps);
                y.copy_from_slice(&rk.y1);
                rk.advance();
                t = t1;
                if let Some((r, a, b)) = hit {
                    return Ok(Termination::Collision { t, a, b, r });
                }
            }
            Ok(Termination::Completed)
        }
        IntegratorKind::AdaptiveEmbedded => {
            let mut dp = DormandPrince::<R>::new(nn);
            dp.prime(sys, &y).map_err(|(a, b)| Fail::Coincident(a, b))?;
            let max_step = cfg.max_step.unwrap_or(f64::INFINITY).min(t_end - t);
            let mut h = initial_step(sys, &y, dp.derivative(), cfg).min(max_step);
            let mut fac_max = 10.0;
            loop {
                if rec.steps + rec.rejected >= cfg.max_steps {
                    return Err(Fail::Steps(t));
                }
                let last = t + h >= t_end;
                if last {
                    h = t_end - t;
                }
                let t_floor = 16.0 * f64::EPSILON * t.abs().max(1.0);
                if h < t_floor {
                    return Err(Fail::Underflow(t, y.iter().map(|v| v.f64()).collect()));
                }
                let trial = match dp.attempt(sys, &y, h, cfg.rel_tol, cfg.abs_tol) {
                    Ok(tr) => tr,
                    Err(_) => {
                        // a stage landed on a coincidence: shrink and retry
                        rec.rejected += 1;
                        h *= 0.2;
                        fac_max = 1.0;
                        continue;
                    }
                };
                let err = trial.err;
                if err.is_finite() && err <= 1.0 {
                    dp.dense(&y, h, &mut coeffs);
                    let t1 = if last { t_end } else { t + h };
                    let hit = rec.guard(&dp.y1, r_min);
                    rec.push(t, t1 - t, &y, &dp.y1, &coeffs, hit.is_some() || last);
                    y.copy_from_slice(&dp.y1);
                    dp.advance();
                    t = t1;
                    if let Some((r, a, b)) = hit {
                        return Ok(Termination::Collision { t, a, b, r });
                    }
                    if last {
                        return Ok(Termination::Completed);
                    }
                    let fac = if err == 0.0 {
                        fac_max
                    } else {
                        (0.9 * err.powf(-0.2)).clamp(0.2, fac_max)
                    };
                    h = (h * fac).min(max_step);
                    fac_max = 10.0;
                } else {
                    rec.rejected += 1;
                    let fac = if err.is_finite() {
                        (0.9 * err.powf(-0.2)).clamp(0.2, 1.0)
                    } else {
                        0.2
                    };
                    h *= fac;
                    fac_max = 1.0;
                }
            }
        }
    }
}

/// Starting step from the scaled sizes of the state and its derivatives.
fn initial_step<R: Real>(sys: &Newton<'_>, y: &[R], f0: &[R], cfg: &IntegratorConfig) -> f64 {
    let sc: Vec<f64> = y
        .iter()
        .map(|v| cfg.abs_tol + cfg.rel_tol * v.f64().abs())
        .collect();
    let rms = |x: &[f64]| {
        (x.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
    };
    let yf: Vec<f64> = y.iter().map(|v| v.f64()).collect();
    let ff: Vec<f64> = f0.iter().map(|v| v.f64()).collect();
    let (d0, d1) = (rms(&yf), rms(&ff));
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<R> = y
        .iter()
        .zip(f0)
        .map(|(a, b)| *a + R::of(h0) * *b)
        .collect();
    let mut f1 = vec![R::zero(); y.len()];
    if sys.eval(&y1, &mut f1).is_err() {
        return h0;
    }
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| (*a - *b).f64()).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::{center_of_mass, zero_am_projection};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Two unit masses on a circular orbit of separation `sep` plus two far
    /// spectators of negligible mass.
    fn kepler_state(sep: f64) -> (State, MassSystem, f64) {
        let m = MassSystem::new(vec![1.0, 1.0, 1e-12, 1e-12], 1.0).unwrap();
        // relative speed for a circular orbit: v_rel² = G(m1+m2)/sep
        let vrel = (2.0 / sep).sqrt();
        let q = FullConfiguration::from_columns(&[
            vec![sep / 2.0, 0.0, 0.0],
            vec![-sep / 2.0, 0.0, 0.0],
            vec![0.0, 1e4, 0.0],
            vec![0.0, 0.0, 1e4],
        ])
        .unwrap();
        let v = FullVelocity::from_columns(&[
            vec![0.0, vrel / 2.0, 0.0],
            vec![0.0, -vrel / 2.0, 0.0],
            vec![0.0; 3],
            vec![0.0; 3],
        ])
        .unwrap();
        let period = 2.0 * std::f64::consts::PI * (sep.powi(3) / 2.0).sqrt();
        (State::new(0.0, q, v).unwrap(), m, period)
    }

    fn y_of_body0(traj: &Trajectory, t: f64) -> f64 {
        dense_eval(traj, t).unwrap().q.matrix()[(1, 0)]
    }

    #[test]
    fn kepler_period_matches_closed_form() {
        let (s0, m, period) = kepler_state(1.0);
        let cfg = IntegratorConfig::adaptive(1.3 * period, period / 50.0);
        let traj = integrate(&s0, &m, &PairPotentialSpec::Newtonian, &cfg).unwrap();
        assert_eq!(traj.termination(), Termination::Completed);
        // body 0 crosses y = 0 upward once per revolution
        let (mut lo, mut hi) = (0.9 * period, 1.1 * period);
        assert!(y_of_body0(&traj, lo) < 0.0 && y_of_body0(&traj, hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if y_of_body0(&traj, mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let measured = 0.5 * (lo + hi);
        assert!(((measured - period) / period).abs() < 1e-6, "{measured} vs {period}");
    }

    #[test]
    fn rk4_cross_check_agrees_with_adaptive() {
        let (s0, m, period) = kepler_state(1.0);
        let p = PairPotentialSpec::Newtonian;
        let a = integrate(&s0, &m, &p, &IntegratorConfig::adaptive(period, period / 10.0)).unwrap();
        let b = integrate(&s0, &m, &p, &IntegratorConfig::rk4(period, 1e-3, period / 10.0)).unwrap();
        assert_eq!(a.samples().len(), b.samples().len());
        for (x, y) in a.samples().iter().zip(b.samples()) {
            assert_eq!(x.t, y.t);
            assert!((x.q.matrix() - y.q.matrix()).norm() < 1e-9);
        }
    }

    #[test]
    fn dense_eval_nodes_midpoints_and_range() {
        let (s0, m, period) = kepler_state(1.0);
        let p = PairPotentialSpec::Newtonian;
        let cfg = IntegratorConfig::adaptive(0.5 * period, period / 20.0);
        let traj = integrate(&s0, &m, &p, &cfg).unwrap();
        for s in traj.samples() {
            assert_eq!(&dense_eval(&traj, s.t).unwrap(), s);
        }
        assert!(matches!(
            dense_eval(&traj, traj.t_end() + 1.0),
            Err(Error::OutOfRange { .. })
        ));
        // oracle: the exact circular motion
        let omega = 2.0 * std::f64::consts::PI / period;
        let tol = cfg.rel_tol.max(cfg.abs_tol);
        for i in 0..40 {
            let t = (i as f64 + 0.37) * traj.t_end() / 40.0;
            let q = dense_eval(&traj, t).unwrap().q;
            let exact = [0.5 * (omega * t).cos(), 0.5 * (omega * t).sin()];
            let err = ((q.matrix()[(0, 0)] - exact[0]).powi(2)
                + (q.matrix()[(1, 0)] - exact[1]).powi(2))
            .sqrt();
            assert!(err <= 10.0 * tol * 100.0, "t = {t}: {err}");
        }
    }

    #[test]
    fn collinear_rest_start_trips_the_collision_guard() {
        let m = MassSystem::new(vec![1.0; 4], 1.0).unwrap();
        let q = FullConfiguration::from_columns(&[
            vec![-1.5, 0.0, 0.0],
            vec![-0.5, 0.0, 0.0],
            vec![0.5, 0.0, 0.0],
            vec![1.5, 0.0, 0.0],
        ])
        .unwrap();
        let s0 = State::new(0.0, q, FullVelocity::zeros(3, 4)).unwrap();
        let cfg = IntegratorConfig::adaptive(100.0, 0.1);
        let traj = integrate(&s0, &m, &PairPotentialSpec::Newtonian, &cfg).unwrap();
        match traj.termination() {
            Termination::Collision { t, r, .. } => {
                assert!(t < 100.0);
                assert!(r < traj.collision_radius());
                assert_eq!(traj.t_end(), t);
            }
            other => panic!("expected collision, got {other:?}"),
        }
    }

    fn random_bound_state(seed: u64) -> (State, MassSystem) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = MassSystem::new(vec![1.0, 1.2, 0.8, 1.0], 1.0).unwrap();
        let q = FullConfiguration::new(nalgebra::DMatrix::from_fn(3, 4, |_, _| {
            rng.gen_range(-1.0..1.0)
        }))
        .unwrap();
        let cm: Vec<f64> = center_of_mass(&q, &m).iter().map(|x| -x).collect();
        let q = q.translated(&cm);
        let v = FullVelocity::new(nalgebra::DMatrix::from_fn(3, 4, |_, _| {
            rng.gen_range(-0.2..0.2)
        }))
        .unwrap();
        (State::new(0.0, q, v).unwrap(), m)
    }

    #[test]
    fn momenta_are_conserved() {
        let (s0, m) = random_bound_state(1);
        let v = zero_am_projection(&s0.q, &s0.v, &m).unwrap();
        let s0 = State::new(0.0, s0.q, v).unwrap();
        let cfg = IntegratorConfig::adaptive(2.0, 0.05);
        let traj = integrate(&s0, &m, &PairPotentialSpec::Newtonian, &cfg).unwrap();
        let rep = traj.conservation();
        assert!(rep.max_p_drift <= 1e-12, "{rep:?}");
        assert!(rep.max_j_norm <= 1e-10 * rep.j_scale, "{rep:?}");
    }

    #[test]
    fn time_reversal_returns_to_start() {
        let (s0, m, period) = kepler_state(1.0);
        let p = PairPotentialSpec::Newtonian;
        let cfg = IntegratorConfig::adaptive(period, period / 4.0);
        let fwd = integrate(&s0, &m, &p, &cfg).unwrap();
        let end = fwd.samples().last().unwrap().clone();
        let back0 = State::new(0.0, end.q, FullVelocity::new(-end.v.matrix()).unwrap()).unwrap();
        let back = integrate(&back0, &m, &p, &cfg).unwrap();
        let fin = back.samples().last().unwrap();
        let err = (fin.q.matrix() - s0.q.matrix()).norm();
        assert!(err <= 100.0 * cfg.rel_tol, "{err}");
    }

    #[test]
    fn double_double_matches_double_on_short_runs() {
        let (s0, m) = random_bound_state(4);
        let p = PairPotentialSpec::Newtonian;
        let mut cfg = IntegratorConfig::adaptive(1.0, 0.25);
        let a = integrate(&s0, &m, &p, &cfg).unwrap();
        cfg.precision = Precision::DoubleDouble;
        let b = integrate(&s0, &m, &p, &cfg).unwrap();
        for (x, y) in a.samples().iter().zip(b.samples()) {
            assert!((x.q.matrix() - y.q.matrix()).norm() < 1e-8);
        }
    }

    #[test]
    fn samples_follow_the_requested_grid() {
        let (s0, m) = random_bound_state(2);
        let cfg = IntegratorConfig::adaptive(1.05, 0.1);
        let traj = integrate(&s0, &m, &PairPotentialSpec::Newtonian, &cfg).unwrap();
        let ts = traj.times();
        assert_eq!(ts.len(), 12);
        assert_eq!(*ts.last().unwrap(), 1.05);
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(traj.diagnostics().len(), ts.len());
        assert_eq!(traj.samples()[0], s0);
    }

    #[test]
    fn rejects_invalid_configs() {
        let (s0, m) = random_bound_state(3);
        let p = PairPotentialSpec::Newtonian;
        let mut cfg = IntegratorConfig::adaptive(-1.0, 0.1);
        assert!(integrate(&s0, &m, &p, &cfg).is_err());
        cfg.t_end = 1.0;
        cfg.rel_tol = 0.0;
        assert!(integrate(&s0, &m, &p, &cfg).is_err());
        let wrong = MassSystem::new(vec![1.0; 3], 1.0).unwrap();
        assert!(integrate(&s0, &wrong, &p, &IntegratorConfig::adaptive(1.0, 0.1)).is_err());
    }
}
