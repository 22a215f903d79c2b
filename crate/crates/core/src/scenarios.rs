//! Named initial-value problems.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use twofloat::TwoFloat;

use crate::dynamics::{integrate, IntegratorConfig, Precision, State};
use crate::potentials::{potential_value, PairPotentialSpec};
use crate::real::Real;
use crate::reduction::{
    kinetic_energy, linear_momentum, zero_am_projection, FullConfiguration, FullVelocity,
    MassSystem,
};
use crate::{Error, Result};

/// Virial ratio `K/|V|` imposed on the random tetrahedron velocities.
pub const TETRAHEDRON_VIRIAL: f64 = 0.3;

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioInfo {
    pub name: &'static str,
    pub dimension: usize,
    pub description: &'static str,
}

/// A fully specified initial-value problem with suggested run settings.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: &'static str,
    pub mass: MassSystem,
    pub state: State,
    /// Low-order part of the initial state (flat `[q; v]`) for
    /// double-double runs.
    pub correction: Option<Vec<f64>>,
    pub period: Option<f64>,
    pub seed: Option<u64>,
    pub t_end: f64,
    pub precision: Precision,
}

const CATALOG: [ScenarioInfo; 4] = [
    ScenarioInfo {
        name: "figure_eight",
        dimension: 2,
        description: "equal-mass figure-eight choreography, zero angular momentum, bounded",
    },
    ScenarioInfo {
        name: "lagrange_rotating",
        dimension: 2,
        description: "rigidly rotating equal-mass equilateral triangle, nonzero angular momentum",
    },
    ScenarioInfo {
        name: "perturbed_tetrahedron",
        dimension: 3,
        description: "regular tetrahedron with random zero-angular-momentum velocities, negative energy",
    },
    ScenarioInfo {
        name: "gerver_escape",
        dimension: 3,
        description: "rotating Lagrange triple with a fourth body receding along its axis",
    },
];

pub fn scenario_catalog() -> Vec<ScenarioInfo> {
    CATALOG.to_vec()
}

pub fn scenario(name: &str, seed: u64) -> Result<Scenario> {
    match name {
        "figure_eight" => figure_eight(),
        "lagrange_rotating" => lagrange_rotating(),
        "perturbed_tetrahedron" => perturbed_tetrahedron(seed),
        "gerver_escape" => gerver_escape(),
        _ => Err(Error::UnknownScenario {
            name: name.to_string(),
            valid: CATALOG.iter().map(|s| s.name.to_string()).collect(),
        }),
    }
}

/// Published figure-eight data: `x₁ = −x₂ = (a, b)`, `x₃ = 0`,
/// `v₃ = (c, e)`, `v₁ = v₂ = −v₃/2`.
const EIGHT_GUESS: [f64; 5] = [
    0.97000436,
    -0.24308753,
    -0.93240737,
    -0.86473146,
    6.32591398,
];

fn eight_state(p: &[f64]) -> State {
    let (a, b, c, e) = (p[0], p[1], p[2], p[3]);
    let q = FullConfiguration::from_columns(&[vec![a, b], vec![-a, -b], vec![0.0, 0.0]])
        .expect("finite");
    let v = FullVelocity::from_columns(&[
        vec![-c / 2.0, -e / 2.0],
        vec![-c / 2.0, -e / 2.0],
        vec![c, e],
    ])
    .expect("finite");
    State { t: 0.0, q, v }
}

fn eight_residual(p: &[f64], m: &MassSystem) -> Result<DVector<f64>> {
    let s0 = eight_state(p);
    let mut cfg = IntegratorConfig::adaptive(p[4], p[4]);
    cfg.rel_tol = 1e-13;
    cfg.abs_tol = 1e-15;
    let traj = integrate(&s0, m, &PairPotentialSpec::Newtonian, &cfg)?;
    let end = traj.samples().last().expect("non-empty");
    let mut r = Vec::with_capacity(12);
    r.extend((end.q.matrix() - s0.q.matrix()).iter());
    r.extend((end.v.matrix() - s0.v.matrix()).iter());
    Ok(DVector::from_vec(r))
}

/// Gauss–Newton shooting on the five figure-eight parameters, with a
/// minimum-norm step because rotations leave the residual invariant.
fn refine_eight() -> Result<[f64; 5]> {
    let m = MassSystem::new(vec![1.0; 3], 1.0)?;
    let mut p = EIGHT_GUESS;
    let mut r = eight_residual(&p, &m)?;
    for _ in 0..8 {
        if r.norm() < 1e-12 {
            break;
        }
        let mut jac = DMatrix::zeros(12, 5);
        for k in 0..5 {
            let h = 1e-7 * p[k].abs().max(1.0);
            let mut pp = p;
            pp[k] += h;
            let mut pm = p;
            pm[k] -= h;
            let col = (eight_residual(&pp, &m)? - eight_residual(&pm, &m)?) / (2.0 * h);
            jac.set_column(k, &col);
        }
        let svd = jac.svd(true, true);
        let eps = 1e-10 * svd.singular_values.max();
        let step = svd
            .solve(&(-&r), eps)
            .map_err(|e| Error::Integrator(e.to_string()))?;
        let mut trial = p;
        for k in 0..5 {
            trial[k] += step[k];
        }
        let rt = eight_residual(&trial, &m)?;
        if rt.norm() >= r.norm() {
            break;
        }
        p = trial;
        r = rt;
    }
    log::debug!("figure-eight closure residual {:e}", r.norm());
    Ok(p)
}

/// Refined figure-eight parameters `(a, b, c, e, T)`.
pub fn figure_eight_parameters() -> Result<[f64; 5]> {
    static CACHE: OnceLock<std::result::Result<[f64; 5], String>> = OnceLock::new();
    CACHE
        .get_or_init(|| refine_eight().map_err(|e| e.to_string()))
        .clone()
        .map_err(Error::Integrator)
}

fn figure_eight() -> Result<Scenario> {
    let p = figure_eight_parameters()?;
    Ok(Scenario {
        name: "figure_eight",
        mass: MassSystem::new(vec![1.0; 3], 1.0)?,
        state: eight_state(&p),
        correction: None,
        period: Some(p[4]),
        seed: None,
        t_end: 10.0 * p[4],
        precision: Precision::Double,
    })
}

/// Splits double-double values into `f64` parts and low-order corrections.
fn split(values: &[TwoFloat]) -> (Vec<f64>, Vec<f64>) {
    let hi: Vec<f64> = values.iter().map(|v| v.f64()).collect();
    let lo = values
        .iter()
        .zip(&hi)
        .map(|(v, h)| (*v - TwoFloat::from(*h)).f64())
        .collect();
    (hi, lo)
}

/// Unit-side equilateral triangle of unit masses rotating rigidly, in
/// double-double. Returns flat `[q; v]` for `d = 2` with bodies at angles
/// `0, 2π/3, 4π/3` on the circle of radius `1/√3`.
fn lagrange_triangle() -> Vec<TwoFloat> {
    let s3 = TwoFloat::of(3.0).sqrt();
    let r = s3.inv();
    let half = TwoFloat::of(0.5);
    let h3 = s3 * half;
    let z = TwoFloat::of(0.0);
    let one = TwoFloat::of(1.0);
    // speed ωR = 1 with ω = √3
    vec![
        r,
        z,
        -(r * half),
        half,
        -(r * half),
        -half,
        z,
        one,
        -h3,
        -half,
        h3,
        -half,
    ]
}

fn lagrange_rotating() -> Result<Scenario> {
    let (hi, lo) = split(&lagrange_triangle());
    let q = FullConfiguration::from_flat(2, 3, &hi[..6])?;
    let v = FullVelocity::from_flat(2, 3, &hi[6..])?;
    let period = 2.0 * std::f64::consts::PI / 3f64.sqrt();
    Ok(Scenario {
        name: "lagrange_rotating",
        mass: MassSystem::new(vec![1.0; 3], 1.0)?,
        state: State::new(0.0, q, v)?,
        correction: Some(lo),
        period: Some(period),
        seed: None,
        t_end: 10.0 * period,
        precision: Precision::DoubleDouble,
    })
}

fn perturbed_tetrahedron(seed: u64) -> Result<Scenario> {
    let m = MassSystem::new(vec![1.0; 4], 1.0)?;
    let s = 1.0 / 8f64.sqrt();
    let q = FullConfiguration::from_columns(&[
        vec![s, s, s],
        vec![s, -s, -s],
        vec![-s, s, -s],
        vec![-s, -s, s],
    ])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = DMatrix::from_fn(3, 4, |_, _| rng.gen_range(-1.0..1.0));
    let p = linear_momentum(&FullVelocity::new(v.clone())?, &m);
    for mut col in v.column_iter_mut() {
        for (x, pi) in col.iter_mut().zip(&p) {
            *x -= pi / m.total_mass();
        }
    }
    let v = zero_am_projection(&q, &FullVelocity::new(v)?, &m)?;
    let pot = potential_value(&q, &m, &PairPotentialSpec::Newtonian)?;
    let k = kinetic_energy(&v, &m);
    let scale = (TETRAHEDRON_VIRIAL * pot.abs() / k).sqrt();
    let v = FullVelocity::new(v.matrix() * scale)?;
    Ok(Scenario {
        name: "perturbed_tetrahedron",
        mass: m,
        state: State::new(0.0, q, v)?,
        correction: None,
        period: None,
        seed: Some(seed),
        t_end: 20.0,
        precision: Precision::Double,
    })
}

/// Height of the fourth body above the triple and its speed relative to it.
const GERVER_HEIGHT: f64 = 2.0;
const GERVER_SPEED_SQ: f64 = 16.0 / 3.0;

fn gerver_escape() -> Result<Scenario> {
    let tri = lagrange_triangle();
    let z = TwoFloat::of(0.0);
    let h = TwoFloat::of(GERVER_HEIGHT);
    let u = TwoFloat::of(GERVER_SPEED_SQ).sqrt();
    // center of mass and total momentum at the origin: triple shifted by −h/4,
    // fourth body at 3h/4; velocities −u/4 and 3u/4 along the axis
    let quarter = TwoFloat::of(0.25);
    let three_q = TwoFloat::of(0.75);
    let mut y = Vec::with_capacity(24);
    for a in 0..3 {
        y.extend([tri[2 * a], tri[2 * a + 1], -(h * quarter)]);
    }
    y.extend([z, z, h * three_q]);
    for a in 0..3 {
        y.extend([tri[6 + 2 * a], tri[6 + 2 * a + 1], -(u * quarter)]);
    }
    y.extend([z, z, u * three_q]);
    let (hi, lo) = split(&y);
    let q = FullConfiguration::from_flat(3, 4, &hi[..12])?;
    let v = FullVelocity::from_flat(3, 4, &hi[12..])?;
    Ok(Scenario {
        name: "gerver_escape",
        mass: MassSystem::new(vec![1.0; 4], 1.0)?,
        state: State::new(0.0, q, v)?,
        correction: Some(lo),
        period: None,
        seed: None,
        t_end: 20.0,
        precision: Precision::DoubleDouble,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::{angular_momentum, center_of_mass};

    fn energy(s: &Scenario) -> f64 {
        kinetic_energy(&s.state.v, &s.mass)
            + potential_value(&s.state.q, &s.mass, &PairPotentialSpec::Newtonian).unwrap()
    }

    #[test]
    fn catalog_lists_all_scenarios() {
        let names: Vec<_> = scenario_catalog().iter().map(|s| s.name).collect();
        assert_eq!(
            names,
            ["figure_eight", "lagrange_rotating", "perturbed_tetrahedron", "gerver_escape"]
        );
        for info in scenario_catalog() {
            let s = scenario(info.name, 0).unwrap();
            assert_eq!(s.mass.dim(), info.dimension);
            let p = linear_momentum(&s.state.v, &s.mass);
            assert!(p.iter().all(|x| x.abs() < 1e-14), "{}", info.name);
        }
    }

    #[test]
    fn unknown_scenario_lists_valid_names() {
        match scenario("nope", 0) {
            Err(Error::UnknownScenario { valid, .. }) => assert_eq!(valid.len(), 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn figure_eight_has_zero_angular_momentum_and_negative_energy() {
        let s = scenario("figure_eight", 0).unwrap();
        let j = angular_momentum(&s.state.q, &s.state.v, &s.mass);
        assert!(j.norm() <= 1e-12);
        assert!(energy(&s) < 0.0);
        let t = s.period.unwrap();
        assert!((t - EIGHT_GUESS[4]).abs() < 1e-5);
    }

    #[test]
    fn figure_eight_closes_after_one_period() {
        let s = scenario("figure_eight", 0).unwrap();
        let t = s.period.unwrap();
        let traj = integrate(
            &s.state,
            &s.mass,
            &PairPotentialSpec::Newtonian,
            &IntegratorConfig::adaptive(t, t / 8.0),
        )
        .unwrap();
        let end = traj.samples().last().unwrap();
        assert_eq!(end.t, t);
        let dq = (end.q.matrix() - s.state.q.matrix()).norm();
        let dv = (end.v.matrix() - s.state.v.matrix()).norm();
        assert!(dq.max(dv) <= 1e-6, "{dq:e} {dv:e}");
    }

    #[test]
    fn lagrange_triangle_is_equilateral_and_rotating() {
        let s = scenario("lagrange_rotating", 0).unwrap();
        for r in s.state.q.pair_distances() {
            assert!((r - 1.0).abs() < 1e-15);
        }
        let j = angular_momentum(&s.state.q, &s.state.v, &s.mass);
        assert!((j.norm() - 3f64.sqrt()).abs() < 1e-14);
        let cm = center_of_mass(&s.state.q, &s.mass);
        assert!(cm.iter().all(|x| x.abs() < 1e-16));
        let lo = s.correction.unwrap();
        assert!(lo.iter().any(|x| *x != 0.0));
        assert!(lo.iter().all(|x| x.abs() < 1e-16));
    }

    #[test]
    fn tetrahedron_is_reproducible_bound_and_nonrotating() {
        let a = scenario("perturbed_tetrahedron", 0).unwrap();
        let b = scenario("perturbed_tetrahedron", 0).unwrap();
        let c = scenario("perturbed_tetrahedron", 1).unwrap();
        assert_eq!(a.state, b.state);
        assert_ne!(a.state, c.state);
        assert!(energy(&a) < 0.0);
        let k = kinetic_energy(&a.state.v, &a.mass);
        assert!((k / 6.0 - TETRAHEDRON_VIRIAL).abs() < 1e-12);
        let j = angular_momentum(&a.state.q, &a.state.v, &a.mass);
        assert!(j.norm() < 1e-14);
        assert_eq!(a.seed, Some(0));
    }

    #[test]
    fn gerver_configuration_is_bound_but_escaping() {
        let s = scenario("gerver_escape", 0).unwrap();
        let e = energy(&s);
        assert!(e < 0.0, "{e}");
        let j = angular_momentum(&s.state.q, &s.state.v, &s.mass);
        assert!(j.norm() > 1.0);
        let cm = center_of_mass(&s.state.q, &s.mass);
        assert!(cm.iter().all(|x| x.abs() < 1e-15));
    }
}
