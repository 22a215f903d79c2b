//! Attractive pair potentials `V = G Σ_{a<b} m_a m_b f_ab(r_ab)`.

use std::fmt::Debug;
use std::sync::Arc;

use crate::real::Real;
use crate::reduction::{FullConfiguration, FullVelocity, MassSystem};
use crate::{Error, Result};

/// Number of log-spaced radii used to spot-check the shape hypotheses.
pub const HYPOTHESIS_GRID: usize = 10_000;

/// A user-supplied radial profile, shared by every pair.
pub trait PairFunction: Send + Sync + Debug {
    fn f(&self, r: f64) -> f64;
    fn df(&self, r: f64) -> f64;
    fn d2f(&self, r: f64) -> f64;
}

#[derive(Debug, Clone)]
pub enum PairPotentialSpec {
    /// `f(r) = −1/r`.
    Newtonian,
    /// `f_ab(r) = −k_ab r^{−α}`. `k` is either a single value or one value
    /// per unordered pair in lexicographic `a < b` order.
    PowerLaw { alpha: f64, k: Vec<f64> },
    Custom(Arc<dyn PairFunction>),
}

impl PairPotentialSpec {
    pub fn power_law(alpha: f64, k: f64) -> Result<Self> {
        Self::power_law_pairs(alpha, vec![k])
    }

    pub fn power_law_pairs(alpha: f64, k: Vec<f64>) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::PotentialHypothesis(format!(
                "power-law exponent must be positive, got {alpha}"
            )));
        }
        if k.is_empty() || k.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
            return Err(Error::PotentialHypothesis(
                "power-law coefficients must be positive".into(),
            ));
        }
        Ok(Self::PowerLaw { alpha, k })
    }

    fn pair_k(&self, pair: usize) -> f64 {
        match self {
            Self::PowerLaw { k, .. } if k.len() == 1 => k[0],
            Self::PowerLaw { k, .. } => k[pair],
            _ => 1.0,
        }
    }

    /// Checks that a per-pair coefficient list fits `n` bodies.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        if let Self::PowerLaw { k, .. } = self {
            let pairs = n * (n - 1) / 2;
            if k.len() != 1 && k.len() != pairs {
                return Err(Error::Dimension(format!(
                    "{} pair coefficients for {n} bodies ({pairs} pairs)",
                    k.len()
                )));
            }
        }
        Ok(())
    }

    pub fn f(&self, pair: usize, r: f64) -> f64 {
        match self {
            Self::Newtonian => -1.0 / r,
            Self::PowerLaw { alpha, .. } => -self.pair_k(pair) * r.powf(-alpha),
            Self::Custom(c) => c.f(r),
        }
    }

    pub fn df(&self, pair: usize, r: f64) -> f64 {
        match self {
            Self::Newtonian => 1.0 / (r * r),
            Self::PowerLaw { alpha, .. } => alpha * self.pair_k(pair) * r.powf(-alpha - 1.0),
            Self::Custom(c) => c.df(r),
        }
    }

    pub fn d2f(&self, pair: usize, r: f64) -> f64 {
        match self {
            Self::Newtonian => -2.0 / (r * r * r),
            Self::PowerLaw { alpha, .. } => {
                -alpha * (alpha + 1.0) * self.pair_k(pair) * r.powf(-alpha - 2.0)
            }
            Self::Custom(c) => c.d2f(r),
        }
    }

    /// `f′(r)/r` in the working precision. Custom profiles are evaluated in
    /// `f64` and promoted; power laws go through `powf`, which is only
    /// `f64`-accurate for double-double.
    #[inline]
    pub(crate) fn force_factor<R: Real>(&self, pair: usize, r: R) -> R {
        match self {
            Self::Newtonian => (r * r * r).inv(),
            Self::PowerLaw { alpha, .. } => {
                R::of(alpha * self.pair_k(pair)) * r.powf(R::of(-alpha - 2.0))
            }
            Self::Custom(c) => {
                let x = r.f64();
                R::of(c.df(x) / x)
            }
        }
    }

    fn pair_count_hint(&self) -> usize {
        match self {
            Self::PowerLaw { k, .. } => k.len(),
            _ => 1,
        }
    }
}

/// Position of the pair `a < b` in lexicographic pair order.
pub fn pair_index(n: usize, a: usize, b: usize) -> usize {
    // lexicographic index of (a, b), a < b
    a * n - a * (a + 1) / 2 + (b - a - 1)
}

fn check(q: &FullConfiguration, m: &MassSystem, p: &PairPotentialSpec) -> Result<()> {
    if q.bodies() != m.bodies() || q.dim() != m.dim() {
        return Err(Error::Dimension(format!(
            "configuration is {}x{}, mass system expects {}x{}",
            q.dim(),
            q.bodies(),
            m.dim(),
            m.bodies()
        )));
    }
    p.validate_for(m.bodies())
}

pub fn potential_value(q: &FullConfiguration, m: &MassSystem, p: &PairPotentialSpec) -> Result<f64> {
    check(q, m, p)?;
    let n = m.bodies();
    let masses = m.masses();
    let mut v = 0.0;
    for a in 0..n {
        for b in a + 1..n {
            let r = q.distance(a, b);
            if r == 0.0 {
                return Err(Error::Collision(a, b));
            }
            v += masses[a] * masses[b] * p.f(pair_index(n, a, b), r);
        }
    }
    Ok(m.g() * v)
}

/// `q̈_a = G Σ_{b≠a} m_b (f′_ab(r_ab)/r_ab)(q_b − q_a)`.
pub fn acceleration(
    q: &FullConfiguration,
    m: &MassSystem,
    p: &PairPotentialSpec,
) -> Result<FullVelocity> {
    check(q, m, p)?;
    let (d, n) = (m.dim(), m.bodies());
    let mut out = vec![0.0; d * n];
    accelerate(q.matrix().as_slice(), d, m.masses(), m.g(), p, &mut out)
        .map_err(|(a, b)| Error::Collision(a, b))?;
    FullVelocity::from_flat(d, n, &out)
}

/// Column-major kernel shared by the integrator. On a coincident pair the
/// offending labels are returned.
pub(crate) fn accelerate<R: Real>(
    pos: &[R],
    d: usize,
    masses: &[f64],
    g: f64,
    p: &PairPotentialSpec,
    out: &mut [R],
) -> std::result::Result<(), (usize, usize)> {
    let n = masses.len();
    out.iter_mut().for_each(|x| *x = R::zero());
    let g = R::of(g);
    let mut diff = [R::zero(); 8];
    let mut diff_vec;
    let diff: &mut [R] = if d <= 8 {
        &mut diff[..d]
    } else {
        diff_vec = vec![R::zero(); d];
        &mut diff_vec
    };
    for a in 0..n {
        for b in a + 1..n {
            let mut r2 = R::zero();
            for i in 0..d {
                diff[i] = pos[b * d + i] - pos[a * d + i];
                r2 += diff[i] * diff[i];
            }
            if r2 == R::zero() {
                return Err((a, b));
            }
            let w = g * p.force_factor(pair_index(n, a, b), r2.sqrt());
            let (wa, wb) = (w * R::of(masses[b]), w * R::of(masses[a]));
            for i in 0..d {
                out[a * d + i] += wa * diff[i];
                out[b * d + i] -= wb * diff[i];
            }
        }
    }
    Ok(())
}

/// Verifies `f′ > 0`, `f″ < 0` and strictly decreasing `f′/r` on a
/// log-spaced grid over `[1e-6·c, 10·c]`.
pub fn check_hypotheses(p: &PairPotentialSpec, c: f64) -> Result<()> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidArgument(format!("c must be positive, got {c}")));
    }
    let (lo, hi) = ((1e-6 * c).ln(), (10.0 * c).ln());
    for pair in 0..p.pair_count_hint() {
        let mut prev = f64::INFINITY;
        for i in 0..HYPOTHESIS_GRID {
            let r = (lo + (hi - lo) * i as f64 / (HYPOTHESIS_GRID - 1) as f64).exp();
            let (d1, d2) = (p.df(pair, r), p.d2f(pair, r));
            if !(d1 > 0.0) {
                return Err(Error::PotentialHypothesis(format!("f'({r}) = {d1} is not positive")));
            }
            if !(d2 < 0.0) {
                return Err(Error::PotentialHypothesis(format!("f''({r}) = {d2} is not negative")));
            }
            let ratio = d1 / r;
            if !(ratio < prev) {
                return Err(Error::PotentialHypothesis(format!(
                    "f'(r)/r is not strictly decreasing near r = {r}"
                )));
            }
            prev = ratio;
        }
    }
    Ok(())
}

/// `δ(c) = min_ab f′_ab(c)/c`, a lower bound for `f′_ab(r)/r` on `r ≤ c`.
pub fn delta_bound(p: &PairPotentialSpec, c: f64) -> Result<f64> {
    match p {
        PairPotentialSpec::Newtonian => {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::InvalidArgument(format!("c must be positive, got {c}")));
            }
            Ok(1.0 / (c * c * c))
        }
        PairPotentialSpec::PowerLaw { alpha, k } => {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::InvalidArgument(format!("c must be positive, got {c}")));
            }
            let kmin = k.iter().copied().fold(f64::INFINITY, f64::min);
            Ok(alpha * kmin / c.powf(alpha + 2.0))
        }
        PairPotentialSpec::Custom(f) => {
            check_hypotheses(p, c)?;
            Ok(f.df(c) / c)
        }
    }
}

/// `ω = √(G M δ(c))`; degenerations are at most `π/ω` apart.
pub fn oscillator_frequency(m: &MassSystem, p: &PairPotentialSpec, c: f64) -> Result<f64> {
    Ok((m.g() * m.total_mass() * delta_bound(p, c)?).sqrt())
}

pub fn window_length(omega: f64) -> f64 {
    std::f64::consts::PI / omega
}
