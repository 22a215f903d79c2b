//! Mass system, normalized Jacobi bases and translation reduction.
//!
//! A configuration of `N = d + 1` bodies is a `d × N` matrix whose columns are
//! the body positions. Reduction restricts it to the zero-sum hyperplane `L`
//! of the mass-label space, expressed in a mass-orthonormal basis of `L`, so
//! the result is a `d × d` matrix whose Frobenius norm is the mass norm of the
//! centered configuration.

use nalgebra::DMatrix;

use crate::linalg::SquareMatrix;
use crate::{Error, Result};

/// Reduced configuration: a `d × d` matrix in normalized Jacobi coordinates.
pub type ReducedConfiguration = SquareMatrix;

/// Relative threshold on the rotation normal-equation spectrum below which
/// the zero-angular-momentum correction is considered non-unique.
const RANK_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MassSystem {
    masses: Vec<f64>,
    total: f64,
    g: f64,
    /// `N × (N − 1)`, columns are the basis vectors `E_j` of `L`.
    basis: DMatrix<f64>,
}

impl MassSystem {
    pub fn new(masses: Vec<f64>, g: f64) -> Result<Self> {
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "gravitational constant must be positive, got {g}"
            )));
        }
        let basis = jacobi_basis(&masses)?;
        let total = masses.iter().sum();
        Ok(Self {
            masses,
            total,
            g,
            basis,
        })
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn bodies(&self) -> usize {
        self.masses.len()
    }

    /// Spatial dimension `d = N − 1`.
    pub fn dim(&self) -> usize {
        self.masses.len() - 1
    }

    pub fn total_mass(&self) -> f64 {
        self.total
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn jacobi_basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Mass inner product on label space: `⟨e_a, e_b⟩ = δ_ab / m_a`.
    pub fn label_inner(&self, u: &[f64], w: &[f64]) -> f64 {
        label_inner(&self.masses, u, w)
    }

    fn check_shape(&self, m: &DMatrix<f64>, what: &str) -> Result<()> {
        if m.nrows() != self.dim() || m.ncols() != self.bodies() {
            return Err(Error::Dimension(format!(
                "{what} is {}x{}, mass system expects {}x{}",
                m.nrows(),
                m.ncols(),
                self.dim(),
                self.bodies()
            )));
        }
        Ok(())
    }
}

fn label_inner(masses: &[f64], u: &[f64], w: &[f64]) -> f64 {
    masses
        .iter()
        .zip(u.iter().zip(w))
        .map(|(m, (a, b))| a * b / m)
        .sum()
}

macro_rules! body_matrix {
    ($(#[$doc:meta])* $name:ident, $what:literal) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(DMatrix<f64>);

        impl $name {
            pub fn new(m: DMatrix<f64>) -> Result<Self> {
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite($what));
                }
                Ok(Self(m))
            }

            /// One vector per body.
            pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
                let d = cols.first().map_or(0, Vec::len);
                if cols.iter().any(|c| c.len() != d) {
                    return Err(Error::Dimension(format!("ragged {} columns", $what)));
                }
                Self::new(DMatrix::from_fn(d, cols.len(), |i, a| cols[a][i]))
            }

            pub fn zeros(d: usize, n: usize) -> Self {
                Self(DMatrix::zeros(d, n))
            }

            pub fn dim(&self) -> usize {
                self.0.nrows()
            }

            pub fn bodies(&self) -> usize {
                self.0.ncols()
            }

            pub fn matrix(&self) -> &DMatrix<f64> {
                &self.0
            }

            pub fn into_matrix(self) -> DMatrix<f64> {
                self.0
            }

            pub fn body(&self, a: usize) -> Vec<f64> {
                self.0.column(a).iter().copied().collect()
            }

            /// Column-major flat copy (body after body).
            pub fn to_flat(&self) -> Vec<f64> {
                self.0.as_slice().to_vec()
            }

            pub fn from_flat(d: usize, n: usize, flat: &[f64]) -> Result<Self> {
                if flat.len() != d * n {
                    return Err(Error::Dimension(format!(
                        "{} values for a {d}x{n} {}",
                        flat.len(),
                        $what
                    )));
                }
                Self::new(DMatrix::from_column_slice(d, n, flat))
            }
        }
    };
}

body_matrix!(
    /// Positions as a `d × N` matrix, one column per body.
    FullConfiguration,
    "configuration"
);
body_matrix!(
    /// Velocities as a `d × N` matrix, one column per body.
    FullVelocity,
    "velocity"
);

impl FullConfiguration {
    /// `r_ab = |q_a − q_b|`.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        (self.0.column(a) - self.0.column(b)).norm()
    }

    /// Pairwise distances over `a < b`, in lexicographic pair order.
    pub fn pair_distances(&self) -> Vec<f64> {
        let n = self.bodies();
        let mut out = Vec::with_capacity(n * (n - 1) / 2);
        for a in 0..n {
            for b in a + 1..n {
                out.push(self.distance(a, b));
            }
        }
        out
    }

    pub fn translated(&self, b: &[f64]) -> Self {
        let mut m = self.0.clone();
        for mut col in m.column_iter_mut() {
            for (x, db) in col.iter_mut().zip(b) {
                *x += db;
            }
        }
        Self(m)
    }
}

/// Angular momentum `J = Σ m_a q_a ∧ v_a` as a skew-symmetric `d × d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularMomentum(DMatrix<f64>);

impl AngularMomentum {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Norm over the independent components `J_ij`, `i < j`; for `d = 3`
    /// this is the length of the angular momentum vector.
    pub fn norm(&self) -> f64 {
        let d = self.0.nrows();
        let mut s = 0.0;
        for i in 0..d {
            for j in i + 1..d {
                s += self.0[(i, j)] * self.0[(i, j)];
            }
        }
        s.sqrt()
    }

    /// The usual pseudo-vector `(J_23, J_31, J_12)` in three dimensions.
    pub fn as_vector3(&self) -> Option<[f64; 3]> {
        (self.0.nrows() == 3).then(|| [self.0[(1, 2)], self.0[(2, 0)], self.0[(0, 1)]])
    }
}

/// Mass-orthonormal, zero-sum, oriented basis of `L ⊂ ℝᴺ`, returned as the
/// columns of an `N × (N − 1)` matrix.
///
/// `N = 4` uses the pairwise scheme `(1,−1,0,0)`, `(0,0,1,−1)`,
/// `(−p₁,−p₂,p₃,p₄)`; other powers of two nest pairs of pairs the same way;
/// every other `N` uses sequential Jacobi vectors (each new body against the
/// center of mass of the previous ones). The basis is oriented when
/// `det[E₁ … E_{N−1}, m⃗] > 0`; otherwise the last vector is negated.
pub fn jacobi_basis(masses: &[f64]) -> Result<DMatrix<f64>> {
    let n = masses.len();
    if n < 2 {
        return Err(Error::Dimension(format!("need at least 2 bodies, got {n}")));
    }
    for (index, &value) in masses.iter().enumerate() {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidMass { index, value });
        }
    }

    let raw = if n.is_power_of_two() {
        pairwise_vectors(masses)
    } else {
        sequential_vectors(masses)
    };

    let mut basis = DMatrix::zeros(n, n - 1);
    for (j, u) in raw.iter().enumerate() {
        let norm = label_inner(masses, u, u).sqrt();
        for a in 0..n {
            basis[(a, j)] = u[a] / norm;
        }
    }

    let mut frame = DMatrix::zeros(n, n);
    frame.view_mut((0, 0), (n, n - 1)).copy_from(&basis);
    for a in 0..n {
        frame[(a, n - 1)] = masses[a];
    }
    if frame.determinant() < 0.0 {
        basis.column_mut(n - 2).neg_mut();
    }
    Ok(basis)
}

fn pairwise_vectors(masses: &[f64]) -> Vec<Vec<f64>> {
    let n = masses.len();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|a| vec![a]).collect();
    let mut out = Vec::with_capacity(n - 1);
    while clusters.len() > 1 {
        let mut next = Vec::with_capacity(clusters.len() / 2);
        for pair in clusters.chunks(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let mut u = vec![0.0; n];
            if a.len() == 1 {
                u[a[0]] = 1.0;
                u[b[0]] = -1.0;
            } else {
                let ma: f64 = a.iter().map(|&i| masses[i]).sum();
                let mb: f64 = b.iter().map(|&i| masses[i]).sum();
                for &i in a {
                    u[i] = -masses[i] / ma;
                }
                for &i in b {
                    u[i] = masses[i] / mb;
                }
            }
            out.push(u);
            next.push(a.iter().chain(b).copied().collect());
        }
        clusters = next;
    }
    out
}

fn sequential_vectors(masses: &[f64]) -> Vec<Vec<f64>> {
    let n = masses.len();
    let mut out = Vec::with_capacity(n - 1);
    let mut first = vec![0.0; n];
    first[0] = 1.0;
    first[1] = -1.0;
    out.push(first);
    let mut acc = masses[0] + masses[1];
    for k in 2..n {
        let mut u = vec![0.0; n];
        for a in 0..k {
            u[a] = -masses[a] / acc;
        }
        u[k] = 1.0;
        out.push(u);
        acc += masses[k];
    }
    out
}

/// Translation reduction: column `j` is `q(E_j) = Σ_a E_j[a] q_a`.
pub fn reduce(q: &FullConfiguration, m: &MassSystem) -> Result<ReducedConfiguration> {
    m.check_shape(q.matrix(), "configuration")?;
    SquareMatrix::new(q.matrix() * &m.basis)
}

/// Same linear map applied to velocities.
pub fn reduce_velocity(v: &FullVelocity, m: &MassSystem) -> Result<SquareMatrix> {
    m.check_shape(v.matrix(), "velocity")?;
    SquareMatrix::new(v.matrix() * &m.basis)
}

/// The center-of-mass-zero configuration whose reduction is `r`.
pub fn embed(r: &ReducedConfiguration, m: &MassSystem) -> Result<FullConfiguration> {
    if r.dim() != m.dim() {
        return Err(Error::Dimension(format!(
            "reduced matrix is {0}x{0}, mass system has d = {1}",
            r.dim(),
            m.dim()
        )));
    }
    // q_a = Σ_j r_j E_j[a] / m_a
    let mut lift = m.basis.transpose();
    for (a, mut col) in lift.column_iter_mut().enumerate() {
        col /= m.masses[a];
    }
    FullConfiguration::new(r.as_matrix() * lift)
}

pub fn center_of_mass(q: &FullConfiguration, m: &MassSystem) -> Vec<f64> {
    weighted_sum(q.matrix(), m.masses())
        .into_iter()
        .map(|x| x / m.total_mass())
        .collect()
}

/// `P = Σ m_a v_a`.
pub fn linear_momentum(v: &FullVelocity, m: &MassSystem) -> Vec<f64> {
    weighted_sum(v.matrix(), m.masses())
}

fn weighted_sum(x: &DMatrix<f64>, masses: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.nrows()];
    for (col, &ma) in x.column_iter().zip(masses) {
        for (o, c) in out.iter_mut().zip(col.iter()) {
            *o += ma * c;
        }
    }
    out
}

/// `Σ m_a |x_a|²`.
pub fn mass_norm_sq(x: &DMatrix<f64>, m: &MassSystem) -> f64 {
    x.column_iter()
        .zip(m.masses())
        .map(|(c, ma)| ma * c.norm_squared())
        .sum()
}

/// `K = ½ Σ m_a |v_a|²`.
pub fn kinetic_energy(v: &FullVelocity, m: &MassSystem) -> f64 {
    0.5 * mass_norm_sq(v.matrix(), m)
}

pub fn angular_momentum(
    q: &FullConfiguration,
    v: &FullVelocity,
    m: &MassSystem,
) -> AngularMomentum {
    AngularMomentum(wedge_sum(q.matrix(), v.matrix(), m.masses()))
}

fn wedge_sum(q: &DMatrix<f64>, v: &DMatrix<f64>, masses: &[f64]) -> DMatrix<f64> {
    let d = q.nrows();
    let mut j = DMatrix::zeros(d, d);
    for (a, &ma) in masses.iter().enumerate() {
        for i in 0..d {
            for k in i + 1..d {
                let w = ma * (q[(i, a)] * v[(k, a)] - q[(k, a)] * v[(i, a)]);
                j[(i, k)] += w;
                j[(k, i)] -= w;
            }
        }
    }
    j
}

/// Result of the lenient zero-angular-momentum projection.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedVelocity {
    pub velocity: FullVelocity,
    /// The rotation correction was not unique; the minimum-norm one was used.
    pub rank_deficient: bool,
}

/// Removes the rigid-rotation component of `v`.
///
/// Returns `v − ξ*(q − q_cm)` where the skew matrix `ξ*` solves
/// `J(q − q_cm, ξ*(q − q_cm)) = J(q, v)`. For centered configurations these
/// are the normal equations of `min ‖v − ξq‖_mass`. The result has zero
/// angular momentum and the same linear momentum as `v`.
pub fn zero_am_projection(
    q: &FullConfiguration,
    v: &FullVelocity,
    m: &MassSystem,
) -> Result<FullVelocity> {
    let p = project(q, v, m)?;
    if p.rank_deficient {
        return Err(Error::RankDeficient {
            needed: m.dim().saturating_sub(1),
        });
    }
    Ok(p.velocity)
}

/// Like [`zero_am_projection`] but accepts rank-deficient configurations,
/// using the minimum-norm rotation and flagging the result.
pub fn zero_am_projection_lenient(
    q: &FullConfiguration,
    v: &FullVelocity,
    m: &MassSystem,
) -> Result<ProjectedVelocity> {
    project(q, v, m)
}

fn project(q: &FullConfiguration, v: &FullVelocity, m: &MassSystem) -> Result<ProjectedVelocity> {
    m.check_shape(q.matrix(), "configuration")?;
    m.check_shape(v.matrix(), "velocity")?;
    let d = m.dim();
    let cm = center_of_mass(q, m);
    let mut centered = q.matrix().clone();
    for mut col in centered.column_iter_mut() {
        for (x, c) in col.iter_mut().zip(&cm) {
            *x -= c;
        }
    }

    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|i| (i + 1..d).map(move |k| (i, k)))
        .collect();
    let k = pairs.len();
    if k == 0 {
        return Ok(ProjectedVelocity {
            velocity: v.clone(),
            rank_deficient: false,
        });
    }

    let mut normal = DMatrix::zeros(k, k);
    for (col, &(i, l)) in pairs.iter().enumerate() {
        let mut xi = DMatrix::zeros(d, d);
        xi[(i, l)] = 1.0;
        xi[(l, i)] = -1.0;
        let j = wedge_sum(&centered, &(&xi * &centered), m.masses());
        for (row, &(r, s)) in pairs.iter().enumerate() {
            normal[(row, col)] = j[(r, s)];
        }
    }
    let target = wedge_sum(q.matrix(), v.matrix(), m.masses());
    let rhs = nalgebra::DVector::from_iterator(k, pairs.iter().map(|&(r, s)| target[(r, s)]));

    let svd = normal.svd(true, true);
    let smax = svd.singular_values.max();
    let rank_deficient = smax == 0.0 || svd.singular_values.min() <= RANK_REL_TOL * smax;
    let coeffs = svd
        .solve(&rhs, RANK_REL_TOL * smax)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let mut xi = DMatrix::zeros(d, d);
    for (c, &(i, l)) in coeffs.iter().zip(&pairs) {
        xi[(i, l)] = *c;
        xi[(l, i)] = -*c;
    }
    let velocity = FullVelocity::new(v.matrix() - xi * centered)?;
    Ok(ProjectedVelocity {
        velocity,
        rank_deficient,
    })
}
