//! Square-matrix primitives: pseudo-SVD, signed distance to `{det = 0}` and
//! the singular-locus margin.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Relative threshold below which `|S|` is reported as exactly degenerate.
pub const ON_SIGMA_REL_TOL: f64 = 1e-13;

/// A `d × d` real matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix(DMatrix<f64>);

impl SquareMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(Self(m))
    }

    /// Row-major construction.
    pub fn from_rows(d: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != d * d {
            return Err(Error::Dimension(format!(
                "{} entries cannot fill a {d}x{d} matrix",
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(d, d, entries))
    }

    pub fn from_diagonal(x: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(x)))
    }

    pub fn identity(d: usize) -> Self {
        Self(DMatrix::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Frobenius norm, the mass-metric norm in normalized Jacobi coordinates.
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }
}

/// `q = g1 · diag(x) · g2ᵗ` with `g1, g2 ∈ SO(d)` and
/// `x₁ ≥ … ≥ x_{d−1} ≥ |x_d|`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoSvd {
    pub g1: DMatrix<f64>,
    pub x: Vec<f64>,
    pub g2: DMatrix<f64>,
}

impl PseudoSvd {
    /// Signed distance, the last signed principal value.
    pub fn signed_distance(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    /// `x_{d−1} − |x_d|`; zero on the locus where `S` is not smooth.
    pub fn margin(&self) -> f64 {
        let d = self.x.len();
        if d < 2 {
            return f64::INFINITY;
        }
        self.x[d - 2] - self.x[d - 1].abs()
    }

    /// Product of the signed principal values, equal to `det q`.
    pub fn determinant(&self) -> f64 {
        self.x.iter().product()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let x = DMatrix::from_diagonal(&DVector::from_column_slice(&self.x));
        &self.g1 * x * self.g2.transpose()
    }
}

/// Pseudo-singular value decomposition.
///
/// A standard SVD is post-processed: whenever one of the orthogonal factors
/// has determinant `−1`, its last column and `x_d` change sign. The diagonal
/// is unique; the rotations are not when principal values repeat.
pub fn pseudo_svd(q: &SquareMatrix) -> PseudoSvd {
    let d = q.dim();
    let (u, sigma, v) = polished_svd(&q.0);

    let mut g1 = u;
    let mut g2 = v;
    let mut x = sigma;
    for g in [&mut g1, &mut g2] {
        if g.determinant() < 0.0 {
            let mut last = g.column_mut(d - 1);
            last.neg_mut();
            x[d - 1] = -x[d - 1];
        }
    }
    PseudoSvd { g1, x, g2 }
}

const JACOBI_MAX_SWEEPS: usize = 16;

/// nalgebra's SVD followed by one-sided Jacobi sweeps on `q·v`, with `u`
/// taken from a QR factorisation of the orthogonalised columns.
fn polished_svd(q: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let d = q.nrows();
    let mut v = q.clone().svd(false, true).v_t.expect("svd computed with v_t").transpose();
    let mut a = q * &v;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..d {
            for j in i + 1..d {
                let alpha = a.column(i).norm_squared();
                let beta = a.column(j).norm_squared();
                let gamma = a.column(i).dot(&a.column(j));
                if gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for m in [&mut a, &mut v] {
                    for r in 0..d {
                        let (xi, xj) = (m[(r, i)], m[(r, j)]);
                        m[(r, i)] = c * xi - s * xj;
                        m[(r, j)] = s * xi + c * xj;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..d).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let a = DMatrix::from_fn(d, d, |r, c| a[(r, order[c])]);
    let v = DMatrix::from_fn(d, d, |r, c| v[(r, order[c])]);

    let qr = a.qr();
    let mut u = qr.q();
    let rr = qr.r();
    let mut sigma = Vec::with_capacity(d);
    for j in 0..d {
        if rr[(j, j)] < 0.0 {
            u.column_mut(j).neg_mut();
        }
        sigma.push(rr[(j, j)].abs());
    }
    (u, sigma, v)
}

/// Signed Frobenius distance from `q` to `{det = 0}`, signed by `det q`.
pub fn signed_distance(q: &SquareMatrix) -> f64 {
    pseudo_svd(q).signed_distance()
}

/// `x_{d−1} − |x_d| ≥ 0`, zero exactly on the singular locus of `S`.
pub fn singular_margin(q: &SquareMatrix) -> f64 {
    pseudo_svd(q).margin()
}

/// Whether `|S| < 1e-13 ‖q‖`, i.e. the matrix is degenerate up to rounding.
pub fn is_on_sigma(q: &SquareMatrix) -> bool {
    signed_distance(q).abs() < ON_SIGMA_REL_TOL * q.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut impl Rng, d: usize) -> SquareMatrix {
        SquareMatrix::new(DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0))).unwrap()
    }

    fn random_rotation(rng: &mut impl Rng) -> DMatrix<f64> {
        let axis = nalgebra::Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let r = Rotation3::new(axis * rng.gen_range(0.0..3.0));
        DMatrix::from_iterator(3, 3, r.matrix().iter().copied())
    }

    fn assert_normal_form(q: &SquareMatrix, p: &PseudoSvd) {
        let d = q.dim();
        let eye = DMatrix::<f64>::identity(d, d);
        assert!((p.g1.transpose() * &p.g1 - &eye).norm() < 1e-12);
        assert!((p.g2.transpose() * &p.g2 - &eye).norm() < 1e-12);
        assert!((p.g1.determinant() - 1.0).abs() < 1e-12);
        assert!((p.g2.determinant() - 1.0).abs() < 1e-12);
        for i in 0..d.saturating_sub(2) {
            assert!(p.x[i] >= p.x[i + 1]);
        }
        if d >= 2 {
            assert!(p.x[d - 2] >= p.x[d - 1].abs());
        }
        let err = (p.reconstruct() - q.as_matrix()).norm() / q.norm().max(f64::MIN_POSITIVE);
        assert!(err <= 1e-12, "reconstruction error {err}");
    }

    #[test]
    fn diagonal_already_in_normal_form() {
        let q = SquareMatrix::from_diagonal(&[2.0, 1.0, 0.5]).unwrap();
        let p = pseudo_svd(&q);
        assert_eq!(p.x, vec![2.0, 1.0, 0.5]);
        assert_normal_form(&q, &p);
    }

    #[test]
    fn orientation_reversing_diagonal_moves_sign_to_last_entry() {
        let q = SquareMatrix::from_diagonal(&[-1.0, 1.0, 1.0]).unwrap();
        let p = pseudo_svd(&q);
        for (a, b) in p.x.iter().zip([1.0, 1.0, -1.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_normal_form(&q, &p);

        // the particular factorization g1 = I, g2 = diag(-1, 1, -1) is one valid choice
        let g2 = DMatrix::from_diagonal(&DVector::from_column_slice(&[-1.0, 1.0, -1.0]));
        let alt = PseudoSvd {
            g1: DMatrix::identity(3, 3),
            x: vec![1.0, 1.0, -1.0],
            g2,
        };
        assert_eq!(alt.reconstruct(), *q.as_matrix());
        assert!((alt.g2.determinant() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_matrices_satisfy_normal_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let q = random_matrix(&mut rng, 3);
            let p = pseudo_svd(&q);
            assert_normal_form(&q, &p);
            assert_eq!(p.x[2].signum(), q.determinant().signum());
        }
    }

    #[test]
    fn signed_distance_examples() {
        assert_eq!(signed_distance(&SquareMatrix::identity(3)), 1.0);
        let on_sigma = SquareMatrix::from_diagonal(&[3.0, 2.0, 0.0]).unwrap();
        assert_eq!(signed_distance(&on_sigma), 0.0);
        assert!(is_on_sigma(&on_sigma));
        let q = SquareMatrix::from_diagonal(&[3.0, 2.5, 0.25]).unwrap();
        assert!((signed_distance(&q) - 0.25).abs() < 1e-15);
        let q = SquareMatrix::from_diagonal(&[0.5, -3.0, 2.0]).unwrap();
        assert!((signed_distance(&q) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn margin_examples() {
        assert!(singular_margin(&SquareMatrix::identity(3)).abs() < 1e-15);
        let q = SquareMatrix::from_diagonal(&[2.0, 1.0, 0.5]).unwrap();
        assert!((singular_margin(&q) - 0.5).abs() < 1e-15);
        let q = SquareMatrix::from_diagonal(&[2.0, 1.0, -1.0]).unwrap();
        assert!(singular_margin(&q).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_finite_and_non_square() {
        assert!(matches!(
            SquareMatrix::from_rows(2, &[1.0, f64::NAN, 0.0, 1.0]),
            Err(Error::NonFinite(_))
        ));
        assert!(SquareMatrix::new(DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn repeated_calls_are_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = random_matrix(&mut rng, 4);
        assert_eq!(pseudo_svd(&q).x, pseudo_svd(&q).x);
    }

    #[test]
    fn bi_rotation_invariance_and_reflection() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let reflect = DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 1.0, -1.0]));
        for _ in 0..100 {
            let q = random_matrix(&mut rng, 3);
            let (g1, g2) = (random_rotation(&mut rng), random_rotation(&mut rng));
            let s = signed_distance(&q);
            let moved = SquareMatrix::new(&g1 * q.as_matrix() * g2.transpose()).unwrap();
            assert!((signed_distance(&moved) - s).abs() < 1e-12);
            let r = &random_rotation(&mut rng) * &reflect;
            let flipped = SquareMatrix::new(&r * q.as_matrix()).unwrap();
            assert!((signed_distance(&flipped) + s).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn lipschitz_and_scaling(
            a in proptest::collection::vec(-1.0f64..1.0, 9),
            b in proptest::collection::vec(-1.0f64..1.0, 9),
            lambda in 0.01f64..100.0,
        ) {
            let qa = SquareMatrix::from_rows(3, &a).unwrap();
            let qb = SquareMatrix::from_rows(3, &b).unwrap();
            let dist = (qa.as_matrix() - qb.as_matrix()).norm();
            prop_assert!((signed_distance(&qa) - signed_distance(&qb)).abs() <= dist + 1e-9);
            let scaled = SquareMatrix::new(qa.as_matrix() * lambda).unwrap();
            let expect = lambda * signed_distance(&qa);
            prop_assert!((signed_distance(&scaled) - expect).abs() <= 1e-12 * lambda.max(1.0));
        }
    }
}
