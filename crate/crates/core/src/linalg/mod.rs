//! Dense Hermitian linear algebra for the small matrices (n ≤ 16) that
//! appear as pencil coefficients, boundary data and frame blocks.
//!
//! Everything here is a pure function of its inputs. The eigensolver is a
//! cyclic complex Jacobi iteration, which is accurate to a few ulps of the
//! matrix norm at these sizes and needs nothing beyond matrix storage.

mod det;
mod jacobi;
mod matfun;

pub use det::det_complex;
pub use jacobi::herm_eig;
pub use matfun::{
    cauchy_det_check, loewner, matfun_derivative, Identity, LoewnerData, Power, ScalarFunction, Sqrt,
    NODE_TOL,
};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

/// Asymmetry allowed when accepting a matrix as Hermitian (relative to max(1, max |entry|)).
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Smallest eigenvalue a matrix must exceed to count as positive definite.
pub const PD_TOL: f64 = 1e-10;
/// Default threshold below which an eigenvalue is treated as zero.
pub const ZERO_TOL: f64 = 1e-8;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// A square complex matrix equal to its conjugate transpose.
///
/// The stored entries are exactly Hermitian: construction symmetrizes the
/// input after checking that its asymmetry is within [`HERMITIAN_TOL`].
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    m: CMat,
}

impl HermitianMatrix {
    pub fn new(m: CMat) -> Result<Self> {
        Self::with_tol(m, HERMITIAN_TOL)
    }

    pub fn with_tol(m: CMat, tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "Hermitian matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let asym = asymmetry(&m);
        let scale = m.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
        if !(asym <= tol * scale) {
            return Err(Error::NotHermitian { asymmetry: asym, tol: tol * scale });
        }
        Ok(Self::symmetrized(&m))
    }

    /// Hermitian part (M + M*)/2, with no tolerance check.
    pub fn symmetrized(m: &CMat) -> Self {
        let h = (m + m.adjoint()) * c(0.5);
        Self { m: h }
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let mut m = CMat::zeros(n, n);
        for (j, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension(format!("row {j} has length {}, expected {n}", row.len())));
            }
            for (k, &v) in row.iter().enumerate() {
                m[(j, k)] = c(v);
            }
        }
        Self::new(m)
    }

    pub fn scalar(v: f64) -> Self {
        Self { m: CMat::from_element(1, 1, c(v)) }
    }

    pub fn identity(n: usize) -> Self {
        Self { m: CMat::identity(n, n) }
    }

    pub fn zeros(n: usize) -> Self {
        Self { m: CMat::zeros(n, n) }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = CMat::zeros(n, n);
        for (j, &v) in d.iter().enumerate() {
            m[(j, j)] = c(v);
        }
        Self { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    pub fn into_matrix(self) -> CMat {
        self.m
    }

    pub fn get(&self, j: usize, k: usize) -> C64 {
        self.m[(j, k)]
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { m: &self.m * c(s) }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { m: &self.m + &other.m }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { m: &self.m - &other.m }
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        Self { m: &self.m + &other.m * c(s) }
    }

    /// Spectral norm, i.e. the largest eigenvalue magnitude.
    pub fn norm(&self) -> f64 {
        match herm_eig(self) {
            Ok(e) => e.values.iter().fold(0.0_f64, |a, v| a.max(v.abs())),
            Err(_) => self.m.norm(),
        }
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(herm_eig(self)?.values[0])
    }
}

fn asymmetry(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for k in j..n {
            worst = worst.max((m[(j, k)] - m[(k, j)].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues (ascending) and unitary eigenvector matrix of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl EigenDecomposition {
    /// `V · diag(g(values)) · V*`
    pub fn reconstruct_with(&self, g: impl Fn(f64) -> f64) -> CMat {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for k in 0..n {
            let s = c(g(self.values[k]));
            for j in 0..n {
                scaled[(j, k)] *= s;
            }
        }
        scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMat {
        self.reconstruct_with(|v| v)
    }
}

/// Principal square root of a positive definite Hermitian matrix.
pub fn sqrt_pd(h: &HermitianMatrix) -> Result<HermitianMatrix> {
    let e = herm_eig(h)?;
    if e.values[0] <= PD_TOL {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: e.values[0] });
    }
    Ok(HermitianMatrix::symmetrized(&e.reconstruct_with(f64::sqrt)))
}

/// Inertia split: `(#eigenvalues < -zero_tol, #|eigenvalue| <= zero_tol)`.
pub fn morse_index(h: &HermitianMatrix, zero_tol: f64) -> Result<(usize, usize)> {
    let e = herm_eig(h)?;
    let neg = e.values.iter().filter(|&&v| v < -zero_tol).count();
    let zero = e.values.iter().filter(|&&v| v.abs() <= zero_tol).count();
    Ok((neg, zero))
}

/// Smallest singular value of an arbitrary complex matrix.
pub fn min_singular_value(m: &CMat) -> Result<f64> {
    let gram = HermitianMatrix::symmetrized(&(m.adjoint() * m));
    let e = herm_eig(&gram)?;
    Ok(e.values[0].max(0.0).sqrt())
}

/// Largest singular value of an arbitrary complex matrix.
pub fn max_singular_value(m: &CMat) -> Result<f64> {
    let gram = HermitianMatrix::symmetrized(&(m.adjoint() * m));
    let e = herm_eig(&gram)?;
    Ok(e.values.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// Solve `a · x = b` with partial-pivoting LU. `None` when `a` is singular.
pub fn solve(a: &CMat, b: &CMat) -> Option<CMat> {
    a.clone().lu().solve(b)
}

/// `a · b⁻¹` computed as the transpose of a left solve.
pub fn right_divide(a: &CMat, b: &CMat) -> Option<CMat> {
    let bt = b.adjoint();
    let at = a.adjoint();
    solve(&bt, &at).map(|x| x.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn herm(rows: &[&[f64]]) -> HermitianMatrix {
        HermitianMatrix::from_real_rows(rows).unwrap()
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = CMat::identity(2, 2);
        m[(0, 1)] = c(1.0);
        assert!(matches!(HermitianMatrix::new(m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn sqrt_of_scaled_identity_and_scalar() {
        let r = sqrt_pd(&HermitianMatrix::identity(3).scale(4.0)).unwrap();
        assert!((r.matrix() - CMat::identity(3, 3) * c(2.0)).norm() < 1e-14);
        let s = sqrt_pd(&HermitianMatrix::scalar(9.0)).unwrap();
        assert!((s.get(0, 0) - c(3.0)).norm() < 1e-14);
    }

    #[test]
    fn sqrt_squares_back() {
        let h = herm(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let r = sqrt_pd(&h).unwrap();
        let sq = r.matrix() * r.matrix();
        assert!((sq - h.matrix()).norm() < 1e-12);
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let h = HermitianMatrix::diagonal(&[1.0, -1e-3]);
        assert!(matches!(sqrt_pd(&h), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn morse_index_examples() {
        // √(-V₋) - c for the scalar half-line example: 1 - 18.
        assert_eq!(morse_index(&HermitianMatrix::scalar(1.0 - 18.0), ZERO_TOL).unwrap(), (1, 0));
        // I - [[18,2],[2,25]] for the coupled half-line example.
        let m = HermitianMatrix::identity(2).sub(&herm(&[&[18.0, 2.0], &[2.0, 25.0]]));
        assert_eq!(morse_index(&m, ZERO_TOL).unwrap(), (2, 0));
        assert_eq!(morse_index(&HermitianMatrix::zeros(3), ZERO_TOL).unwrap(), (0, 3));
    }

    #[test]
    fn morse_ties_count_as_zero() {
        let m = HermitianMatrix::diagonal(&[-1e-9, 2.0, -3.0]);
        assert_eq!(morse_index(&m, ZERO_TOL).unwrap(), (1, 1));
    }

    #[test]
    fn singular_values() {
        let m = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(3.0), C64::new(0.0, -0.5)]));
        assert!((min_singular_value(&m).unwrap() - 0.5).abs() < 1e-14);
        assert!((max_singular_value(&m).unwrap() - 3.0).abs() < 1e-14);
    }
}
