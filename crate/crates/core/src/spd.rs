//! Symmetric positive-definite matrices.

use std::sync::OnceLock;

use rand::Rng;

use crate::error::{input, Error, Result};
use crate::linalg::{cholesky, dot, invert_lower, solve_lower, solve_lower_transpose, sym_eigen, Matrix};
use crate::real::Real;

/// Ordered spectral decomposition `m = V diag(values) Vᵀ`.
///
/// Eigenvalues are descending (stable sort, so ties keep Jacobi order) and
/// each eigenvector column has its first nonzero entry positive.
#[derive(Debug, Clone)]
pub struct Spectral<T> {
    pub values: Vec<T>,
    pub vectors: Matrix<T>,
}

/// A covariance matrix with a cached Cholesky factor and lazily computed
/// ordered spectrum.
///
/// The Cholesky factor is computed on construction, so every value of this
/// type is positive definite in the sense that the factorization succeeded.
#[derive(Debug, Clone)]
pub struct SpdMatrix<T> {
    mat: Matrix<T>,
    chol: Matrix<T>,
    spectral: OnceLock<Option<Spectral<T>>>,
}

impl<T: PartialEq> PartialEq for SpdMatrix<T> {
    fn eq(&self, other: &Self) -> bool {
        self.mat == other.mat
    }
}

impl<T: Real> SpdMatrix<T> {
    /// Row-major `dim × dim` entries.
    pub fn new(dim: usize, entries: Vec<T>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(input(format!("expected {dim}x{dim} entries, got {}", entries.len())));
        }
        Self::from_matrix(Matrix::from_vec(dim, dim, entries))
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let m = Matrix::from_rows(rows).ok_or_else(|| input("ragged or empty matrix rows"))?;
        Self::from_matrix(m)
    }

    /// Validates symmetry (averaging away tiny asymmetry) and positive definiteness.
    pub fn from_matrix(mut m: Matrix<T>) -> Result<Self> {
        let n = m.rows();
        if n == 0 || m.cols() != n {
            return Err(input(format!("matrix is {}x{}, not square", m.rows(), m.cols())));
        }
        if !m.is_finite() {
            return Err(Error::Domain("matrix has non-finite entries".into()));
        }
        let scale = m.max_abs();
        let mut asym = T::zero();
        for i in 0..n {
            for j in 0..i {
                asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        if asym > T::tol() * scale {
            return Err(Error::Domain(format!("matrix asymmetry {asym} exceeds tolerance")));
        }
        if asym > T::zero() {
            let half = T::of(0.5);
            for i in 0..n {
                for j in 0..i {
                    let s = half * (m[(i, j)] + m[(j, i)]);
                    m[(i, j)] = s;
                    m[(j, i)] = s;
                }
            }
        }
        let chol = cholesky(&m).ok_or_else(|| Error::Domain("matrix is not positive definite".into()))?;
        Ok(SpdMatrix { mat: m, chol, spectral: OnceLock::new() })
    }

    /// `L Lᵀ` for a lower-triangular `L` with positive diagonal.
    pub fn from_cholesky(l: &Matrix<T>) -> Result<Self> {
        Self::from_matrix(l.gram_rows())
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, T::one())
    }

    pub fn scaled_identity(dim: usize, s: T) -> Self {
        Self::diagonal(&vec![s; dim]).expect("positive scaled identity")
    }

    pub fn diagonal(diag: &[T]) -> Result<Self> {
        Self::from_matrix(Matrix::from_diag(diag))
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.mat
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        self.mat[(i, j)]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.mat.to_rows()
    }

    /// Lower Cholesky factor.
    pub fn cholesky(&self) -> &Matrix<T> {
        &self.chol
    }

    pub fn log_det(&self) -> T {
        let two = T::of(2.0);
        (0..self.dim()).map(|i| two * self.chol[(i, i)].ln()).sum()
    }

    /// `m⁻¹ b` through the Cholesky factor.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        solve_lower_transpose(&self.chol, &solve_lower(&self.chol, b))
    }

    /// `vᵀ m⁻¹ v`.
    pub fn mahalanobis_sq(&self, v: &[T]) -> T {
        let z = solve_lower(&self.chol, v);
        dot(&z, &z)
    }

    pub fn inverse(&self) -> Result<Self> {
        let li = invert_lower(&self.chol);
        Self::from_matrix(li.gram_cols())
    }

    pub fn trace(&self) -> T {
        self.mat.trace()
    }

    /// `L z` with `z` standard normal: a centered draw with this covariance.
    pub fn sample_centered<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let z: Vec<T> = (0..self.dim()).map(|_| T::sample_std_normal(rng)).collect();
        self.chol.matvec(&z)
    }

    pub fn spectral(&self) -> Result<&Spectral<T>> {
        self.spectral
            .get_or_init(|| compute_spectral(&self.mat))
            .as_ref()
            .ok_or_else(|| Error::Domain("eigendecomposition produced a non-positive eigenvalue".into()))
    }

    /// λ₁ ≥ … ≥ λ_d > 0.
    pub fn ordered_eigvals(&self) -> Result<&[T]> {
        Ok(&self.spectral()?.values)
    }

    pub fn lambda_max(&self) -> Result<T> {
        Ok(self.ordered_eigvals()?[0])
    }

    pub fn lambda_min(&self) -> Result<T> {
        Ok(*self.ordered_eigvals()?.last().expect("dim >= 1"))
    }

    /// λ₁/λ_d; identical for the matrix and its inverse.
    pub fn condition_number(&self) -> Result<T> {
        Ok(self.lambda_max()? / self.lambda_min()?)
    }

    pub fn cast<U: Real>(&self) -> Result<SpdMatrix<U>> {
        SpdMatrix::from_matrix(self.mat.cast())
    }
}

fn compute_spectral<T: Real>(m: &Matrix<T>) -> Option<Spectral<T>> {
    let n = m.rows();
    let (vals, vecs) = sym_eigen(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap_or(std::cmp::Ordering::Equal));
    let values: Vec<T> = order.iter().map(|&i| vals[i]).collect();
    if values.iter().any(|&v| !(v > T::zero())) {
        return None;
    }
    let mut vectors = Matrix::zeros(n, n);
    for (c, &src) in order.iter().enumerate() {
        let col = vecs.col(src);
        let tiny = T::epsilon() * T::of(8.0);
        let first = col.iter().copied().find(|v| v.abs() > tiny).unwrap_or(T::one());
        let sign = if first < T::zero() { -T::one() } else { T::one() };
        for (r, &v) in col.iter().enumerate() {
            vectors[(r, c)] = sign * v;
        }
    }
    Some(Spectral { values, vectors })
}

/// Descending eigenvalues.
pub fn ordered_eigvals<T: Real>(m: &SpdMatrix<T>) -> Result<Vec<T>> {
    m.ordered_eigvals().map(|v| v.to_vec())
}

pub fn condition_number<T: Real>(m: &SpdMatrix<T>) -> Result<T> {
    m.condition_number()
}

/// ½(tr(Σ₁⁻¹Σ₂) − log det(Σ₁⁻¹Σ₂) − d) = KL(N(0,Σ₂) ‖ N(0,Σ₁)).
pub fn kl_zero_mean<T: Real>(s1: &SpdMatrix<T>, s2: &SpdMatrix<T>) -> Result<T> {
    let d = s1.dim();
    if s2.dim() != d {
        return Err(input(format!("dimension mismatch: {} vs {}", d, s2.dim())));
    }
    if s1 == s2 {
        return Ok(T::zero());
    }
    // tr(Σ₁⁻¹Σ₂) = ‖L₁⁻¹ L₂‖²_F
    let li = invert_lower(s1.cholesky());
    let prod = li.matmul(s2.cholesky());
    let tr = prod.as_slice().iter().map(|&a| a * a).sum::<T>();
    let logdet = s2.log_det() - s1.log_det();
    let v = T::of(0.5) * (tr - logdet - T::of(d as f64));
    Ok(v.max(T::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(rows: &[&[f64]]) -> SpdMatrix<f64> {
        SpdMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn eigvals_examples() {
        assert_eq!(SpdMatrix::<f64>::identity(3).ordered_eigvals().unwrap(), &[1.0, 1.0, 1.0]);
        let d = SpdMatrix::diagonal(&[1.0, 4.0]).unwrap();
        assert_eq!(d.ordered_eigvals().unwrap(), &[4.0, 1.0]);
        let m = spd(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let ev = m.ordered_eigvals().unwrap();
        assert!((ev[0] - 3.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn condition_examples() {
        assert_eq!(SpdMatrix::<f64>::identity(4).condition_number().unwrap(), 1.0);
        assert_eq!(SpdMatrix::diagonal(&[4.0, 1.0]).unwrap().condition_number().unwrap(), 4.0);
        let c = spd(&[&[2.0, 1.0], &[1.0, 2.0]]).condition_number().unwrap();
        assert!((c - 3.0).abs() < 1e-13);
    }

    #[test]
    fn kl_examples() {
        let one = SpdMatrix::<f64>::identity(1);
        let two = SpdMatrix::scaled_identity(1, 2.0);
        let k = kl_zero_mean(&one, &two).unwrap();
        assert!((k - 0.5 * (2.0 - 2f64.ln() - 1.0)).abs() < 1e-15);
        assert!((k - 0.153426).abs() < 1e-6);
        let i2 = SpdMatrix::<f64>::identity(2);
        let d = SpdMatrix::diagonal(&[2.0, 0.5]).unwrap();
        assert!((kl_zero_mean(&i2, &d).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(kl_zero_mean(&d, &d).unwrap(), 0.0);
        assert!(kl_zero_mean(&i2, &one).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(SpdMatrix::<f64>::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]), Err(Error::Domain(_))));
        assert!(matches!(SpdMatrix::<f64>::from_rows(&[vec![1.0, 0.1], vec![0.2, 1.0]]), Err(Error::Domain(_))));
        assert!(SpdMatrix::<f64>::new(2, vec![1.0; 3]).is_err());
        // asymmetry at machine precision is averaged away
        let m = SpdMatrix::<f64>::from_rows(&[vec![1.0, 0.5], vec![0.5 + 1e-15, 1.0]]).unwrap();
        assert_eq!(m.entry(0, 1), m.entry(1, 0));
    }

    #[test]
    fn sign_convention_and_reconstruction() {
        let m = spd(&[&[3.0, -1.0, 0.5], &[-1.0, 2.0, 0.2], &[0.5, 0.2, 1.0]]);
        let s = m.spectral().unwrap();
        for c in 0..3 {
            let col = s.vectors.col(c);
            assert!(col.iter().find(|v| v.abs() > 1e-12).unwrap() > &0.0);
        }
        let back = s.vectors.matmul(&Matrix::from_diag(&s.values)).matmul(&s.vectors.transpose());
        assert!(back.sub(m.matrix()).max_abs() < 1e-12);
    }

    #[test]
    fn inverse_and_solve() {
        let m = spd(&[&[4.0, 1.0], &[1.0, 3.0]]);
        let inv = m.inverse().unwrap();
        let prod = m.matrix().matmul(inv.matrix());
        assert!(prod.sub(&Matrix::identity(2)).max_abs() < 1e-14);
        let x = m.solve(&[1.0, 2.0]);
        let b = m.matrix().matvec(&x);
        assert!((b[0] - 1.0).abs() < 1e-14 && (b[1] - 2.0).abs() < 1e-14);
        assert!((m.log_det() - 11f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn single_precision() {
        let m = SpdMatrix::<f32>::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert!((m.condition_number().unwrap() - 3.0).abs() < 1e-5);
    }
}
