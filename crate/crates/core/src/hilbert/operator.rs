use super::{CMatrix, CVector, ZERO};
use crate::{Error, Result};
use nalgebra::linalg::SymmetricEigen;
use num_complex::Complex64;

fn all_finite<'a>(mut values: impl Iterator<Item = &'a Complex64>) -> bool {
    values.all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Dense square complex matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator(CMatrix);

impl Operator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), actual: matrix.ncols() });
        }
        if matrix.nrows() == 0 {
            return Err(Error::invalid("operator must have positive dimension"));
        }
        if !all_finite(matrix.iter()) {
            return Err(Error::NonFinite("operator entries".into()));
        }
        Ok(Self(matrix))
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim))
    }

    pub fn from_row_slice(dim: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, actual: entries.len() });
        }
        Self::new(CMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dagger(&self) -> Self {
        Self(self.0.adjoint())
    }

    /// max |H - H^dagger|.
    pub fn hermiticity_deviation(&self) -> f64 {
        max_abs(&(&self.0 - self.0.adjoint()))
    }

    /// max |U^dagger U - I|.
    pub fn unitarity_deviation(&self) -> f64 {
        let n = self.dim();
        max_abs(&(self.0.adjoint() * &self.0 - CMatrix::identity(n, n)))
    }

    /// max |[A, B]|.
    pub fn commutator_norm(&self, other: &CMatrix) -> f64 {
        max_abs(&(&self.0 * other - other * &self.0))
    }

    /// Submatrix on the given basis indices.
    pub fn block(&self, indices: &[usize]) -> CMatrix {
        CMatrix::from_fn(indices.len(), indices.len(), |r, c| self.0[(indices[r], indices[c])])
    }
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Normalized pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(CVector);

impl StateVector {
    /// Normalizes `amplitudes`; fails on a zero or non-finite vector.
    pub fn new(amplitudes: CVector) -> Result<Self> {
        if !all_finite(amplitudes.iter()) {
            return Err(Error::NonFinite("state amplitudes".into()));
        }
        let norm = amplitudes.norm();
        if norm < 1e-300 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        Ok(Self(amplitudes / Complex64::new(norm, 0.0)))
    }

    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::invalid(format!("basis index {index} out of range for dimension {dim}")));
        }
        let mut v = CVector::from_element(dim, ZERO);
        v[index] = Complex64::new(1.0, 0.0);
        Ok(Self(v))
    }

    pub(crate) fn from_raw(amplitudes: CVector) -> Self {
        Self(amplitudes)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn renormalized(&self) -> Result<Self> {
        Self::new(self.0.clone())
    }

    pub fn populations(&self) -> Vec<f64> {
        self.0.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn overlap(&self, other: &StateVector) -> Complex64 {
        self.0.dotc(&other.0)
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix(&self.0 * self.0.adjoint())
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

pub const HERMITICITY_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const EIGEN_TOL: f64 = 1e-10;

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        Self::with_tolerances(matrix, HERMITICITY_TOL, TRACE_TOL, EIGEN_TOL)
    }

    /// Validation with caller-chosen tolerances, for states that went through
    /// long numerical propagation.
    pub fn with_tolerances(matrix: CMatrix, herm_tol: f64, trace_tol: f64, eig_tol: f64) -> Result<Self> {
        let op = Operator::new(matrix)?;
        let dev = op.hermiticity_deviation();
        if dev > herm_tol {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {dev:e})")));
        }
        let trace = op.0.trace();
        if (trace.re - 1.0).abs() > trace_tol || trace.im.abs() > trace_tol {
            return Err(Error::InvalidState(format!("trace {trace} differs from 1")));
        }
        let m = op.into_matrix();
        let min_eig = min_eigenvalue(&m);
        if min_eig < -eig_tol {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(Self(m))
    }

    pub(crate) fn from_raw(matrix: CMatrix) -> Self {
        Self(matrix)
    }

    pub fn from_pure(state: &StateVector) -> Self {
        state.to_density()
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.0[(k, k)].re).collect()
    }

    /// Principal square root with eigenvalues clipped at zero.
    pub fn sqrt(&self) -> CMatrix {
        hermitian_sqrt(&self.0)
    }
}

pub(crate) fn hermitian_parts(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

pub(crate) fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_parts(m).0.into_iter().fold(f64::INFINITY, f64::min)
}

/// Square root of a Hermitian PSD matrix. Eigenvalues at round-off level
/// (below `1e-15` of the largest) are treated as zero.
pub fn hermitian_sqrt(m: &CMatrix) -> CMatrix {
    let (vals, vecs) = hermitian_parts(m);
    let n = vals.len();
    let cutoff = 1e-15 * vals.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let mut scaled = vecs.clone();
    for (c, &v) in vals.iter().enumerate() {
        let s = Complex64::new(if v > cutoff { v.sqrt() } else { 0.0 }, 0.0);
        for r in 0..n {
            scaled[(r, c)] *= s;
        }
    }
    &scaled * vecs.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::ONE;

    #[test]
    fn operator_rejects_non_square_and_nan() {
        assert!(Operator::new(CMatrix::zeros(2, 3)).is_err());
        let mut m = CMatrix::identity(2, 2);
        m[(0, 1)] = Complex64::new(f64::NAN, 0.0);
        assert!(Operator::new(m).is_err());
    }

    #[test]
    fn state_is_normalized() {
        let v = CVector::from_vec(vec![Complex64::new(3.0, 0.0), Complex64::new(0.0, 4.0)]);
        let s = StateVector::new(v).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-12);
        assert!((s.populations()[0] - 0.36).abs() < 1e-12);
        assert!(StateVector::new(CVector::zeros(2)).is_err());
    }

    #[test]
    fn density_validation() {
        let rho = CMatrix::from_row_slice(2, 2, &[ONE * 0.5, ONE * 0.5, ONE * 0.5, ONE * 0.5]);
        assert!(DensityMatrix::new(rho).is_ok());
        let bad_trace = CMatrix::identity(2, 2);
        assert!(DensityMatrix::new(bad_trace).is_err());
        let negative = CMatrix::from_row_slice(2, 2, &[ONE * 1.5, ZERO, ZERO, ONE * -0.5]);
        assert!(DensityMatrix::new(negative).is_err());
    }

    #[test]
    fn sqrt_squares_back() {
        let rho = CMatrix::from_row_slice(
            2,
            2,
            &[ONE * 0.7, Complex64::new(0.1, 0.2), Complex64::new(0.1, -0.2), ONE * 0.3],
        );
        let s = hermitian_sqrt(&rho);
        assert!(max_abs(&(&s * &s - &rho)) < 1e-12);
    }
}
