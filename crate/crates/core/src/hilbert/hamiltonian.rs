use super::operator::max_abs;
use super::sector::number_commutator;
use super::{CMatrix, HilbertSpace, Sector, ZERO};
use crate::{Error, Result};
use num_complex::Complex64;
use std::fmt;
use std::sync::Arc;

/// A time-dependent Hamiltonian in rad/ns.
pub trait Hamiltonian: Send + Sync {
    fn dim(&self) -> usize;

    /// Overwrites `out` with H(t).
    fn write(&self, t: f64, out: &mut CMatrix);

    /// Constant real diagonal contained in H(t), which the integrator may
    /// handle exactly instead of stepping it.
    fn static_diagonal(&self) -> Option<&[f64]> {
        None
    }

    fn sample(&self, t: f64) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim(), self.dim());
        self.write(t, &mut m);
        m
    }
}

/// Closure-backed Hamiltonian.
pub struct FnHamiltonian<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64, &mut CMatrix) + Send + Sync> FnHamiltonian<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(f64, &mut CMatrix) + Send + Sync> Hamiltonian for FnHamiltonian<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn write(&self, t: f64, out: &mut CMatrix) {
        (self.f)(t, out)
    }
}

/// Coordinate-list matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    dim: usize,
    entries: Vec<(usize, usize, Complex64)>,
}

impl SparseOp {
    pub fn from_dense(m: &CMatrix, tol: f64) -> Self {
        let mut entries = Vec::new();
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                if m[(r, c)].norm() > tol {
                    entries.push((r, c, m[(r, c)]));
                }
            }
        }
        Self { dim: m.nrows(), entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize, Complex64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    /// `out += coeff * self`, and also `+ h.c.` when `with_adjoint`.
    #[inline]
    pub fn add_scaled(&self, coeff: Complex64, with_adjoint: bool, out: &mut CMatrix) {
        for &(r, c, v) in &self.entries {
            let z = coeff * v;
            out[(r, c)] += z;
            if with_adjoint {
                out[(c, r)] += z.conj();
            }
        }
    }
}

pub type Coefficient = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// `coefficient(t) * op`, optionally plus its Hermitian conjugate.
#[derive(Clone)]
pub struct ControlTerm {
    pub op: SparseOp,
    pub coefficient: Coefficient,
    pub add_adjoint: bool,
}

impl fmt::Debug for ControlTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlTerm")
            .field("op", &self.op)
            .field("add_adjoint", &self.add_adjoint)
            .finish_non_exhaustive()
    }
}

impl ControlTerm {
    pub fn new(op: &CMatrix, add_adjoint: bool, coefficient: Coefficient) -> Self {
        Self { op: SparseOp::from_dense(op, 0.0), coefficient, add_adjoint }
    }
}

/// Eigenbasis of the Hermitian `h`, with column `k` the eigenvector that
/// overlaps most with basis state `k` and its `k`-th component made real
/// and positive. Labels are assigned greedily by overlap, so near an exact
/// crossing the two partners are labelled arbitrarily.
pub fn dressed_basis(h: &CMatrix) -> Result<CMatrix> {
    let n = h.nrows();
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    let vecs = eig.eigenvectors;
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for e in 0..n {
        for k in 0..n {
            pairs.push((vecs[(k, e)].norm_sqr(), k, e));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut owner = vec![None; n];
    let mut used = vec![false; n];
    for (_, k, e) in pairs {
        if owner[k].is_none() && !used[e] {
            owner[k] = Some(e);
            used[e] = true;
        }
    }
    let mut w = CMatrix::zeros(n, n);
    for (k, e) in owner.into_iter().enumerate() {
        let e = e.expect("every basis state is assigned");
        let lead = vecs[(k, e)];
        let phase = lead.conj() / lead.norm();
        w.set_column(k, &(vecs.column(e) * phase));
    }
    Ok(w)
}

/// Static drift plus a sum of scalar-modulated operators.
#[derive(Debug, Clone)]
pub struct ControlHamiltonian {
    drift: CMatrix,
    diagonal: Vec<f64>,
    controls: Vec<ControlTerm>,
}

impl ControlHamiltonian {
    pub fn new(drift: CMatrix, controls: Vec<ControlTerm>) -> Result<Self> {
        let n = drift.nrows();
        if drift.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: drift.ncols() });
        }
        if let Some(bad) = controls.iter().find(|c| c.op.dim() != n) {
            return Err(Error::DimensionMismatch { expected: n, actual: bad.op.dim() });
        }
        let dev = max_abs(&(&drift - drift.adjoint()));
        if dev > 1e-12 {
            return Err(Error::invalid(format!("drift is not Hermitian (deviation {dev:e})")));
        }
        let diagonal = (0..n).map(|k| drift[(k, k)].re).collect();
        Ok(Self { drift, diagonal, controls })
    }

    pub fn drift(&self) -> &CMatrix {
        &self.drift
    }

    pub fn controls(&self) -> &[ControlTerm] {
        &self.controls
    }

    /// Projects onto an excitation sector. Drift and every control operator
    /// must commute with the total excitation number.
    pub fn restrict(&self, space: &HilbertSpace, sector: &Sector) -> Result<Self> {
        let drift = sector.restrict(space, &self.drift)?;
        let mut controls = Vec::with_capacity(self.controls.len());
        for term in &self.controls {
            let dense = term.op.to_dense();
            let dev = number_commutator(space, &dense);
            if dev > super::sector::CONSERVATION_TOL {
                return Err(Error::NotConserving(dev));
            }
            controls.push(ControlTerm {
                op: SparseOp::from_dense(&sector.project(&dense)?, 0.0),
                coefficient: term.coefficient.clone(),
                add_adjoint: term.add_adjoint,
            });
        }
        Self::new(drift, controls)
    }

    /// Same Hamiltonian written in the basis given by the columns of the
    /// unitary `w`.
    pub fn change_basis(&self, w: &CMatrix) -> Result<Self> {
        let n = self.drift.nrows();
        if w.shape() != (n, n) {
            return Err(Error::DimensionMismatch { expected: n, actual: w.nrows() });
        }
        let wd = w.adjoint();
        let d = &wd * &self.drift * w;
        let drift = (&d + d.adjoint()) * Complex64::new(0.5, 0.0);
        let controls = self
            .controls
            .iter()
            .map(|t| ControlTerm {
                op: SparseOp::from_dense(&(&wd * t.op.to_dense() * w), 1e-14),
                coefficient: t.coefficient.clone(),
                add_adjoint: t.add_adjoint,
            })
            .collect();
        Self::new(drift, controls)
    }

    /// Adds a constant real shift to one diagonal entry.
    pub fn shift_diagonal(&mut self, index: usize, shift: f64) {
        self.drift[(index, index)] += Complex64::new(shift, 0.0);
        self.diagonal[index] += shift;
    }
}

impl Hamiltonian for ControlHamiltonian {
    fn dim(&self) -> usize {
        self.drift.nrows()
    }

    fn write(&self, t: f64, out: &mut CMatrix) {
        out.copy_from(&self.drift);
        for term in &self.controls {
            let c = (term.coefficient)(t);
            if c != ZERO {
                term.op.add_scaled(c, term.add_adjoint, out);
            }
        }
    }

    fn static_diagonal(&self) -> Option<&[f64]> {
        Some(&self.diagonal)
    }
}

#[cfg(test)]
mod tests {

    #[test]
    fn dressed_basis_diagonalizes_and_labels() {
        let h = CMatrix::from_row_slice(
            3,
            3,
            &[
                Complex64::new(1.0, 0.0), Complex64::new(0.05, 0.02), Complex64::new(0.0, 0.0),
                Complex64::new(0.05, -0.02), Complex64::new(0.0, 0.0), Complex64::new(0.03, 0.0),
                Complex64::new(0.0, 0.0), Complex64::new(0.03, 0.0), Complex64::new(-0.7, 0.0),
            ],
        );
        let w = dressed_basis(&h).unwrap();
        let d = w.adjoint() * &h * &w;
        for r in 0..3 {
            assert!(w[(r, r)].re > 0.9 && w[(r, r)].im.abs() < 1e-14);
            for c in 0..3 {
                if r != c {
                    assert!(d[(r, c)].norm() < 1e-12);
                }
            }
        }
        assert!((w.adjoint() * &w - CMatrix::identity(3, 3)).camax() < 1e-12);
        let ham = ControlHamiltonian::new(h.clone(), vec![]).unwrap().change_basis(&w).unwrap();
        assert!(ham.static_diagonal().unwrap().iter().zip([1.0, 0.0, -0.7]).all(|(a, b)| (a - b).abs() < 0.01));
    }
    use super::*;
    use crate::hilbert::{compose_space, SectorKind, ONE};

    #[test]
    fn control_terms_add_with_adjoint() {
        let space = compose_space(&[2, 2]).unwrap();
        let op = space.annihilation(0).unwrap().adjoint() * space.annihilation(1).unwrap();
        let term = ControlTerm::new(&op, true, Arc::new(|t: f64| Complex64::new(0.0, t)));
        let h = ControlHamiltonian::new(CMatrix::zeros(4, 4), vec![term]).unwrap();
        let m = h.sample(2.0);
        assert!(max_abs(&(&m - m.adjoint())) < 1e-15);
        let sector = Sector::new(&space, SectorKind::Exactly(1)).unwrap();
        let r = h.restrict(&space, &sector).unwrap();
        let block = r.sample(2.0);
        assert_eq!(block[(0, 1)], Complex64::new(0.0, 2.0));
        assert_eq!(block[(1, 0)], Complex64::new(0.0, -2.0));
    }

    #[test]
    fn rejects_non_hermitian_drift() {
        let mut d = CMatrix::zeros(2, 2);
        d[(0, 1)] = ONE;
        assert!(ControlHamiltonian::new(d, vec![]).is_err());
    }
}
