use super::operator::max_abs;
use super::{CMatrix, CVector, HilbertSpace};
use crate::{Error, Result};

/// Which excitation numbers a sector keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SectorKind {
    Exactly(usize),
    AtMost(usize),
}

impl SectorKind {
    fn contains(self, n: usize) -> bool {
        match self {
            SectorKind::Exactly(m) => n == m,
            SectorKind::AtMost(m) => n <= m,
        }
    }
}

/// Subspace of basis states with a fixed (or bounded) excitation count.
///
/// Basis order: excitation count ascending, then full-space index
/// descending, so with one excitation the first subsystem comes first.
#[derive(Debug, Clone, PartialEq)]
pub struct Sector {
    kind: SectorKind,
    indices: Vec<usize>,
    excitations: Vec<usize>,
    full_dim: usize,
}

pub const CONSERVATION_TOL: f64 = 1e-9;

impl Sector {
    pub fn new(space: &HilbertSpace, kind: SectorKind) -> Result<Self> {
        let mut indices: Vec<(usize, usize)> = (0..space.dim())
            .map(|k| (space.excitations(k), k))
            .filter(|&(n, _)| kind.contains(n))
            .collect();
        if indices.is_empty() {
            return Err(Error::invalid(format!("sector {kind:?} is empty")));
        }
        indices.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        Ok(Self {
            kind,
            excitations: indices.iter().map(|p| p.0).collect(),
            indices: indices.into_iter().map(|p| p.1).collect(),
            full_dim: space.dim(),
        })
    }

    pub fn kind(&self) -> SectorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn full_dim(&self) -> usize {
        self.full_dim
    }

    /// Full-space index of each sector basis state.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn excitations(&self) -> &[usize] {
        &self.excitations
    }

    /// Sector position of a full-space index.
    pub fn position(&self, full_index: usize) -> Option<usize> {
        self.indices.iter().position(|&k| k == full_index)
    }

    /// Projects a full-space operator without checking conservation.
    pub fn project(&self, m: &CMatrix) -> Result<CMatrix> {
        self.check_dim(m.nrows())?;
        Ok(CMatrix::from_fn(self.dim(), self.dim(), |r, c| m[(self.indices[r], self.indices[c])]))
    }

    /// Projects an operator that must commute with the total excitation number.
    pub fn restrict(&self, space: &HilbertSpace, m: &CMatrix) -> Result<CMatrix> {
        self.check_dim(m.nrows())?;
        let dev = number_commutator(space, m);
        if dev > CONSERVATION_TOL {
            return Err(Error::NotConserving(dev));
        }
        self.project(m)
    }

    pub fn project_vector(&self, v: &CVector) -> Result<CVector> {
        self.check_dim(v.len())?;
        Ok(CVector::from_iterator(self.dim(), self.indices.iter().map(|&k| v[k])))
    }

    pub fn embed_vector(&self, v: &CVector) -> Result<CVector> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: v.len() });
        }
        let mut out = CVector::zeros(self.full_dim);
        for (&k, &a) in self.indices.iter().zip(v.iter()) {
            out[k] = a;
        }
        Ok(out)
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.full_dim {
            return Err(Error::DimensionMismatch { expected: self.full_dim, actual: n });
        }
        Ok(())
    }
}

/// max |[H, N]| with N the total excitation number.
pub fn number_commutator(space: &HilbertSpace, m: &CMatrix) -> f64 {
    let n: Vec<f64> = (0..space.dim()).map(|k| space.excitations(k) as f64).collect();
    let comm = CMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] * (n[c] - n[r]));
    max_abs(&comm)
}

/// Builds the sector and projects `h` onto it after a conservation check.
pub fn restrict_to_sector(space: &HilbertSpace, h: &CMatrix, kind: SectorKind) -> Result<(Sector, CMatrix)> {
    let sector = Sector::new(space, kind)?;
    let block = sector.restrict(space, h)?;
    Ok((sector, block))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::compose_space;

    #[test]
    fn sector_sizes() {
        let space = compose_space(&[2; 7]).unwrap();
        assert_eq!(Sector::new(&space, SectorKind::Exactly(0)).unwrap().dim(), 1);
        assert_eq!(Sector::new(&space, SectorKind::Exactly(1)).unwrap().dim(), 7);
        assert_eq!(Sector::new(&space, SectorKind::AtMost(1)).unwrap().dim(), 8);
        let qutrits = compose_space(&[3, 3, 2, 2, 2, 2, 2]).unwrap();
        assert_eq!(Sector::new(&qutrits, SectorKind::Exactly(1)).unwrap().dim(), 7);
        assert_eq!(Sector::new(&qutrits, SectorKind::Exactly(2)).unwrap().dim(), 2 + 21);
    }

    #[test]
    fn single_excitation_order_follows_subsystems() {
        let space = compose_space(&[2, 2, 2]).unwrap();
        let s = Sector::new(&space, SectorKind::Exactly(1)).unwrap();
        let expected: Vec<usize> = (0..3).map(|k| space.excited(k, 1).unwrap()).collect();
        assert_eq!(s.indices(), expected.as_slice());
        let at_most = Sector::new(&space, SectorKind::AtMost(1)).unwrap();
        assert_eq!(at_most.indices()[0], 0);
    }

    #[test]
    fn non_conserving_operator_is_rejected() {
        let space = compose_space(&[2, 2]).unwrap();
        let a = space.annihilation(0).unwrap();
        let x = &a + a.adjoint();
        assert!(matches!(restrict_to_sector(&space, &x, SectorKind::Exactly(1)), Err(Error::NotConserving(_))));
        let exchange = a.adjoint() * space.annihilation(1).unwrap();
        let h = &exchange + exchange.adjoint();
        let (_, block) = restrict_to_sector(&space, &h, SectorKind::Exactly(1)).unwrap();
        assert_eq!(block.nrows(), 2);
        assert!((block[(0, 1)].re - 1.0).abs() < 1e-15);
    }
}
