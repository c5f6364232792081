//! Dense complex linear algebra and quantum dynamics on small spaces.

mod hamiltonian;
mod lindblad;
mod operator;
mod propagate;
mod sector;
mod space;

pub use hamiltonian::{
    dressed_basis,
    Coefficient, ControlHamiltonian, ControlTerm, FnHamiltonian, Hamiltonian, SparseOp,
};
pub use lindblad::{propagate_lindblad, Channel};
pub use operator::{DensityMatrix, Operator, StateVector};
pub use operator::hermitian_sqrt;
pub use propagate::{
    evolve_columns, propagate_state, propagate_unitary, propagate_unitary_with, uniform_grid, FinalState,
    Trajectory, DEFAULT_DT_NS,
};
pub use sector::{number_commutator, restrict_to_sector, Sector, SectorKind};
pub use space::{compose_space, HilbertSpace};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);
