//! Upper bounds on second-order Trotter error for diagonal-Coulomb fermionic
//! Hamiltonians.
//!
//! The nested commutators `[[V,T],V]` and `[[V,T],T]` determine the Trotter
//! error norm `W`. Their spectral norms are computed either exactly on a
//! particle-number sector (sparse Lanczos) or bounded from above by the
//! spectral norm of the element-wise absolute value of the matrix, which is
//! free of the sign problem and can be estimated with projector Monte Carlo.

pub mod commutators;
pub mod determinants;
mod error;
pub mod exact_oracle;
pub mod fciqmc;
pub mod fermion_ops;
pub mod hamiltonians;
pub mod stats;
pub mod trotter_bounds;

pub use commutators::{CommutatorEngine, Engine, ExcitationSample, OperatorKind, VttEngine, VtvEngine};
pub use determinants::{enumerate_sector, Determinant};
pub use error::{Error, Result};
pub use exact_oracle::{build_sector_matrix, exact_trotter_error, spectral_norm, Ordering, SectorMatrix};
pub use fciqmc::{run, Mode, RunConfig, RunReport};
pub use fermion_ops::FermionOperator;
pub use hamiltonians::{DiagonalCoulombHamiltonian, SectorSpec, Units};
pub use trotter_bounds::{NormInputs, NormValue, Provenance};
