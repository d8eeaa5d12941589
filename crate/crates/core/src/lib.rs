//! Exact diagonalization of an impurity embedded in a spin-polarized
//! Fermi-Hubbard bath, level-statistics diagnostics of quantum chaos, and
//! per-eigenstate tests of whether the impurity's reduced density matrix is
//! a Gibbs state.

// Links the system OpenBLAS that provides LAPACK.
extern crate openblas_src;

pub mod eigen;
pub mod error;
pub mod experiment;
pub mod fit;
pub mod model;
pub mod output;
pub mod rdm;
pub mod spectral;
pub mod thermo;

pub use error::{Error, Result};
