//! Dense symmetric linear algebra: plane rotations, Jacobi eigensolver,
//! Cholesky, symmetric permutation and matrix CSV I/O.

mod cholesky;
mod evd;
mod givens;
mod io;
mod matrix;
mod permutation;

pub use cholesky::{cholesky_solve, Cholesky};
pub use evd::{sym_evd, EvdResult};
pub use givens::{apply_givens_conjugate, GivensRotation, RotationSequence};
pub use io::{read_matrix_csv, write_matrix_csv};
pub(crate) use io::parse_cell;
pub use matrix::{dot, norm, Matrix, SymMatrix};
pub use permutation::{permute_sym, Permutation};
