//! Dense tensors, matrices and the multilinear algebra the factor model needs.

mod dense;
mod eigen;
mod matrix;

pub use dense::{frobenius_norm, DenseTensor};
pub use eigen::{symmetric_eigen, top_eigenvectors, SYMMETRY_TOLERANCE};
pub use matrix::{kron, kron_all, Matrix};
