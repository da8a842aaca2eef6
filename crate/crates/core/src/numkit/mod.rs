//! Dense matrices, eigen-solvers, linear solves, the seeded generator and
//! Gaussian quadrature.

mod cmat;
mod eig;
mod mat;
pub mod quad;
mod rng;
mod solve;

pub use cmat::CMat;
pub use eig::{sym_eig, sym_eigenvalues, sym_eigenvalues_owned, SymEig, DEFAULT_TOL};
pub use mat::{axpy, dot, norm2, Mat};
pub use num_complex::Complex64;
pub use quad::{gauss_hermite_2d, gauss_polar_2d};
pub use rng::{derive_seed, Rng};
pub use solve::{herm_cholesky, herm_logdet, herm_solve, HERMITIAN_TOL};
