//! Dense matrix kernels.

mod eig;
mod equations;
mod expm;
mod linsolve;
mod matrix;
mod quadrature;

pub use eig::{min_sym_eig, symmetric_eigenvalues};
pub use equations::{
    ensure_stable, lyapunov_residual, solve_lyapunov, solve_sylvester, sylvester_residual,
    STABILITY_THRESHOLD,
};
pub use expm::expm;
pub use linsolve::{dense_solve, Lu, CONDITION_WARN_RATIO, SINGULAR_PIVOT_RATIO};
pub use matrix::{Matrix, Tensor3};
pub use quadrature::{gauss_legendre, lyapunov_by_quadrature, sylvester_by_quadrature, GAUSS_ORDER, MAX_PANELS};
