//! Sparse storage, Krylov and direct solvers, and the small dense kernels
//! used for element eigenproblems.

mod csr;
mod dense;
mod eigen;
mod gmres;
mod ilu;
mod mm;
mod solver;

pub use csr::CsrMatrix;
pub use dense::{
    cholesky, dense_lu_solve, eigen_largest_generalized, eigen_smallest_generalized,
    generalized_eigenvalues, symmetric_eigenvalues, DenseMatrix, LuFactors,
};
pub use eigen::{sparse_largest_generalized, sparse_smallest_generalized};
pub use gmres::gmres;
pub use ilu::{Ilu0, Jacobi, NoPreconditioner, Preconditioner};
pub use mm::{read_matrix_market, write_matrix_market};
pub use solver::{PreparedSolver, SolverKind, RESTART_GROWTH};

/// Outcome of an iterative solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final relative residual ‖b − Ax‖/‖b‖.
    pub residual: f64,
    pub converged: bool,
    /// Wall time in seconds.
    pub wall_time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PreconditionerKind {
    None,
    Jacobi,
    #[default]
    Ilu0,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
    pub preconditioner: PreconditionerKind,
    pub kind: SolverKind,
    /// Largest system handed to dense LU.
    pub dense_cap: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            restart: 60,
            max_iter: 5000,
            preconditioner: PreconditionerKind::Ilu0,
            kind: SolverKind::Gmres,
            dense_cap: 3000,
        }
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
