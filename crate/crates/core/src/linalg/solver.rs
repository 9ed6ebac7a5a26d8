use std::time::Instant;

use crate::error::{Error, Result};

use super::ilu::NoPreconditioner;
use super::{gmres, CsrMatrix, Ilu0, Jacobi, LuFactors, Preconditioner, PreconditionerKind, SolveReport, SolverOptions};

/// Factor by which the restart length grows when GMRES stalls.
pub const RESTART_GROWTH: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SolverKind {
    #[default]
    Gmres,
    DenseLu,
}

enum Backend {
    Dense(LuFactors),
    Krylov(Box<dyn Preconditioner>),
}

/// A matrix together with its factorisation or preconditioner, reusable
/// across right-hand sides.
pub struct PreparedSolver {
    matrix: CsrMatrix,
    backend: Backend,
    opts: SolverOptions,
}

impl PreparedSolver {
    pub fn new(matrix: CsrMatrix, opts: SolverOptions) -> Result<Self> {
        let backend = match opts.kind {
            SolverKind::DenseLu => {
                if matrix.nrows() > opts.dense_cap {
                    return Err(Error::InvalidArgument(format!(
                        "dense LU requested for n = {} above the cap {}",
                        matrix.nrows(),
                        opts.dense_cap
                    )));
                }
                Backend::Dense(LuFactors::new(&matrix.to_dense())?)
            }
            SolverKind::Gmres => Backend::Krylov(match opts.preconditioner {
                PreconditionerKind::None => Box::new(NoPreconditioner),
                PreconditionerKind::Jacobi => Box::new(Jacobi::new(&matrix)?),
                PreconditionerKind::Ilu0 => Box::new(Ilu0::new(&matrix)?),
            }),
        };
        Ok(Self { matrix, backend, opts })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        self.solve_with_guess(b, None)
    }

    /// Solves with an optional initial guess; non-convergence is an error.
    pub fn solve_with_guess(&self, b: &[f64], x0: Option<&[f64]>) -> Result<(Vec<f64>, SolveReport)> {
        match &self.backend {
            Backend::Dense(lu) => {
                let start = Instant::now();
                let x = lu.solve(b);
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NotFinite("dense LU solution"));
                }
                let mut r = self.matrix.mul_vec(&x);
                for (ri, bi) in r.iter_mut().zip(b) {
                    *ri -= bi;
                }
                let bn = super::norm2(b);
                let residual = if bn > 0.0 { super::norm2(&r) / bn } else { 0.0 };
                Ok((x, SolveReport { iterations: 1, residual, converged: true, wall_time: start.elapsed().as_secs_f64() }))
            }
            Backend::Krylov(pc) => {
                let o = &self.opts;
                let (mut x, mut rep) = gmres(&self.matrix, b, x0, o.tol, o.restart, o.max_iter, pc.as_ref())?;
                let n = self.matrix.nrows();
                if !rep.converged && o.restart < n {
                    // Restarted GMRES can stagnate; continue from the iterate with a longer cycle.
                    let longer = (RESTART_GROWTH * o.restart).min(n);
                    log::warn!(
                        "GMRES({}) stalled at residual {:.2e} after {} iterations; retrying with restart {longer}",
                        o.restart,
                        rep.residual,
                        rep.iterations
                    );
                    let (x2, rep2) = gmres(&self.matrix, b, Some(&x), o.tol, longer, o.max_iter, pc.as_ref())?;
                    x = x2;
                    rep = SolveReport {
                        iterations: rep.iterations + rep2.iterations,
                        wall_time: rep.wall_time + rep2.wall_time,
                        ..rep2
                    };
                }
                if !rep.converged {
                    return Err(Error::NoConvergence(rep));
                }
                Ok((x, rep))
            }
        }
    }
}
