//! L₂ and A-orthogonal projections onto the finite element space.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::fespace::FESpace;
use crate::forms::{assemble_a_mass, load_vector};
use crate::linalg::{CsrMatrix, PreparedSolver, SolverOptions};
use crate::stab::StabParams;

/// Treatment of the inflow-constrained dofs.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum InflowMode {
    /// Orthogonality against the whole space; no constraint.
    #[default]
    Unconstrained,
    /// Constrained dofs take the given values (ordered as
    /// [`FESpace::constrained_dofs`]); orthogonality against the free test functions.
    Values(Vec<f64>),
    /// Constrained dofs vanish.
    Zero,
}

/// Field sampler returning (u, ∂ₓu, ∂ᵧu) at a physical point.
pub type FieldFn<'a> = dyn Fn(f64, f64) -> Result<[f64; 3]> + Sync + 'a;

/// A projection with its Gram matrix and lazily prepared solvers.
pub struct Projector<'a> {
    space: &'a FESpace,
    weights: Option<StabParams>,
    gram: CsrMatrix,
    opts: SolverOptions,
    full: OnceLock<PreparedSolver>,
    free: OnceLock<PreparedSolver>,
}

impl<'a> Projector<'a> {
    pub fn l2(space: &'a FESpace, opts: SolverOptions) -> Self {
        Self::build(space, None, opts)
    }

    pub fn a(space: &'a FESpace, stab: &StabParams, opts: SolverOptions) -> Self {
        Self::build(space, Some(stab.clone()), opts)
    }

    fn build(space: &'a FESpace, weights: Option<StabParams>, opts: SolverOptions) -> Self {
        let gram = assemble_a_mass(space, weights.as_ref());
        Self { space, weights, gram, opts, full: OnceLock::new(), free: OnceLock::new() }
    }

    /// The Gram matrix of the inner product.
    pub fn gram(&self) -> &CsrMatrix {
        &self.gram
    }

    /// Load vector ⟨u, φ_i⟩ of the projection's inner product.
    pub fn load(&self, u: &FieldFn<'_>) -> Result<Vec<f64>> {
        load_vector(self.space, self.weights.as_ref(), u)
    }

    pub fn project(&self, u: &FieldFn<'_>, mode: &InflowMode) -> Result<Vec<f64>> {
        let b = self.load(u)?;
        self.solve_load(&b, mode)
    }

    /// Projection given its load vector.
    pub fn solve_load(&self, b: &[f64], mode: &InflowMode) -> Result<Vec<f64>> {
        let values = match mode {
            InflowMode::Unconstrained => {
                let s = self.prepared(&self.full, false)?;
                return Ok(s.solve(b)?.0);
            }
            InflowMode::Values(v) => v.clone(),
            InflowMode::Zero => vec![0.0; self.space.constrained_dofs().len()],
        };
        let cons = self.space.constrained_dofs();
        let free = self.space.free_dofs();
        if values.len() != cons.len() {
            return Err(Error::InvalidArgument(format!(
                "{} inflow values given for {} constrained dofs",
                values.len(),
                cons.len()
            )));
        }
        let mut x = vec![0.0; self.space.n_dofs()];
        for (&c, v) in cons.iter().zip(&values) {
            x[c] = *v;
        }
        // b_f − G_fc x_c
        let gx = self.gram.mul_vec(&x);
        let rhs: Vec<f64> = free.iter().map(|&f| b[f] - gx[f]).collect();
        let s = self.prepared(&self.free, true)?;
        let xf = s.solve(&rhs)?.0;
        for (&f, v) in free.iter().zip(xf) {
            x[f] = v;
        }
        Ok(x)
    }

    fn prepared<'s>(&'s self, cell: &'s OnceLock<PreparedSolver>, restrict: bool) -> Result<&'s PreparedSolver> {
        if let Some(s) = cell.get() {
            return Ok(s);
        }
        let m = if restrict {
            let free = self.space.free_dofs();
            self.gram.submatrix(free, free)
        } else {
            self.gram.clone()
        };
        let s = PreparedSolver::new(m, self.opts)?;
        Ok(cell.get_or_init(|| s))
    }
}

/// Default options for projection solves (Gram matrices are well conditioned).
pub fn projection_options() -> SolverOptions {
    SolverOptions { tol: 1e-14, ..Default::default() }
}

/// L₂ projection π.
pub fn l2_project(space: &FESpace, u: &FieldFn<'_>, mode: &InflowMode) -> Result<Vec<f64>> {
    Projector::l2(space, projection_options()).project(u, mode)
}

/// A-orthogonal projection π̂.
pub fn a_project(space: &FESpace, stab: &StabParams, u: &FieldFn<'_>, mode: &InflowMode) -> Result<Vec<f64>> {
    Projector::a(space, stab, projection_options()).project(u, mode)
}
