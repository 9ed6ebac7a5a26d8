//! Stabilised finite elements for the Kolmogorov equation
//! u_t − u_xx + x u_y = f on the unit square, with a hypocoercive
//! stabilisation, SUPG and plain Galerkin variants, and dG(q) time stepping.

pub mod basis;
pub mod cases;
pub mod error;
pub mod experiments;
pub mod fespace;
pub mod forms;
pub mod inverse;
pub mod linalg;
pub mod mesh;
pub mod norms;
pub mod projection;
pub mod quadrature;
pub mod stab;
pub mod timeloop;

pub use cases::CaseDefinition;
pub use error::{Error, Result};
pub use experiments::{KRule, RunSettings};
pub use fespace::FESpace;
pub use linalg::{SolveReport, SolverOptions};
pub use mesh::Mesh;
pub use stab::{Method, StabConfig, StabParams};
pub use timeloop::{SpaceTimeSolution, TimePartition};
