use crate::linalg::SolveReport;

/// Errors raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("element {0} is degenerate")]
    DegenerateElement(usize),

    #[error("facet {0} does not exist")]
    InvalidFacet(usize),

    #[error("derivative order ({0}, {1}) exceeds the supported total order 3")]
    DerivativeOrder(usize, usize),

    #[error("quadrature of degree {have} cannot integrate the forms exactly (need {need})")]
    QuadratureDegree { have: usize, need: usize },

    #[error("matrix is not symmetric positive definite")]
    NotSpd,

    #[error("matrix is singular to working precision")]
    Singular,

    #[error("non-finite value encountered in {0}")]
    NotFinite(&'static str),

    #[error("linear solver failed to converge ({} iterations, relative residual {:.3e})", .0.iterations, .0.residual)]
    NoConvergence(SolveReport),

    #[error("stabilisation constant C_delta vanishes on element {0}")]
    VanishingCdelta(usize),

    #[error("the space has no inflow-constrained degrees of freedom")]
    NoInflow,

    #[error("case `{case}` cannot be evaluated at t = {t}")]
    TimeOutOfRange { case: String, t: f64 },

    #[error("case `{0}` has no exact solution")]
    NoExactSolution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
