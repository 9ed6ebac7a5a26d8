//! Manufactured solutions and problem data for the model experiments.

pub mod jet;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::forms::ProblemData;

pub use jet::Jet;

/// Partial derivatives of a solution at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Derivs {
    pub u: f64,
    pub u_t: f64,
    pub u_x: f64,
    pub u_y: f64,
    pub u_xx: f64,
    pub u_xy: f64,
    pub u_yy: f64,
    pub u_xxx: f64,
    pub u_xxy: f64,
    pub u_xyy: f64,
    pub u_yyy: f64,
    pub u_tx: f64,
    pub u_ty: f64,
}

impl Derivs {
    pub fn from_jet(j: &Jet) -> Self {
        let d = j.derivatives();
        Self {
            u: d[0],
            u_x: d[1],
            u_y: d[2],
            u_xx: d[3],
            u_xy: d[4],
            u_yy: d[5],
            u_xxx: d[6],
            u_xxy: d[7],
            u_xyy: d[8],
            u_yyy: d[9],
            u_t: d[10],
            u_tx: d[11],
            u_ty: d[12],
        }
    }

    /// f = u_t − u_xx + x u_y and its gradient
    /// (u_tx − u_xxx + u_y + x u_xy, u_ty − u_xxy + x u_yy).
    pub fn source(&self, x: f64) -> [f64; 3] {
        [
            self.u_t - self.u_xx + x * self.u_y,
            self.u_tx - self.u_xxx + self.u_y + x * self.u_xy,
            self.u_ty - self.u_xxy + x * self.u_yy,
        ]
    }
}

/// Jet evaluator u(t, x, y).
pub type JetFn = Arc<dyn Fn(Jet, Jet, Jet) -> Jet + Send + Sync>;
/// Initial datum returning (u₀, ∂ₓu₀, ∂ᵧu₀).
pub type InitialFn = Arc<dyn Fn(f64, f64) -> [f64; 3] + Send + Sync>;

#[derive(Clone)]
enum Kind {
    /// Exact solution known; f and g follow from it.
    Manufactured(JetFn),
    /// f ≡ 0, g ≡ 0, only an initial datum.
    Homogeneous(InitialFn),
}

#[derive(Clone)]
pub struct CaseDefinition {
    name: String,
    t_f: f64,
    /// Evaluation is rejected for t ≥ this bound.
    t_limit: Option<f64>,
    time_dependent: bool,
    kind: Kind,
}

impl fmt::Debug for CaseDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CaseDefinition").field("name", &self.name).field("t_f", &self.t_f).finish()
    }
}

impl CaseDefinition {
    pub fn manufactured(name: &str, t_f: f64, t_limit: Option<f64>, time_dependent: bool, u: JetFn) -> Self {
        Self { name: name.into(), t_f, t_limit, time_dependent, kind: Kind::Manufactured(u) }
    }

    pub fn homogeneous(name: &str, t_f: f64, u0: InitialFn) -> Self {
        Self { name: name.into(), t_f, t_limit: None, time_dependent: true, kind: Kind::Homogeneous(u0) }
    }

    /// u = sin²(πx) sin(πy), time independent, on (0, 1].
    pub fn stationary() -> Self {
        Self::manufactured(
            "stationary",
            1.0,
            None,
            false,
            Arc::new(|_t, x, y| (PI * x).sin().sqr() * (PI * y).sin()),
        )
    }

    /// u = exp(−(x−½)² − (y−½)²) sin²(πx) sin(π(y − t − ½))/(2 − t) + 1 on (0, 1].
    pub fn instationary() -> Self {
        Self::manufactured(
            "instationary",
            1.0,
            Some(2.0),
            true,
            Arc::new(|t, x, y| {
                let g = (-((x - 0.5).sqr() + (y - 0.5).sqr())).exp();
                let s = (PI * x).sin().sqr();
                let w = (PI * (y - t - 0.5)).sin();
                g * s * w / (2.0 - t) + 1.0
            }),
        )
    }

    /// f = 0, g = 0, hat initial datum max(0, min(1 − |x−½|, 1 − |y−½|)) on (0, 8].
    pub fn decay() -> Self {
        Self::homogeneous(
            "decay",
            8.0,
            Arc::new(|x, y| {
                let (dx, dy) = (x - 0.5, y - 0.5);
                let v = (1.0 - dx.abs()).min(1.0 - dy.abs()).max(0.0);
                if v == 0.0 {
                    return [0.0; 3];
                }
                if dx.abs() > dy.abs() {
                    [v, -dx.signum(), 0.0]
                } else {
                    [v, 0.0, -dy.signum()]
                }
            }),
        )
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "stationary" => Ok(Self::stationary()),
            "instationary" => Ok(Self::instationary()),
            "decay" => Ok(Self::decay()),
            _ => Err(Error::InvalidArgument(format!("unknown case `{name}`"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn t_f(&self) -> f64 {
        self.t_f
    }

    pub fn time_dependent(&self) -> bool {
        self.time_dependent
    }

    pub fn has_exact(&self) -> bool {
        matches!(self.kind, Kind::Manufactured(_))
    }

    fn check_time(&self, t: f64) -> Result<()> {
        match self.t_limit {
            Some(l) if t >= l || !t.is_finite() => Err(Error::TimeOutOfRange { case: self.name.clone(), t }),
            _ => Ok(()),
        }
    }

    /// Derivatives of the exact solution.
    pub fn jet_eval(&self, t: f64, x: f64, y: f64) -> Result<Derivs> {
        self.check_time(t)?;
        match &self.kind {
            Kind::Manufactured(u) => {
                let d = Derivs::from_jet(&u(Jet::var_t(t), Jet::var_x(x), Jet::var_y(y)));
                if !d.u.is_finite() {
                    return Err(Error::TimeOutOfRange { case: self.name.clone(), t });
                }
                Ok(d)
            }
            Kind::Homogeneous(_) => Err(Error::NoExactSolution(self.name.clone())),
        }
    }

    /// (u₀, ∂ₓu₀, ∂ᵧu₀).
    pub fn initial(&self, x: f64, y: f64) -> Result<[f64; 3]> {
        match &self.kind {
            Kind::Manufactured(_) => {
                let d = self.jet_eval(0.0, x, y)?;
                Ok([d.u, d.u_x, d.u_y])
            }
            Kind::Homogeneous(u0) => Ok(u0(x, y)),
        }
    }
}

impl ProblemData for CaseDefinition {
    fn source(&self, t: f64, x: f64, y: f64) -> Result<[f64; 3]> {
        match self.kind {
            Kind::Manufactured(_) => Ok(self.jet_eval(t, x, y)?.source(x)),
            Kind::Homogeneous(_) => Ok([0.0; 3]),
        }
    }

    fn source_is_zero(&self) -> bool {
        matches!(self.kind, Kind::Homogeneous(_))
    }

    fn source_is_steady(&self) -> bool {
        !self.time_dependent
    }

    fn inflow(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        match self.kind {
            Kind::Manufactured(_) => Ok(self.jet_eval(t, x, y)?.u),
            Kind::Homogeneous(_) => Ok(0.0),
        }
    }
}
