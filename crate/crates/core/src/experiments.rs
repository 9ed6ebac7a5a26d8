//! Drivers for convergence studies, decay runs and single solves.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use crate::cases::CaseDefinition;
use crate::error::{Error, Result};
use crate::fespace::FESpace;
use crate::forms::{assemble_a_mass, ProblemData};
use crate::inverse::compute_inverse_constants;
use crate::linalg::SolverOptions;
use crate::mesh::Mesh;
use crate::norms::{eoc, exact_sampler, Field, NormEvaluator, NormReport};
use crate::stab::{estimate_poincare, Method, SpectralGap, StabConfig, StabParams};
use crate::timeloop::{initial_state, SlabSolver, SpaceTimeSolution, TimePartition};

/// Time step selection relative to the mesh size h = h_max.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum KRule {
    /// One slab over (0, t_f].
    #[default]
    Single,
    Fixed(f64),
    /// k ≈ h.
    H,
    /// k ≈ h².
    HSquared,
}

impl KRule {
    /// Uniform partition of (0, t_f] with N = ⌈t_f / k_target⌉ steps.
    pub fn partition(&self, t_f: f64, h: f64) -> Result<TimePartition> {
        let target = match *self {
            KRule::Single => return TimePartition::uniform(0.0, t_f, 1),
            KRule::Fixed(k) => k,
            KRule::H => h,
            KRule::HSquared => h * h,
        };
        if !(target > 0.0) || !target.is_finite() {
            return Err(Error::InvalidArgument(format!("time step {target} is not positive")));
        }
        // The guard absorbs rounding in t_f/k for exact divisions.
        let n = ((t_f / target) - 1e-9).ceil().max(1.0) as usize;
        TimePartition::uniform(0.0, t_f, n)
    }
}

impl fmt::Display for KRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KRule::Single => write!(f, "single"),
            KRule::Fixed(k) => write!(f, "fixed:{k}"),
            KRule::H => write!(f, "h"),
            KRule::HSquared => write!(f, "h2"),
        }
    }
}

impl FromStr for KRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "single" => Ok(KRule::Single),
            "h" => Ok(KRule::H),
            "h2" | "h^2" => Ok(KRule::HSquared),
            other => match other.strip_prefix("fixed:").map(str::parse::<f64>) {
                Some(Ok(k)) if k > 0.0 => Ok(KRule::Fixed(k)),
                _ => Err(Error::Parse(format!("unknown k-rule `{other}` (single, h, h2, fixed:<k>)"))),
            },
        }
    }
}

/// Structured mesh of the unit square with the given number of triangles (2n²).
pub fn mesh_with_elements(elements: usize) -> Result<Mesh> {
    let n = ((elements as f64 / 2.0).sqrt()).round() as usize;
    if n == 0 || 2 * n * n != elements {
        return Err(Error::InvalidArgument(format!("{elements} is not of the form 2n²")));
    }
    Mesh::structured_square(n)
}

#[derive(Clone, Debug)]
pub struct RunSettings {
    pub case: CaseDefinition,
    pub method: Method,
    pub p: usize,
    pub q: usize,
    pub k_rule: KRule,
    /// Overrides the case's final time.
    pub t_f: Option<f64>,
    pub solver: SolverOptions,
    pub stab: StabConfig,
    /// Gauss points per slab for the time integral of the error norm.
    pub norm_time_points: Option<usize>,
}

impl RunSettings {
    pub fn new(case: CaseDefinition, method: Method, p: usize, q: usize, k_rule: KRule) -> Self {
        Self {
            case,
            method,
            p,
            q,
            k_rule,
            t_f: None,
            solver: SolverOptions::default(),
            stab: StabConfig::default(),
            norm_time_points: None,
        }
    }

    pub fn t_f(&self) -> f64 {
        self.t_f.unwrap_or(self.case.t_f())
    }
}

/// Space, stabilisation and time partition of one mesh level.
pub struct Discretisation {
    pub space: FESpace,
    pub stab: StabParams,
    pub partition: TimePartition,
}

impl Discretisation {
    pub fn new(settings: &RunSettings, mesh: Arc<Mesh>) -> Result<Self> {
        let inv = compute_inverse_constants(&mesh, settings.p, settings.stab.inverse_mode)?;
        let stab = StabParams::new(&mesh, settings.p, &inv, &settings.stab)?;
        let partition = settings.k_rule.partition(settings.t_f(), mesh.h_max())?;
        let space = FESpace::new(mesh, settings.p)?;
        Ok(Self { space, stab, partition })
    }

    /// (q+1) × slabs × free spatial dofs.
    pub fn space_time_dofs(&self, q: usize) -> usize {
        (q + 1) * self.partition.n_slabs() * self.space.free_dofs().len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelResult {
    pub elements: usize,
    pub h_max: f64,
    pub k: f64,
    pub n_slabs: usize,
    pub dofs: usize,
    /// Present for cases with an exact solution.
    pub errors: Option<NormReport>,
    pub wall_s: f64,
    pub iterations: usize,
}

/// Marches one level and measures the error when an exact solution exists.
pub fn run_level(settings: &RunSettings, mesh: Arc<Mesh>) -> Result<(LevelResult, SpaceTimeSolution, Discretisation)> {
    let start = Instant::now();
    let disc = Discretisation::new(settings, mesh)?;
    let case = &settings.case;
    let u0 = initial_state(&disc.space, &disc.stab, settings.method, &|x, y| case.initial(x, y), &|x, y| {
        case.inflow(0.0, x, y)
    })?;
    let mut solver = SlabSolver::new(&disc.space, &disc.stab, settings.method, settings.q, settings.solver)?;
    let sol = solver.march(case, &disc.partition, u0)?;
    let steps = disc.partition.steps();
    let k = steps.iter().cloned().fold(0.0, f64::max);
    let errors = if case.has_exact() {
        let ev = NormEvaluator::new(&disc.space, &disc.stab);
        let u = exact_sampler(case);
        let comps = ev.space_time(Some(&u), &sol, settings.norm_time_points)?;
        let t_f = disc.partition.t_final();
        let last = sol.final_value();
        let uf = |x: f64, y: f64| u(t_f, x, y);
        let err_a_final = ev.a_norm(&Field::Error(&uf, &last, None))?;
        Some(NormReport {
            err_a_final,
            err_st: comps.total(),
            components: comps,
            dofs: disc.space_time_dofs(settings.q),
            h_max: disc.space.mesh().h_max(),
            k,
        })
    } else {
        None
    };
    let result = LevelResult {
        elements: disc.space.mesh().n_elements(),
        h_max: disc.space.mesh().h_max(),
        k,
        n_slabs: disc.partition.n_slabs(),
        dofs: disc.space_time_dofs(settings.q),
        errors,
        wall_s: start.elapsed().as_secs_f64(),
        iterations: sol.total_iterations(),
    };
    log::info!(
        "{} {} p={} q={} elements={} slabs={} err_st={:?} wall={:.2}s",
        case.name(),
        settings.method,
        settings.p,
        settings.q,
        result.elements,
        result.n_slabs,
        result.errors.as_ref().map(|e| e.err_st),
        result.wall_s
    );
    Ok((result, sol, disc))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceResult {
    pub levels: Vec<LevelResult>,
    /// eoc[i] compares levels i and i+1 in ⦀e⦀_st.
    pub eoc_st: Vec<f64>,
}

/// Runs every level in `elements` (each of the form 2n²) in turn.
///
/// `on_level` sees each finished level, e.g. to flush output.
pub fn run_convergence(
    settings: &RunSettings,
    elements: &[usize],
    mut on_level: impl FnMut(&LevelResult),
) -> Result<ConvergenceResult> {
    if !settings.case.has_exact() {
        return Err(Error::NoExactSolution(settings.case.name().to_string()));
    }
    let mut levels = Vec::with_capacity(elements.len());
    for &e in elements {
        let (r, _, _) = run_level(settings, Arc::new(mesh_with_elements(e)?))?;
        on_level(&r);
        levels.push(r);
    }
    let eoc_st = if levels.len() >= 2 {
        let errs: Vec<f64> = levels.iter().map(|l| l.errors.as_ref().unwrap().err_st).collect();
        let h: Vec<f64> = levels.iter().map(|l| l.h_max).collect();
        eoc(&errs, &h)?
    } else {
        Vec::new()
    };
    Ok(ConvergenceResult { levels, eoc_st })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayResult {
    pub elements: usize,
    /// Breakpoints t₀, …, t_N.
    pub times: Vec<f64>,
    /// ‖U(t_n⁻)‖_A for n = 0..N.
    pub norms: Vec<f64>,
    /// ‖U(t₀⁻)‖_A · (Π_{m≤n}(1+μ_m)⁻¹)^{1/2}.
    pub envelope: Vec<f64>,
    pub gap: SpectralGap,
    /// Breakpoints n with ‖U(t_n⁻)‖_A > (1 + 1e-12)‖U(t_{n−1}⁻)‖_A.
    pub violations: Vec<usize>,
    pub wall_s: f64,
    pub iterations: usize,
}

impl DecayResult {
    pub fn monotone(&self) -> bool {
        self.violations.is_empty()
    }

    /// ‖U(t_N⁻)‖²_A ≤ Π(1+μ_n)⁻¹ ‖U(t₀⁻)‖²_A.
    pub fn below_envelope(&self) -> bool {
        let n = self.norms.len() - 1;
        self.norms[n].powi(2) <= self.envelope[n].powi(2)
    }
}

/// Relative per-step tolerance of the monotonicity check.
pub const MONOTONE_TOL: f64 = 1e-12;

/// ‖U(t_n⁻)‖_A trajectory of a homogeneous problem and its theoretical envelope.
///
/// The Poincaré constant is estimated on the run's own space unless given.
pub fn run_decay(settings: &RunSettings, mesh: Arc<Mesh>, c_pf: Option<f64>) -> Result<DecayResult> {
    if !settings.case.source_is_zero() {
        return Err(Error::InvalidArgument(format!("case `{}` has a nonzero source", settings.case.name())));
    }
    let (level, sol, disc) = run_level(settings, mesh)?;
    let c_pf = match c_pf {
        Some(c) => c,
        None => estimate_poincare(&disc.space)?,
    };
    let gap = SpectralGap::new(&disc.stab, disc.space.mesh().h_min(), c_pf)?;
    let ma = assemble_a_mass(&disc.space, Some(&disc.stab));
    let norms: Vec<f64> = sol.endpoint_values().iter().map(|v| ma.bilinear(v, v).max(0.0).sqrt()).collect();
    let steps = disc.partition.steps();
    let mut envelope = vec![norms[0]];
    let mut factor = 1.0;
    for &k in &steps {
        factor /= 1.0 + gap.mu(k, settings.q);
        envelope.push(norms[0] * factor.sqrt());
    }
    let violations =
        (1..norms.len()).filter(|&n| norms[n] > norms[n - 1] * (1.0 + MONOTONE_TOL)).collect::<Vec<_>>();
    Ok(DecayResult {
        elements: level.elements,
        times: disc.partition.breakpoints().to_vec(),
        norms,
        envelope,
        gap,
        violations,
        wall_s: level.wall_s,
        iterations: level.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_rules() {
        assert_eq!(KRule::Single.partition(1.0, 0.1).unwrap().n_slabs(), 1);
        assert_eq!(KRule::H.partition(8.0, 0.25).unwrap().n_slabs(), 32);
        let h = 2f64.sqrt() / 8.0;
        let p = KRule::HSquared.partition(1.0, h).unwrap();
        assert_eq!(p.n_slabs(), 32);
        assert!((p.step(0) - h * h).abs() < 1e-15);
        assert_eq!(KRule::Fixed(0.3).partition(1.0, 0.1).unwrap().n_slabs(), 4);
        for r in [KRule::Single, KRule::H, KRule::HSquared, KRule::Fixed(0.125)] {
            assert_eq!(r.to_string().parse::<KRule>().unwrap(), r);
        }
        assert!("fixed:-1".parse::<KRule>().is_err());
    }

    #[test]
    fn mesh_levels() {
        assert_eq!(mesh_with_elements(32).unwrap().n_elements(), 32);
        assert!(mesh_with_elements(30).is_err());
    }

    #[test]
    fn stationary_errors_decrease() {
        let s = RunSettings::new(CaseDefinition::stationary(), Method::Hypo, 1, 0, KRule::Single);
        let r = run_convergence(&s, &[32, 128], |_| {}).unwrap();
        assert_eq!(r.eoc_st.len(), 1);
        assert!(r.eoc_st[0] > 0.6, "{:?}", r.eoc_st);
        let l = &r.levels[0];
        assert_eq!(l.dofs, l.n_slabs * (25 - 5));
    }

    #[test]
    fn decay_smoke() {
        let mut s = RunSettings::new(CaseDefinition::decay(), Method::Hypo, 1, 0, KRule::H);
        s.t_f = Some(1.0);
        let r = run_decay(&s, Arc::new(mesh_with_elements(8).unwrap()), None).unwrap();
        assert!(r.monotone());
        assert!(r.below_envelope());
        assert_eq!(r.norms.len(), r.times.len());
        let bad = RunSettings::new(CaseDefinition::stationary(), Method::Hypo, 1, 0, KRule::H);
        assert!(run_decay(&bad, Arc::new(mesh_with_elements(8).unwrap()), None).is_err());
    }
}
