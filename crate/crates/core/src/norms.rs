//! Norms of discrete fields and of errors against exact solutions.
//!
//! With per-element A, τ, δ, γ:
//!
//! ```text
//! ‖w‖²_A     = (w, w) + (∇w, A∇w)
//! ⦀w⦀²       = ½‖w_x‖² + ‖√(γδ) w_y‖² + ½‖√τ(w_t + x w_y)‖² + Σ_T (∇w_x, A∇w_x)_T
//!              + ∫_{∂₊Ω} (x n₂) w² + Σ_T ∫_{∂T} (x n₂)₊ ∇w·A∇w
//! ⦀w⦀²_SUPG  = ‖w_x‖² + ∫_{∂₊Ω} (x n₂) w² + ‖√τ(w_t + x w_y)‖²
//! ```
//!
//! ∂₊Ω is the part of the boundary with n₁ = 0 and x n₂ > 0; the facet
//! weights (x n₂)₊ are taken pointwise at the edge quadrature points.

use rayon::prelude::*;

use crate::basis::N_DERIV;
use crate::cases::CaseDefinition;
use crate::error::{Error, Result};
use crate::fespace::{FESpace, PointTables};
use crate::forms::RHS_DEGREE;
use crate::quadrature::{gauss_legendre_unit, LineRule, TriangleRule};
use crate::stab::StabParams;
use crate::timeloop::SpaceTimeSolution;

/// Point values of a field: w, w_x, w_y, w_xx, w_xy and w_t.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Sample {
    pub v: f64,
    pub x: f64,
    pub y: f64,
    pub xx: f64,
    pub xy: f64,
    pub t: f64,
}

impl std::ops::Sub for Sample {
    type Output = Sample;
    fn sub(self, o: Sample) -> Sample {
        Sample { v: self.v - o.v, x: self.x - o.x, y: self.y - o.y, xx: self.xx - o.xx, xy: self.xy - o.xy, t: self.t - o.t }
    }
}

/// Closure evaluating a field at a physical point.
pub type SampleFn<'a> = dyn Fn(f64, f64) -> Result<Sample> + Sync + 'a;

/// A field to be measured.
pub enum Field<'a> {
    /// Finite element coefficients with optional time-derivative coefficients.
    Discrete { coeffs: &'a [f64], dt: Option<&'a [f64]> },
    Exact(&'a SampleFn<'a>),
    /// `Exact` minus `Discrete`.
    Error(&'a SampleFn<'a>, &'a [f64], Option<&'a [f64]>),
}

impl<'a> Field<'a> {
    pub fn discrete(coeffs: &'a [f64]) -> Self {
        Field::Discrete { coeffs, dt: None }
    }
}

/// Space-time closure of an exact solution, (t, x, y) ↦ sample.
pub type SpaceTimeSampleFn<'a> = dyn Fn(f64, f64, f64) -> Result<Sample> + Sync + 'a;

/// Exact-solution sampler of a manufactured case.
pub fn exact_sampler(case: &CaseDefinition) -> impl Fn(f64, f64, f64) -> Result<Sample> + Sync + '_ {
    move |t, x, y| {
        let d = case.jet_eval(t, x, y)?;
        Ok(Sample { v: d.u, x: d.u_x, y: d.u_y, xx: d.u_xx, xy: d.u_xy, t: d.u_t })
    }
}

/// Summands of ⦀w⦀² in the order of the module documentation.
pub type HypoComponents = [f64; 6];
/// Summands of ⦀w⦀²_SUPG: ‖w_x‖², boundary term, streamline term.
pub type SupgComponents = [f64; 3];

/// Breakdown of ⦀e⦀²_st.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpaceTimeNorm {
    /// Σ_{n=1}^{N−1} ‖⟦e⟧_n‖²_A.
    pub jumps: f64,
    /// ‖e(t_N⁻)‖²_A.
    pub final_sq: f64,
    /// ‖e(t₀⁺)‖²_A.
    pub initial_sq: f64,
    /// ∫ ⦀e⦀² dt, per component.
    pub integral: HypoComponents,
}

impl SpaceTimeNorm {
    /// ⦀e⦀²_st = ½(jumps + final + initial) + ¼∫⦀e⦀² dt.
    pub fn total_sq(&self) -> f64 {
        0.5 * (self.jumps + self.final_sq + self.initial_sq) + 0.25 * self.integral.iter().sum::<f64>()
    }

    pub fn total(&self) -> f64 {
        self.total_sq().sqrt()
    }
}

/// Per-run error record.
#[derive(Clone, Debug, PartialEq)]
pub struct NormReport {
    /// ‖e(t_f⁻)‖_A.
    pub err_a_final: f64,
    pub err_st: f64,
    pub components: SpaceTimeNorm,
    pub dofs: usize,
    pub h_max: f64,
    pub k: f64,
}

/// Quadrature tables shared by all norm evaluations on one space.
pub struct NormEvaluator<'a> {
    space: &'a FESpace,
    stab: &'a StabParams,
    volume: PointTables,
    edges: [PointTables; 3],
}

enum Kind {
    A,
    Hypo,
    Supg,
}

impl<'a> NormEvaluator<'a> {
    pub fn new(space: &'a FESpace, stab: &'a StabParams) -> Self {
        Self::with_degree(space, stab, RHS_DEGREE)
    }

    /// Volume and edge rules exact to `degree`.
    pub fn with_degree(space: &'a FESpace, stab: &'a StabParams, degree: usize) -> Self {
        let basis = space.basis();
        let line = LineRule::with_degree(degree);
        Self {
            space,
            stab,
            volume: PointTables::volume(basis, &TriangleRule::with_degree(degree)),
            edges: [0, 1, 2].map(|e| PointTables::edge(basis, e, &line)),
        }
    }

    pub fn space(&self) -> &FESpace {
        self.space
    }

    fn samples(&self, field: &Field<'_>, t: usize, tables: &PointTables, phys: &mut Vec<f64>, out: &mut Vec<Sample>) -> Result<()> {
        out.clear();
        let mesh = self.space.mesh();
        let (x0, j, _) = mesh.affine(t);
        let (discrete, exact) = match field {
            Field::Discrete { coeffs, dt } => (Some((*coeffs, *dt)), None),
            Field::Exact(f) => (None, Some(*f)),
            Field::Error(f, c, dt) => (Some((*c, *dt)), Some(*f)),
        };
        if discrete.is_some() {
            self.space.physical_tables(t, tables, 2, phys);
        }
        let n = self.space.n_local();
        let dofs = self.space.element_dofs(t);
        for (i, xi) in tables.points.iter().enumerate() {
            let mut s = Sample::default();
            if let Some((c, dt)) = discrete {
                let d = &phys[i * N_DERIV * n..(i + 1) * N_DERIV * n];
                let dot = |k: usize| -> f64 { d[k * n..(k + 1) * n].iter().zip(dofs).map(|(v, &g)| v * c[g]).sum() };
                s = Sample { v: dot(0), x: dot(1), y: dot(2), xx: dot(3), xy: dot(4), t: 0.0 };
                if let Some(dt) = dt {
                    s.t = d[..n].iter().zip(dofs).map(|(v, &g)| v * dt[g]).sum();
                }
            }
            if let Some(f) = exact {
                let x = x0[0] + j[0][0] * xi[0] + j[0][1] * xi[1];
                let y = x0[1] + j[1][0] * xi[0] + j[1][1] * xi[1];
                s = f(x, y)? - s;
            }
            out.push(s);
        }
        Ok(())
    }

    fn element(&self, field: &Field<'_>, t: usize, kind: &Kind) -> Result<[f64; 6]> {
        let mesh = self.space.mesh();
        let es = self.stab.element(t);
        let [[al, be], [_, ga]] = es.a_matrix();
        let a_quad = |u: f64, v: f64| al * u * u + 2.0 * be * u * v + ga * v * v;
        let (x0, j, det) = mesh.affine(t);
        let mut phys = Vec::new();
        let mut s = Vec::new();
        let mut c = [0.0; 6];
        self.samples(field, t, &self.volume, &mut phys, &mut s)?;
        for (i, (xi, w)) in self.volume.points.iter().zip(&self.volume.weights).enumerate() {
            let w = w * det.abs();
            let p = s[i];
            match kind {
                Kind::A => {
                    c[0] += w * (p.v * p.v + a_quad(p.x, p.y));
                }
                Kind::Hypo | Kind::Supg => {
                    let x = x0[0] + j[0][0] * xi[0] + j[0][1] * xi[1];
                    let stream = p.t + x * p.y;
                    if let Kind::Hypo = kind {
                        c[0] += w * 0.5 * p.x * p.x;
                        c[1] += w * ga * es.delta * p.y * p.y;
                        c[2] += w * 0.5 * es.tau * stream * stream;
                        c[3] += w * a_quad(p.xx, p.xy);
                    } else {
                        c[0] += w * p.x * p.x;
                        c[2] += w * es.tau * stream * stream;
                    }
                }
            }
        }
        if let Kind::A = kind {
            return Ok(c);
        }
        for e in 0..3 {
            let n = mesh.element_normal(t, e);
            let on_plus_boundary = mesh.edge_class(t, e).is_some() && n[0].abs() <= 1e-12;
            let [a, b] = mesh.edge_endpoints(t, e);
            let len = mesh.edge_length(t, e);
            // Skip edges where (x n₂)₊ vanishes identically.
            if (a[0] * n[1]).max(b[0] * n[1]) <= 0.0 {
                continue;
            }
            let tables = &self.edges[e];
            self.samples(field, t, tables, &mut phys, &mut s)?;
            for (i, (xi, w)) in tables.points.iter().zip(&tables.weights).enumerate() {
                let x = x0[0] + j[0][0] * xi[0] + j[0][1] * xi[1];
                let weight = (x * n[1]).max(0.0) * w * len;
                let p = s[i];
                if on_plus_boundary {
                    c[4] += weight * p.v * p.v;
                }
                if let Kind::Hypo = kind {
                    c[5] += weight * a_quad(p.x, p.y);
                }
            }
        }
        Ok(c)
    }

    fn reduce(&self, field: &Field<'_>, kind: Kind) -> Result<[f64; 6]> {
        let nt = self.space.mesh().n_elements();
        let parts: Vec<Result<[f64; 6]>> = (0..nt).into_par_iter().map(|t| self.element(field, t, &kind)).collect();
        let mut total = [0.0; 6];
        for p in parts {
            for (t, v) in total.iter_mut().zip(p?) {
                *t += v;
            }
        }
        Ok(total)
    }

    /// ‖w‖²_A.
    pub fn a_norm_sq(&self, field: &Field<'_>) -> Result<f64> {
        Ok(self.reduce(field, Kind::A)?[0])
    }

    pub fn a_norm(&self, field: &Field<'_>) -> Result<f64> {
        Ok(self.a_norm_sq(field)?.sqrt())
    }

    /// Summands of ⦀w⦀².
    pub fn hypo_components(&self, field: &Field<'_>) -> Result<HypoComponents> {
        self.reduce(field, Kind::Hypo)
    }

    /// ⦀w⦀.
    pub fn hypo(&self, field: &Field<'_>) -> Result<f64> {
        Ok(self.hypo_components(field)?.iter().sum::<f64>().sqrt())
    }

    /// Summands of ⦀w⦀²_SUPG.
    pub fn supg_components(&self, field: &Field<'_>) -> Result<SupgComponents> {
        let c = self.reduce(field, Kind::Supg)?;
        Ok([c[0], c[4], c[2]])
    }

    pub fn supg(&self, field: &Field<'_>) -> Result<f64> {
        Ok(self.supg_components(field)?.iter().sum::<f64>().sqrt())
    }

    /// ⦀u − U⦀²_st, or ⦀U⦀²_st when `exact` is `None`.
    ///
    /// Time integrals use `time_points` Gauss points per slab (q + 3 when `None`).
    pub fn space_time(
        &self,
        exact: Option<&SpaceTimeSampleFn<'_>>,
        sol: &SpaceTimeSolution,
        time_points: Option<usize>,
    ) -> Result<SpaceTimeNorm> {
        let part = sol.partition();
        let n_slabs = sol.n_slabs();
        if n_slabs == 0 {
            return Err(Error::InvalidArgument("space-time norm of an empty solution".into()));
        }
        let (s, w) = gauss_legendre_unit(time_points.unwrap_or(sol.q() + 3));
        let at = |t: f64, coeffs: &[f64], dt: Option<&[f64]>, f: &dyn Fn(&Field<'_>) -> Result<f64>| -> Result<f64> {
            match exact {
                Some(u) => {
                    let closure = move |x: f64, y: f64| u(t, x, y);
                    f(&Field::Error(&closure, coeffs, dt))
                }
                None => f(&Field::Discrete { coeffs, dt }),
            }
        };
        let a_sq = |fl: &Field<'_>| self.a_norm_sq(fl);
        let mut out = SpaceTimeNorm::default();
        for n in 1..n_slabs {
            let jump: Vec<f64> = sol.left_limit(n).iter().zip(sol.right_limit(n - 1)).map(|(p, m)| p - m).collect();
            out.jumps += self.a_norm_sq(&Field::discrete(&jump))?;
        }
        out.final_sq = at(part.t_final(), &sol.right_limit(n_slabs - 1), None, &a_sq)?;
        out.initial_sq = at(part.start(0), &sol.left_limit(0), None, &a_sq)?;
        for n in 0..n_slabs {
            let k = part.step(n);
            for (&sg, &wg) in s.iter().zip(&w) {
                let t = part.start(n) + k * sg;
                let (u, ut) = (sol.eval(n, sg), sol.eval_dt(n, sg));
                let c = match exact {
                    Some(f) => {
                        let closure = move |x: f64, y: f64| f(t, x, y);
                        self.hypo_components(&Field::Error(&closure, &u, Some(&ut)))?
                    }
                    None => self.hypo_components(&Field::Discrete { coeffs: &u, dt: Some(&ut) })?,
                };
                for (o, v) in out.integral.iter_mut().zip(c) {
                    *o += wg * k * v;
                }
            }
        }
        Ok(out)
    }
}

/// Experimental orders of convergence log(e_i/e_{i+1}) / log(h_i/h_{i+1}).
pub fn eoc(errors: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != h.len() || errors.len() < 2 {
        return Err(Error::InvalidArgument("eoc needs two or more (error, h) pairs".into()));
    }
    if errors.iter().chain(h).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("errors and mesh sizes must be positive".into()));
    }
    Ok(errors.windows(2).zip(h.windows(2)).map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln()).collect())
}
