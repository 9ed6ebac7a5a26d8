//! dG(q) time stepping on a partition 0 = t₀ < … < t_N = t_f.
//!
//! On each slab the solution is expanded in the orthonormal Legendre basis
//! L̂_a(s) = √(2a+1) P_a(2s − 1) of the reference interval s ∈ [0, 1],
//! t = t_{n} + k s. Unknowns of a slab are stored time-coefficient-major:
//! entry `a * n_dofs + i` multiplies L̂_a(s) φ_i(x, y).

use std::io::Write;

use crate::error::{Error, Result};
use crate::fespace::FESpace;
use crate::forms::{assemble_rhs_multi, assemble_spatial, ProblemData, SpatialOperators};
use crate::linalg::{CsrMatrix, PreparedSolver, SolveReport, SolverOptions};
use crate::projection::{projection_options, FieldFn, InflowMode, Projector};
use crate::quadrature::{gauss_legendre_unit, legendre_with_derivative};
use crate::stab::{Method, StabParams};

#[derive(Clone, Debug, PartialEq)]
pub struct TimePartition {
    breakpoints: Vec<f64>,
}

impl TimePartition {
    pub fn new(breakpoints: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidArgument("a partition needs at least two breakpoints".into()));
        }
        if breakpoints.iter().any(|t| !t.is_finite()) || breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("breakpoints must be finite and strictly increasing".into()));
        }
        Ok(Self { breakpoints })
    }

    /// N equal steps on (t₀, t₀ + t_f].
    pub fn uniform(t0: f64, t_f: f64, n: usize) -> Result<Self> {
        if n == 0 || t_f <= 0.0 {
            return Err(Error::InvalidArgument(format!("uniform partition with {n} steps of (0, {t_f}]")));
        }
        let k = t_f / n as f64;
        let mut b: Vec<f64> = (0..n).map(|i| t0 + i as f64 * k).collect();
        b.push(t0 + t_f);
        Self::new(b)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn n_slabs(&self) -> usize {
        self.breakpoints.len() - 1
    }

    /// Start of slab n (0-based), i.e. t_n.
    pub fn start(&self, n: usize) -> f64 {
        self.breakpoints[n]
    }

    pub fn end(&self, n: usize) -> f64 {
        self.breakpoints[n + 1]
    }

    pub fn step(&self, n: usize) -> f64 {
        self.breakpoints[n + 1] - self.breakpoints[n]
    }

    pub fn steps(&self) -> Vec<f64> {
        self.breakpoints.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn t_final(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }
}

/// Orthonormal Legendre basis of ℙ_q(0, 1) and its slab matrices.
#[derive(Clone, Debug)]
pub struct DGTimeBasis {
    q: usize,
    /// td[b][a] = ∫ L̂_a′ L̂_b ds.
    pub td: Vec<Vec<f64>>,
    /// tdd[b][a] = ∫ L̂_a′ L̂_b′ ds.
    pub tdd: Vec<Vec<f64>>,
    /// mass[b][a] = ∫ L̂_a L̂_b ds (the identity up to rounding).
    pub mass: Vec<Vec<f64>>,
    /// e[b][a] = L̂_a(0) L̂_b(0).
    pub e: Vec<Vec<f64>>,
}

impl DGTimeBasis {
    pub fn new(q: usize) -> Self {
        let (s, w) = gauss_legendre_unit(q + 2);
        let n = q + 1;
        let mut td = vec![vec![0.0; n]; n];
        let mut tdd = vec![vec![0.0; n]; n];
        let mut mass = vec![vec![0.0; n]; n];
        for (&sg, &wg) in s.iter().zip(&w) {
            let v: Vec<f64> = (0..n).map(|a| Self::value(a, sg)).collect();
            let d: Vec<f64> = (0..n).map(|a| Self::deriv(a, sg)).collect();
            for b in 0..n {
                for a in 0..n {
                    td[b][a] += wg * d[a] * v[b];
                    tdd[b][a] += wg * d[a] * d[b];
                    mass[b][a] += wg * v[a] * v[b];
                }
            }
        }
        let e = (0..n).map(|b| (0..n).map(|a| Self::value(a, 0.0) * Self::value(b, 0.0)).collect()).collect();
        Self { q, td, tdd, mass, e }
    }

    pub fn degree(&self) -> usize {
        self.q
    }

    /// L̂_a(s).
    pub fn value(a: usize, s: f64) -> f64 {
        ((2 * a + 1) as f64).sqrt() * legendre_with_derivative(a, 2.0 * s - 1.0).0
    }

    /// dL̂_a/ds.
    pub fn deriv(a: usize, s: f64) -> f64 {
        2.0 * ((2 * a + 1) as f64).sqrt() * legendre_with_derivative(a, 2.0 * s - 1.0).1
    }

    /// π̃^t from samples v(s_g) at a Gauss rule and the endpoint value v(1).
    ///
    /// Moments against L̂_b for b < q, endpoint interpolation at s = 1.
    pub fn project_samples(&self, s: &[f64], w: &[f64], samples: &[f64], end: f64) -> Vec<f64> {
        let q = self.q;
        let mut c = vec![0.0; q + 1];
        for b in 0..q {
            c[b] = s.iter().zip(w).zip(samples).map(|((&sg, &wg), &v)| wg * v * Self::value(b, sg)).sum();
        }
        let head: f64 = (0..q).map(|a| c[a] * ((2 * a + 1) as f64).sqrt()).sum();
        c[q] = (end - head) / ((2 * q + 1) as f64).sqrt();
        c
    }
}

/// π̃^t of a scalar function on (t₀, t₁] with an n-point Gauss rule for the moments.
pub fn time_project(v: &dyn Fn(f64) -> f64, t0: f64, t1: f64, q: usize, n_points: usize) -> Vec<f64> {
    let (s, w) = gauss_legendre_unit(n_points.max(1));
    let k = t1 - t0;
    let samples: Vec<f64> = s.iter().map(|&sg| v(t0 + k * sg)).collect();
    DGTimeBasis::new(q).project_samples(&s, &w, &samples, v(t1))
}

/// Discrete space-time field: per slab a (q+1) × n_dofs coefficient block.
#[derive(Clone, Debug)]
pub struct SpaceTimeSolution {
    q: usize,
    partition: TimePartition,
    n_dofs: usize,
    initial: Vec<f64>,
    slabs: Vec<Vec<f64>>,
    reports: Vec<SolveReport>,
}

impl SpaceTimeSolution {
    pub fn from_parts(q: usize, partition: TimePartition, initial: Vec<f64>, slabs: Vec<Vec<f64>>) -> Result<Self> {
        let n_dofs = initial.len();
        if slabs.len() != partition.n_slabs() || slabs.iter().any(|c| c.len() != (q + 1) * n_dofs) {
            return Err(Error::InvalidArgument("slab coefficient blocks do not match the partition".into()));
        }
        Ok(Self { q, partition, n_dofs, initial, slabs, reports: Vec::new() })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn partition(&self) -> &TimePartition {
        &self.partition
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_slabs(&self) -> usize {
        self.slabs.len()
    }

    /// U(t₀⁻).
    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn slab(&self, n: usize) -> &[f64] {
        &self.slabs[n]
    }

    pub fn coefficient(&self, n: usize, a: usize) -> &[f64] {
        &self.slabs[n][a * self.n_dofs..(a + 1) * self.n_dofs]
    }

    /// Solver reports, one per slab (empty for projected fields).
    pub fn reports(&self) -> &[SolveReport] {
        &self.reports
    }

    pub fn total_iterations(&self) -> usize {
        self.reports.iter().map(|r| r.iterations).sum()
    }

    fn combine(&self, n: usize, weight: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dofs];
        for a in 0..=self.q {
            let c = weight(a);
            for (o, v) in out.iter_mut().zip(self.coefficient(n, a)) {
                *o += c * v;
            }
        }
        out
    }

    /// U on slab n at reference time s ∈ [0, 1].
    pub fn eval(&self, n: usize, s: f64) -> Vec<f64> {
        self.combine(n, |a| DGTimeBasis::value(a, s))
    }

    /// ∂_t U on slab n at reference time s.
    pub fn eval_dt(&self, n: usize, s: f64) -> Vec<f64> {
        let k = self.partition.step(n);
        self.combine(n, |a| DGTimeBasis::deriv(a, s) / k)
    }

    /// U(t_n⁺) for slab n.
    pub fn left_limit(&self, n: usize) -> Vec<f64> {
        self.eval(n, 0.0)
    }

    /// U(t_{n+1}⁻) for slab n.
    pub fn right_limit(&self, n: usize) -> Vec<f64> {
        self.eval(n, 1.0)
    }

    /// [U(t₀⁻), U(t₁⁻), …, U(t_N⁻)].
    pub fn endpoint_values(&self) -> Vec<Vec<f64>> {
        std::iter::once(self.initial.clone()).chain((0..self.n_slabs()).map(|n| self.right_limit(n))).collect()
    }

    /// U(t_N⁻).
    pub fn final_value(&self) -> Vec<f64> {
        match self.n_slabs() {
            0 => self.initial.clone(),
            n => self.right_limit(n - 1),
        }
    }
}

/// Assembles and solves the slab systems of one method on one space.
pub struct SlabSolver<'a> {
    space: &'a FESpace,
    stab: StabParams,
    method: Method,
    ops: SpatialOperators,
    a_form: CsrMatrix,
    basis: DGTimeBasis,
    opts: SolverOptions,
    rhs_rule: (Vec<f64>, Vec<f64>),
    cached: Option<(u64, PreparedSolver)>,
}

impl<'a> SlabSolver<'a> {
    pub fn new(space: &'a FESpace, stab: &StabParams, method: Method, q: usize, opts: SolverOptions) -> Result<Self> {
        let ops = assemble_spatial(space, stab, method, None)?;
        Self::with_operators(space, stab, method, ops, q, opts)
    }

    /// Uses operators assembled elsewhere for `method`.
    pub fn with_operators(
        space: &'a FESpace,
        stab: &StabParams,
        method: Method,
        ops: SpatialOperators,
        q: usize,
        opts: SolverOptions,
    ) -> Result<Self> {
        let a_form = ops.a_form();
        for m in [&ops.m, &ops.k_st, &ops.k_ts, &ops.k_tt] {
            if m.indptr() != ops.m_a.indptr() || m.indices() != ops.m_a.indices() {
                return Err(Error::InvalidArgument("spatial operators must share one sparsity pattern".into()));
            }
        }
        Ok(Self {
            space,
            stab: stab.restricted(method),
            method,
            ops,
            a_form,
            basis: DGTimeBasis::new(q),
            opts,
            rhs_rule: gauss_legendre_unit((q + 2).max(6)),
            cached: None,
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn q(&self) -> usize {
        self.basis.degree()
    }

    pub fn operators(&self) -> &SpatialOperators {
        &self.ops
    }

    /// The stabilisation parameters restricted to the method.
    pub fn stab(&self) -> &StabParams {
        &self.stab
    }

    pub fn time_basis(&self) -> &DGTimeBasis {
        &self.basis
    }

    fn blocks(&self, k: f64, with_mass: bool) -> CsrMatrix {
        let nd = self.space.n_dofs();
        let nt = self.q() + 1;
        let ip = self.ops.m_a.indptr();
        let idx = self.ops.m_a.indices();
        let (ma, kk, kts, kst, ktt) =
            (self.ops.m_a.data(), self.a_form.data(), self.ops.k_ts.data(), self.ops.k_st.data(), self.ops.k_tt.data());
        let (td, tdd, e) = (&self.basis.td, &self.basis.tdd, &self.basis.e);
        let row_nnz = nt * idx.len();
        let mut indptr = Vec::with_capacity(nt * nd + 1);
        let mut indices = Vec::with_capacity(nt * row_nnz);
        let mut data = Vec::with_capacity(nt * row_nnz);
        indptr.push(0);
        for b in 0..nt {
            for i in 0..nd {
                for a in 0..nt {
                    let cm = if with_mass { td[b][a] + e[b][a] } else { 0.0 };
                    let ck = if a == b { k } else { 0.0 };
                    let (cts, cst, ctt) = (td[b][a], td[a][b], tdd[b][a] / k);
                    for p in ip[i]..ip[i + 1] {
                        indices.push(a * nd + idx[p]);
                        data.push(cm * ma[p] + ck * kk[p] + cts * kts[p] + cst * kst[p] + ctt * ktt[p]);
                    }
                }
                indptr.push(indices.len());
            }
        }
        CsrMatrix::from_raw(nt * nd, nt * nd, indptr, indices, data).expect("block pattern is valid")
    }

    /// ∫_{I} a_h(U, V) dt over a slab of length k, without constraints.
    pub fn space_time_form(&self, k: f64) -> CsrMatrix {
        self.blocks(k, false)
    }

    /// Slab matrix without the identity rows for constrained dofs.
    pub fn slab_matrix_unconstrained(&self, k: f64) -> CsrMatrix {
        self.blocks(k, true)
    }

    /// Slab matrix with constrained rows replaced by identity rows.
    pub fn slab_matrix(&self, k: f64) -> CsrMatrix {
        let mut m = self.blocks(k, true);
        m.set_identity_rows(&self.constrained_rows());
        m
    }

    fn constrained_rows(&self) -> Vec<usize> {
        let nd = self.space.n_dofs();
        (0..=self.q()).flat_map(|a| self.space.constrained_dofs().iter().map(move |&c| a * nd + c)).collect()
    }

    /// Right-hand side of the slab (t₀, t₀ + k] given U(t₀⁻).
    pub fn slab_rhs(&self, data: &dyn ProblemData, t0: f64, k: f64, u_prev: &[f64]) -> Result<Vec<f64>> {
        let nd = self.space.n_dofs();
        let nt = self.q() + 1;
        let (s, w) = &self.rhs_rule;
        let times: Vec<f64> = s.iter().map(|sg| t0 + k * sg).collect();
        let loads = assemble_rhs_multi(self.space, &self.stab, data, &times)?;
        let mu = self.ops.m_a.mul_vec(u_prev);
        let mut rhs = vec![0.0; nt * nd];
        for b in 0..nt {
            let out = &mut rhs[b * nd..(b + 1) * nd];
            let l0 = DGTimeBasis::value(b, 0.0);
            for (o, m) in out.iter_mut().zip(&mu) {
                *o = l0 * m;
            }
            for (g, (r1, r2)) in loads.iter().enumerate() {
                let c1 = w[g] * k * DGTimeBasis::value(b, s[g]);
                let c2 = w[g] * DGTimeBasis::deriv(b, s[g]);
                for ((o, x1), x2) in out.iter_mut().zip(r1).zip(r2) {
                    *o += c1 * x1 + c2 * x2;
                }
            }
        }
        let coords = self.space.dof_coords();
        for &c in self.space.constrained_dofs() {
            let [x, y] = coords[c];
            let mut samples = Vec::with_capacity(times.len());
            for &t in &times {
                samples.push(data.inflow(t, x, y)?);
            }
            let end = data.inflow(t0 + k, x, y)?;
            for (b, v) in self.basis.project_samples(s, w, &samples, end).into_iter().enumerate() {
                rhs[b * nd + c] = v;
            }
        }
        Ok(rhs)
    }

    /// Solves one slab; the preconditioner is reused while k stays bitwise equal.
    pub fn solve_slab(&mut self, data: &dyn ProblemData, t0: f64, k: f64, u_prev: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        if self.cached.as_ref().map(|(bits, _)| *bits) != Some(k.to_bits()) {
            let solver = PreparedSolver::new(self.slab_matrix(k), self.opts)?;
            self.cached = Some((k.to_bits(), solver));
        }
        let rhs = self.slab_rhs(data, t0, k, u_prev)?;
        let mut guess = vec![0.0; rhs.len()];
        guess[..u_prev.len()].copy_from_slice(u_prev);
        let (_, solver) = self.cached.as_ref().unwrap();
        solver.solve_with_guess(&rhs, Some(&guess))
    }

    /// Marches over all slabs of `partition` starting from U(t₀⁻) = `u0`.
    pub fn march(&mut self, data: &dyn ProblemData, partition: &TimePartition, u0: Vec<f64>) -> Result<SpaceTimeSolution> {
        if u0.len() != self.space.n_dofs() {
            return Err(Error::InvalidArgument(format!(
                "initial vector has length {}, space has {} dofs",
                u0.len(),
                self.space.n_dofs()
            )));
        }
        let mut sol = SpaceTimeSolution {
            q: self.q(),
            partition: partition.clone(),
            n_dofs: u0.len(),
            initial: u0,
            slabs: Vec::with_capacity(partition.n_slabs()),
            reports: Vec::with_capacity(partition.n_slabs()),
        };
        let mut prev = sol.initial.clone();
        for n in 0..partition.n_slabs() {
            let (x, report) = self.solve_slab(data, partition.start(n), partition.step(n), &prev)?;
            log::debug!("slab {n}: {} iterations, residual {:.2e}", report.iterations, report.residual);
            sol.slabs.push(x);
            sol.reports.push(report);
            prev = sol.right_limit(n);
        }
        Ok(sol)
    }
}

/// U(t₀⁻): A-projection for the hypo method, L₂ projection otherwise.
///
/// Inflow dofs take the nodal values of `inflow`.
pub fn initial_state(
    space: &FESpace,
    stab: &StabParams,
    method: Method,
    u0: &FieldFn<'_>,
    inflow: &dyn Fn(f64, f64) -> Result<f64>,
) -> Result<Vec<f64>> {
    let coords = space.dof_coords();
    let values = space.constrained_dofs().iter().map(|&c| inflow(coords[c][0], coords[c][1])).collect::<Result<Vec<_>>>()?;
    let projector = match method {
        Method::Hypo => Projector::a(space, stab, projection_options()),
        _ => Projector::l2(space, projection_options()),
    };
    projector.project(u0, &InflowMode::Values(values))
}

/// Which factor of π_st = π̃^t ∘ π̂ is applied first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ProjectionOrder {
    /// π̂ at every time sample, then π̃^t of the coefficients.
    #[default]
    SpaceFirst,
    /// π̃^t of the load vectors, then π̂ of each time coefficient.
    TimeFirst,
}

/// Space-time field sampler returning (u, ∂ₓu, ∂ᵧu) at (t, x, y).
pub type SpaceTimeFieldFn<'a> = dyn Fn(f64, f64, f64) -> Result<[f64; 3]> + Sync + 'a;

/// π_st = π̃^t ∘ π̂ slab by slab.
///
/// With `constrain_inflow` the inflow dofs carry nodal values of u; otherwise
/// π̂ is orthogonal against the whole space. Time moments use `time_points`
/// Gauss points per slab.
#[allow(clippy::too_many_arguments)]
pub fn st_project(
    space: &FESpace,
    stab: &StabParams,
    partition: &TimePartition,
    q: usize,
    u: &SpaceTimeFieldFn<'_>,
    constrain_inflow: bool,
    time_points: usize,
    order: ProjectionOrder,
) -> Result<SpaceTimeSolution> {
    let projector = Projector::a(space, stab, projection_options());
    let basis = DGTimeBasis::new(q);
    let (s, w) = gauss_legendre_unit(time_points.max(1));
    let nd = space.n_dofs();
    let coords = space.dof_coords();
    let sample = |t: f64| -> Result<(Vec<f64>, Vec<f64>)> {
        let b = projector.load(&|x, y| u(t, x, y))?;
        let g = if constrain_inflow {
            space.constrained_dofs().iter().map(|&c| u(t, coords[c][0], coords[c][1]).map(|v| v[0])).collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        Ok((b, g))
    };
    let mode = |g: Vec<f64>| if constrain_inflow { InflowMode::Values(g) } else { InflowMode::Unconstrained };
    let project_each = |vectors: &[Vec<f64>], end: &[f64]| -> Vec<Vec<f64>> {
        // Coefficient-wise π̃^t of a sampled vector-valued function.
        let len = end.len();
        let mut out = vec![vec![0.0; len]; q + 1];
        let mut samples = vec![0.0; vectors.len()];
        for i in 0..len {
            for (sv, v) in samples.iter_mut().zip(vectors) {
                *sv = v[i];
            }
            for (a, c) in basis.project_samples(&s, &w, &samples, end[i]).into_iter().enumerate() {
                out[a][i] = c;
            }
        }
        out
    };

    let (b0, g0) = sample(partition.start(0))?;
    let initial = projector.solve_load(&b0, &mode(g0))?;
    let mut slabs = Vec::with_capacity(partition.n_slabs());
    for n in 0..partition.n_slabs() {
        let (t0, k) = (partition.start(n), partition.step(n));
        let mut loads = Vec::with_capacity(s.len());
        for &sg in &s {
            loads.push(sample(t0 + k * sg)?);
        }
        let end = sample(t0 + k)?;
        let coeffs = match order {
            ProjectionOrder::SpaceFirst => {
                let fields = loads
                    .into_iter()
                    .map(|(b, g)| projector.solve_load(&b, &mode(g)))
                    .collect::<Result<Vec<_>>>()?;
                let end_field = projector.solve_load(&end.0, &mode(end.1))?;
                project_each(&fields, &end_field)
            }
            ProjectionOrder::TimeFirst => {
                let bs: Vec<Vec<f64>> = loads.iter().map(|(b, _)| b.clone()).collect();
                let gs: Vec<Vec<f64>> = loads.into_iter().map(|(_, g)| g).collect();
                let bc = project_each(&bs, &end.0);
                let gc = project_each(&gs, &end.1);
                bc.into_iter()
                    .zip(gc)
                    .map(|(b, g)| projector.solve_load(&b, &mode(g)))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        slabs.push(coeffs.concat());
    }
    debug_assert!(slabs.iter().all(|c| c.len() == (q + 1) * nd));
    SpaceTimeSolution::from_parts(q, partition.clone(), initial, slabs)
}

/// Writes an endpoint field as `dof,value` rows.
pub fn write_snapshot_csv<W: Write>(mut w: W, values: &[f64]) -> Result<()> {
    writeln!(w, "dof,value")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(w, "{i},{v:e}")?;
    }
    Ok(())
}

/// Writes an endpoint field as legacy VTK point data on the dof nodes,
/// with the element vertices as triangle cells.
pub fn write_snapshot_vtk<W: Write>(mut w: W, space: &FESpace, values: &[f64], title: &str) -> Result<()> {
    let coords = space.dof_coords();
    let nt = space.mesh().n_elements();
    writeln!(w, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", coords.len())?;
    for [x, y] in coords {
        writeln!(w, "{x:e} {y:e} 0")?;
    }
    writeln!(w, "CELLS {nt} {}", 4 * nt)?;
    for t in 0..nt {
        let d = space.element_dofs(t);
        writeln!(w, "3 {} {} {}", d[0], d[1], d[2])?;
    }
    writeln!(w, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(w, "5")?;
    }
    writeln!(w, "POINT_DATA {}\nSCALARS u double 1\nLOOKUP_TABLE default", coords.len())?;
    for v in values {
        writeln!(w, "{v:e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::CaseDefinition;
    use crate::forms::assemble_a_mass;
    use crate::inverse::{compute_inverse_constants, InverseMode};
    use crate::linalg::{dense_lu_solve, SolverKind};
    use crate::mesh::Mesh;
    use crate::stab::StabConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn setup(n: usize, p: usize) -> (FESpace, StabParams) {
        let mesh = Arc::new(Mesh::structured_square(n).unwrap());
        let inv = compute_inverse_constants(&mesh, p, InverseMode::PerElement).unwrap();
        let stab = StabParams::new(&mesh, p, &inv, &StabConfig::default()).unwrap();
        (FESpace::new(mesh, p).unwrap(), stab)
    }

    fn dense_opts() -> SolverOptions {
        SolverOptions { kind: SolverKind::DenseLu, ..Default::default() }
    }

    #[test]
    fn partition_validation() {
        assert!(TimePartition::new(vec![0.0]).is_err());
        assert!(TimePartition::new(vec![0.0, 0.5, 0.5]).is_err());
        let p = TimePartition::uniform(0.0, 1.0, 4).unwrap();
        assert_eq!(p.n_slabs(), 4);
        assert_eq!(p.t_final(), 1.0);
        assert!((p.steps().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn time_matrices_satisfy_integration_by_parts() {
        for q in 0..5 {
            let b = DGTimeBasis::new(q);
            for i in 0..=q {
                for j in 0..=q {
                    let ends = DGTimeBasis::value(i, 1.0) * DGTimeBasis::value(j, 1.0)
                        - DGTimeBasis::value(i, 0.0) * DGTimeBasis::value(j, 0.0);
                    assert!((b.td[i][j] + b.td[j][i] - ends).abs() < 1e-12);
                    assert!((b.mass[i][j] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-13);
                    assert!((b.tdd[i][j] - b.tdd[j][i]).abs() < 1e-12);
                }
            }
        }
        assert_eq!(DGTimeBasis::new(0).td, vec![vec![0.0]]);
    }

    fn eval_poly(c: &[f64], s: f64) -> f64 {
        c.iter().enumerate().map(|(a, v)| v * DGTimeBasis::value(a, s)).sum()
    }

    #[test]
    fn time_projection_reproduces_polynomials() {
        let v = |t: f64| 1.0 - 2.0 * t + 3.0 * t * t;
        let c = time_project(&v, 0.25, 0.75, 2, 4);
        for s in [0.0, 0.3, 1.0] {
            assert!((eval_poly(&c, s) - v(0.25 + 0.5 * s)).abs() < 1e-13);
        }
        let c0 = time_project(&v, 0.25, 0.75, 0, 4);
        assert_eq!(c0, vec![v(0.75)]);
    }

    #[test]
    fn time_projection_moments_of_sine() {
        let (q, t0, t1) = (2, 0.0, 0.5);
        let c = time_project(&f64::sin, t0, t1, q, 8);
        assert!((eval_poly(&c, 1.0) - t1.sin()).abs() < 1e-14);
        // Moments against ℙ₁ with an independent 10-point rule on (0, 0.5).
        let (x, w) = crate::quadrature::gauss_legendre(10);
        for m in 0..q {
            let mut diff = 0.0;
            for (xg, wg) in x.iter().zip(&w) {
                let t = 0.25 * (xg + 1.0);
                let s = t / 0.5;
                diff += 0.25 * wg * (eval_poly(&c, s) - t.sin()) * t.powi(m as i32);
            }
            assert!(diff.abs() < 1e-12, "moment {m}: {diff}");
        }
    }

    #[test]
    fn q0_march_matches_implicit_euler() {
        let (space, stab) = setup(4, 2);
        let case = CaseDefinition::decay();
        let u0 = initial_state(&space, &stab, Method::Hypo, &|x, y| case.initial(x, y), &|_, _| Ok(0.0)).unwrap();
        let part = TimePartition::uniform(0.0, 0.3, 3).unwrap();
        let mut solver = SlabSolver::new(&space, &stab, Method::Hypo, 0, dense_opts()).unwrap();
        let sol = solver.march(&case, &part, u0.clone()).unwrap();

        let ops = solver.operators();
        let k = 0.1;
        let mut lhs = CsrMatrix::combine(&[(1.0, &ops.m_a), (k, &ops.k_gal), (k, &ops.k_ss), (k, &ops.k_hypo)]);
        lhs.set_identity_rows(space.constrained_dofs());
        let dense = lhs.to_dense();
        let mut u = u0;
        for n in 0..3 {
            let mut rhs = ops.m_a.mul_vec(&u);
            for &c in space.constrained_dofs() {
                rhs[c] = 0.0;
            }
            u = dense_lu_solve(&dense, &rhs).unwrap();
            let got = sol.right_limit(n);
            let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in got.iter().zip(&u) {
                assert!((a - b).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn homogeneous_march_decays_in_a_norm() {
        let (space, stab) = setup(4, 1);
        let case = CaseDefinition::decay();
        let ma = assemble_a_mass(&space, Some(&stab));
        let u0 = initial_state(&space, &stab, Method::Hypo, &|x, y| case.initial(x, y), &|_, _| Ok(0.0)).unwrap();
        let part = TimePartition::uniform(0.0, 2.0, 8).unwrap();
        for q in [0, 1] {
            let mut solver = SlabSolver::new(&space, &stab, Method::Hypo, q, SolverOptions::default()).unwrap();
            let sol = solver.march(&case, &part, u0.clone()).unwrap();
            let norms: Vec<f64> = sol.endpoint_values().iter().map(|v| ma.bilinear(v, v).sqrt()).collect();
            assert!(norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)), "{norms:?}");
            assert!(norms.last().unwrap() < &norms[0]);
            assert_eq!(sol.reports().len(), 8);
        }
    }

    /// Slab form by time quadrature of the spatial operators.
    fn slab_form_by_quadrature(solver: &SlabSolver, nd: usize, k: f64, u: &[f64], v: &[f64]) -> f64 {
        let q = solver.q();
        let ops = solver.operators();
        let a = ops.a_form();
        let part = TimePartition::new(vec![0.0, k]).unwrap();
        let us = SpaceTimeSolution::from_parts(q, part.clone(), vec![0.0; nd], vec![u.to_vec()]).unwrap();
        let vs = SpaceTimeSolution::from_parts(q, part, vec![0.0; nd], vec![v.to_vec()]).unwrap();
        let (s, w) = gauss_legendre_unit(q + 3);
        let mut total = ops.m_a.bilinear(&vs.left_limit(0), &us.left_limit(0));
        for (&sg, &wg) in s.iter().zip(&w) {
            let (uu, ut) = (us.eval(0, sg), us.eval_dt(0, sg));
            let (vv, vt) = (vs.eval(0, sg), vs.eval_dt(0, sg));
            total += wg
                * k
                * (ops.m_a.bilinear(&vv, &ut)
                    + a.bilinear(&vv, &uu)
                    + ops.k_ts.bilinear(&vv, &ut)
                    + ops.k_st.bilinear(&vt, &uu)
                    + ops.k_tt.bilinear(&vt, &ut));
        }
        total
    }

    #[test]
    fn block_assembly_matches_time_quadrature() {
        let (space, stab) = setup(2, 2);
        let nd = space.n_dofs();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for q in 0..3 {
            for method in [Method::Hypo, Method::Supg] {
                let solver = SlabSolver::new(&space, &stab, method, q, SolverOptions::default()).unwrap();
                let k = 0.37;
                let m = solver.slab_matrix_unconstrained(k);
                for _ in 0..3 {
                    let u: Vec<f64> = (0..(q + 1) * nd).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let v: Vec<f64> = (0..(q + 1) * nd).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let a = m.bilinear(&v, &u);
                    let b = slab_form_by_quadrature(&solver, nd, k, &u, &v);
                    assert!((a - b).abs() <= 1e-11 * b.abs().max(1.0), "q={q} {method}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn slab_residual_vanishes_and_inflow_is_imposed() {
        let (space, stab) = setup(4, 2);
        let case = CaseDefinition::instationary();
        let u0 = initial_state(&space, &stab, Method::Hypo, &|x, y| case.initial(x, y), &|x, y| case.inflow(0.0, x, y)).unwrap();
        let part = TimePartition::uniform(0.0, 0.2, 2).unwrap();
        let mut solver = SlabSolver::new(&space, &stab, Method::Hypo, 1, SolverOptions { tol: 1e-12, ..Default::default() }).unwrap();
        let sol = solver.march(&case, &part, u0).unwrap();
        let mut prev = sol.initial().to_vec();
        for n in 0..2 {
            let rhs = solver.slab_rhs(&case, part.start(n), part.step(n), &prev).unwrap();
            let r = solver.slab_matrix(part.step(n)).mul_vec(sol.slab(n));
            let rn: f64 = r.iter().zip(&rhs).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let bn: f64 = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(rn <= 1e-11 * bn);
            prev = sol.right_limit(n);
            let coords = space.dof_coords();
            for &c in space.constrained_dofs() {
                let g = case.inflow(part.end(n), coords[c][0], coords[c][1]).unwrap();
                assert!((prev[c] - g).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn st_projection_reproduces_discrete_fields_and_commutes() {
        let (space, stab) = setup(2, 2);
        let u = |t: f64, x: f64, y: f64| -> Result<[f64; 3]> {
            let a = 1.0 + t - t * t;
            Ok([a * (x + y * y - x * y), a * (1.0 - y), a * (2.0 * y - x)])
        };
        let part = TimePartition::uniform(0.0, 1.0, 3).unwrap();
        let a = st_project(&space, &stab, &part, 2, &u, false, 5, ProjectionOrder::SpaceFirst).unwrap();
        let b = st_project(&space, &stab, &part, 2, &u, false, 5, ProjectionOrder::TimeFirst).unwrap();
        for n in 0..3 {
            for s in [0.0, 0.4, 1.0] {
                let t = part.start(n) + part.step(n) * s;
                let exact = space.interpolate(|x, y| u(t, x, y).unwrap()[0]);
                for (x, e) in a.eval(n, s).iter().zip(&exact) {
                    assert!((x - e).abs() < 1e-10);
                }
            }
            for (x, y) in a.slab(n).iter().zip(b.slab(n)) {
                assert!((x - y).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn snapshot_csv_layout() {
        let mut buf = Vec::new();
        write_snapshot_csv(&mut buf, &[1.0, -0.5]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "dof,value\n0,1e0\n1,-5e-1\n");
        let (space, _) = setup(1, 1);
        let mut vtk = Vec::new();
        write_snapshot_vtk(&mut vtk, &space, &vec![0.0; space.n_dofs()], "u").unwrap();
        let text = String::from_utf8(vtk).unwrap();
        assert!(text.contains("CELLS 2 8"));
        assert!(text.contains("POINT_DATA 4"));
    }
}
