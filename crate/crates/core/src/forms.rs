//! Assembly of the spatial bilinear forms and right-hand sides.
//!
//! Matrices are indexed (test i, trial j). With Lφ = −φ_xx + x φ_y:
//!
//! * `m`      (φ_j, φ_i)
//! * `m_a`    (φ_j, φ_i) + (∇φ_j, A∇φ_i)
//! * `k_gal`  (∂ₓφ_j, ∂ₓφ_i) + (x ∂ᵧφ_j, φ_i)
//! * `k_ss`   Σ_T (Lφ_j, τ x ∂ᵧφ_i)
//! * `k_st`   Σ_T (Lφ_j, τ φ_i), paired with the test time derivative
//! * `k_ts`   Σ_T (φ_j, τ x ∂ᵧφ_i), paired with the trial time derivative
//! * `k_tt`   Σ_T (φ_j, τ φ_i), paired with both time derivatives
//! * `k_hypo` Σ_T (∇Lφ_j, A∇φ_i)

use rayon::prelude::*;

use crate::basis::N_DERIV;
use crate::error::{Error, Result};
use crate::fespace::{FESpace, PointTables};
use crate::linalg::CsrMatrix;
use crate::quadrature::TriangleRule;
use crate::stab::{Method, StabParams};

/// Quadrature degree for right-hand sides and error integrals.
pub const RHS_DEGREE: usize = 12;

const CHUNK: usize = 512;

/// Data of an initial-boundary value problem beyond the initial datum.
pub trait ProblemData: Sync {
    /// (f, ∂ₓf, ∂ᵧf) at (t, x, y).
    fn source(&self, t: f64, x: f64, y: f64) -> Result<[f64; 3]>;

    /// Whether f ≡ 0, allowing source assembly to be skipped.
    fn source_is_zero(&self) -> bool {
        false
    }

    /// Whether f does not depend on t, so one evaluation serves all times.
    fn source_is_steady(&self) -> bool {
        false
    }

    /// Inflow datum g(t, x, y).
    fn inflow(&self, t: f64, x: f64, y: f64) -> Result<f64>;
}

#[derive(Clone, Debug)]
pub struct SpatialOperators {
    pub m: CsrMatrix,
    pub m_a: CsrMatrix,
    pub k_gal: CsrMatrix,
    pub k_ss: CsrMatrix,
    pub k_st: CsrMatrix,
    pub k_ts: CsrMatrix,
    pub k_tt: CsrMatrix,
    pub k_hypo: CsrMatrix,
}

impl SpatialOperators {
    /// The spatial form a_h with vanishing time derivatives: K_gal + K_ss + K_hypo.
    pub fn a_form(&self) -> CsrMatrix {
        CsrMatrix::combine(&[(1.0, &self.k_gal), (1.0, &self.k_ss), (1.0, &self.k_hypo)])
    }
}

/// Adds dense element blocks into matrices sharing `pattern`.
fn scatter(pattern: &CsrMatrix, dofs: &[usize], local: &[f64], targets: &mut [&mut [f64]]) {
    let n = dofs.len();
    let ip = pattern.indptr();
    let idx = pattern.indices();
    for (i, &gi) in dofs.iter().enumerate() {
        let row = &idx[ip[gi]..ip[gi + 1]];
        for (j, &gj) in dofs.iter().enumerate() {
            let pos = ip[gi] + row.binary_search(&gj).expect("entry in pattern");
            for (m, target) in targets.iter_mut().enumerate() {
                target[pos] += local[(m * n + i) * n + j];
            }
        }
    }
}

/// Assembles all spatial operators for `method` (inactive terms are zero).
///
/// `quad_degree` defaults to 2p + 3; at least 2p is needed for exactness.
pub fn assemble_spatial(
    space: &FESpace,
    stab: &StabParams,
    method: Method,
    quad_degree: Option<usize>,
) -> Result<SpatialOperators> {
    let p = space.degree();
    let degree = quad_degree.unwrap_or(2 * p + 3);
    if degree < 2 * p {
        return Err(Error::QuadratureDegree { have: degree, need: 2 * p });
    }
    let stab = stab.restricted(method);
    let rule = TriangleRule::with_degree(degree);
    let tables = PointTables::volume(space.basis(), &rule);
    let mesh = space.mesh();
    let n = space.n_local();
    let pattern = space.sparsity_pattern();
    let nnz = pattern.nnz();
    const NM: usize = 8;
    let mut data: Vec<Vec<f64>> = (0..NM).map(|_| vec![0.0; nnz]).collect();

    let element = |t: usize| -> Vec<f64> {
        let mut local = vec![0.0; NM * n * n];
        let mut phys = Vec::new();
        space.physical_tables(t, &tables, 3, &mut phys);
        let (x0, jac, det) = mesh.affine(t);
        let es = stab.element(t);
        let [[al, be], [_, ga]] = es.a_matrix();
        let tau = es.tau;
        let mut lv = vec![0.0; n];
        let mut glx = vec![0.0; n];
        let mut gly = vec![0.0; n];
        let mut avx = vec![0.0; n];
        let mut avy = vec![0.0; n];
        for (q, (xi, wq)) in tables.points.iter().zip(&tables.weights).enumerate() {
            let x = x0[0] + jac[0][0] * xi[0] + jac[0][1] * xi[1];
            let w = wq * det.abs();
            let d = &phys[q * N_DERIV * n..(q + 1) * N_DERIV * n];
            let (v, vx, vy) = (&d[0..n], &d[n..2 * n], &d[2 * n..3 * n]);
            let (vxx, vxy, vyy) = (&d[3 * n..4 * n], &d[4 * n..5 * n], &d[5 * n..6 * n]);
            let (vxxx, vxxy) = (&d[6 * n..7 * n], &d[7 * n..8 * n]);
            for k in 0..n {
                lv[k] = -vxx[k] + x * vy[k];
                glx[k] = -vxxx[k] + vy[k] + x * vxy[k];
                gly[k] = -vxxy[k] + x * vyy[k];
                avx[k] = al * vx[k] + be * vy[k];
                avy[k] = be * vx[k] + ga * vy[k];
            }
            for i in 0..n {
                let (vi, vxi, xvyi) = (v[i], vx[i], x * vy[i]);
                for j in 0..n {
                    let base = i * n + j;
                    let (vj, vxj, vyj) = (v[j], vx[j], vy[j]);
                    local[base] += w * (vi * vj);
                    local[n * n + base] += w * (vi * vj + vxj * avx[i] + vyj * avy[i]);
                    local[2 * n * n + base] += w * (vxj * vxi + x * vyj * vi);
                    local[3 * n * n + base] += w * tau * lv[j] * xvyi;
                    local[4 * n * n + base] += w * tau * lv[j] * vi;
                    local[5 * n * n + base] += w * tau * vj * xvyi;
                    local[6 * n * n + base] += w * tau * vj * vi;
                    local[7 * n * n + base] += w * (glx[j] * avx[i] + gly[j] * avy[i]);
                }
            }
        }
        local
    };

    let nt = mesh.n_elements();
    for start in (0..nt).step_by(CHUNK) {
        let end = (start + CHUNK).min(nt);
        let blocks: Vec<Vec<f64>> = (start..end).into_par_iter().map(element).collect();
        let mut targets: Vec<&mut [f64]> = data.iter_mut().map(|d| d.as_mut_slice()).collect();
        for (t, local) in (start..end).zip(&blocks) {
            scatter(&pattern, space.element_dofs(t), local, &mut targets);
        }
    }

    let mut mats = data.into_iter().map(|d| {
        let mut m = pattern.clone();
        m.data_mut().copy_from_slice(&d);
        m
    });
    let mut next = || mats.next().unwrap();
    Ok(SpatialOperators {
        m: next(),
        m_a: next(),
        k_gal: next(),
        k_ss: next(),
        k_st: next(),
        k_ts: next(),
        k_tt: next(),
        k_hypo: next(),
    })
}

/// Mass and stiffness (∇φ_j, ∇φ_i) matrices.
pub fn assemble_mass_stiffness(space: &FESpace) -> (CsrMatrix, CsrMatrix) {
    let p = space.degree();
    let rule = TriangleRule::with_degree(2 * p);
    let tables = PointTables::volume(space.basis(), &rule);
    let mesh = space.mesh();
    let n = space.n_local();
    let pattern = space.sparsity_pattern();
    let mut m = vec![0.0; pattern.nnz()];
    let mut s = vec![0.0; pattern.nnz()];
    let mut phys = Vec::new();
    let mut local = vec![0.0; 2 * n * n];
    for t in 0..mesh.n_elements() {
        space.physical_tables(t, &tables, 1, &mut phys);
        let det = mesh.affine(t).2.abs();
        local.iter_mut().for_each(|v| *v = 0.0);
        for (q, wq) in tables.weights.iter().enumerate() {
            let d = &phys[q * N_DERIV * n..];
            let w = wq * det;
            for i in 0..n {
                for j in 0..n {
                    local[i * n + j] += w * d[i] * d[j];
                    local[n * n + i * n + j] += w * (d[n + i] * d[n + j] + d[2 * n + i] * d[2 * n + j]);
                }
            }
        }
        scatter(&pattern, space.element_dofs(t), &local, &mut [&mut m, &mut s]);
    }
    let mut mm = pattern.clone();
    mm.data_mut().copy_from_slice(&m);
    let mut sm = pattern;
    sm.data_mut().copy_from_slice(&s);
    (mm, sm)
}

/// The A-inner product matrix (φ_j, φ_i) + (∇φ_j, A∇φ_i); `None` gives the mass matrix.
pub fn assemble_a_mass(space: &FESpace, a_weights: Option<&StabParams>) -> CsrMatrix {
    let p = space.degree();
    let rule = TriangleRule::with_degree(2 * p);
    let tables = PointTables::volume(space.basis(), &rule);
    let mesh = space.mesh();
    let n = space.n_local();
    let pattern = space.sparsity_pattern();
    let mut m = vec![0.0; pattern.nnz()];
    let mut phys = Vec::new();
    let mut local = vec![0.0; n * n];
    for t in 0..mesh.n_elements() {
        space.physical_tables(t, &tables, 1, &mut phys);
        let det = mesh.affine(t).2.abs();
        let a = a_weights.map_or([[0.0; 2]; 2], |s| s.element(t).a_matrix());
        local.iter_mut().for_each(|v| *v = 0.0);
        for (q, wq) in tables.weights.iter().enumerate() {
            let d = &phys[q * N_DERIV * n..];
            let w = wq * det;
            for i in 0..n {
                let avx = a[0][0] * d[n + i] + a[0][1] * d[2 * n + i];
                let avy = a[1][0] * d[n + i] + a[1][1] * d[2 * n + i];
                for j in 0..n {
                    local[i * n + j] += w * (d[i] * d[j] + d[n + j] * avx + d[2 * n + j] * avy);
                }
            }
        }
        scatter(&pattern, space.element_dofs(t), &local, &mut [&mut m]);
    }
    let mut out = pattern;
    out.data_mut().copy_from_slice(&m);
    out
}

/// Load vector (f, φ_i) + (∇f, A∇φ_i) for a field returning (f, ∂ₓf, ∂ᵧf);
/// `a_weights = None` gives the plain L₂ load.
pub fn load_vector(space: &FESpace, a_weights: Option<&StabParams>, f: &(dyn Fn(f64, f64) -> Result<[f64; 3]> + Sync)) -> Result<Vec<f64>> {
    let rule = TriangleRule::with_degree(RHS_DEGREE);
    let tables = PointTables::volume(space.basis(), &rule);
    let mesh = space.mesh();
    let n = space.n_local();
    let mut out = vec![0.0; space.n_dofs()];
    let mut phys = Vec::new();
    for t in 0..mesh.n_elements() {
        space.physical_tables(t, &tables, 1, &mut phys);
        let (x0, jac, det) = mesh.affine(t);
        let a = a_weights.map_or([[0.0; 2]; 2], |s| s.element(t).a_matrix());
        let dofs = space.element_dofs(t);
        for (q, (xi, wq)) in tables.points.iter().zip(&tables.weights).enumerate() {
            let x = x0[0] + jac[0][0] * xi[0] + jac[0][1] * xi[1];
            let y = x0[1] + jac[1][0] * xi[0] + jac[1][1] * xi[1];
            let [fv, fx, fy] = f(x, y)?;
            let w = wq * det.abs();
            let (gx, gy) = (a[0][0] * fx + a[0][1] * fy, a[1][0] * fx + a[1][1] * fy);
            let d = &phys[q * N_DERIV * n..];
            for (i, &g) in dofs.iter().enumerate() {
                out[g] += w * (fv * d[i] + gx * d[n + i] + gy * d[2 * n + i]);
            }
        }
    }
    Ok(out)
}

/// Source functionals at several times in one pass over the mesh.
///
/// For each time t returns (r₁, r₂) with
/// r₁ᵢ = ⟨f, φ_i⟩_A + (f, τ x ∂ᵧφ_i) and r₂ᵢ = (f, τ φ_i).
pub fn assemble_rhs_multi(
    space: &FESpace,
    stab: &StabParams,
    data: &dyn ProblemData,
    times: &[f64],
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let nd = space.n_dofs();
    let mut out: Vec<(Vec<f64>, Vec<f64>)> = times.iter().map(|_| (vec![0.0; nd], vec![0.0; nd])).collect();
    if data.source_is_zero() {
        return Ok(out);
    }
    let rule = TriangleRule::with_degree(RHS_DEGREE);
    let tables = PointTables::volume(space.basis(), &rule);
    let mesh = space.mesh();
    let n = space.n_local();
    let nt = mesh.n_elements();
    let nq = tables.len();
    let element = |t: usize| -> Result<Vec<f64>> {
        // local[(ti * 2 + r) * n + i]
        let mut local = vec![0.0; times.len() * 2 * n];
        let mut phys = Vec::new();
        space.physical_tables(t, &tables, 1, &mut phys);
        let (x0, jac, det) = mesh.affine(t);
        let es = stab.element(t);
        let a = es.a_matrix();
        for q in 0..nq {
            let xi = tables.points[q];
            let x = x0[0] + jac[0][0] * xi[0] + jac[0][1] * xi[1];
            let y = x0[1] + jac[1][0] * xi[0] + jac[1][1] * xi[1];
            let w = tables.weights[q] * det.abs();
            let d = &phys[q * N_DERIV * n..];
            let mut steady = None;
            for (ti, &tt) in times.iter().enumerate() {
                let [fv, fx, fy] = match steady {
                    Some(f) => f,
                    None => {
                        let f = data.source(tt, x, y)?;
                        if data.source_is_steady() {
                            steady = Some(f);
                        }
                        f
                    }
                };
                let (gx, gy) = (a[0][0] * fx + a[0][1] * fy, a[1][0] * fx + a[1][1] * fy);
                let base = ti * 2 * n;
                for i in 0..n {
                    local[base + i] += w * (fv * d[i] + gx * d[n + i] + gy * d[2 * n + i] + es.tau * fv * x * d[2 * n + i]);
                    local[base + n + i] += w * es.tau * fv * d[i];
                }
            }
        }
        Ok(local)
    };
    for start in (0..nt).step_by(CHUNK) {
        let end = (start + CHUNK).min(nt);
        let blocks: Vec<Result<Vec<f64>>> = (start..end).into_par_iter().map(element).collect();
        for (t, local) in (start..end).zip(blocks) {
            let local = local?;
            let dofs = space.element_dofs(t);
            for (ti, (r1, r2)) in out.iter_mut().enumerate() {
                let base = ti * 2 * n;
                for (i, &g) in dofs.iter().enumerate() {
                    r1[g] += local[base + i];
                    r2[g] += local[base + n + i];
                }
            }
        }
    }
    Ok(out)
}

/// Source functionals at a single time.
pub fn assemble_rhs(space: &FESpace, stab: &StabParams, data: &dyn ProblemData, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok(assemble_rhs_multi(space, stab, data, &[t])?.pop().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inverse::{compute_inverse_constants, InverseMode};
    use crate::mesh::Mesh;
    use crate::stab::StabConfig;
    use std::sync::Arc;

    fn setup(n: usize, p: usize) -> (FESpace, StabParams) {
        let mesh = Arc::new(Mesh::structured_square(n).unwrap());
        let inv = compute_inverse_constants(&mesh, p, InverseMode::PerElement).unwrap();
        let stab = StabParams::new(&mesh, p, &inv, &StabConfig::default()).unwrap();
        (FESpace::new(mesh, p).unwrap(), stab)
    }

    struct Const(f64);
    impl ProblemData for Const {
        fn source(&self, _: f64, _: f64, _: f64) -> Result<[f64; 3]> {
            Ok([self.0, 0.0, 0.0])
        }
        fn source_is_zero(&self) -> bool {
            self.0 == 0.0
        }
        fn inflow(&self, _: f64, _: f64, _: f64) -> Result<f64> {
            Ok(0.0)
        }
    }

    #[test]
    fn constant_field_annihilates_galerkin_form() {
        let (space, stab) = setup(4, 2);
        let ops = assemble_spatial(&space, &stab, Method::Hypo, None).unwrap();
        let one = vec![1.0; space.n_dofs()];
        assert!(ops.k_gal.bilinear(&one, &one).abs() < 1e-13);
        assert!((ops.m.bilinear(&one, &one) - 1.0).abs() < 1e-13);
        assert!((ops.m_a.bilinear(&one, &one) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn galerkin_collapses_to_k_gal() {
        let (space, stab) = setup(2, 2);
        let ops = assemble_spatial(&space, &stab, Method::Galerkin, None).unwrap();
        for m in [&ops.k_ss, &ops.k_st, &ops.k_ts, &ops.k_tt, &ops.k_hypo] {
            assert!(m.data().iter().all(|v| *v == 0.0));
        }
        assert_eq!(ops.m, ops.m_a);
        let supg = assemble_spatial(&space, &stab, Method::Supg, None).unwrap();
        assert_eq!(supg.m, supg.m_a);
        assert!(supg.k_hypo.data().iter().all(|v| *v == 0.0));
        assert!(supg.k_tt.data().iter().any(|v| *v != 0.0));
    }

    #[test]
    fn p1_hypo_term_reduces_to_transport_coupling() {
        // For ℙ₁, ∇L φ_j = (∂ᵧφ_j, 0), so K_hypo(i,j) = Σ_T ∂ᵧφ_j (α ∂ₓφ_i + β ∂ᵧφ_i) |T|.
        let (space, stab) = setup(2, 1);
        let ops = assemble_spatial(&space, &stab, Method::Hypo, None).unwrap();
        let mut t = Vec::new();
        let mesh = space.mesh();
        for e in 0..mesh.n_elements() {
            let s = stab.element(e);
            let area = mesh.area(e);
            let dofs = space.element_dofs(e);
            let grads: Vec<[f64; 3]> = (0..3)
                .map(|k| {
                    let mut c = vec![0.0; space.n_dofs()];
                    c[dofs[k]] = 1.0;
                    space.eval_all(&c, e, [0.3, 0.3])[..3].try_into().unwrap()
                })
                .collect();
            for i in 0..3 {
                for j in 0..3 {
                    t.push((dofs[i], dofs[j], area * grads[j][2] * (s.alpha * grads[i][1] + s.beta * grads[i][2])));
                }
            }
        }
        let oracle = CsrMatrix::from_triplets(space.n_dofs(), space.n_dofs(), t);
        for r in 0..space.n_dofs() {
            for c in 0..space.n_dofs() {
                assert!((oracle.get(r, c) - ops.k_hypo.get(r, c)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn insufficient_quadrature_is_rejected() {
        let (space, stab) = setup(1, 3);
        assert!(matches!(
            assemble_spatial(&space, &stab, Method::Hypo, Some(5)),
            Err(Error::QuadratureDegree { have: 5, need: 6 })
        ));
    }

    #[test]
    fn rhs_of_unit_source() {
        let (space, stab) = setup(4, 2);
        let (r1, r2) = assemble_rhs(&space, &stab.restricted(Method::Galerkin), &Const(1.0), 0.0).unwrap();
        assert!((r1.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        assert!(r2.iter().all(|v| *v == 0.0));
        let (z1, z2) = assemble_rhs(&space, &stab, &Const(0.0), 0.0).unwrap();
        assert!(z1.iter().chain(&z2).all(|v| *v == 0.0));
    }
}
