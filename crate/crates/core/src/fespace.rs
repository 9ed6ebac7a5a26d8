//! Continuous degree-p Lagrange spaces on a triangulation.

use std::sync::Arc;

use crate::basis::{deriv_index, DerivTransform, LagrangeBasis, NodeKind, N_DERIV};
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::{BoundaryClass, Mesh};
use crate::quadrature::{LineRule, TriangleRule};

/// Reference basis derivatives (orders ≤ 3) tabulated at fixed reference points.
#[derive(Clone, Debug)]
pub struct PointTables {
    pub points: Vec<[f64; 2]>,
    /// Reference weights (area weights for volume rules, parameter weights on [0,1] for edges).
    pub weights: Vec<f64>,
    n: usize,
    data: Vec<f64>,
}

impl PointTables {
    pub fn new(basis: &LagrangeBasis, points: Vec<[f64; 2]>, weights: Vec<f64>) -> Self {
        let n = basis.len();
        let mut data = vec![0.0; points.len() * N_DERIV * n];
        for (i, x) in points.iter().enumerate() {
            basis.eval_all(*x, &mut data[i * N_DERIV * n..(i + 1) * N_DERIV * n]);
        }
        Self { points, weights, n, data }
    }

    pub fn volume(basis: &LagrangeBasis, rule: &TriangleRule) -> Self {
        Self::new(basis, rule.points.clone(), rule.weights.clone())
    }

    /// Points of a line rule placed on local edge `e` of the reference triangle.
    pub fn edge(basis: &LagrangeBasis, e: usize, rule: &LineRule) -> Self {
        let v = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let (a, b) = (v[(e + 1) % 3], v[(e + 2) % 3]);
        let pts = rule.points.iter().map(|s| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]).collect();
        Self::new(basis, pts, rule.weights.clone())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_basis(&self) -> usize {
        self.n
    }

    /// Reference table at point `i`, laid out as [derivative][basis].
    pub fn reference(&self, i: usize) -> &[f64] {
        &self.data[i * N_DERIV * self.n..(i + 1) * N_DERIV * self.n]
    }
}

#[derive(Clone, Debug)]
pub struct FESpace {
    mesh: Arc<Mesh>,
    basis: LagrangeBasis,
    n_dofs: usize,
    elem_dofs: Vec<usize>,
    constrained: Vec<bool>,
    constrained_list: Vec<usize>,
    free_list: Vec<usize>,
    dof_coords: Vec<[f64; 2]>,
    transforms: Vec<DerivTransform>,
}

impl FESpace {
    pub fn new(mesh: Arc<Mesh>, p: usize) -> Result<Self> {
        let basis = LagrangeBasis::new(p)?;
        let nloc = basis.len();
        let nt = mesh.n_elements();
        let mut vertex_dof = vec![usize::MAX; mesh.n_vertices()];
        let per_edge = p - 1;
        let mut edge_dof = vec![usize::MAX; mesh.facets().len() * per_edge];
        let mut elem_dofs = Vec::with_capacity(nt * nloc);
        let mut dof_coords = Vec::new();
        let mut next = 0usize;
        for t in 0..nt {
            let tri = mesh.triangles()[t];
            let facets = mesh.element_facets(t);
            for (k, kind) in basis.node_kinds().iter().enumerate() {
                let slot = match *kind {
                    NodeKind::Vertex(v) => &mut vertex_dof[tri[v]],
                    NodeKind::Edge { edge, index } => {
                        let (ga, gb) = (tri[(edge + 1) % 3], tri[(edge + 2) % 3]);
                        let pos = if ga < gb { index } else { p - index };
                        &mut edge_dof[facets[edge] * per_edge + pos - 1]
                    }
                    NodeKind::Interior => {
                        elem_dofs.push(next);
                        dof_coords.push(mesh.map_point(t, basis.nodes()[k]));
                        next += 1;
                        continue;
                    }
                };
                if *slot == usize::MAX {
                    *slot = next;
                    dof_coords.push(mesh.map_point(t, basis.nodes()[k]));
                    next += 1;
                }
                elem_dofs.push(*slot);
            }
        }

        let mut constrained = vec![false; next];
        for (f, facet) in mesh.facets().iter().enumerate() {
            if facet.class != Some(BoundaryClass::Inflow) {
                continue;
            }
            for v in facet.vertices {
                constrained[vertex_dof[v]] = true;
            }
            for d in &edge_dof[f * per_edge..(f + 1) * per_edge] {
                constrained[*d] = true;
            }
        }
        let constrained_list = (0..next).filter(|&d| constrained[d]).collect();
        let free_list = (0..next).filter(|&d| !constrained[d]).collect();
        let transforms = (0..nt).map(|t| DerivTransform::new(mesh.affine(t).1)).collect();
        Ok(Self {
            mesh,
            basis,
            n_dofs: next,
            elem_dofs,
            constrained,
            constrained_list,
            free_list,
            dof_coords,
            transforms,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn basis(&self) -> &LagrangeBasis {
        &self.basis
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_local(&self) -> usize {
        self.basis.len()
    }

    pub fn element_dofs(&self, t: usize) -> &[usize] {
        let n = self.basis.len();
        &self.elem_dofs[t * n..(t + 1) * n]
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.constrained[dof]
    }

    pub fn constrained_dofs(&self) -> &[usize] {
        &self.constrained_list
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free_list
    }

    pub fn dof_coords(&self) -> &[[f64; 2]] {
        &self.dof_coords
    }

    pub fn transform(&self, t: usize) -> &DerivTransform {
        &self.transforms[t]
    }

    /// Nodal interpolant of a function.
    pub fn interpolate(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.dof_coords.iter().map(|x| f(x[0], x[1])).collect()
    }

    /// Physical basis derivatives of orders ≤ `max_order` at every point of
    /// `tables` on element `t`; `out` is laid out [point][derivative][basis].
    pub fn physical_tables(&self, t: usize, tables: &PointTables, max_order: usize, out: &mut Vec<f64>) {
        let n = self.basis.len();
        let stride = N_DERIV * n;
        out.resize(tables.len() * stride, 0.0);
        let tr = &self.transforms[t];
        for i in 0..tables.len() {
            tr.apply(tables.reference(i), n, max_order, &mut out[i * stride..(i + 1) * stride]);
        }
    }

    /// All physical derivatives (orders ≤ 3) of a discrete field at reference point ξ of element `t`.
    pub fn eval_all(&self, coeffs: &[f64], t: usize, xi: [f64; 2]) -> [f64; N_DERIV] {
        let n = self.basis.len();
        let mut reference = vec![0.0; N_DERIV * n];
        self.basis.eval_all(xi, &mut reference);
        let mut phys = vec![0.0; N_DERIV * n];
        self.transforms[t].apply(&reference, n, 3, &mut phys);
        let dofs = self.element_dofs(t);
        let mut out = [0.0; N_DERIV];
        for (d, o) in out.iter_mut().enumerate() {
            *o = phys[d * n..(d + 1) * n].iter().zip(dofs).map(|(v, &g)| v * coeffs[g]).sum();
        }
        out
    }

    /// Physical derivative ∂^(a,b) of a discrete field at reference point ξ of element `t`.
    pub fn eval_field(&self, coeffs: &[f64], t: usize, xi: [f64; 2], a: usize, b: usize) -> Result<f64> {
        let d = deriv_index(a, b)?;
        if t >= self.mesh.n_elements() {
            return Err(Error::InvalidArgument(format!("element {t} does not exist")));
        }
        Ok(self.eval_all(coeffs, t, xi)[d])
    }

    /// Zero matrix with the sparsity of the dof connectivity graph.
    pub fn sparsity_pattern(&self) -> CsrMatrix {
        let n = self.n_dofs;
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for t in 0..self.mesh.n_elements() {
            let dofs = self.element_dofs(t);
            for &i in dofs {
                rows[i].extend_from_slice(dofs);
            }
        }
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        indptr.push(0);
        for r in rows.iter_mut() {
            r.sort_unstable();
            r.dedup();
            indices.extend_from_slice(r);
            indptr.push(indices.len());
        }
        let nnz = indices.len();
        CsrMatrix::from_raw(n, n, indptr, indices, vec![0.0; nnz]).expect("pattern is well formed")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn space(n: usize, p: usize) -> FESpace {
        FESpace::new(Arc::new(Mesh::structured_square(n).unwrap()), p).unwrap()
    }

    #[test]
    fn dof_counts() {
        for n in 1..5 {
            for p in 1..5 {
                let s = space(n, p);
                assert_eq!(s.n_dofs(), (p * n + 1) * (p * n + 1));
                // Bottom edge nodes are the inflow closure.
                assert_eq!(s.constrained_dofs().len(), p * n + 1);
                for &d in s.constrained_dofs() {
                    assert_eq!(s.dof_coords()[d][1], 0.0);
                }
            }
        }
    }

    #[test]
    fn constant_and_linear_fields() {
        let s = space(3, 2);
        let one = vec![1.0; s.n_dofs()];
        let x = s.interpolate(|x, _| x);
        for t in 0..s.mesh().n_elements() {
            assert!(s.eval_field(&one, t, [0.2, 0.3], 1, 0).unwrap().abs() < 1e-12);
            assert!((s.eval_field(&x, t, [0.2, 0.3], 1, 0).unwrap() - 1.0).abs() < 1e-12);
            assert!(s.eval_field(&x, t, [0.2, 0.3], 0, 1).unwrap().abs() < 1e-12);
        }
        assert!(matches!(s.eval_field(&one, 0, [0.2, 0.3], 4, 0), Err(Error::DerivativeOrder(4, 0))));
    }

    #[test]
    fn mixed_derivative_matches_finite_differences() {
        let s = space(2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c: Vec<f64> = (0..s.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let t = 3;
        let xi = [0.3, 0.25];
        let x = s.mesh().map_point(t, xi);
        let f = |px: f64, py: f64| s.eval_field(&c, t, s.mesh().inverse_map(t, [px, py]), 0, 0).unwrap();
        let h = 1e-3;
        // ∂²ₓ∂ᵧ by nested central differences (exact up to rounding for cubics).
        let dxx = |py: f64| (f(x[0] + h, py) - 2.0 * f(x[0], py) + f(x[0] - h, py)) / (h * h);
        let fd = (dxx(x[1] + h) - dxx(x[1] - h)) / (2.0 * h);
        let exact = s.eval_field(&c, t, xi, 2, 1).unwrap();
        assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(1.0), "{fd} vs {exact}");
    }

    #[test]
    fn fields_are_continuous_across_facets() {
        let s = space(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c: Vec<f64> = (0..s.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m = s.mesh();
        for f in m.facets().iter().filter(|f| f.interior) {
            let (t0, e0) = f.elements[0];
            let (t1, _) = f.elements[1];
            let [a, b] = m.edge_endpoints(t0, e0);
            for sgl in [0.1, 0.5, 0.77] {
                let x = [a[0] + sgl * (b[0] - a[0]), a[1] + sgl * (b[1] - a[1])];
                let v0 = s.eval_field(&c, t0, m.inverse_map(t0, x), 0, 0).unwrap();
                let v1 = s.eval_field(&c, t1, m.inverse_map(t1, x), 0, 0).unwrap();
                assert!((v0 - v1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pattern_contains_element_couplings() {
        let s = space(2, 2);
        let pat = s.sparsity_pattern();
        for t in 0..s.mesh().n_elements() {
            for &i in s.element_dofs(t) {
                for &j in s.element_dofs(t) {
                    assert!(pat.row(i).0.binary_search(&j).is_ok());
                }
            }
        }
    }
}
