//! Sharp inverse and trace-inverse constants of ℙ_p on triangles.
//!
//! For v ∈ ℙ_p(T):
//!   ‖∇v‖_T ≤ C_INV p² h_T⁻¹ ‖v‖_T,   ‖v‖_∂T ≤ C_inv p h_T^{−1/2} ‖v‖_T,
//! with the constants taken from the largest generalised eigenvalue of the
//! element stiffness (resp. boundary mass) against the element mass.

use std::collections::HashMap;

use crate::basis::{DerivTransform, LagrangeBasis, N_DERIV};
use crate::error::{Error, Result};
use crate::linalg::{eigen_largest_generalized, DenseMatrix};
use crate::mesh::Mesh;
use crate::quadrature::{LineRule, TriangleRule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum InverseMode {
    /// Sharp constants per element.
    #[default]
    PerElement,
    /// The worst case over the mesh, used on every element.
    GlobalMax,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InverseConstants {
    /// C_INV per element.
    pub grad: Vec<f64>,
    /// C_inv per element.
    pub trace: Vec<f64>,
}

/// Element mass, stiffness and boundary mass matrices over ℙ_p(T).
pub fn element_matrices(coords: [[f64; 2]; 3], p: usize) -> Result<(DenseMatrix, DenseMatrix, DenseMatrix)> {
    let basis = LagrangeBasis::new(p)?;
    let n = basis.len();
    let jac = [
        [coords[1][0] - coords[0][0], coords[2][0] - coords[0][0]],
        [coords[1][1] - coords[0][1], coords[2][1] - coords[0][1]],
    ];
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    let scale = (jac[0][0].hypot(jac[1][0])).max(jac[0][1].hypot(jac[1][1]));
    if det.abs() <= 1e-14 * scale * scale || !det.is_finite() {
        return Err(Error::DegenerateElement(0));
    }
    let tr = DerivTransform::new(jac);
    let rule = TriangleRule::with_degree(2 * p);
    let mut m = DenseMatrix::zeros(n, n);
    let mut s = DenseMatrix::zeros(n, n);
    let mut b = DenseMatrix::zeros(n, n);
    let mut reference = vec![0.0; N_DERIV * n];
    let mut phys = vec![0.0; N_DERIV * n];
    for (x, w) in rule.points.iter().zip(&rule.weights) {
        basis.eval_all(*x, &mut reference);
        tr.apply(&reference, n, 1, &mut phys);
        let wd = w * det.abs();
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += wd * phys[i] * phys[j];
                s[(i, j)] += wd * (phys[n + i] * phys[n + j] + phys[2 * n + i] * phys[2 * n + j]);
            }
        }
    }
    let line = LineRule::with_degree(2 * p);
    let rv = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let mut vals = vec![0.0; N_DERIV * n];
    for e in 0..3 {
        let (a, c) = ((e + 1) % 3, (e + 2) % 3);
        let len = (coords[c][0] - coords[a][0]).hypot(coords[c][1] - coords[a][1]);
        for (sp, w) in line.points.iter().zip(&line.weights) {
            let xi = [rv[a][0] + sp * (rv[c][0] - rv[a][0]), rv[a][1] + sp * (rv[c][1] - rv[a][1])];
            basis.eval_all(xi, &mut vals);
            for i in 0..n {
                for j in 0..n {
                    b[(i, j)] += w * len * vals[i] * vals[j];
                }
            }
        }
    }
    Ok((m, s, b))
}

/// (C_INV, C_inv) for one triangle.
pub fn element_inverse_constants(coords: [[f64; 2]; 3], p: usize) -> Result<(f64, f64)> {
    let (m, s, b) = element_matrices(coords, p)?;
    let h = (0..3)
        .map(|e| {
            let (a, c) = (coords[(e + 1) % 3], coords[(e + 2) % 3]);
            (c[0] - a[0]).hypot(c[1] - a[1])
        })
        .fold(0.0, f64::max);
    let pf = p as f64;
    let lam_s = eigen_largest_generalized(&s, &m)?.max(0.0);
    let lam_b = eigen_largest_generalized(&b, &m)?.max(0.0);
    Ok((h / (pf * pf) * lam_s.sqrt(), h.sqrt() / pf * lam_b.sqrt()))
}

/// Similarity class of a triangle: sorted edge lengths over the diameter.
fn shape_key(coords: [[f64; 2]; 3]) -> [i64; 2] {
    let mut l: Vec<f64> = (0..3)
        .map(|e| {
            let (a, c) = (coords[(e + 1) % 3], coords[(e + 2) % 3]);
            (c[0] - a[0]).hypot(c[1] - a[1])
        })
        .collect();
    l.sort_by(|a, b| a.partial_cmp(b).unwrap());
    [(l[0] / l[2] * 1e9).round() as i64, (l[1] / l[2] * 1e9).round() as i64]
}

/// Inverse constants on every element; similar triangles share one solve.
pub fn compute_inverse_constants(mesh: &Mesh, p: usize, mode: InverseMode) -> Result<InverseConstants> {
    let mut cache: HashMap<[i64; 2], (f64, f64)> = HashMap::new();
    let mut grad = Vec::with_capacity(mesh.n_elements());
    let mut trace = Vec::with_capacity(mesh.n_elements());
    for t in 0..mesh.n_elements() {
        let c = mesh.coords(t);
        let key = shape_key(c);
        let v = match cache.get(&key) {
            Some(v) => *v,
            None => {
                let v = element_inverse_constants(c, p).map_err(|e| match e {
                    Error::DegenerateElement(_) => Error::DegenerateElement(t),
                    other => other,
                })?;
                cache.insert(key, v);
                v
            }
        };
        grad.push(v.0);
        trace.push(v.1);
    }
    if mode == InverseMode::GlobalMax {
        let g = grad.iter().copied().fold(0.0, f64::max);
        let tr = trace.iter().copied().fold(0.0, f64::max);
        grad.iter_mut().for_each(|v| *v = g);
        trace.iter_mut().for_each(|v| *v = tr);
    }
    Ok(InverseConstants { grad, trace })
}
