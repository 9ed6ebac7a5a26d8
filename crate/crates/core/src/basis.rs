//! Lagrange bases on the reference triangle with derivatives to order 3.

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, LuFactors};

/// Number of partial derivatives of total order ≤ 3.
pub const N_DERIV: usize = 10;

/// Derivative multi-indices (a, b) = ∂ˣᵃ∂ʸᵇ in table order.
pub const DERIVS: [(usize, usize); N_DERIV] =
    [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)];

/// Position of ∂^(a,b) in [`DERIVS`].
pub fn deriv_index(a: usize, b: usize) -> Result<usize> {
    if a + b > 3 {
        return Err(Error::DerivativeOrder(a, b));
    }
    let order = a + b;
    Ok(order * (order + 1) / 2 + b)
}

/// Where a reference node sits on the triangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Vertex(usize),
    /// Node `index` (1..p) on local edge `edge`, counted from the edge's
    /// first endpoint, local vertex (edge + 1) % 3.
    Edge { edge: usize, index: usize },
    Interior,
}

#[derive(Clone, Debug)]
pub struct LagrangeBasis {
    p: usize,
    nodes: Vec<[f64; 2]>,
    kinds: Vec<NodeKind>,
    exps: Vec<(usize, usize)>,
    /// coeff[m * n + k]: coefficient of monomial m in basis function k.
    coeff: Vec<f64>,
}

impl LagrangeBasis {
    pub fn new(p: usize) -> Result<Self> {
        if !(1..=8).contains(&p) {
            return Err(Error::InvalidArgument(format!("polynomial degree {p} outside 1..=8")));
        }
        let pf = p as f64;
        let verts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let mut nodes = Vec::new();
        let mut kinds = Vec::new();
        for (v, x) in verts.iter().enumerate() {
            nodes.push(*x);
            kinds.push(NodeKind::Vertex(v));
        }
        for e in 0..3 {
            let a = verts[(e + 1) % 3];
            let b = verts[(e + 2) % 3];
            for i in 1..p {
                let s = i as f64 / pf;
                nodes.push([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
                kinds.push(NodeKind::Edge { edge: e, index: i });
            }
        }
        for j in 1..p {
            for i in 1..p - j {
                nodes.push([i as f64 / pf, j as f64 / pf]);
                kinds.push(NodeKind::Interior);
            }
        }
        let exps: Vec<(usize, usize)> = (0..=p).flat_map(|d| (0..=d).map(move |b| (d - b, b))).collect();
        let n = exps.len();
        debug_assert_eq!(nodes.len(), n);
        let mut v = DenseMatrix::zeros(n, n);
        for (i, x) in nodes.iter().enumerate() {
            for (m, &(a, b)) in exps.iter().enumerate() {
                v[(i, m)] = x[0].powi(a as i32) * x[1].powi(b as i32);
            }
        }
        // φ_k = Σ_m C[m][k] x^m with V C = I.
        let lu = LuFactors::new(&v)?;
        let mut coeff = vec![0.0; n * n];
        for k in 0..n {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            let c = lu.solve(&e);
            for m in 0..n {
                coeff[m * n + k] = c[m];
            }
        }
        Ok(Self { p, nodes, kinds, exps, coeff })
    }

    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn node_kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    /// All reference derivatives up to order 3 at ξ: out[d * n + k] = ∂^DERIVS[d] φ_k(ξ).
    pub fn eval_all(&self, xi: [f64; 2], out: &mut [f64]) {
        let n = self.len();
        out[..N_DERIV * n].iter_mut().for_each(|v| *v = 0.0);
        for (m, &(a, b)) in self.exps.iter().enumerate() {
            for (d, &(da, db)) in DERIVS.iter().enumerate() {
                if da > a || db > b {
                    continue;
                }
                let c = falling(a, da) * falling(b, db) * powi(xi[0], a - da) * powi(xi[1], b - db);
                if c == 0.0 {
                    continue;
                }
                let row = &self.coeff[m * n..(m + 1) * n];
                for (o, r) in out[d * n..(d + 1) * n].iter_mut().zip(row) {
                    *o += c * r;
                }
            }
        }
    }

    /// Reference derivative ∂^(a,b) of every basis function at ξ.
    pub fn eval(&self, xi: [f64; 2], a: usize, b: usize) -> Result<Vec<f64>> {
        let d = deriv_index(a, b)?;
        let n = self.len();
        let mut all = vec![0.0; N_DERIV * n];
        self.eval_all(xi, &mut all);
        Ok(all[d * n..(d + 1) * n].to_vec())
    }
}

fn falling(a: usize, k: usize) -> f64 {
    (0..k).map(|i| (a - i) as f64).product()
}

fn powi(x: f64, k: usize) -> f64 {
    x.powi(k as i32)
}

/// Maps reference derivatives to physical ones for an affine element.
///
/// With G = J⁻¹, the physical derivative along directions (i₁..i_r) equals
/// Σ_{k} Π_m G[k_m][i_m] ∂_{k₁..k_r} of the reference function. The result is
/// a block-diagonal 10×10 matrix (orders do not mix for affine maps).
#[derive(Clone, Copy, Debug)]
pub struct DerivTransform {
    pub m: [[f64; N_DERIV]; N_DERIV],
}

impl DerivTransform {
    pub fn new(jac: [[f64; 2]; 2]) -> Self {
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let g = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
        let mut m = [[0.0; N_DERIV]; N_DERIV];
        for (pd, &(pa, pb)) in DERIVS.iter().enumerate() {
            let order = pa + pb;
            let dirs: Vec<usize> = std::iter::repeat_n(0, pa).chain(std::iter::repeat_n(1, pb)).collect();
            for assign in 0..(1usize << order) {
                let mut w = 1.0;
                let mut n_eta = 0;
                for (bit, &i) in dirs.iter().enumerate() {
                    let k = (assign >> bit) & 1;
                    n_eta += k;
                    w *= g[k][i];
                }
                let rd = order * (order + 1) / 2 + n_eta;
                m[pd][rd] += w;
            }
        }
        Self { m }
    }

    /// Physical derivative table from a reference table for `n` functions,
    /// restricted to orders ≤ `max_order`.
    pub fn apply(&self, reference: &[f64], n: usize, max_order: usize, out: &mut [f64]) {
        let nd = (max_order + 1) * (max_order + 2) / 2;
        for pd in 0..nd {
            let order = DERIVS[pd].0 + DERIVS[pd].1;
            let lo = order * (order + 1) / 2;
            let dst = &mut out[pd * n..(pd + 1) * n];
            dst.iter_mut().for_each(|v| *v = 0.0);
            for rd in lo..lo + order + 1 {
                let c = self.m[pd][rd];
                if c == 0.0 {
                    continue;
                }
                for (o, r) in dst.iter_mut().zip(&reference[rd * n..(rd + 1) * n]) {
                    *o += c * r;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn deriv_indices() {
        for (d, &(a, b)) in DERIVS.iter().enumerate() {
            assert_eq!(deriv_index(a, b).unwrap(), d);
        }
        assert!(deriv_index(2, 2).is_err());
    }

    #[test]
    fn kronecker_property() {
        for p in 1..=6 {
            let b = LagrangeBasis::new(p).unwrap();
            assert_eq!(b.len(), (p + 1) * (p + 2) / 2);
            for (j, x) in b.nodes().iter().enumerate() {
                let v = b.eval(*x, 0, 0).unwrap();
                for (i, vi) in v.iter().enumerate() {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((vi - e).abs() < 1e-11, "p={p} i={i} j={j}");
                }
            }
        }
    }

    #[test]
    fn edge_nodes_are_ordered_from_first_endpoint() {
        let b = LagrangeBasis::new(3).unwrap();
        for (x, k) in b.nodes().iter().zip(b.node_kinds()) {
            if let NodeKind::Edge { edge: 0, index } = k {
                // Edge 0 runs from (1,0) to (0,1).
                assert!((x[0] - (1.0 - *index as f64 / 3.0)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn transform_matches_linear_map() {
        // f(x, y) = x² y on element with J = [[2, 1], [0, 3]], x₀ = 0.
        let jac = [[2.0, 1.0], [0.0, 3.0]];
        let t = DerivTransform::new(jac);
        // Reference function f(J ξ) has derivatives computable directly.
        let xi = [0.3, 0.2];
        let h = 1e-3;
        let f = |s: f64, r: f64| {
            let x = jac[0][0] * s + jac[0][1] * r;
            let y = jac[1][0] * s + jac[1][1] * r;
            x * x * y
        };
        // Reference derivatives via exact polynomial in ξ (central differences are exact to order ≥ degree).
        let mut refd = [0.0; N_DERIV];
        for (d, &(a, b)) in DERIVS.iter().enumerate() {
            refd[d] = fd(&f, xi, a, b, h);
        }
        let x = jac[0][0] * xi[0] + jac[0][1] * xi[1];
        let y = jac[1][0] * xi[0] + jac[1][1] * xi[1];
        let exact = [x * x * y, 2.0 * x * y, x * x, 2.0 * y, 2.0 * x, 0.0, 0.0, 2.0, 0.0, 0.0];
        let mut phys = [0.0; N_DERIV];
        t.apply(&refd, 1, 3, &mut phys);
        for d in 0..N_DERIV {
            assert!((phys[d] - exact[d]).abs() < 1e-6, "d={d}: {} vs {}", phys[d], exact[d]);
        }
    }

    fn fd(f: &dyn Fn(f64, f64) -> f64, x: [f64; 2], a: usize, b: usize, h: f64) -> f64 {
        if a > 0 {
            let g = |s: f64, r: f64| fd(f, [s, r], a - 1, b, h);
            return (g(x[0] + h, x[1]) - g(x[0] - h, x[1])) / (2.0 * h);
        }
        if b > 0 {
            let g = |s: f64, r: f64| fd(f, [s, r], 0, b - 1, h);
            return (g(x[0], x[1] + h) - g(x[0], x[1] - h)) / (2.0 * h);
        }
        f(x[0], x[1])
    }

    proptest! {
        #[test]
        fn partition_of_unity(p in 1usize..=5, s in 0.0f64..1.0, r in 0.0f64..1.0) {
            let xi = [s * (1.0 - r), r];
            let b = LagrangeBasis::new(p).unwrap();
            let n = b.len();
            let mut all = vec![0.0; N_DERIV * n];
            b.eval_all(xi, &mut all);
            for d in 0..N_DERIV {
                let s: f64 = all[d * n..(d + 1) * n].iter().sum();
                let e = if d == 0 { 1.0 } else { 0.0 };
                prop_assert!((s - e).abs() < 1e-9);
                let (da, db) = DERIVS[d];
                if da + db > p {
                    prop_assert!(all[d * n..(d + 1) * n].iter().all(|v| *v == 0.0));
                }
            }
        }
    }
}
