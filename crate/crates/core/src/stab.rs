//! Per-element stabilisation parameters and spectral-gap diagnostics.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fespace::FESpace;
use crate::forms::assemble_mass_stiffness;
use crate::inverse::{InverseConstants, InverseMode};
use crate::linalg::{sparse_smallest_generalized, PreconditionerKind, SolverOptions};
use crate::mesh::Mesh;

/// Discretisation variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// Plain Galerkin: no τ terms, no A terms.
    Galerkin,
    /// Streamline-upwind Petrov–Galerkin.
    Supg,
    /// SUPG plus the A-weighted gradient augmentation and A-inner product.
    Hypo,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Galerkin => "galerkin",
            Method::Supg => "supg",
            Method::Hypo => "hypo",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "galerkin" => Ok(Method::Galerkin),
            "supg" => Ok(Method::Supg),
            "hypo" | "hyposupg" => Ok(Method::Hypo),
            _ => Err(Error::InvalidArgument(format!("unknown method `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabConfig {
    /// Multipliers applied to (α, β, γ).
    pub abc_scale: [f64; 3],
    pub inverse_mode: InverseMode,
}

impl Default for StabConfig {
    fn default() -> Self {
        Self { abc_scale: [1.0; 3], inverse_mode: InverseMode::PerElement }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementStab {
    pub h: f64,
    pub c_inv_grad: f64,
    pub c_inv_trace: f64,
    pub tau: f64,
    pub c_delta: f64,
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl ElementStab {
    pub fn a_matrix(&self) -> [[f64; 2]; 2] {
        [[self.alpha, self.beta], [self.beta, self.gamma]]
    }
}

/// (α, β, γ) = ((8δ)⁻¹, (24δ²)⁻¹, (64δ³)⁻¹).
pub fn abc_from_delta(delta: f64) -> [f64; 3] {
    [1.0 / (8.0 * delta), 1.0 / (24.0 * delta * delta), 1.0 / (64.0 * delta.powi(3))]
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabParams {
    p: usize,
    elems: Vec<ElementStab>,
}

impl StabParams {
    pub fn new(mesh: &Mesh, p: usize, inv: &InverseConstants, cfg: &StabConfig) -> Result<Self> {
        let pf = p as f64;
        let p4 = pf.powi(4);
        let mut elems = Vec::with_capacity(mesh.n_elements());
        for t in 0..mesh.n_elements() {
            let h = mesh.h(t);
            let (cg, ct) = (inv.grad[t], inv.trace[t]);
            // sup over ∂₋T of |x n₂| and over ∂T of n₁²; x n₂ is linear
            // along each edge, so endpoint values suffice.
            let mut xn2 = 0.0f64;
            let mut n1sq = 0.0f64;
            for e in 0..3 {
                let n = mesh.element_normal(t, e);
                n1sq = n1sq.max(n[0] * n[0]);
                for x in mesh.edge_endpoints(t, e) {
                    xn2 = xn2.max(-x[0] * n[1]);
                }
            }
            let c_delta = ct * ct / 6.0 * (3.0 * xn2 + 2.0 * n1sq);
            if c_delta <= 0.0 || !c_delta.is_finite() {
                return Err(Error::VanishingCdelta(t));
            }
            let delta = c_delta * p4 / (h * h);
            let [a, b, g] = abc_from_delta(delta);
            elems.push(ElementStab {
                h,
                c_inv_grad: cg,
                c_inv_trace: ct,
                tau: h * h / (4.0 * cg * cg * p4),
                c_delta,
                delta,
                alpha: a * cfg.abc_scale[0],
                beta: b * cfg.abc_scale[1],
                gamma: g * cfg.abc_scale[2],
            });
        }
        Ok(Self { p, elems })
    }

    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn element(&self, t: usize) -> &ElementStab {
        &self.elems[t]
    }

    pub fn elements(&self) -> &[ElementStab] {
        &self.elems
    }

    pub fn min_c_delta(&self) -> f64 {
        self.elems.iter().map(|e| e.c_delta).fold(f64::INFINITY, f64::min)
    }

    /// Copy with the terms inactive for `method` zeroed: A for SUPG, A and τ
    /// for Galerkin.
    pub fn restricted(&self, method: Method) -> Self {
        let mut out = self.clone();
        for e in &mut out.elems {
            if method != Method::Hypo {
                e.alpha = 0.0;
                e.beta = 0.0;
                e.gamma = 0.0;
            }
            if method == Method::Galerkin {
                e.tau = 0.0;
            }
        }
        out
    }

    /// Writes the ledger as CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "element,h,C_INV,C_inv,tau,C_delta,delta,alpha,beta,gamma")?;
        for (t, e) in self.elems.iter().enumerate() {
            writeln!(
                w,
                "{t},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                e.h, e.c_inv_grad, e.c_inv_trace, e.tau, e.c_delta, e.delta, e.alpha, e.beta, e.gamma
            )?;
        }
        Ok(())
    }
}

/// κ = c_hc h_min⁴ p⁻⁸ with c_hc = ½ min{(192 C_PF)⁻¹, min_T C_δ^T}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralGap {
    pub c_pf: f64,
    pub c_hc: f64,
    pub kappa: f64,
}

impl SpectralGap {
    pub fn new(stab: &StabParams, h_min: f64, c_pf: f64) -> Result<Self> {
        if c_pf <= 0.0 || !c_pf.is_finite() {
            return Err(Error::InvalidArgument(format!("Poincaré constant must be positive, got {c_pf}")));
        }
        let c_hc = 0.5 * (1.0 / (192.0 * c_pf)).min(stab.min_c_delta());
        let kappa = c_hc * h_min.powi(4) / (stab.degree() as f64).powi(8);
        Ok(Self { c_pf, c_hc, kappa })
    }

    /// μ = κ k/(4(q+1)²).
    pub fn mu(&self, k: f64, q: usize) -> f64 {
        self.kappa * k / (4.0 * ((q + 1) as f64).powi(2))
    }

    /// Per-step factor (1 + κ k/(2(q+1)²))⁻¹.
    pub fn dg_factor(&self, k: f64, q: usize) -> f64 {
        1.0 / (1.0 + self.kappa * k / (2.0 * ((q + 1) as f64).powi(2)))
    }

    /// Π_n (1 + μ_n)⁻¹ over the given steps.
    pub fn envelope(&self, steps: &[f64], q: usize) -> f64 {
        steps.iter().map(|&k| 1.0 / (1.0 + self.mu(k, q))).product()
    }
}

/// Poincaré–Friedrichs constant 1/λ_min of (∇u,∇v) = λ(u,v) on the free dofs.
pub fn estimate_poincare(space: &FESpace) -> Result<f64> {
    if space.constrained_dofs().is_empty() {
        return Err(Error::NoInflow);
    }
    let (m, s) = assemble_mass_stiffness(space);
    let free = space.free_dofs();
    let mf = m.submatrix(free, free);
    let sf = s.submatrix(free, free);
    let opts = SolverOptions { tol: 1e-13, preconditioner: PreconditionerKind::Ilu0, ..Default::default() };
    let lambda = sparse_smallest_generalized(&sf, &mf, 1e-12, opts)?;
    Ok(1.0 / lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inverse::compute_inverse_constants;
    use crate::linalg::{cholesky, generalized_eigenvalues, DenseMatrix};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn stab(n: usize, p: usize) -> (Mesh, StabParams) {
        let m = Mesh::structured_square(n).unwrap();
        let inv = compute_inverse_constants(&m, p, InverseMode::PerElement).unwrap();
        let s = StabParams::new(&m, p, &inv, &StabConfig::default()).unwrap();
        (m, s)
    }

    #[test]
    fn abc_for_unit_delta() {
        assert_eq!(abc_from_delta(1.0), [1.0 / 8.0, 1.0 / 24.0, 1.0 / 64.0]);
        let [a, b, g] = abc_from_delta(1.0);
        assert!((a * g - b * b - 1.0 / 4608.0).abs() < 1e-18);
        assert!((1.0f64 / 512.0 - 1.0 / 576.0 - 1.0 / 4608.0).abs() < 1e-18);
    }

    #[test]
    fn tau_formula_p1() {
        let (m, s) = stab(4, 1);
        let h = 2f64.sqrt() / 4.0;
        for t in 0..m.n_elements() {
            let e = s.element(t);
            assert!((e.h - h).abs() < 1e-15);
            assert!((e.tau - h * h / (4.0 * e.c_inv_grad.powi(2))).abs() < 1e-15);
        }
    }

    #[test]
    fn a_matrices_are_spd() {
        for n in [4, 8] {
            for p in 1..=4 {
                let (_, s) = stab(n, p);
                for e in s.elements() {
                    let a = e.a_matrix();
                    assert!(cholesky(&DenseMatrix::from_rows(&[a[0].to_vec(), a[1].to_vec()])).is_ok());
                    let det = a[0][0] * a[1][1] - a[0][1] * a[0][1];
                    let exact = e.delta.powi(-4) * (1.0 / 512.0 - 1.0 / 576.0);
                    assert!((det - exact).abs() <= 1e-12 * exact);
                }
            }
        }
    }

    #[test]
    fn monotonicity_in_p_and_h() {
        let (m, s1) = stab(4, 1);
        let (_, s2) = stab(4, 2);
        let fine = m.refine_uniform();
        let inv = compute_inverse_constants(&fine, 1, InverseMode::PerElement).unwrap();
        let s1f = StabParams::new(&fine, 1, &inv, &StabConfig::default()).unwrap();
        for t in 0..m.n_elements() {
            assert!(s2.element(t).tau < s1.element(t).tau);
            for c in 0..4 {
                assert!(s1f.element(4 * t + c).delta > s1.element(t).delta);
            }
        }
    }

    #[test]
    fn restriction_masks_terms() {
        let (_, s) = stab(2, 2);
        let g = s.restricted(Method::Galerkin);
        let u = s.restricted(Method::Supg);
        assert!(g.elements().iter().all(|e| e.tau == 0.0 && e.alpha == 0.0 && e.gamma == 0.0));
        assert!(u.elements().iter().all(|e| e.tau > 0.0 && e.beta == 0.0));
        assert_eq!(s.restricted(Method::Hypo), s);
    }

    #[test]
    fn envelope_and_factors() {
        let (m, s) = stab(4, 1);
        let gap = SpectralGap::new(&s, m.h_min(), 4.0 / std::f64::consts::PI.powi(2)).unwrap();
        assert!(gap.kappa > 0.0 && gap.kappa < 1.0);
        // k → 0 at fixed t_f approaches exp(−κ t_f/(4(q+1)²)).
        let n = 10_000;
        let env = gap.envelope(&vec![1.0 / n as f64; n], 1);
        assert!((env - (-gap.kappa / 16.0).exp()).abs() < 1e-11);
        assert_eq!(gap.dg_factor(0.5, 0), 1.0 / (1.0 + gap.kappa * 0.5 / 2.0));
        // κ scales as h_min⁴.
        let g2 = SpectralGap::new(&s, 2.0 * m.h_min(), gap.c_pf).unwrap();
        assert!((g2.kappa / gap.kappa - 16.0).abs() < 1e-12);
    }

    #[test]
    fn poincare_matches_dense_and_refines_upward() {
        let mesh = Arc::new(Mesh::structured_square(4).unwrap());
        let space = FESpace::new(mesh.clone(), 2).unwrap();
        let c = estimate_poincare(&space).unwrap();
        let (m, st) = assemble_mass_stiffness(&space);
        let free = space.free_dofs();
        let ev = generalized_eigenvalues(&st.submatrix(free, free).to_dense(), &m.submatrix(free, free).to_dense()).unwrap();
        assert!((c - 1.0 / ev[0]).abs() < 1e-8 * c);
        let fine = FESpace::new(Arc::new(mesh.refine_uniform()), 2).unwrap();
        let cf = estimate_poincare(&fine).unwrap();
        assert!(cf >= c * (1.0 - 1e-12));
        // Continuous value on the unit square with Dirichlet data on the bottom.
        assert!((cf - 4.0 / std::f64::consts::PI.powi(2)).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn mu_and_envelope_in_range(steps in proptest::collection::vec(1e-4f64..1.0, 1..40), q in 0usize..3) {
            let (m, s) = stab(2, 1);
            let gap = SpectralGap::new(&s, m.h_min(), 0.4).unwrap();
            for &k in &steps {
                prop_assert!(gap.mu(k, q) > 0.0);
            }
            let e = gap.envelope(&steps, q);
            prop_assert!(e > 0.0 && e < 1.0);
        }
    }
}
