//! Coarse versions of the convergence and decay experiments.

use std::sync::Arc;

use hypofem::experiments::{mesh_with_elements, run_convergence, run_decay};
use hypofem::{CaseDefinition, KRule, Method, RunSettings};

#[test]
fn stationary_rates_on_coarse_meshes() {
    for p in [1, 2] {
        let s = RunSettings::new(CaseDefinition::stationary(), Method::Hypo, p, 0, KRule::Single);
        let r = run_convergence(&s, &[32, 128, 512], |_| {}).unwrap();
        let last = *r.eoc_st.last().unwrap();
        assert!((last - p as f64).abs() < 0.3, "p={p} eoc={last}");
    }
}

#[test]
fn instationary_rate_with_k_h_squared() {
    let s = RunSettings::new(CaseDefinition::instationary(), Method::Hypo, 1, 0, KRule::HSquared);
    let r = run_convergence(&s, &[32, 128], |_| {}).unwrap();
    assert!((r.eoc_st[0] - 1.0).abs() < 0.3, "{:?}", r.eoc_st);
    assert_eq!(r.levels[1].n_slabs, 32);
}

#[test]
fn supg_and_galerkin_also_converge() {
    for method in [Method::Supg, Method::Galerkin] {
        let s = RunSettings::new(CaseDefinition::stationary(), method, 1, 0, KRule::Single);
        let r = run_convergence(&s, &[32, 128], |_| {}).unwrap();
        assert!(r.levels[1].errors.as_ref().unwrap().err_st < r.levels[0].errors.as_ref().unwrap().err_st);
    }
}

#[test]
fn decay_on_the_coarsest_mesh() {
    let s = RunSettings::new(CaseDefinition::decay(), Method::Hypo, 1, 1, KRule::H);
    let r = run_decay(&s, Arc::new(mesh_with_elements(32).unwrap()), None).unwrap();
    assert_eq!(r.times.len(), 24);
    assert!(r.monotone() && r.below_envelope());
    // Observed decay is much faster than the envelope.
    assert!(r.norms.last().unwrap() / r.norms[0] < r.envelope.last().unwrap() / r.envelope[0]);
}
