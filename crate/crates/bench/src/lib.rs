//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use hypofem::experiments::mesh_with_elements;
use hypofem::inverse::{compute_inverse_constants, InverseMode};
use hypofem::{FESpace, StabConfig, StabParams};

/// Space and stabilisation on the structured mesh with `elements` triangles.
pub fn fixture(elements: usize, p: usize) -> (FESpace, StabParams) {
    let mesh = Arc::new(mesh_with_elements(elements).expect("valid level"));
    let inv = compute_inverse_constants(&mesh, p, InverseMode::PerElement).expect("inverse constants");
    let stab = StabParams::new(&mesh, p, &inv, &StabConfig::default()).expect("stabilisation");
    (FESpace::new(mesh, p).expect("space"), stab)
}
