use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hypofem::forms::ProblemData;
use hypofem::timeloop::{initial_state, SlabSolver};
use hypofem::{CaseDefinition, Method, SolverOptions};
use hypofem_bench::fixture;

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assembly");
    group.sample_size(10);
    for p in [1, 2, 3] {
        let (space, stab) = fixture(512, p);
        group.bench_with_input(BenchmarkId::new("spatial_operators", p), &p, |b, _| {
            b.iter(|| SlabSolver::new(&space, &stab, Method::Hypo, 0, SolverOptions::default()).unwrap())
        });
        let solver = SlabSolver::new(&space, &stab, Method::Hypo, 1, SolverOptions::default()).unwrap();
        group.bench_with_input(BenchmarkId::new("slab_matrix_q1", p), &p, |b, _| {
            b.iter(|| solver.slab_matrix(black_box(1e-3)))
        });
    }
    group.finish();
}

fn slab_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("slab_solve");
    group.sample_size(10);
    let case = CaseDefinition::instationary();
    for (p, q) in [(1, 0), (2, 1)] {
        let (space, stab) = fixture(512, p);
        let u0 = initial_state(&space, &stab, Method::Hypo, &|x, y| case.initial(x, y), &|x, y| case.inflow(0.0, x, y))
            .unwrap();
        let mut solver = SlabSolver::new(&space, &stab, Method::Hypo, q, SolverOptions::default()).unwrap();
        let k = space.mesh().h_max().powi(2);
        // The first call factors the preconditioner; later calls reuse it.
        solver.solve_slab(&case, 0.0, k, &u0).unwrap();
        group.bench_function(BenchmarkId::new("instationary", format!("p{p}q{q}")), |b| {
            b.iter(|| solver.solve_slab(&case, 0.0, k, black_box(&u0)).unwrap())
        });
    }
    group.finish();
}

fn jet_eval(c: &mut Criterion) {
    let mut group = c.benchmark_group("jet_eval");
    for case in [CaseDefinition::stationary(), CaseDefinition::instationary()] {
        group.bench_function(case.name().to_string(), |b| {
            b.iter(|| case.jet_eval(black_box(0.25), black_box(0.3), black_box(0.6)).unwrap())
        });
        group.bench_function(format!("{}_source", case.name()), |b| {
            b.iter(|| case.source(black_box(0.25), black_box(0.3), black_box(0.6)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, assembly, slab_solve, jet_eval);
criterion_main!(benches);
