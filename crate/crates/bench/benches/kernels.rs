use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use exterior_bench::{bump_spec, decaying_source, polar_problem};
use exterior_core::barrier::make_lemma2;
use exterior_core::radial::{solve_exterior_radial, solve_radial_bvp};
use exterior_core::{solve_dirichlet, talenti_bound, AnnularMesh, BoundaryData, Method, OperatorSpec, SourceSharp, SourceTerm};

fn phi(c: &mut Criterion) {
    let spec = bump_spec(3.0, 2);
    c.bench_function("phi_inverse/bump", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for k in 1..=100 {
                acc += spec.phi_inverse(black_box(k as f64 * 0.37), 1e-12).unwrap();
            }
            acc
        })
    });
}

fn barriers(c: &mut Criterion) {
    let spec = bump_spec(3.5, 2);
    let f = decaying_source(3.5);
    let w = make_lemma2(&spec, &f, 0.5).unwrap();
    c.bench_function("barrier/lemma2_eval", |b| b.iter(|| w.eval(black_box(37.0)).unwrap()));
}

fn radial(c: &mut Criterion) {
    let spec = OperatorSpec::plap(3.0, 2).unwrap();
    let f = SourceTerm::constant(1.5);
    c.bench_function("radial/bvp", |b| b.iter(|| solve_radial_bvp(&spec, &f, 1.0, black_box(4.0), 1.0, 0.0, 1e-10).unwrap()));
    let g = decaying_source(3.0);
    c.bench_function("radial/exterior", |b| b.iter(|| solve_exterior_radial(&spec, &g, 1.0, black_box(1.0)).unwrap()));
}

fn annulus(c: &mut Criterion) {
    let spec = OperatorSpec::plap(2.5, 2).unwrap();
    let f = SourceTerm::constant(1.0);
    let mut group = c.benchmark_group("annulus");
    group.sample_size(10);
    let (mesh, bc) = polar_problem(8, 16);
    for method in [Method::Descent, Method::DampedPicard] {
        group.bench_function(format!("polar_8x16/{method:?}"), |b| b.iter(|| solve_dirichlet(&mesh, &spec, &f, &bc, method, 1e-8).unwrap()));
    }
    let radial = Arc::new(AnnularMesh::geometric(2, 1.0, 4.0, 256).unwrap());
    let rbc = BoundaryData::constant(&radial, 1.0, 0.0);
    group.bench_function("radial_256/Descent", |b| b.iter(|| solve_dirichlet(&radial, &spec, &f, &rbc, Method::Descent, 1e-10).unwrap()));
    group.finish();
}

fn talenti(c: &mut Criterion) {
    let spec = OperatorSpec::plap(2.5, 3).unwrap();
    let f = decaying_source(2.5);
    let sharp = SourceSharp::on_annulus(&f, 3, 1.0, 4.0).unwrap();
    let omega = exterior_core::source::annulus_measure(3, 1.0, 4.0);
    c.bench_function("talenti/bound", |b| b.iter(|| talenti_bound(black_box(0.5), &sharp, &spec, omega).unwrap()));
}

criterion_group!(benches, phi, barriers, radial, annulus, talenti);
criterion_main!(benches);
