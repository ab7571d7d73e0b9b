use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lmg_core::{
    build_hamiltonian, build_liouvillian, concurrence, diagonalize, solve_steady_state, Feedback, ModelParams,
};

fn params(n: usize, theta_x: f64) -> ModelParams {
    let mut p = ModelParams::new(n, 1.0, 1.2, 0.05);
    p.theta_x = theta_x;
    p
}

fn liouvillian_assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("liouvillian");
    for n in [10usize, 30, 80] {
        let p = params(n, 1.0);
        let basis = p.basis().unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| build_liouvillian(black_box(&p), &basis, Feedback::On).unwrap())
        });
    }
    group.finish();
}

fn steady_state(c: &mut Criterion) {
    let mut group = c.benchmark_group("steady_state");
    group.sample_size(10);
    for (n, theta_x) in [(10usize, 0.0), (10, 1.0), (20, 0.0), (20, 1.0)] {
        let p = params(n, theta_x);
        let l = build_liouvillian(&p, &p.basis().unwrap(), Feedback::On).unwrap();
        group.bench_function(format!("n{n}_theta{theta_x}"), |b| {
            b.iter(|| solve_steady_state(black_box(&l)).unwrap())
        });
    }
    group.finish();
}

fn spectrum(c: &mut Criterion) {
    let mut group = c.benchmark_group("diagonalize");
    group.sample_size(10);
    for n in [100usize, 1000] {
        let p = ModelParams::new(n, 1.0, 1.5, 0.0);
        let h = build_hamiltonian(&p, &p.basis().unwrap()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| diagonalize(black_box(&h)).unwrap())
        });
    }
    group.finish();
}

fn concurrence_eval(c: &mut Criterion) {
    let p = params(30, 1.0);
    let l = build_liouvillian(&p, &p.basis().unwrap(), Feedback::On).unwrap();
    let rho = solve_steady_state(&l).unwrap().rho;
    c.bench_function("concurrence_n30", |b| b.iter(|| concurrence(black_box(&rho), 30).unwrap()));
}

criterion_group!(benches, liouvillian_assembly, steady_state, spectrum, concurrence_eval);
criterion_main!(benches);
