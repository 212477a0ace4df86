//! Wall-clock cost of one optimizer iteration at representative sizes,
//! complementing the counted-multiplication scaling checks.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use sqn::numerics::{Rng64, Vec64};
use sqn::optimizers::{
    obfgs_iterate, olbfgs_iterate, res_iterate, sgd_iterate, ObfgsState, OlbfgsState, ResState,
    StepSchedule,
};
use sqn::problems::{DiagMode, QuadraticProblem};

fn quad(n: usize) -> QuadraticProblem {
    let mut rng = Rng64::new(1);
    QuadraticProblem::synthetic(n, DiagMode::Uniform01, 0.3, &mut rng).unwrap()
}

fn bench_sgd(c: &mut Criterion) {
    let mut group = c.benchmark_group("sgd_step");
    for n in [100usize, 1000] {
        let problem = quad(n);
        let sched = StepSchedule::new(0.05, 1000.0);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            let mut rng = Rng64::new(2);
            let mut w = Vec64::zeros(n);
            let mut t = 0;
            b.iter(|| {
                sgd_iterate(&problem, &mut rng, &sched, 5, t, &mut w).unwrap();
                t += 1;
            });
        });
    }
    group.finish();
}

fn bench_olbfgs(c: &mut Criterion) {
    let mut group = c.benchmark_group("olbfgs_step");
    for n in [100usize, 1000] {
        let problem = quad(n);
        let sched = StepSchedule::new(0.05, 1000.0);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            let mut rng = Rng64::new(3);
            let mut state = OlbfgsState::new(10);
            let mut w = Vec64::zeros(n);
            b.iter(|| {
                olbfgs_iterate(&mut state, &problem, &mut rng, &sched, 5, &mut w).unwrap();
            });
        });
    }
    group.finish();
}

fn bench_obfgs(c: &mut Criterion) {
    let mut group = c.benchmark_group("obfgs_step");
    for n in [100usize, 400] {
        let problem = quad(n);
        let sched = StepSchedule::new(0.05, 1000.0);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            let mut rng = Rng64::new(4);
            let mut state = ObfgsState::new(n);
            let mut w = Vec64::zeros(n);
            b.iter(|| {
                obfgs_iterate(&mut state, &problem, &mut rng, &sched, 5, &mut w).unwrap();
            });
        });
    }
    group.finish();
}

fn bench_res(c: &mut Criterion) {
    let mut group = c.benchmark_group("res_step");
    group.sample_size(20);
    for n in [100usize, 400] {
        let problem = quad(n);
        let sched = StepSchedule::new(0.05, 1000.0);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            let mut rng = Rng64::new(5);
            let mut state = ResState::new(n, 1e-3, 1e-4);
            let mut w = Vec64::zeros(n);
            b.iter(|| {
                res_iterate(&mut state, &problem, &mut rng, &sched, 5, &mut w).unwrap();
            });
        });
    }
    group.finish();
}

criterion_group!(benches, bench_sgd, bench_olbfgs, bench_obfgs, bench_res);
criterion_main!(benches);
