//! Acceptance suite: one test per release criterion, each printing a
//! pass/fail line (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Criteria 3-7 are seeded Monte-Carlo experiments; their thresholds are
//! fixed here, and identical seeds make every run reproducible.

use std::time::Instant;

use sqn::harness::{
    run_experiment, sweep, DiagSpec, ExperimentConfig, MethodOutcome, OptimizerSpec, ProblemSpec,
    ScheduleSpec, SweepAxis, W0Spec,
};
use sqn::numerics::{Rng64, Vec64};
use sqn::optimizers::{OlbfgsState, ObfgsState, OptimizerKind, OptimizerState, ResState, StepSchedule};
use sqn::problems::{DiagMode, QuadraticProblem};
use sqn::verify;

fn jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(4)
}

fn gate(criterion: &str, pass: bool, detail: &str) {
    println!(
        "acceptance criterion {criterion}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

#[test]
fn criterion_01_oracle_equivalence() {
    let start = Instant::now();
    let report = verify::oracle_suite(None);
    let elapsed = start.elapsed();
    let pass = report.passed && elapsed.as_secs_f64() < 10.0;
    gate(
        "1 oracle equivalence",
        pass,
        &format!("{}; {} cases in {elapsed:.2?}", report.detail, report.cases),
    );
}

#[test]
fn criterion_02_curvature_bound_suite() {
    let start = Instant::now();
    let report = verify::bounds_suite();
    let elapsed = start.elapsed();
    let pass = report.passed && report.cases == 500 && elapsed.as_secs_f64() < 30.0;
    gate(
        "2 curvature bounds on monitored run",
        pass,
        &format!("{}; in {elapsed:.2?}", report.detail),
    );
}

fn quad_protocol(xi: u32, trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        problem: ProblemSpec::Quadratic {
            n: 50,
            diag: DiagSpec::DiscreteXi { xi },
            theta0: 0.5,
        },
        optimizers: vec![
            OptimizerSpec::new(OptimizerKind::Sgd).with_l(1),
            OptimizerSpec::new(OptimizerKind::Olbfgs).with_l(5).with_mem(10),
            OptimizerSpec::new(OptimizerKind::Obfgs).with_l(5),
            OptimizerSpec::new(OptimizerKind::Res)
                .with_l(5)
                .with_res_params(1e-3, 1e-4),
        ],
        schedule: ScheduleSpec {
            eps0: 0.1,
            t_big0: 1000.0,
        },
        rho: 1e-2,
        max_funcs: 10_000,
        trials,
        base_seed: Some(1),
        w0: W0Spec::Zeros,
        check_every: 1,
        record_trace: false,
        monitor_bounds: false,
        bin_edges: None,
    }
}

fn method(outcome: &[MethodOutcome], kind: OptimizerKind) -> &MethodOutcome {
    outcome
        .iter()
        .find(|m| m.spec.kind == kind)
        .expect("method present")
}

#[test]
fn criterion_03_ill_conditioned_speedup() {
    let start = Instant::now();
    let outcome = run_experiment(&quad_protocol(2, 50), jobs()).unwrap();
    let elapsed = start.elapsed();
    let sgd = method(&outcome.methods, OptimizerKind::Sgd).summary.mean_tau;
    let olbfgs = method(&outcome.methods, OptimizerKind::Olbfgs).summary.mean_tau;
    let res = method(&outcome.methods, OptimizerKind::Res).summary.mean_tau;
    let pass = olbfgs <= 0.2 * sgd && res <= 0.2 * sgd && elapsed.as_secs_f64() < 300.0;
    gate(
        "3 ill-conditioned speedup",
        pass,
        &format!(
            "mean tau sgd={sgd:.0}, olbfgs={olbfgs:.0} (ratio {:.3}), res={res:.0} \
             (ratio {:.3}), bound 0.2, in {elapsed:.2?}",
            olbfgs / sgd,
            res / sgd
        ),
    );
}

#[test]
fn criterion_04_well_conditioned_parity() {
    let start = Instant::now();
    let outcome = run_experiment(&quad_protocol(0, 50), jobs()).unwrap();
    let elapsed = start.elapsed();
    let sgd = method(&outcome.methods, OptimizerKind::Sgd).summary.mean_tau;
    let mut detail = format!("mean tau sgd={sgd:.0}");
    let mut pass = elapsed.as_secs_f64() < 180.0;
    for kind in [OptimizerKind::Olbfgs, OptimizerKind::Obfgs, OptimizerKind::Res] {
        let mean = method(&outcome.methods, kind).summary.mean_tau;
        let ratio = mean / sgd;
        detail.push_str(&format!(", {}={mean:.0} (ratio {ratio:.3})", kind.name()));
        if !(0.1..=1.5).contains(&ratio) {
            pass = false;
        }
    }
    detail.push_str(&format!(", window [0.1, 1.5], in {elapsed:.2?}"));
    gate("4 well-conditioned parity", pass, &detail);
}

#[test]
fn criterion_05_batch_size_study() {
    let start = Instant::now();
    let mut cfg = quad_protocol(2, 50);
    // The batch-size study runs the regularized method, whose published
    // statistics this criterion mirrors.
    cfg.optimizers = vec![OptimizerSpec::new(OptimizerKind::Res)
        .with_l(5)
        .with_res_params(1e-3, 1e-4)];
    let swept = sweep(SweepAxis::L, &[1.0, 2.0, 5.0, 20.0], &cfg, jobs()).unwrap();
    let elapsed = start.elapsed();
    let stats: Vec<(f64, f64, f64)> = swept
        .iter()
        .map(|(l, out)| {
            let s = &out.methods[0].summary;
            (*l, s.mean_tau, s.std_tau)
        })
        .collect();
    let stds_decreasing = stats.windows(2).all(|w| w[1].2 < w[0].2);
    let mean_of = |l: f64| stats.iter().find(|s| s.0 == l).unwrap().1;
    let pass = stds_decreasing
        && mean_of(5.0) < mean_of(1.0)
        && mean_of(5.0) < mean_of(20.0)
        && elapsed.as_secs_f64() < 600.0;
    let detail = stats
        .iter()
        .map(|(l, mean, std)| format!("L={l}: mean {mean:.0} std {std:.0}"))
        .collect::<Vec<_>>()
        .join("; ");
    gate(
        "5 batch-size study",
        pass,
        &format!("{detail}; in {elapsed:.2?}"),
    );
}

#[test]
fn criterion_06_dimension_study() {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        problem: ProblemSpec::Quadratic {
            n: 50,
            diag: DiagSpec::Uniform01,
            theta0: 0.5,
        },
        optimizers: vec![
            OptimizerSpec::new(OptimizerKind::Sgd).with_l(1),
            OptimizerSpec::new(OptimizerKind::Olbfgs).with_l(5).with_mem(10),
        ],
        schedule: ScheduleSpec {
            eps0: 0.1,
            t_big0: 1000.0,
        },
        rho: 1.0,
        max_funcs: 500_000,
        trials: 50,
        base_seed: Some(1),
        // Start well past the optimum so the loose target is not met at
        // the first iterates.
        w0: W0Spec::ScaledOptimum { factor: -50.0 },
        check_every: 1,
        record_trace: false,
        monitor_bounds: false,
        bin_edges: None,
    };
    let swept = sweep(SweepAxis::N, &[5.0, 50.0], &cfg, jobs()).unwrap();
    let elapsed = start.elapsed();
    let at50 = &swept.iter().find(|(n, _)| *n == 50.0).unwrap().1;
    let slow_freq = |m: &MethodOutcome| {
        m.trials
            .iter()
            .filter(|t| !t.converged || t.tau_metric > 10_000)
            .count() as f64
            / m.trials.len() as f64
    };
    let sgd_freq = slow_freq(method(&at50.methods, OptimizerKind::Sgd));
    let olbfgs_freq = slow_freq(method(&at50.methods, OptimizerKind::Olbfgs));
    let pass = sgd_freq > 0.3 && olbfgs_freq < 0.05 && elapsed.as_secs_f64() < 900.0;
    gate(
        "6 dimension study",
        pass,
        &format!(
            "n=50 fail-or-beyond-1e4 frequency: sgd {sgd_freq:.2} (must exceed 0.3), \
             olbfgs {olbfgs_freq:.2} (must stay below 0.05), in {elapsed:.2?}"
        ),
    );
}

#[test]
fn criterion_07_svm_objective_gap() {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        problem: ProblemSpec::SvmSynthetic {
            n: 100,
            points: 10_000,
            lambda: 1e-4,
        },
        optimizers: vec![
            OptimizerSpec::new(OptimizerKind::Olbfgs).with_l(5).with_mem(10),
            OptimizerSpec::new(OptimizerKind::Sgd).with_l(1),
        ],
        schedule: ScheduleSpec {
            eps0: 2e-2,
            t_big0: 100.0,
        },
        // rho = 0 never triggers, so every run spends exactly the budget and
        // the final objective is the measurement.
        rho: 0.0,
        max_funcs: 40_000,
        trials: 10,
        base_seed: Some(1),
        w0: W0Spec::Zeros,
        check_every: 1_000_000,
        record_trace: false,
        monitor_bounds: false,
        bin_edges: None,
    };
    let outcome = run_experiment(&cfg, jobs()).unwrap();
    let elapsed = start.elapsed();
    let median_final = |m: &MethodOutcome| {
        let mut finals: Vec<f64> = m.trials.iter().map(|t| t.final_objective).collect();
        finals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        0.5 * (finals[finals.len() / 2 - 1] + finals[finals.len() / 2])
    };
    let olbfgs = median_final(method(&outcome.methods, OptimizerKind::Olbfgs));
    let sgd = median_final(method(&outcome.methods, OptimizerKind::Sgd));
    let pass = olbfgs <= 1e-4 && sgd >= 5e-4 && elapsed.as_secs_f64() < 600.0;
    gate(
        "7 svm objective gap",
        pass,
        &format!(
            "median objective after 4e4 functions: olbfgs {olbfgs:.3e} (must be <= 1e-4), \
             sgd {sgd:.3e} (must be >= 5e-4), in {elapsed:.2?}"
        ),
    );
}

fn steady_state_mults(kind: OptimizerKind, n: usize, mem: usize) -> u64 {
    let mut rng = Rng64::new(5);
    let problem = QuadraticProblem::synthetic(n, DiagMode::Uniform01, 0.3, &mut rng).unwrap();
    let sched = StepSchedule::new(0.05, 1000.0);
    let mut state = match kind {
        OptimizerKind::Sgd => OptimizerState::Sgd { t: 0 },
        OptimizerKind::Olbfgs => OptimizerState::Olbfgs(OlbfgsState::new(mem)),
        OptimizerKind::Obfgs => OptimizerState::Obfgs(ObfgsState::new(n)),
        OptimizerKind::Res => OptimizerState::Res(ResState::new(n, 1e-3, 1e-4)),
        OptimizerKind::Sag => unreachable!("not part of the scaling check"),
    };
    let mut w = Vec64::zeros(n);
    let mut last = 0;
    for _ in 0..(mem + 5) {
        last = state.step(&problem, &mut rng, &sched, 2, &mut w).unwrap().mults;
    }
    last
}

#[test]
fn criterion_08_cost_scaling() {
    let mem = 10usize;
    let mut pass = true;
    let mut detail = Vec::new();
    let mut per_n = Vec::new();
    for n in [50usize, 200] {
        let ol = steady_state_mults(OptimizerKind::Olbfgs, n, mem);
        let ob = steady_state_mults(OptimizerKind::Obfgs, n, mem);
        let re = steady_state_mults(OptimizerKind::Res, n, mem);
        let target = (4 * mem as u64 + 1) * n as u64;
        let ratio = ol as f64 / target as f64;
        if !(0.8..=1.2).contains(&ratio) {
            pass = false;
        }
        if !(ol < ob && ob < re) {
            pass = false;
        }
        detail.push(format!(
            "n={n}: olbfgs {ol} vs (4*mem+1)*n = {target} (ratio {ratio:.3}), obfgs {ob}, res {re}"
        ));
        per_n.push((ob as f64, re as f64));
    }
    // Quadratic and cubic growth between n=50 and n=200 (x4): factor-two
    // windows around 16 and 64 absorb the lower-order terms.
    let obfgs_growth = per_n[1].0 / per_n[0].0;
    let res_growth = per_n[1].1 / per_n[0].1;
    if !(8.0..=32.0).contains(&obfgs_growth) {
        pass = false;
    }
    if !(32.0..=128.0).contains(&res_growth) {
        pass = false;
    }
    detail.push(format!(
        "growth over n x4: obfgs {obfgs_growth:.1} (expect ~16), res {res_growth:.1} (expect ~64)"
    ));
    gate("8 cost scaling", pass, &detail.join("; "));
}

#[test]
fn criterion_09_rate_machinery() {
    let report = verify::rate_suite();
    gate("9 rate machinery", report.passed, &report.detail);
}

#[test]
fn criterion_10_gradient_checks() {
    let report = verify::gradients_suite();
    gate("10 gradient checks", report.passed, &report.detail);
}
