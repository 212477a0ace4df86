//! Command-line front end: experiment execution, axis sweeps, and the
//! verification suites, driven by JSON configs with flat flag overrides.
//!
//! Exit codes: 0 success, 1 verification failure, 2 config error,
//! 3 incompatible optimizer/problem combination.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sqn::harness::{
    run_experiment, sweep, write_histogram_csv, write_summary_csv, write_sweep_csv,
    write_trace_csv, DiagSpec, ExperimentConfig, ExperimentOutcome, HarnessError, OptimizerSpec,
    ProblemSpec, SweepAxis,
};
use sqn::optimizers::OptimizerKind;
use sqn::verify;

#[derive(Parser)]
#[command(
    name = "sqn",
    version,
    about = "Stochastic quasi-Newton optimization benchmark harness",
    long_about = "Runs seeded Monte-Carlo convergence-time experiments for SGD, oBFGS, \
                  oLBFGS, RES, and SAG over synthetic quadratic, SVM, and weighted \
                  logistic objectives, and executes the methods' verification suites.\n\n\
                  The SQN_SEED environment variable supplies the default base seed when \
                  neither --seed nor the config provides one."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a Monte-Carlo experiment from a JSON config
    Run(RunArgs),
    /// Run one experiment per value of a swept axis (L, xi, or n)
    Sweep(SweepArgs),
    /// Run verification suites (oracle, bounds, gradients, rate, all)
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (defaults to the number of cores)
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    overrides: Overrides,
}

/// Flat overrides shadowing the corresponding JSON fields.
#[derive(Args)]
struct Overrides {
    /// Trials per optimizer
    #[arg(long)]
    trials: Option<usize>,
    /// Base seed (shadows config and SQN_SEED)
    #[arg(long)]
    seed: Option<u64>,
    /// Replace the optimizer list with a single method: sgd | olbfgs | obfgs | res | sag
    #[arg(long)]
    optimizer: Option<String>,
    /// Replace the problem: quadratic | svm | logistic (with stock parameters)
    #[arg(long)]
    problem: Option<String>,
    /// Convergence target (relative distance, or objective value for datasets)
    #[arg(long)]
    rho: Option<f64>,
    /// Initial step size
    #[arg(long)]
    eps0: Option<f64>,
    /// Step-size decay horizon
    #[arg(long)]
    t0: Option<f64>,
    /// Batch size for every optimizer
    #[arg(long)]
    l: Option<usize>,
    /// Curvature memory for the limited-memory method
    #[arg(long)]
    mem: Option<usize>,
    /// Curvature regularization (RES)
    #[arg(long)]
    delta: Option<f64>,
    /// Descent-operator identity bias (RES)
    #[arg(long)]
    gamma_big: Option<f64>,
    /// Budget of stochastic functions processed per trial
    #[arg(long)]
    max_funcs: Option<u64>,
    /// Start at factor * optimum instead of the origin (problems with a
    /// known optimum only)
    #[arg(long, allow_hyphen_values = true)]
    w0_factor: Option<f64>,
    /// Criterion-check cadence in iterations
    #[arg(long)]
    check_every: Option<u64>,
    /// Record per-iterate traces (costly for dataset objectives)
    #[arg(long)]
    record_trace: bool,
    /// Record curvature-bound reports (limited-memory method on quadratics)
    #[arg(long)]
    monitor_bounds: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Swept axis: L, xi, or n
    #[arg(long)]
    axis: String,
    /// Comma-separated axis values, e.g. 1,2,5,10,20
    #[arg(long)]
    values: String,
    /// JSON experiment config used as the template
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (defaults to the number of cores)
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite to run: oracle | bounds | gradients | rate | all
    #[arg(long, default_value = "all")]
    suite: String,
}

enum CliError {
    Config(String),
    Incompatible(String),
    VerifyFailed,
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::VerifyFailed => 1,
            CliError::Config(_) => 2,
            CliError::Incompatible(_) => 3,
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(err: HarnessError) -> Self {
        match err {
            HarnessError::Incompatible(msg) => CliError::Incompatible(msg),
            other => CliError::Config(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            match &err {
                CliError::Config(msg) => eprintln!("config error: {msg}"),
                CliError::Incompatible(msg) => eprintln!("incompatible configuration: {msg}"),
                CliError::VerifyFailed => eprintln!("verification failed"),
            }
            ExitCode::from(err.code())
        }
    }
}

fn real_main() -> Result<(), CliError> {
    match Cli::parse().cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Sweep(args) => cmd_sweep(args),
        Cmd::Verify(args) => cmd_verify(args),
    }
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(4)
}

fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(cfg)
}

fn env_seed() -> Option<u64> {
    std::env::var("SQN_SEED").ok().and_then(|s| s.parse().ok())
}

fn apply_overrides(cfg: &mut ExperimentConfig, ov: &Overrides) -> Result<(), CliError> {
    if let Some(name) = &ov.problem {
        cfg.problem = match name.as_str() {
            "quadratic" => ProblemSpec::Quadratic {
                n: 50,
                diag: DiagSpec::DiscreteXi { xi: 2 },
                theta0: 0.5,
            },
            "svm" => ProblemSpec::SvmSynthetic {
                n: 100,
                points: 10_000,
                lambda: 1e-4,
            },
            "logistic" => ProblemSpec::LogisticSynthetic {
                n: 1000,
                points: 10_000,
                positive_frac: 0.052,
                nnz_per_row: 21,
                lambda: 1e-6,
                gamma_weight: 18.2,
            },
            other => return Err(CliError::Config(format!("unknown problem '{other}'"))),
        };
    }
    if let Some(name) = &ov.optimizer {
        let kind: OptimizerKind = name.parse().map_err(CliError::Config)?;
        cfg.optimizers = vec![OptimizerSpec::new(kind)];
    }
    if let Some(trials) = ov.trials {
        cfg.trials = trials;
    }
    if let Some(seed) = ov.seed {
        cfg.base_seed = Some(seed);
    }
    if cfg.base_seed.is_none() {
        cfg.base_seed = env_seed();
    }
    if let Some(rho) = ov.rho {
        cfg.rho = rho;
    }
    if let Some(eps0) = ov.eps0 {
        cfg.schedule.eps0 = eps0;
    }
    if let Some(t0) = ov.t0 {
        cfg.schedule.t_big0 = t0;
    }
    if let Some(l) = ov.l {
        for opt in &mut cfg.optimizers {
            opt.l = l;
        }
    }
    if let Some(mem) = ov.mem {
        for opt in &mut cfg.optimizers {
            opt.mem = mem;
        }
    }
    if let Some(delta) = ov.delta {
        for opt in &mut cfg.optimizers {
            opt.delta = delta;
        }
    }
    if let Some(gamma_big) = ov.gamma_big {
        for opt in &mut cfg.optimizers {
            opt.gamma_big = gamma_big;
        }
    }
    if let Some(max_funcs) = ov.max_funcs {
        cfg.max_funcs = max_funcs;
    }
    if let Some(factor) = ov.w0_factor {
        cfg.w0 = sqn::harness::W0Spec::ScaledOptimum { factor };
    }
    if let Some(every) = ov.check_every {
        cfg.check_every = every;
    }
    if ov.record_trace {
        cfg.record_trace = true;
    }
    if ov.monitor_bounds {
        cfg.monitor_bounds = true;
    }
    Ok(())
}

fn write_outputs(out: &Path, outcome: &ExperimentOutcome) -> Result<(), CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out.display())))?;
    write_summary_csv(&out.join("summary.csv"), outcome)?;
    let single = outcome.methods.len() == 1;
    for method in &outcome.methods {
        let name = if single {
            "histogram.csv".to_string()
        } else {
            format!("histogram_{}.csv", method.spec.kind.name())
        };
        write_histogram_csv(&out.join(name), &method.summary.histogram)?;
        for (i, trial) in method.trials.iter().enumerate() {
            if let Some(rows) = &trial.trace {
                write_trace_csv(
                    &out.join(format!("trace_{}_trial{i}.csv", method.spec.kind.name())),
                    rows,
                )?;
            }
            if let Some(report) = &trial.bound_report {
                report
                    .write_csv(&out.join(format!(
                        "bounds_{}_trial{i}.csv",
                        method.spec.kind.name()
                    )))
                    .map_err(|e| CliError::Config(e.to_string()))?;
            }
        }
    }
    Ok(())
}

fn summary_json(outcome: &ExperimentOutcome) -> String {
    let methods: Vec<serde_json::Value> = outcome
        .methods
        .iter()
        .map(|m| {
            serde_json::json!({
                "optimizer": m.summary.optimizer,
                "l": m.spec.l,
                "mean_tau": m.summary.mean_tau,
                "std_tau": m.summary.std_tau,
                "median_tau": m.summary.median_tau,
                "min_tau": m.summary.min_tau,
                "max_tau": m.summary.max_tau,
                "failures": m.summary.failures,
            })
        })
        .collect();
    serde_json::json!({
        "base_seed": outcome.base_seed,
        "trials": outcome.methods.first().map_or(0, |m| m.trials.len()),
        "methods": methods,
    })
    .to_string()
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&args.config)?;
    apply_overrides(&mut cfg, &args.overrides)?;
    cfg.validate()?;
    let outcome = run_experiment(&cfg, args.jobs.unwrap_or_else(default_jobs))?;
    write_outputs(&args.out, &outcome)?;
    println!("{}", summary_json(&outcome));
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&args.config)?;
    apply_overrides(&mut cfg, &args.overrides)?;
    cfg.validate()?;
    let axis: SweepAxis = args.axis.parse().map_err(CliError::Config)?;
    let values: Vec<f64> = args
        .values
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("bad axis value '{s}': {e}")))
        })
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err(CliError::Config("sweep values are empty".into()));
    }
    let results = sweep(axis, &values, &cfg, args.jobs.unwrap_or_else(default_jobs))?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", args.out.display())))?;
    for (value, outcome) in &results {
        let sub = args.out.join(format!("{}_{}", axis.name(), value));
        write_outputs(&sub, outcome)?;
    }
    write_sweep_csv(&args.out.join("sweep.csv"), &results)?;
    let lines: Vec<serde_json::Value> = results
        .iter()
        .map(|(value, outcome)| {
            serde_json::json!({
                "axis": axis.name(),
                "value": value,
                "summary": serde_json::from_str::<serde_json::Value>(&summary_json(outcome))
                    .expect("summary is valid json"),
            })
        })
        .collect();
    println!("{}", serde_json::Value::Array(lines));
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    let suites: Vec<&str> = match args.suite.as_str() {
        "all" => vec!["oracle", "bounds", "gradients", "rate"],
        "oracle" | "bounds" | "gradients" | "rate" => vec![args.suite.as_str()],
        other => return Err(CliError::Config(format!("unknown suite '{other}'"))),
    };
    // Test hook: SQN_MUTATE_TWO_LOOP perturbs the two-loop output inside the
    // oracle suite so its sensitivity can be demonstrated.
    let perturb = std::env::var("SQN_MUTATE_TWO_LOOP")
        .ok()
        .map(|s| s.parse::<f64>().unwrap_or(1e-6));
    let reports = verify::run_suites(&suites, perturb);
    let mut all_pass = true;
    for report in &reports {
        println!(
            "{}",
            serde_json::json!({
                "suite": report.name,
                "passed": report.passed,
                "cases": report.cases,
                "failures": report.failures,
                "detail": report.detail,
            })
        );
        all_pass &= report.passed;
    }
    if all_pass {
        Ok(())
    } else {
        Err(CliError::VerifyFailed)
    }
}
