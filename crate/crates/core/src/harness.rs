//! Seeded trial runner and Monte-Carlo experiment driver.
//!
//! A trial owns one problem instance, one optimizer state, and one RNG, all
//! derived from a single seed, and iterates until a convergence criterion or
//! a budget of processed stochastic functions is exhausted. The convergence
//! time is reported in "functions processed": batch size times the first
//! iteration index at which the criterion holds, or the cap value (flagged
//! as a failure) when the budget runs out first.
//!
//! Problems with a known optimum stop on relative distance
//! `||w - w*|| / ||w*|| <= rho`; dataset problems stop on the objective
//! target `F(w) <= rho` instead.

use std::io::Write as IoWrite;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    check_matrix_bounds, check_pair_curvature, dense_hessian_from_pairs, AnalysisError,
    BoundConstants, BoundReport, BoundRow,
};
use crate::numerics::{Rng64, Vec64};
use crate::optimizers::{
    ObfgsState, OlbfgsState, OptimError, OptimizerKind, OptimizerState, ResState, SagState,
    StepSchedule,
};
use crate::problems::{
    fmt_float, DiagMode, LogisticDataset, ProblemError, QuadraticProblem, StochasticProblem,
    SvmDataset,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("incompatible optimizer/problem combination: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// Config types (shared with the CLI's JSON schema)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DiagSpec {
    DiscreteXi { xi: u32 },
    Uniform01,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Quadratic {
        n: usize,
        diag: DiagSpec,
        theta0: f64,
    },
    SvmSynthetic {
        n: usize,
        points: usize,
        #[serde(default = "default_svm_lambda")]
        lambda: f64,
    },
    LogisticSynthetic {
        n: usize,
        points: usize,
        positive_frac: f64,
        nnz_per_row: usize,
        #[serde(default = "default_logistic_lambda")]
        lambda: f64,
        #[serde(default = "default_gamma_weight")]
        gamma_weight: f64,
    },
}

fn default_svm_lambda() -> f64 {
    crate::problems::SVM_DEFAULT_LAMBDA
}

fn default_logistic_lambda() -> f64 {
    crate::problems::LOGISTIC_DEFAULT_LAMBDA
}

fn default_gamma_weight() -> f64 {
    1.0
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        match self {
            ProblemSpec::Quadratic { n, .. } => *n,
            ProblemSpec::SvmSynthetic { n, .. } => *n,
            ProblemSpec::LogisticSynthetic { n, .. } => *n,
        }
    }

    pub fn build(&self, rng: &mut Rng64) -> Result<Box<dyn StochasticProblem>, HarnessError> {
        match self {
            ProblemSpec::Quadratic { n, diag, theta0 } => {
                let mode = match diag {
                    DiagSpec::DiscreteXi { xi } => DiagMode::DiscreteXi(*xi),
                    DiagSpec::Uniform01 => DiagMode::Uniform01,
                };
                Ok(Box::new(QuadraticProblem::synthetic(*n, mode, *theta0, rng)?))
            }
            ProblemSpec::SvmSynthetic { n, points, lambda } => Ok(Box::new(
                SvmDataset::synthetic(*n, *points, rng)?.with_lambda(*lambda),
            )),
            ProblemSpec::LogisticSynthetic {
                n,
                points,
                positive_frac,
                nnz_per_row,
                lambda,
                gamma_weight,
            } => Ok(Box::new(
                LogisticDataset::synthetic(*n, *points, *positive_frac, *nnz_per_row, rng)?
                    .with_lambda(*lambda)
                    .with_gamma(*gamma_weight)?,
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    /// Batch size of the stochastic gradient. Ignored by the
    /// stored-gradient method, which draws exactly one point per iteration.
    #[serde(default = "default_l")]
    pub l: usize,
    /// Curvature-pair memory (limited-memory method only).
    #[serde(default = "default_mem")]
    pub mem: usize,
    /// Identity regularization of the direct curvature estimate (RES only).
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Identity bias of the descent operator (RES only).
    #[serde(default = "default_gamma_big")]
    pub gamma_big: f64,
}

fn default_l() -> usize {
    1
}
fn default_mem() -> usize {
    10
}
fn default_delta() -> f64 {
    1e-3
}
fn default_gamma_big() -> f64 {
    1e-4
}

impl OptimizerSpec {
    pub fn new(kind: OptimizerKind) -> Self {
        OptimizerSpec {
            kind,
            l: default_l(),
            mem: default_mem(),
            delta: default_delta(),
            gamma_big: default_gamma_big(),
        }
    }

    pub fn with_l(mut self, l: usize) -> Self {
        self.l = l;
        self
    }

    pub fn with_mem(mut self, mem: usize) -> Self {
        self.mem = mem;
        self
    }

    pub fn with_res_params(mut self, delta: f64, gamma_big: f64) -> Self {
        self.delta = delta;
        self.gamma_big = gamma_big;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub eps0: f64,
    pub t_big0: f64,
}

/// Initial iterate. The default is the origin; `scaled_optimum` places the
/// start at `factor * w*` for problems with a known optimum, which makes
/// loose-accuracy studies (rho near 1) non-trivial.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum W0Spec {
    #[default]
    Zeros,
    ScaledOptimum { factor: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialConfig {
    pub problem: ProblemSpec,
    pub optimizer: OptimizerSpec,
    pub schedule: ScheduleSpec,
    /// Target relative distance (problems with a known optimum) or target
    /// objective value (dataset problems).
    pub rho: f64,
    /// Budget of stochastic functions processed; also the value reported
    /// for failed trials.
    pub max_funcs: u64,
    #[serde(default)]
    pub w0: W0Spec,
    /// Criterion-check cadence in iterations. The default 1 checks every
    /// iterate; dataset problems pay a full objective sweep per check, so
    /// coarse targets can raise this (the reported time then has the
    /// cadence's granularity).
    #[serde(default = "default_check_every")]
    pub check_every: u64,
    #[serde(default)]
    pub record_trace: bool,
    #[serde(default)]
    pub monitor_bounds: bool,
    pub seed: u64,
}

fn default_check_every() -> u64 {
    1
}

impl TrialConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.rho < 0.0 {
            return Err(HarnessError::InvalidConfig("rho must be >= 0".into()));
        }
        if self.schedule.eps0 <= 0.0 || self.schedule.t_big0 <= 0.0 {
            return Err(HarnessError::InvalidConfig(
                "schedule parameters must be positive".into(),
            ));
        }
        if self.optimizer.l == 0 {
            return Err(HarnessError::InvalidConfig("batch size must be >= 1".into()));
        }
        if self.max_funcs < self.optimizer.l as u64 {
            return Err(HarnessError::InvalidConfig(
                "max_funcs must cover at least one batch".into(),
            ));
        }
        if self.optimizer.kind == OptimizerKind::Olbfgs && self.optimizer.mem == 0 {
            return Err(HarnessError::InvalidConfig("memory must be >= 1".into()));
        }
        if self.check_every == 0 {
            return Err(HarnessError::InvalidConfig(
                "check_every must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub optimizers: Vec<OptimizerSpec>,
    pub schedule: ScheduleSpec,
    pub rho: f64,
    pub max_funcs: u64,
    /// Number of Monte-Carlo trials per optimizer.
    pub trials: usize,
    #[serde(default)]
    pub base_seed: Option<u64>,
    #[serde(default)]
    pub w0: W0Spec,
    #[serde(default = "default_check_every")]
    pub check_every: u64,
    #[serde(default)]
    pub record_trace: bool,
    #[serde(default)]
    pub monitor_bounds: bool,
    /// Histogram bin edges; log-spaced over [0, max_funcs] when omitted.
    #[serde(default)]
    pub bin_edges: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::InvalidConfig("trials must be >= 1".into()));
        }
        if self.optimizers.is_empty() {
            return Err(HarnessError::InvalidConfig(
                "at least one optimizer is required".into(),
            ));
        }
        for opt in &self.optimizers {
            self.trial_config(opt, 0).validate()?;
        }
        if let Some(edges) = &self.bin_edges {
            if edges.len() < 2 || edges.windows(2).any(|w| w[0] >= w[1]) {
                return Err(HarnessError::InvalidConfig(
                    "bin edges must be at least two strictly increasing values".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn trial_config(&self, optimizer: &OptimizerSpec, seed: u64) -> TrialConfig {
        TrialConfig {
            problem: self.problem.clone(),
            optimizer: *optimizer,
            schedule: self.schedule,
            rho: self.rho,
            max_funcs: self.max_funcs,
            w0: self.w0,
            check_every: self.check_every,
            record_trace: self.record_trace,
            monitor_bounds: self.monitor_bounds,
            seed,
        }
    }

    pub fn effective_bin_edges(&self) -> Vec<f64> {
        if let Some(edges) = &self.bin_edges {
            return edges.clone();
        }
        // Log-spaced defaults covering every reportable value in [0, cap].
        let cap = self.max_funcs as f64;
        let lo = 1.0f64;
        let bins = 20usize;
        let mut edges = vec![0.0];
        let ratio = (cap / lo).powf(1.0 / bins as f64);
        let mut e = lo;
        for _ in 0..bins {
            edges.push(e);
            e *= ratio;
        }
        edges.push(cap);
        edges.dedup_by(|a, b| a == b);
        edges
    }
}

// ---------------------------------------------------------------------------
// Trial execution
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: u64,
    pub funcs: u64,
    pub rel_dist: f64,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    /// Functions processed at first attainment of the criterion, or the cap.
    pub tau_metric: u64,
    pub converged: bool,
    /// Total sample-gradient evaluations, including the second same-batch
    /// evaluations the quasi-Newton methods spend on curvature pairs.
    pub grad_evals: u64,
    /// Direction/update multiplications of the last executed iteration.
    pub last_iter_mults: u64,
    pub total_mults: u64,
    pub final_rel_dist: f64,
    pub final_objective: f64,
    pub trace: Option<Vec<TraceRow>>,
    pub bound_report: Option<BoundReport>,
}

fn initial_point(
    spec: &W0Spec,
    problem: &dyn StochasticProblem,
) -> Result<Vec64, HarnessError> {
    match spec {
        W0Spec::Zeros => Ok(Vec64::zeros(problem.dim())),
        W0Spec::ScaledOptimum { factor } => {
            let w_star = problem.optimum().ok_or_else(|| {
                HarnessError::Incompatible(
                    "scaled-optimum start needs a problem with a known optimum".into(),
                )
            })?;
            Ok(w_star.scaled(*factor))
        }
    }
}

fn build_optimizer(
    spec: &OptimizerSpec,
    problem: &dyn StochasticProblem,
) -> Result<OptimizerState, HarnessError> {
    let n = problem.dim();
    Ok(match spec.kind {
        OptimizerKind::Sgd => OptimizerState::Sgd { t: 0 },
        OptimizerKind::Olbfgs => OptimizerState::Olbfgs(OlbfgsState::new(spec.mem)),
        OptimizerKind::Obfgs => OptimizerState::Obfgs(ObfgsState::new(n)),
        OptimizerKind::Res => {
            if let Some((eig_min, _)) = problem.hessian_eig_bounds() {
                if spec.delta >= eig_min {
                    return Err(HarnessError::Incompatible(format!(
                        "regularization delta = {} must stay below the smallest sample \
                         curvature {eig_min}",
                        spec.delta
                    )));
                }
            }
            OptimizerState::Res(ResState::new(n, spec.delta, spec.gamma_big))
        }
        OptimizerKind::Sag => {
            let points = problem.num_points().ok_or_else(|| {
                HarnessError::Incompatible(
                    "stored-gradient averaging needs a finite data set".into(),
                )
            })?;
            OptimizerState::Sag(SagState::new(n, points))
        }
    })
}

/// Runs one seeded trial to the criterion or the function budget.
pub fn run_trial(cfg: &TrialConfig) -> Result<TrialResult, HarnessError> {
    cfg.validate()?;
    let mut rng = Rng64::new(cfg.seed);
    let problem = cfg.problem.build(&mut rng)?;
    let problem: &dyn StochasticProblem = problem.as_ref();
    let mut optimizer = build_optimizer(&cfg.optimizer, problem)?;
    if cfg.monitor_bounds
        && !matches!(
            (&optimizer, &cfg.problem),
            (OptimizerState::Olbfgs(_), ProblemSpec::Quadratic { .. })
        )
    {
        return Err(HarnessError::Incompatible(
            "bound monitoring is defined for the limited-memory method on quadratic problems"
                .into(),
        ));
    }
    let sched = StepSchedule::new(cfg.schedule.eps0, cfg.schedule.t_big0);
    let mut w = initial_point(&cfg.w0, problem)?;

    let optimum = problem.optimum();
    let opt_norm = optimum.as_ref().map(|o| o.norm());
    let rel_dist = |w: &Vec64| -> f64 {
        match (&optimum, opt_norm) {
            (Some(o), Some(norm)) => w.sub(o).norm() / norm,
            _ => f64::NAN,
        }
    };
    let criterion = |w: &Vec64| -> bool {
        match &optimum {
            Some(_) => rel_dist(w) <= cfg.rho,
            None => problem.expected_value(w) <= cfg.rho,
        }
    };

    let bound_consts = problem
        .hessian_eig_bounds()
        .map(|(lo, hi)| BoundConstants::new(lo, hi, lo, hi, 0.0, problem.dim(), cfg.optimizer.mem));

    let mut trace = cfg.record_trace.then(Vec::new);
    let mut bound_report = cfg.monitor_bounds.then(BoundReport::default);

    let step_funcs = match cfg.optimizer.kind {
        OptimizerKind::Sag => 1u64,
        _ => cfg.optimizer.l as u64,
    };
    let mut t: u64 = 0;
    let mut funcs: u64 = 0;
    let mut grad_evals: u64 = 0;
    let mut total_mults: u64 = 0;
    let mut last_iter_mults: u64 = 0;
    let mut converged = false;
    let mut tau = cfg.max_funcs;

    loop {
        if let Some(rows) = trace.as_mut() {
            rows.push(TraceRow {
                t,
                funcs,
                rel_dist: rel_dist(&w),
                objective: problem.expected_value(&w),
            });
        }
        if t.is_multiple_of(cfg.check_every) && criterion(&w) {
            converged = true;
            tau = funcs;
            break;
        }
        if funcs + step_funcs > cfg.max_funcs {
            break;
        }
        let info = optimizer.step(problem, &mut rng, &sched, cfg.optimizer.l, &mut w)?;
        t += 1;
        funcs += info.funcs;
        grad_evals += info.grad_evals;
        total_mults += info.mults;
        last_iter_mults = info.mults;

        if let (Some(report), Some(consts), OptimizerState::Olbfgs(state)) =
            (bound_report.as_mut(), bound_consts.as_ref(), &optimizer)
        {
            let dense =
                dense_hessian_from_pairs(state.pairs(), state.gamma_hat(), problem.dim())?;
            let (trace_v, det, eig_min, eig_max, matrix_pass) =
                check_matrix_bounds(&dense, consts, problem.dim(), cfg.optimizer.mem)?;
            let (pair_curvature, pair_ratio, pair_pass) = if info.pair_rejected {
                (f64::NAN, f64::NAN, false)
            } else {
                let pair = state.pairs().last().expect("pair accepted this iterate");
                let check = check_pair_curvature(pair, consts.inst_eig_min, consts.inst_eig_max);
                (check.curvature_over_v, check.hessian_ratio, check.pass)
            };
            report.rows.push(BoundRow {
                t,
                trace: trace_v,
                det,
                eig_min,
                eig_max,
                matrix_pass,
                pair_curvature,
                pair_ratio,
                pair_pass,
            });
        }
    }

    Ok(TrialResult {
        tau_metric: tau,
        converged,
        grad_evals,
        last_iter_mults,
        total_mults,
        final_rel_dist: rel_dist(&w),
        final_objective: problem.expected_value(&w),
        trace,
        bound_report,
    })
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub optimizer: String,
    pub mean_tau: f64,
    pub std_tau: f64,
    pub median_tau: f64,
    pub min_tau: u64,
    pub max_tau: u64,
    pub failures: u64,
    #[serde(skip)]
    pub histogram: Vec<HistBin>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
}

#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub spec: OptimizerSpec,
    pub trials: Vec<TrialResult>,
    pub summary: MethodSummary,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub base_seed: u64,
    pub methods: Vec<MethodOutcome>,
}

/// Right-open bins with a right-closed final bin; values outside the edge
/// range are clamped into the boundary bins so counts always total the
/// number of values.
pub fn histogram(values: &[f64], edges: &[f64]) -> Vec<HistBin> {
    assert!(edges.len() >= 2, "need at least two edges");
    let bins = edges.len() - 1;
    let mut counts = vec![0u64; bins];
    for &v in values {
        let mut placed = false;
        for b in 0..bins {
            let last = b == bins - 1;
            if (v >= edges[b] && v < edges[b + 1]) || (last && v >= edges[b] && v <= edges[b + 1])
            {
                counts[b] += 1;
                placed = true;
                break;
            }
        }
        if !placed {
            if v < edges[0] {
                counts[0] += 1;
            } else {
                counts[bins - 1] += 1;
            }
        }
    }
    (0..bins)
        .map(|b| HistBin {
            lo: edges[b],
            hi: edges[b + 1],
            count: counts[b],
        })
        .collect()
}

fn summarize(name: &str, trials: &[TrialResult], edges: &[f64]) -> MethodSummary {
    let taus: Vec<f64> = trials.iter().map(|r| r.tau_metric as f64).collect();
    let n = taus.len() as f64;
    let mean = taus.iter().sum::<f64>() / n;
    let var = if taus.len() > 1 {
        taus.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let mut sorted = taus.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    MethodSummary {
        optimizer: name.to_string(),
        mean_tau: mean,
        std_tau: var.sqrt(),
        median_tau: median,
        min_tau: trials.iter().map(|r| r.tau_metric).min().unwrap_or(0),
        max_tau: trials.iter().map(|r| r.tau_metric).max().unwrap_or(0),
        failures: trials.iter().filter(|r| !r.converged).count() as u64,
        histogram: histogram(&taus, edges),
    }
}

/// Runs `trials` seeded trials per optimizer (trial i uses seed
/// base_seed + i, so a fresh problem instance per trial) on up to `jobs`
/// worker threads, then aggregates in trial order.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    jobs: usize,
) -> Result<ExperimentOutcome, HarnessError> {
    cfg.validate()?;
    let base_seed = cfg.base_seed.unwrap_or(0);
    let edges = cfg.effective_bin_edges();
    let mut methods = Vec::with_capacity(cfg.optimizers.len());
    for opt in &cfg.optimizers {
        let trials = run_trials_parallel(cfg, opt, base_seed, jobs)?;
        let summary = summarize(opt.kind.name(), &trials, &edges);
        methods.push(MethodOutcome {
            spec: *opt,
            trials,
            summary,
        });
    }
    Ok(ExperimentOutcome { base_seed, methods })
}

fn run_trials_parallel(
    cfg: &ExperimentConfig,
    opt: &OptimizerSpec,
    base_seed: u64,
    jobs: usize,
) -> Result<Vec<TrialResult>, HarnessError> {
    let count = cfg.trials;
    let workers = jobs.max(1).min(count);
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<TrialResult>>> = Mutex::new(vec![None; count]);
    let failure: Mutex<Option<HarnessError>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count || failure.lock().unwrap().is_some() {
                    return;
                }
                let trial_cfg = cfg.trial_config(opt, base_seed + i as u64);
                match run_trial(&trial_cfg) {
                    Ok(result) => {
                        slots.lock().unwrap()[i] = Some(result);
                    }
                    Err(err) => {
                        let mut slot = failure.lock().unwrap();
                        if slot.is_none() {
                            *slot = Some(err);
                        }
                        return;
                    }
                }
            });
        }
    });
    if let Some(err) = failure.into_inner().unwrap() {
        return Err(err);
    }
    Ok(slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every trial slot filled"))
        .collect())
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// Batch size of every optimizer in the config.
    L,
    /// Condition-number exponent of the quadratic problem.
    Xi,
    /// Problem dimension.
    N,
}

impl std::str::FromStr for SweepAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "L" | "l" => Ok(SweepAxis::L),
            "xi" => Ok(SweepAxis::Xi),
            "n" => Ok(SweepAxis::N),
            other => Err(format!("unknown sweep axis '{other}'")),
        }
    }
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::L => "L",
            SweepAxis::Xi => "xi",
            SweepAxis::N => "n",
        }
    }
}

/// One experiment per axis value. Experiment k shifts the base seed by
/// k * trials so trials never share seeds across axis values; a single-value
/// sweep is therefore identical to a plain experiment run.
pub fn sweep(
    axis: SweepAxis,
    values: &[f64],
    template: &ExperimentConfig,
    jobs: usize,
) -> Result<Vec<(f64, ExperimentOutcome)>, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::InvalidConfig("sweep values are empty".into()));
    }
    let base = template.base_seed.unwrap_or(0);
    let mut out = Vec::with_capacity(values.len());
    for (k, &value) in values.iter().enumerate() {
        let mut cfg = template.clone();
        cfg.base_seed = Some(base + (k * template.trials) as u64);
        apply_axis(axis, value, &mut cfg)?;
        let outcome = run_experiment(&cfg, jobs)?;
        out.push((value, outcome));
    }
    Ok(out)
}

fn apply_axis(axis: SweepAxis, value: f64, cfg: &mut ExperimentConfig) -> Result<(), HarnessError> {
    let as_usize = |v: f64| -> Result<usize, HarnessError> {
        if v < 0.0 || v.fract() != 0.0 {
            return Err(HarnessError::InvalidConfig(format!(
                "axis value {v} must be a nonnegative integer"
            )));
        }
        Ok(v as usize)
    };
    match axis {
        SweepAxis::L => {
            let l = as_usize(value)?;
            for opt in &mut cfg.optimizers {
                opt.l = l;
            }
        }
        SweepAxis::Xi => match &mut cfg.problem {
            ProblemSpec::Quadratic { diag, .. } => {
                *diag = DiagSpec::DiscreteXi {
                    xi: as_usize(value)? as u32,
                };
            }
            _ => {
                return Err(HarnessError::InvalidConfig(
                    "condition-number sweep needs a quadratic problem".into(),
                ))
            }
        },
        SweepAxis::N => {
            let n = as_usize(value)?;
            match &mut cfg.problem {
                ProblemSpec::Quadratic { n: dim, .. } => *dim = n,
                ProblemSpec::SvmSynthetic { n: dim, .. } => *dim = n,
                ProblemSpec::LogisticSynthetic { n: dim, .. } => *dim = n,
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

/// `trial,seed,optimizer,tau,converged,final_rel_dist,final_objective`
pub fn write_summary_csv(path: &Path, outcome: &ExperimentOutcome) -> Result<(), HarnessError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(b"trial,seed,optimizer,tau,converged,final_rel_dist,final_objective\n")?;
    for method in &outcome.methods {
        for (i, trial) in method.trials.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                i,
                outcome.base_seed + i as u64,
                method.spec.kind.name(),
                trial.tau_metric,
                trial.converged,
                fmt_float(trial.final_rel_dist),
                fmt_float(trial.final_objective),
            )?;
        }
    }
    Ok(())
}

/// `bin_lo,bin_hi,count`
pub fn write_histogram_csv(path: &Path, bins: &[HistBin]) -> Result<(), HarnessError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(b"bin_lo,bin_hi,count\n")?;
    for bin in bins {
        writeln!(
            out,
            "{},{},{}",
            fmt_float(bin.lo),
            fmt_float(bin.hi),
            bin.count
        )?;
    }
    Ok(())
}

/// `t,funcs,rel_dist,objective`
pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<(), HarnessError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(b"t,funcs,rel_dist,objective\n")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{}",
            row.t,
            row.funcs,
            fmt_float(row.rel_dist),
            fmt_float(row.objective)
        )?;
    }
    Ok(())
}

/// `axis_value,optimizer,mean_tau,std_tau,median_tau,failures`
pub fn write_sweep_csv(
    path: &Path,
    axis_results: &[(f64, ExperimentOutcome)],
) -> Result<(), HarnessError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(b"axis_value,optimizer,mean_tau,std_tau,median_tau,failures\n")?;
    for (value, outcome) in axis_results {
        for method in &outcome.methods {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_float(*value),
                method.summary.optimizer,
                fmt_float(method.summary.mean_tau),
                fmt_float(method.summary.std_tau),
                fmt_float(method.summary.median_tau),
                method.summary.failures,
            )?;
        }
    }
    Ok(())
}
