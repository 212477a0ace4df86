//! The five stochastic descent methods behind one iteration interface:
//! plain SGD, online BFGS (dense inverse updates), online limited-memory
//! BFGS (two-loop recursion over a FIFO of curvature pairs), regularized
//! stochastic BFGS (RES, dense direct updates with an identity shift), and
//! SAG (stored per-point gradients).
//!
//! All quasi-Newton variants share the same curvature-pair convention: after
//! stepping from `w` to `w_next` on a batch, the pair is
//! `v = w_next - w` and `r_hat = grad(w_next, batch) - grad(w, batch)` with
//! the *same* batch on both evaluations. Pairs whose inner product `vᵀr_hat`
//! is not safely positive are rejected and the curvature state is left
//! untouched.

use thiserror::Error;

use crate::numerics::{Mat64, NumericsError, Rng64, Vec64};
use crate::problems::{ProblemError, SampleBatch, StochasticProblem};

#[derive(Debug, Error)]
pub enum OptimError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("optimizer does not support this problem: {0}")]
    UnsupportedProblem(String),
}

/// Decaying step size eps_t = eps0 * t0 / (t0 + t).
#[derive(Debug, Clone, Copy)]
pub struct StepSchedule {
    eps0: f64,
    t_big0: f64,
}

impl StepSchedule {
    pub fn new(eps0: f64, t_big0: f64) -> Self {
        assert!(eps0 > 0.0 && t_big0 > 0.0, "schedule parameters must be positive");
        StepSchedule { eps0, t_big0 }
    }

    pub fn eps(&self, t: u64) -> f64 {
        self.eps0 * self.t_big0 / (self.t_big0 + t as f64)
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn t_big0(&self) -> f64 {
        self.t_big0
    }
}

/// Relative floor below which a pair's curvature `vᵀr_hat` is treated as
/// non-positive and the pair is rejected.
pub const CURVATURE_FLOOR_REL: f64 = 1e-12;

/// One (v, r_hat, rho_hat) curvature triple with cached
/// rho_hat = 1 / (vᵀ r_hat) > 0.
#[derive(Debug, Clone)]
pub struct CurvaturePair {
    v: Vec64,
    r_hat: Vec64,
    rho_hat: f64,
}

impl CurvaturePair {
    /// Builds the pair when the curvature is safely positive
    /// (`vᵀr_hat > CURVATURE_FLOOR_REL * ||v|| * ||r_hat||`); `None` rejects it.
    pub fn new(v: Vec64, r_hat: Vec64) -> Option<CurvaturePair> {
        assert_eq!(v.len(), r_hat.len(), "pair vectors must agree in length");
        let inner = v.dot(&r_hat);
        let floor = CURVATURE_FLOOR_REL * v.norm() * r_hat.norm();
        if inner > floor && inner > 0.0 {
            Some(CurvaturePair {
                rho_hat: 1.0 / inner,
                v,
                r_hat,
            })
        } else {
            None
        }
    }

    pub fn v(&self) -> &Vec64 {
        &self.v
    }

    pub fn r_hat(&self) -> &Vec64 {
        &self.r_hat
    }

    pub fn rho_hat(&self) -> f64 {
        self.rho_hat
    }

    /// Initial inverse-curvature scale vᵀr_hat / ||r_hat||², an estimate of
    /// one inverse eigenvalue of the local Hessian.
    pub fn scaling_factor(&self) -> f64 {
        self.v.dot(&self.r_hat) / self.r_hat.norm_sq()
    }
}

/// Bookkeeping for one optimizer iteration.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepInfo {
    /// Functions processed for the convergence-time metric (the batch size).
    pub funcs: u64,
    /// Sample-gradient evaluations actually performed (twice the batch size
    /// for the quasi-Newton methods, which re-evaluate the same batch).
    pub grad_evals: u64,
    /// Multiplications spent on the descent direction and curvature update
    /// (gradient evaluation cost excluded).
    pub mults: u64,
    /// Whether a curvature pair was rejected this iteration.
    pub pair_rejected: bool,
}

// ---------------------------------------------------------------------------
// SGD
// ---------------------------------------------------------------------------

/// w_next = w - eps_t * grad(w, batch).
pub fn sgd_iterate<P: StochasticProblem + ?Sized>(
    problem: &P,
    rng: &mut Rng64,
    sched: &StepSchedule,
    l: usize,
    t: u64,
    w: &mut Vec64,
) -> Result<StepInfo, OptimError> {
    let batch = problem.sample(rng, l)?;
    let grad = problem.batch_grad(w, &batch)?;
    w.axpy(-sched.eps(t), &grad);
    Ok(StepInfo {
        funcs: l as u64,
        grad_evals: l as u64,
        mults: w.len() as u64,
        pair_rejected: false,
    })
}

// ---------------------------------------------------------------------------
// oLBFGS
// ---------------------------------------------------------------------------

/// FIFO of at most `mem` recent curvature pairs plus the running scale
/// gamma_hat (1 until the first accepted pair).
#[derive(Debug, Clone)]
pub struct OlbfgsState {
    pairs: Vec<CurvaturePair>,
    gamma_hat: f64,
    t: u64,
    mem: usize,
}

impl OlbfgsState {
    pub fn new(mem: usize) -> Self {
        assert!(mem >= 1, "memory must hold at least one pair");
        OlbfgsState {
            pairs: Vec::with_capacity(mem),
            gamma_hat: 1.0,
            t: 0,
            mem,
        }
    }

    /// Stored pairs, oldest first.
    pub fn pairs(&self) -> &[CurvaturePair] {
        &self.pairs
    }

    pub fn gamma_hat(&self) -> f64 {
        self.gamma_hat
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn mem(&self) -> usize {
        self.mem
    }
}

/// Two-loop recursion: applies the limited-memory inverse-curvature operator
/// defined by `pairs` (oldest first) and the base scale `gamma_hat` to `p`
/// without forming any matrix. Cost (4*pairs + 1)*n multiplications.
pub fn two_loop(pairs: &[CurvaturePair], gamma_hat: f64, p: &Vec64) -> Vec64 {
    let mut mults = 0u64;
    two_loop_counted(pairs, gamma_hat, p, &mut mults)
}

pub fn two_loop_counted(
    pairs: &[CurvaturePair],
    gamma_hat: f64,
    p: &Vec64,
    mults: &mut u64,
) -> Vec64 {
    assert!(gamma_hat > 0.0, "base scale must be positive");
    let n = p.len() as u64;
    let tau = pairs.len();
    let mut alphas = vec![0.0f64; tau];
    let mut work = p.clone();
    // Backward pass, newest pair first.
    for (u, pair) in pairs.iter().rev().enumerate() {
        let alpha = pair.rho_hat() * pair.v().dot(&work);
        work.axpy(-alpha, pair.r_hat());
        alphas[u] = alpha;
        *mults += 2 * n + 1;
    }
    let mut q = work.scaled(gamma_hat);
    *mults += n;
    // Forward pass, oldest pair first; alphas pair up in reverse.
    for (u, pair) in pairs.iter().enumerate() {
        let beta = pair.rho_hat() * pair.r_hat().dot(&q);
        q.axpy(alphas[tau - 1 - u] - beta, pair.v());
        *mults += 2 * n + 1;
    }
    q
}

/// One oLBFGS iteration: descend along the two-loop direction, then form the
/// same-batch curvature pair, push it (evicting the oldest beyond `mem`),
/// and refresh gamma_hat from it.
pub fn olbfgs_iterate<P: StochasticProblem + ?Sized>(
    state: &mut OlbfgsState,
    problem: &P,
    rng: &mut Rng64,
    sched: &StepSchedule,
    l: usize,
    w: &mut Vec64,
) -> Result<StepInfo, OptimError> {
    let n = w.len() as u64;
    let batch = problem.sample(rng, l)?;
    let grad = problem.batch_grad(w, &batch)?;
    let mut mults = 0u64;
    let direction = two_loop_counted(&state.pairs, state.gamma_hat, &grad, &mut mults);
    let w_prev = w.clone();
    w.axpy(-sched.eps(state.t), &direction);
    mults += n;
    let grad_next = problem.batch_grad(w, &batch)?;

    let v = w.sub(&w_prev);
    let r_hat = grad_next.sub(&grad);
    mults += 3 * n; // pair curvature, norms for the acceptance floor and scale
    let rejected = match CurvaturePair::new(v, r_hat) {
        Some(pair) => {
            state.gamma_hat = pair.scaling_factor();
            if state.pairs.len() == state.mem {
                state.pairs.remove(0);
            }
            state.pairs.push(pair);
            false
        }
        None => true,
    };
    state.t += 1;
    Ok(StepInfo {
        funcs: l as u64,
        grad_evals: 2 * l as u64,
        mults,
        pair_rejected: rejected,
    })
}

// ---------------------------------------------------------------------------
// oBFGS
// ---------------------------------------------------------------------------

/// Dense inverse-curvature state for online BFGS.
#[derive(Debug, Clone)]
pub struct ObfgsState {
    b_inv: Mat64,
    t: u64,
}

impl ObfgsState {
    pub fn new(n: usize) -> Self {
        ObfgsState {
            b_inv: Mat64::identity(n),
            t: 0,
        }
    }

    pub fn b_inv(&self) -> &Mat64 {
        &self.b_inv
    }

    pub fn t(&self) -> u64 {
        self.t
    }
}

/// One online BFGS iteration with the dense inverse update
/// B⁻¹ <- ZᵀB⁻¹Z + rho v vᵀ, Z = I - rho r_hat vᵀ, expanded into symmetric
/// rank-two form so the update costs Θ(n²).
pub fn obfgs_iterate<P: StochasticProblem + ?Sized>(
    state: &mut ObfgsState,
    problem: &P,
    rng: &mut Rng64,
    sched: &StepSchedule,
    l: usize,
    w: &mut Vec64,
) -> Result<StepInfo, OptimError> {
    let n = w.len();
    let batch = problem.sample(rng, l)?;
    let grad = problem.batch_grad(w, &batch)?;
    let mut mults = 0u64;
    let direction = state.b_inv.mat_vec(&grad)?;
    mults += (n * n) as u64;
    let w_prev = w.clone();
    w.axpy(-sched.eps(state.t), &direction);
    mults += n as u64;
    let grad_next = problem.batch_grad(w, &batch)?;

    let v = w.sub(&w_prev);
    let r_hat = grad_next.sub(&grad);
    mults += 3 * n as u64;
    let rejected = match CurvaturePair::new(v, r_hat) {
        Some(pair) => {
            // ZᵀB⁻¹Z + rho v vᵀ
            //   = B⁻¹ - rho (v uᵀ + u vᵀ) + (rho² (r̂ᵀu) + rho) v vᵀ,  u = B⁻¹ r̂.
            let u = state.b_inv.mat_vec(pair.r_hat())?;
            mults += (n * n) as u64;
            let rho = pair.rho_hat();
            let ru = pair.r_hat().dot(&u);
            mults += n as u64;
            let vv_coeff = rho * rho * ru + rho;
            let mv = pair.v();
            for i in 0..n {
                for j in 0..=i {
                    let delta = -rho * (mv[i] * u[j] + u[i] * mv[j]) + vv_coeff * mv[i] * mv[j];
                    mults += 4;
                    state.b_inv.add_to(i, j, delta);
                    if i != j {
                        state.b_inv.add_to(j, i, delta);
                    }
                }
            }
            false
        }
        None => true,
    };
    state.t += 1;
    Ok(StepInfo {
        funcs: l as u64,
        grad_evals: 2 * l as u64,
        mults,
        pair_rejected: rejected,
    })
}

// ---------------------------------------------------------------------------
// RES
// ---------------------------------------------------------------------------

/// Dense direct-curvature state for regularized stochastic BFGS: the
/// estimate B is kept above `delta * I` by the regularized update, and the
/// descent operator is B⁻¹ + gamma_big * I.
#[derive(Debug, Clone)]
pub struct ResState {
    b: Mat64,
    delta: f64,
    gamma_big: f64,
    t: u64,
}

impl ResState {
    /// `delta` must stay below the problem's smallest per-sample Hessian
    /// eigenvalue for updates to be accepted; the caller checks that.
    pub fn new(n: usize, delta: f64, gamma_big: f64) -> Self {
        assert!(delta >= 0.0 && gamma_big >= 0.0);
        ResState {
            b: Mat64::identity(n),
            delta,
            gamma_big,
            t: 0,
        }
    }

    pub fn b(&self) -> &Mat64 {
        &self.b
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn gamma_big(&self) -> f64 {
        self.gamma_big
    }

    pub fn t(&self) -> u64 {
        self.t
    }
}

/// One RES iteration: descend along (B⁻¹ + gamma_big I) grad, then apply the
/// regularized update with the modified variation r_tilde = r_hat - delta v:
///
///   B <- B + r̃r̃ᵀ/(vᵀr̃) - Bvvᵀb/(vᵀBv) + delta·I
///
/// which keeps B - delta·I positive definite. A non-positive vᵀr̃ skips the
/// update (it signals delta at or above the smallest sample curvature).
pub fn res_iterate<P: StochasticProblem + ?Sized>(
    state: &mut ResState,
    problem: &P,
    rng: &mut Rng64,
    sched: &StepSchedule,
    l: usize,
    w: &mut Vec64,
) -> Result<StepInfo, OptimError> {
    let n = w.len();
    let batch = problem.sample(rng, l)?;
    let grad = problem.batch_grad(w, &batch)?;
    let mut mults = 0u64;
    let mut direction = state.b.solve_spd_counted(&grad, &mut mults)?;
    direction.axpy(state.gamma_big, &grad);
    mults += n as u64;
    let w_prev = w.clone();
    w.axpy(-sched.eps(state.t), &direction);
    mults += n as u64;
    let grad_next = problem.batch_grad(w, &batch)?;

    let v = w.sub(&w_prev);
    let r_hat = grad_next.sub(&grad);
    let mut r_tilde = r_hat;
    r_tilde.axpy(-state.delta, &v);
    mults += n as u64;
    let vr = v.dot(&r_tilde);
    mults += n as u64;
    let mut rejected = true;
    if vr > 0.0 && v.norm_sq() > 0.0 {
        let bv = state.b.mat_vec(&v)?;
        let vbv = v.dot(&bv);
        mults += (n * n + n) as u64;
        if vbv > 0.0 {
            state.b.add_outer(1.0 / vr, &r_tilde, &r_tilde);
            state.b.add_outer(-1.0 / vbv, &bv, &bv);
            mults += 2 * (n * n + n) as u64;
            for i in 0..n {
                state.b.add_to(i, i, state.delta);
            }
            rejected = false;
        }
    }
    state.t += 1;
    Ok(StepInfo {
        funcs: l as u64,
        grad_evals: 2 * l as u64,
        mults,
        pair_rejected: rejected,
    })
}

// ---------------------------------------------------------------------------
// SAG
// ---------------------------------------------------------------------------

/// Stored per-point gradients and their running sum. Only defined for
/// finite-sum problems; slots never touched contribute zero.
#[derive(Debug, Clone)]
pub struct SagState {
    grad_table: Vec<Vec64>,
    grad_sum: Vec64,
    initialized: Vec<bool>,
    t: u64,
}

impl SagState {
    pub fn new(dim: usize, points: usize) -> Self {
        SagState {
            grad_table: vec![Vec64::zeros(dim); points],
            grad_sum: Vec64::zeros(dim),
            initialized: vec![false; points],
            t: 0,
        }
    }

    pub fn grad_sum(&self) -> &Vec64 {
        &self.grad_sum
    }

    pub fn grad_table(&self) -> &[Vec64] {
        &self.grad_table
    }

    pub fn t(&self) -> u64 {
        self.t
    }
}

/// One SAG iteration: draw a single point, refresh its stored gradient, and
/// step along the average of the stored gradients.
pub fn sag_iterate<P: StochasticProblem + ?Sized>(
    state: &mut SagState,
    problem: &P,
    rng: &mut Rng64,
    sched: &StepSchedule,
    w: &mut Vec64,
) -> Result<StepInfo, OptimError> {
    let points = problem.num_points().ok_or_else(|| {
        OptimError::UnsupportedProblem(
            "stored-gradient averaging needs a finite sum of data points".into(),
        )
    })?;
    debug_assert_eq!(points, state.grad_table.len());
    let batch = problem.sample(rng, 1)?;
    let i = match &batch {
        SampleBatch::Indices(idx) => idx[0],
        SampleBatch::Thetas(_) => {
            return Err(OptimError::UnsupportedProblem(
                "stored-gradient averaging needs index-based sampling".into(),
            ))
        }
    };
    let g = problem.batch_grad(w, &batch)?;
    state.grad_sum.axpy(-1.0, &state.grad_table[i]);
    state.grad_sum.axpy(1.0, &g);
    state.grad_table[i] = g;
    state.initialized[i] = true;
    w.axpy(-sched.eps(state.t) / points as f64, &state.grad_sum);
    state.t += 1;
    Ok(StepInfo {
        funcs: 1,
        grad_evals: 1,
        mults: w.len() as u64,
        pair_rejected: false,
    })
}

// ---------------------------------------------------------------------------
// Uniform dispatch
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Olbfgs,
    Obfgs,
    Res,
    Sag,
}

impl OptimizerKind {
    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Olbfgs => "olbfgs",
            OptimizerKind::Obfgs => "obfgs",
            OptimizerKind::Res => "res",
            OptimizerKind::Sag => "sag",
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "olbfgs" => Ok(OptimizerKind::Olbfgs),
            "obfgs" => Ok(OptimizerKind::Obfgs),
            "res" => Ok(OptimizerKind::Res),
            "sag" => Ok(OptimizerKind::Sag),
            other => Err(format!("unknown optimizer '{other}'")),
        }
    }
}

/// Per-trial optimizer state, dispatching to the iteration functions above.
#[derive(Debug, Clone)]
pub enum OptimizerState {
    Sgd { t: u64 },
    Olbfgs(OlbfgsState),
    Obfgs(ObfgsState),
    Res(ResState),
    Sag(SagState),
}

impl OptimizerState {
    pub fn step<P: StochasticProblem + ?Sized>(
        &mut self,
        problem: &P,
        rng: &mut Rng64,
        sched: &StepSchedule,
        l: usize,
        w: &mut Vec64,
    ) -> Result<StepInfo, OptimError> {
        match self {
            OptimizerState::Sgd { t } => {
                let info = sgd_iterate(problem, rng, sched, l, *t, w)?;
                *t += 1;
                Ok(info)
            }
            OptimizerState::Olbfgs(s) => olbfgs_iterate(s, problem, rng, sched, l, w),
            OptimizerState::Obfgs(s) => obfgs_iterate(s, problem, rng, sched, l, w),
            OptimizerState::Res(s) => res_iterate(s, problem, rng, sched, l, w),
            OptimizerState::Sag(s) => sag_iterate(s, problem, rng, sched, w),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{DiagMode, QuadraticProblem, SvmDataset};

    #[test]
    fn schedule_values() {
        let s = StepSchedule::new(0.1, 1000.0);
        assert_eq!(s.eps(0), 0.1);
        assert_eq!(s.eps(1000), 0.05);
        assert_eq!(s.eps(3000), 0.025);
    }

    #[test]
    fn pair_accept_and_reject() {
        let p = CurvaturePair::new(
            Vec64::from_vec(vec![1.0, 0.0]),
            Vec64::from_vec(vec![2.0, 0.0]),
        )
        .unwrap();
        assert_eq!(p.rho_hat(), 0.5);
        assert!(CurvaturePair::new(
            Vec64::from_vec(vec![1.0, 0.0]),
            Vec64::from_vec(vec![0.0, 1.0]),
        )
        .is_none());
    }

    #[test]
    fn pair_scaling_factor() {
        let v = Vec64::from_vec(vec![0.3, -0.4]);
        let p = CurvaturePair::new(v.clone(), v.clone()).unwrap();
        assert!((p.scaling_factor() - 1.0).abs() < 1e-15);
        let p = CurvaturePair::new(v.clone(), v.scaled(3.0)).unwrap();
        assert!((p.scaling_factor() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn two_loop_empty_is_scaled_identity() {
        let p = Vec64::from_vec(vec![2.0, 3.0]);
        let q = two_loop(&[], 1.0, &p);
        assert_eq!(q.as_slice(), p.as_slice());
    }

    #[test]
    fn two_loop_single_pair_hand_case() {
        let pair = CurvaturePair::new(
            Vec64::from_vec(vec![1.0, 0.0]),
            Vec64::from_vec(vec![2.0, 0.0]),
        )
        .unwrap();
        // Dense operator for this pair and base scale 0.5 is 0.5*I.
        let q = two_loop(&[pair], 0.5, &Vec64::from_vec(vec![2.0, 3.0]));
        assert!((q[0] - 1.0).abs() < 1e-15);
        assert!((q[1] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn two_loop_mult_count() {
        let mut rng = Rng64::new(1);
        let n = 10;
        let mem = 4;
        let mut pairs = Vec::new();
        while pairs.len() < mem {
            let v = Vec64::from_vec((0..n).map(|_| rng.uniform(-1.0, 1.0)).collect());
            let r = v.scaled(rng.uniform(0.5, 2.0));
            if let Some(p) = CurvaturePair::new(v, r) {
                pairs.push(p);
            }
        }
        let mut mults = 0u64;
        let p = Vec64::from_vec((0..n).map(|_| rng.uniform(-1.0, 1.0)).collect());
        two_loop_counted(&pairs, 1.0, &p, &mut mults);
        assert_eq!(mults, (4 * mem as u64 + 1) * n as u64 + 2 * mem as u64);
    }

    fn quad_fixture(n: usize, theta0: f64, seed: u64) -> (QuadraticProblem, Rng64) {
        let mut rng = Rng64::new(seed);
        let p = QuadraticProblem::synthetic(n, DiagMode::Uniform01, theta0, &mut rng).unwrap();
        (p, rng)
    }

    #[test]
    fn sgd_step_is_plain_descent() {
        let p = QuadraticProblem::from_parts(
            Vec64::from_vec(vec![1.0, 1.0]),
            Vec64::from_vec(vec![0.5, -0.5]),
            0.0,
        )
        .unwrap();
        let sched = StepSchedule::new(0.1, 1000.0);
        let mut rng = Rng64::new(2);
        let mut w = Vec64::from_vec(vec![1.0, 1.0]);
        sgd_iterate(&p, &mut rng, &sched, 1, 0, &mut w).unwrap();
        // gradient at w is (1.5, 0.5)
        assert!((w[0] - 0.85).abs() < 1e-15);
        assert!((w[1] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn sgd_fixed_point_at_zero_gradient() {
        let p = QuadraticProblem::from_parts(
            Vec64::from_vec(vec![2.0]),
            Vec64::from_vec(vec![4.0]),
            0.0,
        )
        .unwrap();
        let sched = StepSchedule::new(0.1, 10.0);
        let mut rng = Rng64::new(3);
        let mut w = Vec64::from_vec(vec![-2.0]);
        sgd_iterate(&p, &mut rng, &sched, 1, 0, &mut w).unwrap();
        assert_eq!(w[0], -2.0);
    }

    #[test]
    fn olbfgs_first_step_matches_sgd() {
        let (p, _) = quad_fixture(5, 0.4, 4);
        let sched = StepSchedule::new(0.05, 500.0);
        let mut rng_a = Rng64::new(77);
        let mut rng_b = Rng64::new(77);
        let mut w_sgd = Vec64::zeros(5);
        let mut w_ol = Vec64::zeros(5);
        sgd_iterate(&p, &mut rng_a, &sched, 3, 0, &mut w_sgd).unwrap();
        let mut st = OlbfgsState::new(4);
        olbfgs_iterate(&mut st, &p, &mut rng_b, &sched, 3, &mut w_ol).unwrap();
        assert_eq!(w_sgd.as_slice(), w_ol.as_slice());
    }

    #[test]
    fn olbfgs_gamma_tracks_inverse_curvature() {
        // A = a*I with no sampling noise: after the first step the scale is 1/a.
        let a = 4.0;
        let p = QuadraticProblem::from_parts(
            Vec64::from_vec(vec![a, a, a]),
            Vec64::from_vec(vec![1.0, 2.0, 3.0]),
            0.0,
        )
        .unwrap();
        let sched = StepSchedule::new(0.05, 100.0);
        let mut rng = Rng64::new(5);
        let mut st = OlbfgsState::new(3);
        let mut w = Vec64::zeros(3);
        olbfgs_iterate(&mut st, &p, &mut rng, &sched, 1, &mut w).unwrap();
        assert!((st.gamma_hat() - 1.0 / a).abs() < 1e-12);
    }

    #[test]
    fn olbfgs_memory_window() {
        let (p, mut rng) = quad_fixture(6, 0.5, 6);
        let sched = StepSchedule::new(0.05, 1000.0);
        let mut st = OlbfgsState::new(3);
        let mut w = Vec64::zeros(6);
        for t in 1..=10u64 {
            olbfgs_iterate(&mut st, &p, &mut rng, &sched, 2, &mut w).unwrap();
            assert_eq!(st.pairs().len(), (t as usize).min(3));
            assert_eq!(st.t(), t);
        }
    }

    #[test]
    fn olbfgs_accepts_all_pairs_on_quadratic() {
        // vᵀr̂ >= m_tilde ||v||² under uniformly positive sample curvature.
        let (p, mut rng) = quad_fixture(8, 0.5, 7);
        let (m_lo, _) = p.eig_bounds();
        let sched = StepSchedule::new(0.1, 1000.0);
        let mut st = OlbfgsState::new(4);
        let mut w = Vec64::zeros(8);
        for _ in 0..200 {
            let prev_last = st.pairs().last().map(|q| q.v().clone());
            let info = olbfgs_iterate(&mut st, &p, &mut rng, &sched, 3, &mut w).unwrap();
            assert!(!info.pair_rejected);
            let pair = st.pairs().last().unwrap();
            assert!(prev_last.as_ref().map(|v| v.as_slice()) != Some(pair.v().as_slice()) || true);
            let inner = pair.v().dot(pair.r_hat());
            assert!(inner >= m_lo * pair.v().norm_sq() * (1.0 - 1e-9));
        }
    }

    #[test]
    fn olbfgs_deterministic_trajectories_identical() {
        let (p, _) = quad_fixture(5, 0.5, 8);
        let sched = StepSchedule::new(0.1, 1000.0);
        let run = || {
            let mut rng = Rng64::new(123);
            let mut st = OlbfgsState::new(3);
            let mut w = Vec64::zeros(5);
            for _ in 0..50 {
                olbfgs_iterate(&mut st, &p, &mut rng, &sched, 2, &mut w).unwrap();
            }
            w
        };
        assert_eq!(run().as_slice(), run().as_slice());
    }

    #[test]
    fn obfgs_identity_fixed_point() {
        // v = r̂ = e1 with B⁻¹ = I leaves B⁻¹ = I.
        let mut st = ObfgsState::new(2);
        let pair = CurvaturePair::new(
            Vec64::from_vec(vec![1.0, 0.0]),
            Vec64::from_vec(vec![1.0, 0.0]),
        )
        .unwrap();
        // Apply the same rank-two expansion obfgs_iterate uses.
        let u = st.b_inv.mat_vec(pair.r_hat()).unwrap();
        let rho = pair.rho_hat();
        let ru = pair.r_hat().dot(&u);
        let coeff = rho * rho * ru + rho;
        for i in 0..2 {
            for j in 0..=i {
                let delta = -rho * (pair.v()[i] * u[j] + u[i] * pair.v()[j])
                    + coeff * pair.v()[i] * pair.v()[j];
                st.b_inv.add_to(i, j, delta);
                if i != j {
                    st.b_inv.add_to(j, i, delta);
                }
            }
        }
        assert!(st.b_inv().sub(&Mat64::identity(2)).max_abs() < 1e-15);
    }

    #[test]
    fn obfgs_b_inv_stays_positive_definite() {
        let (p, mut rng) = quad_fixture(2, 0.5, 9);
        let sched = StepSchedule::new(0.1, 1000.0);
        let mut st = ObfgsState::new(2);
        let mut w = Vec64::zeros(2);
        for _ in 0..100 {
            obfgs_iterate(&mut st, &p, &mut rng, &sched, 2, &mut w).unwrap();
            let (lo, _) = st.b_inv().sym_eig_extremes(1e-12).unwrap();
            assert!(lo > 0.0, "inverse estimate lost positive definiteness");
        }
    }

    #[test]
    fn res_direction_with_identity_curvature() {
        // B = I, gamma_big = 0.5: step along 1.5 * grad scaled by eps.
        let p = QuadraticProblem::from_parts(
            Vec64::from_vec(vec![1.0, 1.0]),
            Vec64::from_vec(vec![2.0, 0.0]),
            0.0,
        )
        .unwrap();
        let sched = StepSchedule::new(0.1, 1e12);
        let mut rng = Rng64::new(10);
        let mut st = ResState::new(2, 1e-3, 0.5);
        let mut w = Vec64::zeros(2);
        res_iterate(&mut st, &p, &mut rng, &sched, 1, &mut w).unwrap();
        assert!((w[0] + 0.3).abs() < 1e-12);
        assert!(w[1].abs() < 1e-15);
    }

    #[test]
    fn res_keeps_b_above_delta() {
        let mut rng = Rng64::new(11);
        let p = QuadraticProblem::synthetic(10, DiagMode::DiscreteXi(2), 0.5, &mut rng).unwrap();
        let sched = StepSchedule::new(0.1, 1000.0);
        let delta = 1e-3;
        let mut st = ResState::new(10, delta, 1e-4);
        let mut w = Vec64::zeros(10);
        for _ in 0..300 {
            res_iterate(&mut st, &p, &mut rng, &sched, 5, &mut w).unwrap();
            let mut shifted = st.b().clone();
            for i in 0..10 {
                shifted.add_to(i, i, -delta);
            }
            let (lo, _) = shifted.sym_eig_extremes(1e-10).unwrap();
            assert!(lo > 0.0, "B - delta*I lost positive definiteness");
        }
    }

    #[test]
    fn res_unregularized_matches_plain_bfgs_update() {
        // delta = 0, gamma_big = 0: the update must coincide with the
        // textbook direct update B + r̂r̂ᵀ/(vᵀr̂) - Bvvᵀb/(vᵀBv).
        let (p, mut rng) = quad_fixture(4, 0.3, 12);
        let sched = StepSchedule::new(0.05, 1000.0);
        let mut st = ResState::new(4, 0.0, 0.0);
        let mut w = Vec64::zeros(4);
        let mut oracle = Mat64::identity(4);
        for _ in 0..20 {
            // Recreate the pair the iteration will form by replaying its draws.
            let mut rng_probe = rng.clone();
            let batch = p.sample(&mut rng_probe, 2).unwrap();
            let grad = p.batch_grad(&w, &batch).unwrap();
            let mut dir = st.b().solve_spd(&grad).unwrap();
            dir.axpy(0.0, &grad);
            let mut w_next = w.clone();
            w_next.axpy(-sched.eps(st.t()), &dir);
            let grad_next = p.batch_grad(&w_next, &batch).unwrap();
            let v = w_next.sub(&w);
            let r = grad_next.sub(&grad);

            res_iterate(&mut st, &p, &mut rng, &sched, 2, &mut w).unwrap();

            let bv = oracle.mat_vec(&v).unwrap();
            let vbv = v.dot(&bv);
            oracle.add_outer(1.0 / v.dot(&r), &r, &r);
            oracle.add_outer(-1.0 / vbv, &bv, &bv);
            assert!(
                st.b().sub(&oracle).max_abs() <= 1e-9 * oracle.max_abs(),
                "unregularized update diverged from the textbook form"
            );
        }
    }

    #[test]
    fn sag_requires_finite_sum() {
        let (p, mut rng) = quad_fixture(3, 0.2, 13);
        let sched = StepSchedule::new(0.1, 10.0);
        let mut st = SagState::new(3, 1);
        let mut w = Vec64::zeros(3);
        assert!(matches!(
            sag_iterate(&mut st, &p, &mut rng, &sched, &mut w),
            Err(OptimError::UnsupportedProblem(_))
        ));
    }

    #[test]
    fn sag_single_point_matches_sgd() {
        let mut rng = Rng64::new(14);
        let ds = SvmDataset::synthetic(3, 2, &mut rng).unwrap();
        // Restrict to one point so the average over the table is the point itself.
        let single = SvmDataset::new(
            vec![ds.features()[0].clone()],
            vec![ds.labels()[0]],
            ds.lambda(),
        )
        .unwrap();
        let sched = StepSchedule::new(0.1, 100.0);
        let mut w_sag = Vec64::zeros(3);
        let mut w_sgd = Vec64::zeros(3);
        let mut rng_a = Rng64::new(15);
        let mut rng_b = Rng64::new(15);
        let mut st = SagState::new(3, 1);
        for t in 0..10u64 {
            sag_iterate(&mut st, &single, &mut rng_a, &sched, &mut w_sag).unwrap();
            sgd_iterate(&single, &mut rng_b, &sched, 1, t, &mut w_sgd).unwrap();
            assert_eq!(w_sag.as_slice(), w_sgd.as_slice());
        }
    }

    #[test]
    fn sag_sum_matches_table_recomputation() {
        let mut rng = Rng64::new(16);
        let ds = SvmDataset::synthetic(4, 10, &mut rng).unwrap();
        let sched = StepSchedule::new(0.05, 1000.0);
        let mut st = SagState::new(4, 10);
        let mut w = Vec64::zeros(4);
        for _ in 0..1000 {
            sag_iterate(&mut st, &ds, &mut rng, &sched, &mut w).unwrap();
        }
        let mut recomputed = Vec64::zeros(4);
        for g in st.grad_table() {
            recomputed.axpy(1.0, g);
        }
        assert!(recomputed.sub(st.grad_sum()).norm() <= 1e-12 * st.grad_sum().norm().max(1.0));
    }

    #[test]
    fn sag_constant_gradient_direction() {
        // After every point has been visited once, the direction is the
        // common gradient. A linear objective has constant gradients; fake it
        // with an SVM whose margins stay active and identical rows.
        let x = Vec64::from_vec(vec![0.1, 0.2]);
        let ds = SvmDataset::new(vec![x.clone(), x.clone(), x.clone()], vec![1.0; 3], 0.0).unwrap();
        let sched = StepSchedule::new(1e-9, 1e9);
        let mut st = SagState::new(2, 3);
        let mut rng = Rng64::new(17);
        let mut w = Vec64::zeros(2);
        for _ in 0..200 {
            sag_iterate(&mut st, &ds, &mut rng, &sched, &mut w).unwrap();
        }
        assert!(st.grad_table().iter().all(|g| g.norm() > 0.0));
        let g = ds
            .batch_grad(&Vec64::zeros(2), &SampleBatch::Indices(vec![0]))
            .unwrap();
        // Tiny steps keep w near zero, so all table entries are near g.
        let avg = st.grad_sum().scaled(1.0 / 3.0);
        assert!(avg.sub(&g).norm() <= 1e-6 * g.norm());
    }
}
