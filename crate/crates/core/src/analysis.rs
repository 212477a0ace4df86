//! Executable form of the methods' guarantees: dense oracles that rebuild
//! the limited-memory curvature operators explicitly, per-pair and
//! per-matrix bound checks, finite-difference gradient verification, and
//! the O(1/t) rate recursion with its closed-form constant.

use std::io::Write as IoWrite;
use std::path::Path;

use thiserror::Error;

use crate::numerics::{Mat64, NumericsError, Vec64};
use crate::optimizers::CurvaturePair;
use crate::problems::fmt_float;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("direct curvature recursion broke down: vᵀBv = {0}")]
    RecursionBreakdown(f64),
    #[error("rate hypothesis violated: {0}")]
    RateHypothesis(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Constants the bound checks are evaluated against.
///
/// `eig_floor` and `eig_ceil` are the closed-form envelope of the
/// limited-memory curvature estimate's spectrum for a problem whose
/// per-sample Hessian eigenvalues lie in `[inst_eig_min, inst_eig_max]`:
///
///   eig_ceil  = (n + mem) * inst_eig_max
///   eig_floor = inst_eig_min^(n+mem) / eig_ceil^(n+mem-1)
#[derive(Debug, Clone, Copy)]
pub struct BoundConstants {
    /// Uniform lower eigenvalue bound of the per-sample Hessians.
    pub inst_eig_min: f64,
    /// Uniform upper eigenvalue bound of the per-sample Hessians.
    pub inst_eig_max: f64,
    /// Lower eigenvalue bound of the average Hessian.
    pub avg_eig_min: f64,
    /// Upper eigenvalue bound of the average Hessian.
    pub avg_eig_max: f64,
    /// Bound on E||batch gradient||^2 (estimated over the visited region).
    pub grad_sq_bound: f64,
    /// Closed-form lower bound on the curvature estimate's eigenvalues.
    pub eig_floor: f64,
    /// Closed-form upper bound on the curvature estimate's eigenvalues.
    pub eig_ceil: f64,
}

impl BoundConstants {
    /// Derives the spectrum envelope for dimension `n` and memory `mem`
    /// from per-sample eigenvalue bounds; the average-Hessian bounds and
    /// the gradient second moment must be supplied by the caller.
    pub fn new(
        inst_eig_min: f64,
        inst_eig_max: f64,
        avg_eig_min: f64,
        avg_eig_max: f64,
        grad_sq_bound: f64,
        n: usize,
        mem: usize,
    ) -> Self {
        assert!(inst_eig_min > 0.0 && inst_eig_max >= inst_eig_min);
        let total = (n + mem) as f64;
        let ceil = total * inst_eig_max;
        // Log-space evaluation; the floor underflows fast with n + mem.
        let floor = (total * inst_eig_min.ln() - (total - 1.0) * ceil.ln()).exp();
        BoundConstants {
            inst_eig_min,
            inst_eig_max,
            avg_eig_min,
            avg_eig_max,
            grad_sq_bound,
            eig_floor: floor,
            eig_ceil: ceil,
        }
    }
}

/// Explicit inverse-curvature operator: gamma_hat * I run through the
/// inverse update Zᵀ B⁻¹ Z + rho v vᵀ once per pair, oldest first. This is
/// the matrix the two-loop recursion applies implicitly.
pub fn dense_inverse_from_pairs(pairs: &[CurvaturePair], gamma_hat: f64, n: usize) -> Mat64 {
    assert!(gamma_hat > 0.0);
    let mut b_inv = Mat64::identity(n).scaled(gamma_hat);
    for pair in pairs {
        let rho = pair.rho_hat();
        let mut z = Mat64::identity(n);
        z.add_outer(-rho, pair.r_hat(), pair.v());
        b_inv = z.transpose().mat_mul(&b_inv).mat_mul(&z);
        b_inv.add_outer(rho, pair.v(), pair.v());
    }
    b_inv
}

/// Explicit direct-curvature operator: (1/gamma_hat) * I run through the
/// direct update B - Bvvᵀb/(vᵀBv) + r̂r̂ᵀ/(vᵀr̂) once per pair, oldest
/// first. Mutually inverse with [`dense_inverse_from_pairs`].
pub fn dense_hessian_from_pairs(
    pairs: &[CurvaturePair],
    gamma_hat: f64,
    n: usize,
) -> Result<Mat64, AnalysisError> {
    assert!(gamma_hat > 0.0);
    let mut b = Mat64::identity(n).scaled(1.0 / gamma_hat);
    for pair in pairs {
        let bv = b.mat_vec(pair.v())?;
        let vbv = pair.v().dot(&bv);
        if vbv <= 0.0 {
            return Err(AnalysisError::RecursionBreakdown(vbv));
        }
        b.add_outer(-1.0 / vbv, &bv, &bv);
        b.add_outer(pair.rho_hat(), pair.r_hat(), pair.r_hat());
    }
    Ok(b)
}

/// Result of the per-pair curvature check against uniform per-sample
/// Hessian bounds `[eig_min, eig_max]`: the inner product must dominate
/// `eig_min ||v||^2` and the ratio `||r̂||^2 / (r̂ᵀv)` must land in
/// `[eig_min, eig_max]`.
#[derive(Debug, Clone, Copy)]
pub struct PairCheck {
    /// r̂ᵀv / ||v||²
    pub curvature_over_v: f64,
    /// ||r̂||² / (r̂ᵀv)
    pub hessian_ratio: f64,
    pub pass: bool,
}

pub const BOUND_CHECK_TOL: f64 = 1e-9;

pub fn check_pair_curvature(pair: &CurvaturePair, eig_min: f64, eig_max: f64) -> PairCheck {
    let v_sq = pair.v().norm_sq();
    let inner = pair.v().dot(pair.r_hat());
    let r_sq = pair.r_hat().norm_sq();
    let curvature_over_v = inner / v_sq;
    let hessian_ratio = r_sq / inner;
    let tol = BOUND_CHECK_TOL;
    let pass = inner >= eig_min * v_sq * (1.0 - tol)
        && hessian_ratio >= eig_min * (1.0 - tol)
        && hessian_ratio <= eig_max * (1.0 + tol);
    PairCheck {
        curvature_over_v,
        hessian_ratio,
        pass,
    }
}

/// One monitored iterate: the dense curvature estimate's trace,
/// determinant, and eigenvalue extremes checked against the closed-form
/// envelope (trace <= (n+mem)*inst_eig_max, det >= floor, spectrum inside
/// [eig_floor, eig_ceil]).
#[derive(Debug, Clone, Copy)]
pub struct BoundRow {
    pub t: u64,
    pub trace: f64,
    pub det: f64,
    pub eig_min: f64,
    pub eig_max: f64,
    pub matrix_pass: bool,
    /// r̂ᵀv / ||v||² of the pair accepted this iterate, NaN if none.
    pub pair_curvature: f64,
    /// ||r̂||² / (r̂ᵀv) of the pair accepted this iterate, NaN if none.
    pub pair_ratio: f64,
    pub pair_pass: bool,
}

impl BoundRow {
    pub fn pass(&self) -> bool {
        self.matrix_pass && self.pair_pass
    }
}

/// Checks trace, determinant, and spectrum of a dense curvature estimate
/// against the envelope for dimension `n` and memory `mem`.
pub fn check_matrix_bounds(
    b: &Mat64,
    consts: &BoundConstants,
    n: usize,
    mem: usize,
) -> Result<(f64, f64, f64, f64, bool), AnalysisError> {
    if !b.is_symmetric(1e-10) {
        return Err(AnalysisError::Numerics(NumericsError::NotSymmetric));
    }
    let (trace, det) = b.trace_det();
    let eig_tol = 1e-12 * b.max_abs().max(1.0);
    let (eig_min, eig_max) = b.sym_eig_extremes(eig_tol)?;
    let total = (n + mem) as f64;
    let tol = BOUND_CHECK_TOL;
    let trace_bound = total * consts.inst_eig_max;
    let det_bound = (total * consts.inst_eig_min.ln()
        - mem as f64 * (total * consts.inst_eig_max).ln())
    .exp();
    let pass = trace <= trace_bound * (1.0 + tol)
        && det >= det_bound * (1.0 - tol)
        && eig_min >= consts.eig_floor * (1.0 - tol)
        && eig_max <= consts.eig_ceil * (1.0 + tol);
    Ok((trace, det, eig_min, eig_max, pass))
}

/// Per-iterate records of a monitored run.
#[derive(Debug, Clone, Default)]
pub struct BoundReport {
    pub rows: Vec<BoundRow>,
}

impl BoundReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass())
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), AnalysisError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        out.write_all(
            b"t,trace,det,eig_min,eig_max,matrix_pass,pair_curvature,pair_ratio,pair_pass\n",
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.t,
                fmt_float(r.trace),
                fmt_float(r.det),
                fmt_float(r.eig_min),
                fmt_float(r.eig_max),
                r.matrix_pass,
                fmt_float(r.pair_curvature),
                fmt_float(r.pair_ratio),
                r.pair_pass,
            )?;
        }
        Ok(())
    }
}

/// Central finite differences of a scalar function, one coordinate at a time.
pub fn finite_diff_grad<F: Fn(&Vec64) -> f64>(value_fn: F, w: &Vec64, h: f64) -> Vec64 {
    let mut grad = Vec64::zeros(w.len());
    let mut probe = w.clone();
    for i in 0..w.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let plus = value_fn(&probe);
        probe[i] = orig - h;
        let minus = value_fn(&probe);
        probe[i] = orig;
        grad[i] = (plus - minus) / (2.0 * h);
    }
    grad
}

/// Closed-form constant of the O(1/t) objective-gap bound
/// `gap(t) <= rate_bound_constant / (t0 + t)` for a schedule
/// eps_t = eps0*t0/(t0+t) satisfying 2*avg_eig_min*eps0*t0 > eig_ceil:
///
///   max{ eps0² t0² eig_ceil avg_eig_max grad_sq_bound
///          / (2 eig_floor² (2 avg_eig_min eps0 t0 - eig_ceil)),
///        t0 * initial_gap }
pub fn rate_bound_constant(
    eps0: f64,
    t_big0: f64,
    consts: &BoundConstants,
    initial_gap: f64,
) -> Result<f64, AnalysisError> {
    let margin = 2.0 * consts.avg_eig_min * eps0 * t_big0;
    if margin <= consts.eig_ceil {
        return Err(AnalysisError::RateHypothesis(format!(
            "2*m*eps0*t0 = {margin} must exceed the spectrum ceiling {}",
            consts.eig_ceil
        )));
    }
    let noise = eps0 * eps0 * t_big0 * t_big0 * consts.eig_ceil * consts.avg_eig_max
        * consts.grad_sq_bound
        / (2.0 * consts.eig_floor * consts.eig_floor * (margin - consts.eig_ceil));
    Ok(noise.max(t_big0 * initial_gap))
}

/// Outcome of simulating the decay recursion
/// `u_{t+1} = (1 - a/(t+t0)) u_t + b/(t+t0)²` against its harmonic bound
/// `u_t <= q/(t+t0)` with `q = max{b/(a-1), t0*u0}`.
#[derive(Debug, Clone, Copy)]
pub struct DecayCheck {
    pub q: f64,
    pub pass: bool,
    pub first_violation: Option<u64>,
}

/// Simulates the recursion with equality for `horizon` steps. The bound is
/// guaranteed when the contraction coefficient stays nonnegative
/// (t0 >= a); outside that regime the returned report simply records what
/// happened.
pub fn check_harmonic_decay_bound(
    a: f64,
    b: f64,
    t0: f64,
    u0: f64,
    horizon: u64,
) -> Result<DecayCheck, AnalysisError> {
    if a <= 1.0 {
        return Err(AnalysisError::RateHypothesis(format!(
            "contraction constant a = {a} must exceed 1"
        )));
    }
    if b <= 0.0 || t0 <= 0.0 || u0 < 0.0 {
        return Err(AnalysisError::RateHypothesis(
            "b and t0 must be positive, u0 nonnegative".into(),
        ));
    }
    let q = (b / (a - 1.0)).max(t0 * u0);
    let mut u = u0;
    let mut first_violation = None;
    for t in 0..=horizon {
        // One-ulp slack: at t=0 with q = t0*u0 the bound holds with equality
        // and (t0*u0)/t0 can round below u0.
        if u > (q / (t as f64 + t0)) * (1.0 + 1e-12) && first_violation.is_none() {
            first_violation = Some(t);
        }
        let denom = t as f64 + t0;
        u = (1.0 - a / denom) * u + b / (denom * denom);
    }
    Ok(DecayCheck {
        q,
        pass: first_violation.is_none(),
        first_violation,
    })
}
