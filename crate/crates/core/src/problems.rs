//! The three stochastic objectives F(w) = E[f(w, theta)]: a synthetic
//! random quadratic, a squared-hinge SVM over synthetic separable-ish data,
//! and a class-weighted logistic regression over sparse binary rows.
//!
//! All three expose the same interface: draw a batch of samples, evaluate
//! the averaged batch gradient/value at a point, and evaluate the full
//! (expected) objective. The quadratic additionally knows its exact optimum
//! and uniform eigenvalue bounds of the per-sample Hessians.

use std::io::{BufRead, BufReader, Write as IoWrite};
use std::path::Path;

use thiserror::Error;

use crate::numerics::{Rng64, Vec64};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("batch size must be at least 1")]
    EmptyBatch,
    #[error("batch kind does not match problem kind")]
    WrongBatchKind,
    #[error("label fraction target not reached after {0} adjustment rounds")]
    TargetFractionInfeasible(usize),
    #[error("malformed dataset file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A drawn sample batch: parameter vectors for the quadratic family, data
/// row indices for the finite-sum families.
#[derive(Debug, Clone)]
pub enum SampleBatch {
    Thetas(Vec<Vec64>),
    Indices(Vec<usize>),
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        match self {
            SampleBatch::Thetas(v) => v.len(),
            SampleBatch::Indices(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Common interface of the stochastic objectives.
pub trait StochasticProblem: Send + Sync {
    /// Dimension of the optimization variable.
    fn dim(&self) -> usize;

    /// Draw a batch of `l` independent samples.
    fn sample(&self, rng: &mut Rng64, l: usize) -> Result<SampleBatch, ProblemError>;

    /// Average of the per-sample gradients over the batch.
    fn batch_grad(&self, w: &Vec64, batch: &SampleBatch) -> Result<Vec64, ProblemError>;

    /// Average of the per-sample objective values over the batch.
    fn batch_value(&self, w: &Vec64, batch: &SampleBatch) -> Result<f64, ProblemError>;

    /// The full objective F(w).
    fn expected_value(&self, w: &Vec64) -> f64;

    /// Exact minimizer, when known in closed form.
    fn optimum(&self) -> Option<Vec64> {
        None
    }

    /// Uniform (min, max) eigenvalue bounds of the per-sample Hessians,
    /// when known.
    fn hessian_eig_bounds(&self) -> Option<(f64, f64)> {
        None
    }

    /// Number of data points for finite-sum problems; `None` when the
    /// sample space is continuous.
    fn num_points(&self) -> Option<usize> {
        None
    }
}

// ---------------------------------------------------------------------------
// Random quadratic
// ---------------------------------------------------------------------------

/// How the diagonal of the quadratic's curvature matrix is drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiagMode {
    /// Entries drawn uniformly from {1, 10^-1, ..., 10^-xi}; the realized
    /// condition number is a power of ten up to 10^xi.
    DiscreteXi(u32),
    /// Entries drawn uniformly from (0, 1].
    Uniform01,
}

/// F(w) = E[ 1/2 wᵀ(A + A·diag(theta))w + bᵀw ] with diagonal positive A and
/// theta uniform on the box [-theta0, theta0]^n. The average objective is
/// the plain quadratic 1/2 wᵀAw + bᵀw.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    a_diag: Vec64,
    b: Vec64,
    theta0: f64,
}

impl QuadraticProblem {
    pub fn synthetic(
        n: usize,
        mode: DiagMode,
        theta0: f64,
        rng: &mut Rng64,
    ) -> Result<Self, ProblemError> {
        if n == 0 {
            return Err(ProblemError::InvalidParameter("n must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&theta0) {
            return Err(ProblemError::InvalidParameter(format!(
                "theta0 must lie in [0, 1), got {theta0}"
            )));
        }
        let a_diag = Vec64::from_vec(
            (0..n)
                .map(|_| match mode {
                    DiagMode::DiscreteXi(xi) => {
                        let e = rng.index(xi as usize + 1) as i32;
                        10f64.powi(-e)
                    }
                    // 1 - u in (0, 1] keeps the diagonal strictly positive.
                    DiagMode::Uniform01 => 1.0 - rng.next_f64(),
                })
                .collect(),
        );
        let b = Vec64::from_vec((0..n).map(|_| rng.next_f64()).collect());
        Ok(QuadraticProblem { a_diag, b, theta0 })
    }

    pub fn from_parts(a_diag: Vec64, b: Vec64, theta0: f64) -> Result<Self, ProblemError> {
        if a_diag.len() != b.len() {
            return Err(ProblemError::DimensionMismatch {
                expected: a_diag.len(),
                got: b.len(),
            });
        }
        if a_diag.iter().any(|&a| a <= 0.0) {
            return Err(ProblemError::InvalidParameter(
                "curvature diagonal must be strictly positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&theta0) {
            return Err(ProblemError::InvalidParameter(format!(
                "theta0 must lie in [0, 1), got {theta0}"
            )));
        }
        Ok(QuadraticProblem { a_diag, b, theta0 })
    }

    pub fn a_diag(&self) -> &Vec64 {
        &self.a_diag
    }

    pub fn linear_term(&self) -> &Vec64 {
        &self.b
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    /// max(a) / min(a), the condition number of the average Hessian.
    pub fn condition_number(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for &a in self.a_diag.iter() {
            lo = lo.min(a);
            hi = hi.max(a);
        }
        hi / lo
    }

    /// Unique stationary point of the average objective: w*_i = -b_i / a_i.
    pub fn exact_optimum(&self) -> Vec64 {
        Vec64::from_vec(
            self.a_diag
                .iter()
                .zip(self.b.iter())
                .map(|(a, b)| -b / a)
                .collect(),
        )
    }

    /// Uniform eigenvalue bounds of the per-sample Hessians
    /// A + A·diag(theta): (min a·(1-theta0), max a·(1+theta0)).
    pub fn eig_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for &a in self.a_diag.iter() {
            lo = lo.min(a * (1.0 - self.theta0));
            hi = hi.max(a * (1.0 + self.theta0));
        }
        (lo, hi)
    }

    fn check_dim(&self, w: &Vec64) -> Result<(), ProblemError> {
        if w.len() != self.a_diag.len() {
            return Err(ProblemError::DimensionMismatch {
                expected: self.a_diag.len(),
                got: w.len(),
            });
        }
        Ok(())
    }

    /// Mean of the batch's theta draws. The batch gradient and value are
    /// linear in theta, so they are evaluated at the mean draw; this keeps
    /// the theta0 = 0 case bit-exact against the deterministic gradient.
    fn mean_theta(&self, batch: &SampleBatch) -> Result<Vec64, ProblemError> {
        let thetas = match batch {
            SampleBatch::Thetas(v) => v,
            SampleBatch::Indices(_) => return Err(ProblemError::WrongBatchKind),
        };
        if thetas.is_empty() {
            return Err(ProblemError::EmptyBatch);
        }
        let n = self.a_diag.len();
        let mut mean = Vec64::zeros(n);
        for theta in thetas {
            if theta.len() != n {
                return Err(ProblemError::DimensionMismatch {
                    expected: n,
                    got: theta.len(),
                });
            }
            mean.axpy(1.0, theta);
        }
        Ok(mean.scaled(1.0 / thetas.len() as f64))
    }
}

impl StochasticProblem for QuadraticProblem {
    fn dim(&self) -> usize {
        self.a_diag.len()
    }

    fn sample(&self, rng: &mut Rng64, l: usize) -> Result<SampleBatch, ProblemError> {
        if l == 0 {
            return Err(ProblemError::EmptyBatch);
        }
        let n = self.a_diag.len();
        let thetas = (0..l)
            .map(|_| {
                Vec64::from_vec(
                    (0..n)
                        .map(|_| rng.uniform(-self.theta0, self.theta0))
                        .collect(),
                )
            })
            .collect();
        Ok(SampleBatch::Thetas(thetas))
    }

    fn batch_grad(&self, w: &Vec64, batch: &SampleBatch) -> Result<Vec64, ProblemError> {
        self.check_dim(w)?;
        let mean = self.mean_theta(batch)?;
        let mut g = Vec64::zeros(w.len());
        for i in 0..w.len() {
            g[i] = self.a_diag[i] * (1.0 + mean[i]) * w[i] + self.b[i];
        }
        Ok(g)
    }

    fn batch_value(&self, w: &Vec64, batch: &SampleBatch) -> Result<f64, ProblemError> {
        self.check_dim(w)?;
        let mean = self.mean_theta(batch)?;
        let mut quad = 0.0;
        for i in 0..w.len() {
            quad += self.a_diag[i] * (1.0 + mean[i]) * w[i] * w[i];
        }
        Ok(0.5 * quad + self.b.dot(w))
    }

    fn expected_value(&self, w: &Vec64) -> f64 {
        assert_eq!(w.len(), self.a_diag.len(), "dimension mismatch");
        let mut quad = 0.0;
        for i in 0..w.len() {
            quad += self.a_diag[i] * w[i] * w[i];
        }
        0.5 * quad + self.b.dot(w)
    }

    fn optimum(&self) -> Option<Vec64> {
        Some(self.exact_optimum())
    }

    fn hessian_eig_bounds(&self) -> Option<(f64, f64)> {
        Some(self.eig_bounds())
    }
}

// ---------------------------------------------------------------------------
// Squared-hinge SVM
// ---------------------------------------------------------------------------

/// Regularized squared-hinge SVM over a fixed training set:
/// F(w) = lambda/2 ||w||^2 + (1/N) sum max(0, 1 - y_i x_iᵀw)^2.
#[derive(Debug, Clone)]
pub struct SvmDataset {
    features: Vec<Vec64>,
    labels: Vec<f64>,
    lambda: f64,
}

pub const SVM_DEFAULT_LAMBDA: f64 = 1e-4;

impl SvmDataset {
    pub fn new(features: Vec<Vec64>, labels: Vec<f64>, lambda: f64) -> Result<Self, ProblemError> {
        if features.is_empty() {
            return Err(ProblemError::InvalidParameter(
                "dataset must hold at least one point".into(),
            ));
        }
        if features.len() != labels.len() {
            return Err(ProblemError::DimensionMismatch {
                expected: features.len(),
                got: labels.len(),
            });
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(ProblemError::InvalidParameter(
                "labels must be +1 or -1".into(),
            ));
        }
        if lambda < 0.0 {
            return Err(ProblemError::InvalidParameter("lambda must be >= 0".into()));
        }
        Ok(SvmDataset {
            features,
            labels,
            lambda,
        })
    }

    /// Synthetic two-class set: `points` must be even; each coordinate of a
    /// class -1 row is uniform on [-0.8, 0.2], of a class +1 row uniform on
    /// [-0.2, 0.8].
    pub fn synthetic(n: usize, points: usize, rng: &mut Rng64) -> Result<Self, ProblemError> {
        if !points.is_multiple_of(2) {
            return Err(ProblemError::InvalidParameter(
                "point count must be even".into(),
            ));
        }
        let half = points / 2;
        let mut features = Vec::with_capacity(points);
        let mut labels = Vec::with_capacity(points);
        for _ in 0..half {
            features.push(Vec64::from_vec(
                (0..n).map(|_| rng.uniform(-0.8, 0.2)).collect(),
            ));
            labels.push(-1.0);
        }
        for _ in 0..half {
            features.push(Vec64::from_vec(
                (0..n).map(|_| rng.uniform(-0.2, 0.8)).collect(),
            ));
            labels.push(1.0);
        }
        SvmDataset::new(features, labels, SVM_DEFAULT_LAMBDA)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn features(&self) -> &[Vec64] {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    fn indices<'a>(&self, batch: &'a SampleBatch) -> Result<&'a [usize], ProblemError> {
        match batch {
            SampleBatch::Indices(v) if !v.is_empty() => Ok(v),
            SampleBatch::Indices(_) => Err(ProblemError::EmptyBatch),
            SampleBatch::Thetas(_) => Err(ProblemError::WrongBatchKind),
        }
    }

    /// Rows as `label, f_1, ..., f_n` CSV lines.
    pub fn dump_csv(&self, path: &Path) -> Result<(), ProblemError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for (x, y) in self.features.iter().zip(self.labels.iter()) {
            write!(out, "{}", fmt_float(*y))?;
            for v in x.iter() {
                write!(out, ",{}", fmt_float(*v))?;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn load_csv(path: &Path, lambda: f64) -> Result<Self, ProblemError> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let label: f64 = parts
                .next()
                .ok_or_else(|| ProblemError::Malformed("empty row".into()))?
                .trim()
                .parse()
                .map_err(|e| ProblemError::Malformed(format!("bad label: {e}")))?;
            let row: Result<Vec<f64>, _> = parts.map(|p| p.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| ProblemError::Malformed(format!("bad feature: {e}")))?;
            labels.push(label);
            features.push(Vec64::from_vec(row));
        }
        SvmDataset::new(features, labels, lambda)
    }
}

impl StochasticProblem for SvmDataset {
    fn dim(&self) -> usize {
        self.features.first().map_or(0, |x| x.len())
    }

    fn sample(&self, rng: &mut Rng64, l: usize) -> Result<SampleBatch, ProblemError> {
        if l == 0 {
            return Err(ProblemError::EmptyBatch);
        }
        Ok(SampleBatch::Indices(
            (0..l).map(|_| rng.index(self.features.len())).collect(),
        ))
    }

    fn batch_grad(&self, w: &Vec64, batch: &SampleBatch) -> Result<Vec64, ProblemError> {
        let idx = self.indices(batch)?;
        if w.len() != self.dim() {
            return Err(ProblemError::DimensionMismatch {
                expected: self.dim(),
                got: w.len(),
            });
        }
        let mut g = w.scaled(self.lambda);
        let inv_l = 1.0 / idx.len() as f64;
        for &i in idx {
            let x = &self.features[i];
            let y = self.labels[i];
            let margin = 1.0 - y * x.dot(w);
            if margin > 0.0 {
                g.axpy(-2.0 * inv_l * y * margin, x);
            }
        }
        Ok(g)
    }

    fn batch_value(&self, w: &Vec64, batch: &SampleBatch) -> Result<f64, ProblemError> {
        let idx = self.indices(batch)?;
        if w.len() != self.dim() {
            return Err(ProblemError::DimensionMismatch {
                expected: self.dim(),
                got: w.len(),
            });
        }
        let mut loss = 0.0;
        for &i in idx {
            let margin = 1.0 - self.labels[i] * self.features[i].dot(w);
            if margin > 0.0 {
                loss += margin * margin;
            }
        }
        Ok(0.5 * self.lambda * w.norm_sq() + loss / idx.len() as f64)
    }

    fn expected_value(&self, w: &Vec64) -> f64 {
        assert_eq!(w.len(), self.dim(), "dimension mismatch");
        let mut loss = 0.0;
        for (x, y) in self.features.iter().zip(self.labels.iter()) {
            let margin = 1.0 - y * x.dot(w);
            if margin > 0.0 {
                loss += margin * margin;
            }
        }
        0.5 * self.lambda * w.norm_sq() + loss / self.features.len() as f64
    }

    fn num_points(&self) -> Option<usize> {
        Some(self.features.len())
    }
}

// ---------------------------------------------------------------------------
// Class-weighted logistic regression
// ---------------------------------------------------------------------------

/// Logistic regression over sparse binary rows with a class weight gamma on
/// the positive class, realized by biased sampling: a positive row is gamma
/// times as likely to be drawn as a negative one. The full objective is
///
///   F(w) = lambda/2 ||w||^2 + (1/M) [ gamma * sum_{y=+1} log(1+e^{-xᵀw})
///                                   + sum_{y=-1} log(1+e^{xᵀw}) ]
///
/// with M = gamma * #positives + #negatives.
#[derive(Debug, Clone)]
pub struct LogisticDataset {
    rows: Vec<Vec<u32>>,
    labels: Vec<f64>,
    dim: usize,
    lambda: f64,
    gamma_weight: f64,
    positives: Vec<usize>,
    negatives: Vec<usize>,
    planted: Option<Vec64>,
}

pub const LOGISTIC_DEFAULT_LAMBDA: f64 = 1e-6;

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z), overflow-safe.
fn softplus(z: f64) -> f64 {
    if z > 35.0 {
        z
    } else {
        z.exp().ln_1p()
    }
}

impl LogisticDataset {
    pub fn new(
        rows: Vec<Vec<u32>>,
        labels: Vec<f64>,
        dim: usize,
        lambda: f64,
        gamma_weight: f64,
    ) -> Result<Self, ProblemError> {
        if rows.is_empty() {
            return Err(ProblemError::InvalidParameter(
                "dataset must hold at least one point".into(),
            ));
        }
        if rows.len() != labels.len() {
            return Err(ProblemError::DimensionMismatch {
                expected: rows.len(),
                got: labels.len(),
            });
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(ProblemError::InvalidParameter(
                "labels must be +1 or -1".into(),
            ));
        }
        if gamma_weight < 1.0 {
            return Err(ProblemError::InvalidParameter(
                "class weight must be >= 1".into(),
            ));
        }
        if rows
            .iter()
            .any(|row| row.iter().any(|&j| j as usize >= dim))
        {
            return Err(ProblemError::Malformed("feature index out of range".into()));
        }
        let positives = labels
            .iter()
            .enumerate()
            .filter(|(_, &y)| y > 0.0)
            .map(|(i, _)| i)
            .collect();
        let negatives = labels
            .iter()
            .enumerate()
            .filter(|(_, &y)| y < 0.0)
            .map(|(i, _)| i)
            .collect();
        Ok(LogisticDataset {
            rows,
            labels,
            dim,
            lambda,
            gamma_weight,
            positives,
            negatives,
            planted: None,
        })
    }

    /// Synthetic sparse set: every row holds exactly `nnz_per_row` ones at
    /// distinct random positions; labels come from a planted logistic model
    /// whose intercept is adjusted until the positive fraction lands within
    /// +/- 0.02 of `positive_frac`.
    pub fn synthetic(
        n: usize,
        points: usize,
        positive_frac: f64,
        nnz_per_row: usize,
        rng: &mut Rng64,
    ) -> Result<Self, ProblemError> {
        if !(0.0..1.0).contains(&positive_frac) || positive_frac == 0.0 {
            return Err(ProblemError::InvalidParameter(
                "positive fraction must lie in (0, 1)".into(),
            ));
        }
        if nnz_per_row > n || nnz_per_row == 0 {
            return Err(ProblemError::InvalidParameter(
                "nnz_per_row must lie in [1, n]".into(),
            ));
        }
        let planted = Vec64::from_vec((0..n).map(|_| rng.uniform(-1.0, 1.0)).collect());
        let mut rows = Vec::with_capacity(points);
        let mut scores = Vec::with_capacity(points);
        for _ in 0..points {
            let row = sample_distinct(rng, n, nnz_per_row);
            let score: f64 = row.iter().map(|&j| planted[j as usize]).sum();
            rows.push(row);
            scores.push(score);
        }
        // Intercept matching the target positive probability on average.
        let target = positive_frac;
        let mut lo = -60.0f64;
        let mut hi = 60.0f64;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let mean: f64 =
                scores.iter().map(|&s| logistic(s + mid)).sum::<f64>() / points as f64;
            if mean < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut bias = 0.5 * (lo + hi);

        const MAX_ROUNDS: usize = 100;
        for _ in 0..MAX_ROUNDS {
            let labels: Vec<f64> = scores
                .iter()
                .map(|&s| {
                    if rng.next_f64() < logistic(s + bias) {
                        1.0
                    } else {
                        -1.0
                    }
                })
                .collect();
            let frac = labels.iter().filter(|&&y| y > 0.0).count() as f64 / points as f64;
            if (frac - target).abs() <= 0.02 && frac > 0.0 && frac < 1.0 {
                let mut ds =
                    LogisticDataset::new(rows, labels, n, LOGISTIC_DEFAULT_LAMBDA, 1.0)?;
                ds.planted = Some(planted);
                return Ok(ds);
            }
            // Nudge the intercept against the observed miss and redraw.
            let clamp = |p: f64| p.clamp(1e-6, 1.0 - 1e-6);
            bias += (target / (1.0 - clamp(target))).ln() - (clamp(frac) / (1.0 - clamp(frac))).ln();
        }
        Err(ProblemError::TargetFractionInfeasible(MAX_ROUNDS))
    }

    pub fn with_gamma(mut self, gamma_weight: f64) -> Result<Self, ProblemError> {
        if gamma_weight < 1.0 {
            return Err(ProblemError::InvalidParameter(
                "class weight must be >= 1".into(),
            ));
        }
        self.gamma_weight = gamma_weight;
        Ok(self)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gamma_weight(&self) -> f64 {
        self.gamma_weight
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// The weight vector the labels were generated from, for synthetic sets.
    pub fn planted_weights(&self) -> Option<&Vec64> {
        self.planted.as_ref()
    }

    pub fn positive_fraction(&self) -> f64 {
        self.positives.len() as f64 / self.labels.len() as f64
    }

    fn row_dot(&self, i: usize, w: &Vec64) -> f64 {
        self.rows[i].iter().map(|&j| w[j as usize]).sum()
    }

    fn indices<'a>(&self, batch: &'a SampleBatch) -> Result<&'a [usize], ProblemError> {
        match batch {
            SampleBatch::Indices(v) if !v.is_empty() => Ok(v),
            SampleBatch::Indices(_) => Err(ProblemError::EmptyBatch),
            SampleBatch::Thetas(_) => Err(ProblemError::WrongBatchKind),
        }
    }

    /// Rows as `label, j_1, ..., j_k` CSV lines (indices of the one-valued
    /// features).
    pub fn dump_csv(&self, path: &Path) -> Result<(), ProblemError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for (row, y) in self.rows.iter().zip(self.labels.iter()) {
            write!(out, "{}", if *y > 0.0 { "1" } else { "-1" })?;
            for j in row {
                write!(out, ",{j}")?;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn load_csv(
        path: &Path,
        dim: usize,
        lambda: f64,
        gamma_weight: f64,
    ) -> Result<Self, ProblemError> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let label: f64 = parts
                .next()
                .ok_or_else(|| ProblemError::Malformed("empty row".into()))?
                .trim()
                .parse()
                .map_err(|e| ProblemError::Malformed(format!("bad label: {e}")))?;
            let row: Result<Vec<u32>, _> = parts.map(|p| p.trim().parse::<u32>()).collect();
            let row = row.map_err(|e| ProblemError::Malformed(format!("bad index: {e}")))?;
            labels.push(label);
            rows.push(row);
        }
        LogisticDataset::new(rows, labels, dim, lambda, gamma_weight)
    }
}

impl StochasticProblem for LogisticDataset {
    fn dim(&self) -> usize {
        self.dim
    }

    /// Biased draw: a positive row is `gamma_weight` times as likely as a
    /// negative row.
    fn sample(&self, rng: &mut Rng64, l: usize) -> Result<SampleBatch, ProblemError> {
        if l == 0 {
            return Err(ProblemError::EmptyBatch);
        }
        let pos_mass = self.gamma_weight * self.positives.len() as f64;
        let total = pos_mass + self.negatives.len() as f64;
        let p_pos = pos_mass / total;
        Ok(SampleBatch::Indices(
            (0..l)
                .map(|_| {
                    if !self.positives.is_empty() && rng.next_f64() < p_pos {
                        self.positives[rng.index(self.positives.len())]
                    } else {
                        self.negatives[rng.index(self.negatives.len())]
                    }
                })
                .collect(),
        ))
    }

    fn batch_grad(&self, w: &Vec64, batch: &SampleBatch) -> Result<Vec64, ProblemError> {
        let idx = self.indices(batch)?;
        if w.len() != self.dim {
            return Err(ProblemError::DimensionMismatch {
                expected: self.dim,
                got: w.len(),
            });
        }
        let mut g = w.scaled(self.lambda);
        let inv_l = 1.0 / idx.len() as f64;
        for &i in idx {
            let y = self.labels[i];
            let z = y * self.row_dot(i, w);
            let coeff = -inv_l * y * logistic(-z);
            for &j in &self.rows[i] {
                g[j as usize] += coeff;
            }
        }
        Ok(g)
    }

    fn batch_value(&self, w: &Vec64, batch: &SampleBatch) -> Result<f64, ProblemError> {
        let idx = self.indices(batch)?;
        if w.len() != self.dim {
            return Err(ProblemError::DimensionMismatch {
                expected: self.dim,
                got: w.len(),
            });
        }
        let mut loss = 0.0;
        for &i in idx {
            let z = self.labels[i] * self.row_dot(i, w);
            loss += softplus(-z);
        }
        Ok(0.5 * self.lambda * w.norm_sq() + loss / idx.len() as f64)
    }

    fn expected_value(&self, w: &Vec64) -> f64 {
        assert_eq!(w.len(), self.dim, "dimension mismatch");
        let mut weighted = 0.0;
        for (i, y) in self.labels.iter().enumerate() {
            let z = y * self.row_dot(i, w);
            let weight = if *y > 0.0 { self.gamma_weight } else { 1.0 };
            weighted += weight * softplus(-z);
        }
        let mass = self.gamma_weight * self.positives.len() as f64 + self.negatives.len() as f64;
        0.5 * self.lambda * w.norm_sq() + weighted / mass
    }

    fn num_points(&self) -> Option<usize> {
        Some(self.rows.len())
    }
}

/// `k` distinct indices from [0, n), sorted (Floyd's sampling).
fn sample_distinct(rng: &mut Rng64, n: usize, k: usize) -> Vec<u32> {
    let mut chosen: Vec<u32> = Vec::with_capacity(k);
    for j in (n - k)..n {
        let t = rng.index(j + 1) as u32;
        if chosen.contains(&t) {
            chosen.push(j as u32);
        } else {
            chosen.push(t);
        }
    }
    chosen.sort_unstable();
    chosen
}

/// 17 significant digits, enough to round-trip any f64.
pub(crate) fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}
