//! Minimal dense linear algebra and a deterministic random-number generator.
//!
//! Everything here is plain 64-bit floating point over contiguous storage.
//! Matrices are square, dense, row-major; the sizes used elsewhere in this
//! crate stay well below a few thousand, so no blocking or BLAS is needed.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NumericsError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("eigenvalue sweep did not converge within {0} sweeps")]
    NoConvergence(usize),
}

/// Dense vector of `f64` with a length fixed at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Vec64 {
    data: Vec<f64>,
}

impl Vec64 {
    pub fn zeros(n: usize) -> Self {
        Vec64 { data: vec![0.0; n] }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Vec64 { data }
    }

    pub fn from_slice(data: &[f64]) -> Self {
        Vec64 { data: data.to_vec() }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn dot(&self, other: &Vec64) -> f64 {
        assert_eq!(self.len(), other.len(), "dot of mismatched lengths");
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Vec64) {
        assert_eq!(self.len(), other.len(), "axpy of mismatched lengths");
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += alpha * b;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Vec64 {
        Vec64 {
            data: self.data.iter().map(|x| alpha * x).collect(),
        }
    }

    pub fn add(&self, other: &Vec64) -> Vec64 {
        assert_eq!(self.len(), other.len());
        Vec64 {
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Vec64) -> Vec64 {
        assert_eq!(self.len(), other.len());
        Vec64 {
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl std::ops::Index<usize> for Vec64 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for Vec64 {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

/// Dense square matrix of `f64`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat64 {
    n: usize,
    data: Vec<f64>,
}

impl Mat64 {
    pub fn zeros(n: usize) -> Self {
        Mat64 {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat64::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Mat64::zeros(n);
        for (i, &d) in entries.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let mut m = Mat64::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "matrix must be square");
            m.data[i * n..(i + 1) * n].copy_from_slice(row);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Symmetry test used by the routines that require symmetric input:
    /// `max |M - Mᵀ| <= tol_rel * max |M|`.
    pub fn is_symmetric(&self, tol_rel: f64) -> bool {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if (self.get(i, j) - self.get(j, i)).abs() > tol_rel * scale {
                    return false;
                }
            }
        }
        true
    }

    pub fn mat_vec(&self, x: &Vec64) -> Result<Vec64, NumericsError> {
        if x.len() != self.n {
            return Err(NumericsError::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let mut out = Vec64::zeros(self.n);
        for i in 0..self.n {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x.as_slice()) {
                acc += a * b;
            }
            out[i] = acc;
        }
        Ok(out)
    }

    pub fn mat_mul(&self, other: &Mat64) -> Mat64 {
        assert_eq!(self.n, other.n, "mat_mul of mismatched dimensions");
        let n = self.n;
        let mut out = Mat64::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat64 {
        let n = self.n;
        let mut out = Mat64::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j];
            }
        }
        out
    }

    pub fn scaled(&self, alpha: f64) -> Mat64 {
        Mat64 {
            n: self.n,
            data: self.data.iter().map(|x| alpha * x).collect(),
        }
    }

    pub fn add(&self, other: &Mat64) -> Mat64 {
        assert_eq!(self.n, other.n);
        Mat64 {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Mat64) -> Mat64 {
        assert_eq!(self.n, other.n);
        Mat64 {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// `self += alpha * x yᵀ`
    pub fn add_outer(&mut self, alpha: f64, x: &Vec64, y: &Vec64) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        let n = self.n;
        for i in 0..n {
            let ax = alpha * x[i];
            for j in 0..n {
                self.data[i * n + j] += ax * y[j];
            }
        }
    }

    /// Extreme eigenvalues of a symmetric matrix via cyclic Jacobi sweeps.
    ///
    /// Sweeps run until the off-diagonal Frobenius norm drops to `tol`
    /// (absolute). Returns `(lambda_min, lambda_max)`.
    pub fn sym_eig_extremes(&self, tol: f64) -> Result<(f64, f64), NumericsError> {
        if !self.is_symmetric(1e-12) {
            return Err(NumericsError::NotSymmetric);
        }
        let n = self.n;
        if n == 0 {
            return Ok((f64::NAN, f64::NAN));
        }
        if n == 1 {
            return Ok((self.get(0, 0), self.get(0, 0)));
        }
        let mut a = self.clone();
        const MAX_SWEEPS: usize = 60;
        for _ in 0..MAX_SWEEPS {
            let mut off_sq = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    off_sq += 2.0 * a.get(i, j) * a.get(i, j);
                }
            }
            if off_sq.sqrt() <= tol {
                let mut lo = a.get(0, 0);
                let mut hi = lo;
                for i in 1..n {
                    let d = a.get(i, i);
                    lo = lo.min(d);
                    hi = hi.max(d);
                }
                return Ok((lo, hi));
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    if apq == 0.0 {
                        continue;
                    }
                    let app = a.get(p, p);
                    let aqq = a.get(q, q);
                    // Rotation that annihilates the (p,q) entry.
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (1.0 + theta * theta).sqrt())
                    } else {
                        1.0 / (theta - (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let apk = a.get(p, k);
                        let aqk = a.get(q, k);
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                }
            }
        }
        Err(NumericsError::NoConvergence(MAX_SWEEPS))
    }

    /// Trace and determinant. The determinant comes from LU factorization
    /// with partial pivoting; a zero pivot yields determinant 0.
    pub fn trace_det(&self) -> (f64, f64) {
        let n = self.n;
        let mut trace = 0.0;
        for i in 0..n {
            trace += self.get(i, i);
        }
        let mut lu = self.clone();
        let mut det = 1.0;
        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_mag = lu.get(col, col).abs();
            for r in (col + 1)..n {
                let mag = lu.get(r, col).abs();
                if mag > pivot_mag {
                    pivot_mag = mag;
                    pivot_row = r;
                }
            }
            if pivot_mag == 0.0 {
                return (trace, 0.0);
            }
            if pivot_row != col {
                for j in 0..n {
                    let tmp = lu.get(col, j);
                    lu.set(col, j, lu.get(pivot_row, j));
                    lu.set(pivot_row, j, tmp);
                }
                det = -det;
            }
            let pivot = lu.get(col, col);
            det *= pivot;
            for r in (col + 1)..n {
                let factor = lu.get(r, col) / pivot;
                if factor == 0.0 {
                    continue;
                }
                for j in col..n {
                    let v = lu.get(r, j) - factor * lu.get(col, j);
                    lu.set(r, j, v);
                }
            }
        }
        (trace, det)
    }

    /// Solve `M x = rhs` for symmetric positive definite `M` via Cholesky.
    pub fn solve_spd(&self, rhs: &Vec64) -> Result<Vec64, NumericsError> {
        let mut mults = 0u64;
        self.solve_spd_counted(rhs, &mut mults)
    }

    /// Same as [`solve_spd`](Self::solve_spd), accumulating into `mults` one
    /// count per multiplication executed in the factorization and the two
    /// triangular solves. Used by the operation-cost accounting.
    pub fn solve_spd_counted(
        &self,
        rhs: &Vec64,
        mults: &mut u64,
    ) -> Result<Vec64, NumericsError> {
        let n = self.n;
        if rhs.len() != n {
            return Err(NumericsError::DimensionMismatch {
                expected: n,
                got: rhs.len(),
            });
        }
        if !self.is_symmetric(1e-12) {
            return Err(NumericsError::NotSymmetric);
        }
        // Lower-triangular factor, stored dense.
        let mut l = vec![0.0f64; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = self.get(i, j);
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                *mults += j as u64;
                if i == j {
                    if sum <= 0.0 || !sum.is_finite() {
                        return Err(NumericsError::NotPositiveDefinite);
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                    *mults += 1;
                }
            }
        }
        // Forward solve L y = rhs.
        let mut y = vec![0.0f64; n];
        for i in 0..n {
            let mut sum = rhs[i];
            for k in 0..i {
                sum -= l[i * n + k] * y[k];
            }
            *mults += i as u64 + 1;
            y[i] = sum / l[i * n + i];
        }
        // Backward solve Lᵀ x = y.
        let mut x = vec![0.0f64; n];
        for i in (0..n).rev() {
            let mut sum = y[i];
            for k in (i + 1)..n {
                sum -= l[k * n + i] * x[k];
            }
            *mults += (n - i) as u64;
            x[i] = sum / l[i * n + i];
        }
        Ok(Vec64::from_vec(x))
    }
}

/// Seedable 64-bit generator: splitmix64 expands the seed into the state of
/// a xoshiro256++ stream. Equal seeds give equal draw sequences within this
/// implementation; bit equality across implementations is not promised.
#[derive(Debug, Clone)]
pub struct Rng64 {
    state: [u64; 4],
}

fn splitmix64(x: &mut u64) -> u64 {
    *x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

impl Rng64 {
    pub fn new(seed: u64) -> Self {
        let mut x = seed;
        let state = [
            splitmix64(&mut x),
            splitmix64(&mut x),
            splitmix64(&mut x),
            splitmix64(&mut x),
        ];
        Rng64 { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.state;
        let result = s[0].wrapping_add(s[3]).rotate_left(23).wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform draw in [0, 1), 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform index in [0, n). Uses the multiply-shift reduction; the bias
    /// of order n/2^64 is irrelevant for the statistical experiments here.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }
}
