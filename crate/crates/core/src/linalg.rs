//! Dense matrices, Cholesky and LU factorizations, and the diagonal-jitter
//! policy used to keep covariance solves well conditioned.
//!
//! Everything here is straightforward O(n^3) dense arithmetic; the matrices
//! in this crate are covariance blocks of at most a few hundred rows.

use std::ops::{Index, IndexMut};

use crate::error::{GpError, Result};
use crate::num::Real;

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let ncols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == ncols), "ragged rows");
        Matrix {
            rows: rows.len(),
            cols: ncols,
            data: rows.concat(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Matrix<T> {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + aik * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "mul_vec shape mismatch");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    pub fn add(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, s: T) -> Matrix<T> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| a * s).collect(),
        }
    }

    pub fn add_diag(&mut self, v: T) {
        assert!(self.is_square());
        for i in 0..self.rows {
            self[(i, i)] = self[(i, i)] + v;
        }
    }

    /// Replaces the matrix with (A + Aᵀ)/2, removing asymmetric round-off.
    pub fn symmetrize(&mut self) {
        assert!(self.is_square());
        let half = T::of(0.5);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let s = (self[(i, j)] + self[(j, i)]) * half;
                self[(i, j)] = s;
                self[(j, i)] = s;
            }
        }
    }

    pub fn max_abs_diff(&self, other: &Matrix<T>) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    pub fn max_asymmetry(&self) -> T {
        assert!(self.is_square());
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn mean_abs_diag(&self) -> T {
        assert!(self.is_square());
        if self.rows == 0 {
            return T::zero();
        }
        let sum = (0..self.rows).map(|i| self[(i, i)].abs()).sum::<T>();
        sum / T::of(self.rows as f64)
    }

    /// Extracts the sub-matrix with the given row and column indices.
    pub fn select(&self, row_idx: &[usize], col_idx: &[usize]) -> Matrix<T> {
        Matrix::from_fn(row_idx.len(), col_idx.len(), |i, j| {
            self[(row_idx[i], col_idx[j])]
        })
    }
}

impl<T: Real> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: std::fmt::Debug> std::fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        if self.cols > 0 {
            for row in self.data.chunks(self.cols) {
                writeln!(f, "  {row:?}")?;
            }
        }
        write!(f, "]")
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug)]
pub struct Cholesky<T> {
    l: Matrix<T>,
}

impl<T: Real> Cholesky<T> {
    /// Plain factorization without jitter; fails on the first non-positive pivot.
    pub fn factor(a: &Matrix<T>) -> Result<Self> {
        assert!(a.is_square());
        let n = a.nrows();
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d = d - l[(j, k)] * l[(j, k)];
            }
            if d <= T::zero() || !d.is_finite() {
                return Err(GpError::CholeskyFailure {
                    size: n,
                    index: j,
                    pivot: d.as_f64(),
                    max_jitter: 0.0,
                });
            }
            let ljj = d.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn lower(&self) -> &Matrix<T> {
        &self.l
    }

    pub fn size(&self) -> usize {
        self.l.nrows()
    }

    /// Solves (L Lᵀ) x = b.
    pub fn solve_vec(&self, b: &[T]) -> Vec<T> {
        let n = self.size();
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        // forward: L z = b
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s = s - self.l[(i, k)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        // backward: Lᵀ x = z
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s = s - self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// Solves (L Lᵀ) X = B column by column.
    pub fn solve_mat(&self, b: &Matrix<T>) -> Matrix<T> {
        assert_eq!(b.nrows(), self.size());
        let mut out = Matrix::zeros(b.nrows(), b.ncols());
        let mut col = vec![T::zero(); b.nrows()];
        for j in 0..b.ncols() {
            for i in 0..b.nrows() {
                col[i] = b[(i, j)];
            }
            let x = self.solve_vec(&col);
            for i in 0..b.nrows() {
                out[(i, j)] = x[i];
            }
        }
        out
    }

    pub fn inverse(&self) -> Matrix<T> {
        self.solve_mat(&Matrix::identity(self.size()))
    }

    /// log |A| where A = L Lᵀ.
    pub fn log_det(&self) -> T {
        let two = T::of(2.0);
        (0..self.size())
            .map(|i| self.l[(i, i)].ln())
            .fold(T::zero(), |acc, v| acc + v)
            * two
    }
}

/// Diagonal-jitter schedule for Cholesky factorization of covariance
/// matrices: relative levels 1e-10 * scale through 1e-6 * scale in factors
/// of 10, then a hard failure.
#[derive(Clone, Copy, Debug)]
pub struct JitterPolicy {
    pub initial_rel: f64,
    pub max_rel: f64,
    pub growth: f64,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        JitterPolicy {
            initial_rel: 1e-10,
            max_rel: 1e-6,
            growth: 10.0,
        }
    }
}

/// Factorizes `a + jitter * I`, escalating jitter per [`JitterPolicy`].
///
/// `scale` is the magnitude the relative jitter levels refer to (the signal
/// variance for kernel Gram matrices); pass `None` to use the mean absolute
/// diagonal. Returns the factorization together with the jitter applied.
pub fn cholesky_with_jitter<T: Real>(
    a: &Matrix<T>,
    scale: Option<T>,
) -> Result<(Cholesky<T>, T)> {
    assert!(a.is_square());
    let policy = JitterPolicy::default();
    let scale = scale
        .unwrap_or_else(|| a.mean_abs_diag())
        .max(T::min_positive_value());
    let mut rel = policy.initial_rel;
    let mut last_err = None;
    while rel <= policy.max_rel * (1.0 + 1e-12) {
        let jitter = scale * T::of(rel);
        let mut jittered = a.clone();
        jittered.add_diag(jitter);
        match Cholesky::factor(&jittered) {
            Ok(c) => return Ok((c, jitter)),
            Err(e) => last_err = Some(e),
        }
        rel *= policy.growth;
    }
    match last_err {
        Some(GpError::CholeskyFailure { size, index, pivot, .. }) => {
            Err(GpError::CholeskyFailure {
                size,
                index,
                pivot,
                max_jitter: policy.max_rel * scale.as_f64(),
            })
        }
        other => Err(other.unwrap_or(GpError::SingularMatrix)),
    }
}

/// Pivot-tolerant Cholesky for positive *semi*-definite matrices.
///
/// Columns whose pivot falls within `tol * scale` of zero are zeroed out, so
/// degenerate covariances (point masses, perfectly correlated pairs)
/// factor cleanly. A pivot below `-tol * scale` is a genuine PSD violation.
pub fn cholesky_psd<T: Real>(a: &Matrix<T>, rel_tol: f64) -> Result<Matrix<T>> {
    assert!(a.is_square());
    let n = a.nrows();
    let scale = a.mean_abs_diag().max(T::one());
    let tol = scale * T::of(rel_tol);
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d = d - l[(j, k)] * l[(j, k)];
        }
        if d < -tol || !d.is_finite() {
            return Err(GpError::NotPsd(format!(
                "pivot {:.3e} at index {j}",
                d.as_f64()
            )));
        }
        if d <= tol {
            // semidefinite direction: leave the column zero
            continue;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// LU decomposition with partial pivoting, for determinants and solves of
/// general (non-symmetric) square matrices.
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
    sign: T,
}

impl<T: Real> Lu<T> {
    pub fn factor(a: &Matrix<T>) -> Result<Self> {
        assert!(a.is_square());
        let n = a.nrows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = T::one();
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in (k + 1)..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return Err(GpError::SingularMatrix);
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                for j in (k + 1)..n {
                    lu[(i, j)] = lu[(i, j)] - factor * lu[(k, j)];
                }
            }
        }
        Ok(Lu { lu, perm, sign })
    }

    pub fn det(&self) -> T {
        (0..self.lu.nrows())
            .map(|i| self.lu[(i, i)])
            .fold(self.sign, |acc, v| acc * v)
    }

    pub fn solve_vec(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.nrows();
        assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s = s - self.lu[(i, k)] * x[k];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s = s - self.lu[(i, k)] * x[k];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }
}
