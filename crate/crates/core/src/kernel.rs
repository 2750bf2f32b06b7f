//! Base covariance functions and Gram-matrix assembly.
//!
//! Two stationary families are supported:
//!
//! * squared exponential, `k(x, y) = s * exp(-||x - y||^2 / (2 l^2))`
//! * squared cosine, `k(x, y) = (s / 2) * (1 + cos((x - y) / l))`
//!
//! with signal variance `s` and length scale `l`. The squared cosine form is
//! only a valid covariance on scalar inputs, so it is restricted to
//! one-dimensional raw inputs and to warped scalar intermediate values.

use crate::error::{GpError, Result};
use crate::linalg::Matrix;
use crate::num::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelFamily {
    SquaredExponential,
    SquaredCosine,
}

impl KernelFamily {
    pub fn code(self) -> &'static str {
        match self {
            KernelFamily::SquaredExponential => "SE",
            KernelFamily::SquaredCosine => "SC",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "SE" => Ok(KernelFamily::SquaredExponential),
            "SC" => Ok(KernelFamily::SquaredCosine),
            other => Err(GpError::InvalidConfig(format!(
                "unknown kernel family '{other}' (expected SE or SC)"
            ))),
        }
    }
}

impl std::fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

/// A stationary base kernel with positive signal variance and length scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaseKernel<T> {
    pub family: KernelFamily,
    pub variance: T,
    pub lengthscale: T,
}

impl<T: Real> BaseKernel<T> {
    pub fn new(family: KernelFamily, variance: T, lengthscale: T) -> Result<Self> {
        if !(variance > T::zero() && variance.is_finite()) {
            return Err(GpError::NonPositiveParameter {
                name: "variance",
                value: variance.as_f64(),
            });
        }
        if !(lengthscale > T::zero() && lengthscale.is_finite()) {
            return Err(GpError::NonPositiveParameter {
                name: "lengthscale",
                value: lengthscale.as_f64(),
            });
        }
        Ok(BaseKernel {
            family,
            variance,
            lengthscale,
        })
    }

    pub fn se(variance: T, lengthscale: T) -> Result<Self> {
        Self::new(KernelFamily::SquaredExponential, variance, lengthscale)
    }

    pub fn sc(variance: T, lengthscale: T) -> Result<Self> {
        Self::new(KernelFamily::SquaredCosine, variance, lengthscale)
    }

    /// Covariance between two points, validating shapes.
    pub fn eval(&self, xi: &[T], xj: &[T]) -> Result<T> {
        if xi.len() != xj.len() {
            return Err(GpError::ShapeMismatch {
                expected: xi.len(),
                got: xj.len(),
            });
        }
        if self.family == KernelFamily::SquaredCosine && xi.len() != 1 {
            return Err(GpError::ScalarInputsRequired { dim: xi.len() });
        }
        Ok(self.eval_unchecked(xi, xj))
    }

    #[inline]
    pub fn eval_unchecked(&self, xi: &[T], xj: &[T]) -> T {
        let r2 = sq_dist(xi, xj);
        self.eval_r2(r2)
    }

    /// Covariance between two scalar inputs.
    #[inline]
    pub fn eval_scalar(&self, a: T, b: T) -> T {
        let d = a - b;
        self.eval_r2(d * d)
    }

    #[inline]
    fn eval_r2(&self, r2: T) -> T {
        let half = T::of(0.5);
        match self.family {
            KernelFamily::SquaredExponential => {
                let l2 = self.lengthscale * self.lengthscale;
                self.variance * (-half * r2 / l2).exp()
            }
            KernelFamily::SquaredCosine => {
                let r = r2.sqrt();
                self.variance * half * (T::one() + (r / self.lengthscale).cos())
            }
        }
    }

    /// Kernel value plus derivatives with respect to (log variance,
    /// log lengthscale), used by the marginal-likelihood optimizers.
    #[inline]
    pub fn eval_with_grads(&self, xi: &[T], xj: &[T]) -> (T, T, T) {
        let r2 = sq_dist(xi, xj);
        let half = T::of(0.5);
        match self.family {
            KernelFamily::SquaredExponential => {
                let l2 = self.lengthscale * self.lengthscale;
                let k = self.variance * (-half * r2 / l2).exp();
                (k, k, k * r2 / l2)
            }
            KernelFamily::SquaredCosine => {
                let r = r2.sqrt();
                let u = r / self.lengthscale;
                let k = self.variance * half * (T::one() + u.cos());
                let d_loglen = self.variance * half * u.sin() * u;
                (k, k, d_loglen)
            }
        }
    }

    /// Gram matrix between two point sets (rows of `xa` and `xb`).
    pub fn gram(&self, xa: &Matrix<T>, xb: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_dim(xa.ncols())?;
        if xa.ncols() != xb.ncols() {
            return Err(GpError::ShapeMismatch {
                expected: xa.ncols(),
                got: xb.ncols(),
            });
        }
        Ok(Matrix::from_fn(xa.nrows(), xb.nrows(), |i, j| {
            self.eval_unchecked(xa.row(i), xb.row(j))
        }))
    }

    /// Symmetric Gram matrix over one point set; exactly symmetric by
    /// construction (upper triangle mirrored).
    pub fn gram_sym(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_dim(x.ncols())?;
        Ok(gram_sym(x.nrows(), |i, j| {
            self.eval_unchecked(x.row(i), x.row(j))
        }))
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if self.family == KernelFamily::SquaredCosine && d != 1 {
            return Err(GpError::ScalarInputsRequired { dim: d });
        }
        Ok(())
    }
}

#[inline]
fn sq_dist<T: Real>(xi: &[T], xj: &[T]) -> T {
    debug_assert_eq!(xi.len(), xj.len());
    xi.iter().zip(xj).fold(T::zero(), |acc, (&a, &b)| {
        let d = a - b;
        acc + d * d
    })
}

/// Assembles a symmetric matrix from an index-pair covariance, evaluating
/// only the upper triangle.
pub fn gram_sym<T: Real>(n: usize, mut k: impl FnMut(usize, usize) -> T) -> Matrix<T> {
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = k(i, j);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Assembles a rectangular covariance matrix from an index-pair covariance.
pub fn gram_rect<T: Real>(
    nrows: usize,
    ncols: usize,
    k: impl FnMut(usize, usize) -> T,
) -> Matrix<T> {
    Matrix::from_fn(nrows, ncols, k)
}
