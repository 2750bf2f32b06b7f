//! Moment matching for composed Gaussian processes.
//!
//! When an outer GP receives inputs warped by an inner GP whose posterior at
//! the evaluation points is N(m, C), the marginal covariance of the
//! composite function has a closed form for the squared-exponential and
//! squared-cosine outer kernels. With
//!
//! ```text
//! delta2_ij = c_ii + c_jj - 2 c_ij
//! ```
//!
//! the effective kernels are
//!
//! ```text
//! SE:  k(i, j) = s2 / sqrt(1 + delta2/l2^2) * exp(-(m_i - m_j)^2 / (2 (l2^2 + delta2)))
//! SC:  k(i, j) = (s2 / 2) * (1 + cos((m_i - m_j)/l2) * exp(-delta2 / (2 l2^2)))
//! ```
//!
//! Both reduce to the base kernel on the warped means when C = 0, and both
//! are verified against a Monte-Carlo evaluation of
//! E[k2(g_i, g_j)], (g_i, g_j) ~ N(m, C); see [`mc_oracle_kernel`].

use crate::error::{GpError, Result};
use crate::kernel::{gram_sym, BaseKernel, KernelFamily};
use crate::linalg::{cholesky_psd, dot, Lu, Matrix};
use crate::num::Real;
use crate::rng::{rng_from_seed, standard_normal_pair};

/// Posterior mean vector and full covariance matrix of an inner GP at the
/// union of downstream evaluation inputs.
#[derive(Clone, Debug)]
pub struct ConditionalMoments<T> {
    mean: Vec<T>,
    cov: Matrix<T>,
}

impl<T: Real> ConditionalMoments<T> {
    pub fn new(mean: Vec<T>, mut cov: Matrix<T>) -> Result<Self> {
        if !cov.is_square() || cov.nrows() != mean.len() {
            return Err(GpError::ShapeMismatch {
                expected: mean.len(),
                got: cov.nrows(),
            });
        }
        cov.symmetrize();
        Ok(ConditionalMoments { mean, cov })
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix<T> {
        &self.cov
    }

    #[inline]
    pub fn mean_diff(&self, i: usize, j: usize) -> T {
        self.mean[i] - self.mean[j]
    }

    /// Predictive variance of the difference g_i - g_j, clamped at zero:
    /// the exact value is a quadratic form of a PSD 2x2 block and only
    /// round-off can push it negative.
    #[inline]
    pub fn delta_sq(&self, i: usize, j: usize) -> T {
        let raw = self.cov[(i, i)] + self.cov[(j, j)] - self.cov[(i, j)] - self.cov[(j, i)];
        raw.max(T::zero())
    }

    /// The 2x2 sub-block [[c_ii, c_ij], [c_ji, c_jj]].
    pub fn block2(&self, i: usize, j: usize) -> Matrix<T> {
        Matrix::from_rows(&[
            vec![self.cov[(i, i)], self.cov[(i, j)]],
            vec![self.cov[(j, i)], self.cov[(j, j)]],
        ])
    }
}

fn check_symmetric<T: Real>(a: &Matrix<T>, what: &str) -> Result<()> {
    let scale = a.mean_abs_diag().max(T::one());
    if a.max_asymmetry() > scale * T::of(1e-8) {
        return Err(GpError::NotPsd(format!("{what} is not symmetric")));
    }
    Ok(())
}

/// E[exp(-1/2 g' A g)] for g ~ N(m, C), with A symmetric PSD.
///
/// Evaluated as exp(-1/2 m' A (I + CA)^{-1} m) / sqrt(|I + CA|), using
/// m' C^{-1} (I - (I + CA)^{-1}) m = m' A (I + CA)^{-1} m so that singular C
/// (point masses) needs no special casing.
pub fn expectation_exp_quadratic<T: Real>(m: &[T], c: &Matrix<T>, a: &Matrix<T>) -> Result<T> {
    let n = m.len();
    if !c.is_square() || c.nrows() != n || !a.is_square() || a.nrows() != n {
        return Err(GpError::ShapeMismatch {
            expected: n,
            got: if c.nrows() != n { c.nrows() } else { a.nrows() },
        });
    }
    check_symmetric(a, "quadratic-form matrix A")?;
    cholesky_psd(a, 1e-10).map_err(|_| GpError::NotPsd("A must be PSD".into()))?;
    cholesky_psd(c, 1e-8).map_err(|_| GpError::NotPsd("C must be PSD".into()))?;

    // M = I + C A
    let mut mmat = c.matmul(a);
    mmat.add_diag(T::one());
    let lu = Lu::factor(&mmat)?;
    let det = lu.det();
    if !(det > T::zero()) || !det.is_finite() {
        return Err(GpError::SingularMatrix);
    }
    let v = lu.solve_vec(m);
    let quad = dot(m, &a.mul_vec(&v));
    Ok((-T::of(0.5) * quad).exp() / det.sqrt())
}

/// E[exp(a' g)] for g ~ N(m, C): exp(a' m + 1/2 a' C a).
pub fn expectation_exp_inner<T: Real>(m: &[T], c: &Matrix<T>, a: &[T]) -> Result<T> {
    let n = m.len();
    if a.len() != n {
        return Err(GpError::ShapeMismatch {
            expected: n,
            got: a.len(),
        });
    }
    if !c.is_square() || c.nrows() != n {
        return Err(GpError::ShapeMismatch {
            expected: n,
            got: c.nrows(),
        });
    }
    let quad = dot(a, &c.mul_vec(a));
    Ok((dot(a, m) + T::of(0.5) * quad).exp())
}

/// Squared-exponential effective kernel between indices `i` and `j` of the
/// moments, with outer signal variance `var2` and length scale `len2`.
#[inline]
pub fn effective_kernel_se<T: Real>(
    moments: &ConditionalMoments<T>,
    var2: T,
    len2: T,
    i: usize,
    j: usize,
) -> T {
    let d2 = moments.delta_sq(i, j);
    let u = moments.mean_diff(i, j);
    let l2sq = len2 * len2;
    let denom = l2sq + d2;
    var2 / (T::one() + d2 / l2sq).sqrt() * (-(u * u) / (T::of(2.0) * denom)).exp()
}

/// Squared-cosine effective kernel between indices `i` and `j`.
///
/// The length scale divides the warped mean difference inside the cosine,
/// matching the scalar kernel (s2/2)(1 + cos((x - y)/l2)) it is the
/// expectation of; the Monte-Carlo oracle pins this convention down.
#[inline]
pub fn effective_kernel_sc<T: Real>(
    moments: &ConditionalMoments<T>,
    var2: T,
    len2: T,
    i: usize,
    j: usize,
) -> T {
    let d2 = moments.delta_sq(i, j);
    let u = moments.mean_diff(i, j);
    let l2sq = len2 * len2;
    let half = T::of(0.5);
    var2 * half * (T::one() + (u / len2).cos() * (-d2 / (T::of(2.0) * l2sq)).exp())
}

/// Kernel value and partial derivatives used by the trainers.
#[derive(Clone, Copy, Debug)]
pub struct EffectiveKernelGrads<T> {
    pub value: T,
    /// d k / d log(var2)
    pub d_log_var: T,
    /// d k / d log(len2)
    pub d_log_len: T,
    /// d k / d delta2_ij
    pub d_delta_sq: T,
    /// d k / d (m_i - m_j)
    pub d_mean_diff: T,
}

/// The data-dependent covariance of a composed GP: an outer base kernel
/// applied to inputs whose distribution is captured by conditional moments.
#[derive(Clone, Copy)]
pub struct EffectiveKernel<'a, T> {
    pub outer: BaseKernel<T>,
    pub moments: &'a ConditionalMoments<T>,
}

impl<'a, T: Real> EffectiveKernel<'a, T> {
    pub fn new(outer: BaseKernel<T>, moments: &'a ConditionalMoments<T>) -> Self {
        EffectiveKernel { outer, moments }
    }

    #[inline]
    pub fn eval(&self, i: usize, j: usize) -> T {
        match self.outer.family {
            KernelFamily::SquaredExponential => effective_kernel_se(
                self.moments,
                self.outer.variance,
                self.outer.lengthscale,
                i,
                j,
            ),
            KernelFamily::SquaredCosine => effective_kernel_sc(
                self.moments,
                self.outer.variance,
                self.outer.lengthscale,
                i,
                j,
            ),
        }
    }

    pub fn eval_with_grads(&self, i: usize, j: usize) -> EffectiveKernelGrads<T> {
        let d2 = self.moments.delta_sq(i, j);
        let u = self.moments.mean_diff(i, j);
        let s2 = self.outer.variance;
        let l = self.outer.lengthscale;
        let l2 = l * l;
        let half = T::of(0.5);
        match self.outer.family {
            KernelFamily::SquaredExponential => {
                let denom = l2 + d2;
                let k = s2 / (T::one() + d2 / l2).sqrt() * (-(u * u) / (T::of(2.0) * denom)).exp();
                EffectiveKernelGrads {
                    value: k,
                    d_log_var: k,
                    d_log_len: k * (T::one() - l2 / denom + u * u * l2 / (denom * denom)),
                    d_delta_sq: k * (-half / denom + half * u * u / (denom * denom)),
                    d_mean_diff: -k * u / denom,
                }
            }
            KernelFamily::SquaredCosine => {
                let e = (-d2 / (T::of(2.0) * l2)).exp();
                let cosu = (u / l).cos();
                let sinu = (u / l).sin();
                let k = s2 * half * (T::one() + cosu * e);
                EffectiveKernelGrads {
                    value: k,
                    d_log_var: k,
                    d_log_len: s2 * half * e * (sinu * u / l + cosu * d2 / l2),
                    d_delta_sq: -s2 * half * cosu * e / (T::of(2.0) * l2),
                    d_mean_diff: -s2 * half * sinu * e / l,
                }
            }
        }
    }

    /// Symmetric Gram matrix over a subset of moment indices.
    pub fn gram_sym_over(&self, idx: &[usize]) -> Matrix<T> {
        gram_sym(idx.len(), |i, j| self.eval(idx[i], idx[j]))
    }

    /// Rectangular covariance between two subsets of moment indices.
    pub fn gram_over(&self, rows: &[usize], cols: &[usize]) -> Matrix<T> {
        Matrix::from_fn(rows.len(), cols.len(), |i, j| self.eval(rows[i], cols[j]))
    }
}

/// Monte-Carlo estimate of E[k2(g_i, g_j)] with (g_i, g_j) ~ N(m2, C2).
///
/// This is the ground-truth oracle for both closed-form effective kernels.
/// Returns the estimate and its standard error. Sampling runs in f64
/// regardless of `T`.
pub fn mc_oracle_kernel<T: Real>(
    outer: &BaseKernel<T>,
    m2: &[T; 2],
    c2: &Matrix<T>,
    n_samples: usize,
    seed: u64,
) -> Result<(T, T)> {
    if !c2.is_square() || c2.nrows() != 2 {
        return Err(GpError::ShapeMismatch {
            expected: 2,
            got: c2.nrows(),
        });
    }
    if n_samples == 0 {
        return Err(GpError::InvalidConfig("n_samples must be >= 1".into()));
    }
    let cf = Matrix::<f64>::from_fn(2, 2, |i, j| c2[(i, j)].as_f64());
    let l = cholesky_psd(&cf, 1e-12)?;
    let kf = BaseKernel::<f64>::new(
        outer.family,
        outer.variance.as_f64(),
        outer.lengthscale.as_f64(),
    )?;
    let (m0, m1) = (m2[0].as_f64(), m2[1].as_f64());

    let mut rng = rng_from_seed(seed);
    // Welford online moments: exact zero variance for degenerate sampling
    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    for i in 0..n_samples {
        let (z0, z1) = standard_normal_pair(&mut rng);
        let g0 = m0 + l[(0, 0)] * z0;
        let g1 = m1 + l[(1, 0)] * z0 + l[(1, 1)] * z1;
        let v = kf.eval_scalar(g0, g1);
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    let n = n_samples as f64;
    let se = (m2 / n / n).sqrt();
    Ok((T::of(mean), T::of(se)))
}

/// Verifies the two 2x2 reduction identities behind the SE effective
/// kernel, for A = [[1, -1], [-1, 1]]:
///
/// * |I + CA| = 1 + delta2
/// * I - (I + CA)^{-1} = CA / (1 + delta2)
///
/// Returns true iff both hold entrywise to 1e-10 for the given PSD C.
pub fn reduced_inverse_identity_check<T: Real>(c2: &Matrix<T>) -> Result<bool> {
    if !c2.is_square() || c2.nrows() != 2 {
        return Err(GpError::ShapeMismatch {
            expected: 2,
            got: c2.nrows(),
        });
    }
    check_symmetric(c2, "C")?;
    let a = Matrix::from_rows(&[vec![T::one(), -T::one()], vec![-T::one(), T::one()]]);
    let ca = c2.matmul(&a);
    let mut m = ca.clone();
    m.add_diag(T::one());

    let delta_sq = c2[(0, 0)] + c2[(1, 1)] - c2[(0, 1)] - c2[(1, 0)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let tol = T::of(1e-10);
    if (det - (T::one() + delta_sq)).abs() > tol {
        return Ok(false);
    }

    // adjugate inverse of the 2x2 matrix
    let inv = Matrix::from_rows(&[
        vec![m[(1, 1)] / det, -m[(0, 1)] / det],
        vec![-m[(1, 0)] / det, m[(0, 0)] / det],
    ]);
    let lhs = Matrix::<T>::identity(2).sub(&inv);
    let rhs = ca.scale((T::one() + delta_sq).recip());
    Ok(lhs.max_abs_diff(&rhs) <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments_2x2(m: [f64; 2], c: [[f64; 2]; 2]) -> ConditionalMoments<f64> {
        ConditionalMoments::new(
            m.to_vec(),
            Matrix::from_rows(&[c[0].to_vec(), c[1].to_vec()]),
        )
        .unwrap()
    }

    #[test]
    fn exp_quadratic_zero_mean_identity_cov() {
        let a = Matrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]);
        let v = expectation_exp_quadratic(&[0.0, 0.0], &Matrix::identity(2), &a).unwrap();
        assert!((v - 1.0 / 3.0f64.sqrt()).abs() < 1e-12, "{v}");
    }

    #[test]
    fn exp_quadratic_zero_form_is_one() {
        let v =
            expectation_exp_quadratic(&[0.4f64, -1.0], &Matrix::identity(2), &Matrix::zeros(2, 2))
                .unwrap();
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exp_quadratic_matches_mc() {
        let a = Matrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]);
        let m = [1.0f64, 0.0];
        let closed = expectation_exp_quadratic(&m, &Matrix::identity(2), &a).unwrap();
        // A/l^2 with l = 1 is the SE exponent, so the MC kernel oracle with
        // unit variance measures the same expectation
        let kernel = BaseKernel::se(1.0, 1.0).unwrap();
        let (est, se) =
            mc_oracle_kernel(&kernel, &[1.0, 0.0], &Matrix::identity(2), 200_000, 31).unwrap();
        assert!((closed - est).abs() < 3.0 * se, "{closed} vs {est} (se {se})");
    }

    #[test]
    fn exp_quadratic_rejects_non_psd_a() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(
            expectation_exp_quadratic(&[0.0, 0.0], &Matrix::identity(2), &a),
            Err(GpError::NotPsd(_))
        ));
    }

    #[test]
    fn exp_inner_examples() {
        let c = Matrix::identity(2);
        assert!(
            (expectation_exp_inner(&[0.3f64, 9.0], &c, &[0.0, 0.0]).unwrap() - 1.0).abs() < 1e-14
        );
        let v = expectation_exp_inner(&[0.0, 0.0], &c, &[1.0, -1.0]).unwrap();
        assert!((v - 1.0f64.exp()).abs() < 1e-12);
        let v = expectation_exp_inner(&[1.0, 1.0], &Matrix::zeros(2, 2), &[1.0, 1.0]).unwrap();
        assert!((v - 2.0f64.exp()).abs() < 1e-11);
    }

    #[test]
    fn se_effective_kernel_on_diagonal_is_variance() {
        let mom = moments_2x2([0.7, -0.3], [[0.5, 0.1], [0.1, 0.8]]);
        let v = effective_kernel_se(&mom, 1.9, 0.7, 0, 0);
        assert_eq!(v, 1.9);
        let v = effective_kernel_sc(&mom, 1.9, 0.7, 1, 1);
        assert!((v - 1.9).abs() < 1e-15);
    }

    #[test]
    fn se_effective_kernel_deterministic_warping() {
        // C = 0 reduces to the SE kernel on the warped means
        let mom = moments_2x2([0.0, 1.0], [[0.0, 0.0], [0.0, 0.0]]);
        let v = effective_kernel_se(&mom, 1.0, 1.0, 0, 1);
        assert!((v - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn se_effective_kernel_uncertainty_only() {
        // m equal, c_ii = c_jj = 1, c_ij = 0 so delta2 = 2: value 1/sqrt(3)
        let mom = moments_2x2([0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]]);
        let v = effective_kernel_se(&mom, 1.0, 1.0, 0, 1);
        assert!((v - 1.0 / 3.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn se_effective_kernel_symmetric_and_bounded() {
        let mom = moments_2x2([0.4, -0.9], [[0.6, -0.2], [-0.2, 1.1]]);
        let kij = effective_kernel_se(&mom, 1.3, 0.8, 0, 1);
        let kji = effective_kernel_se(&mom, 1.3, 0.8, 1, 0);
        assert_eq!(kij, kji);
        assert!(kij < 1.3);
    }

    #[test]
    fn sc_effective_kernel_examples() {
        // cos(pi/2) = 0 with no uncertainty: value s2/2
        let mom = moments_2x2([std::f64::consts::FRAC_PI_2, 0.0], [[0.0, 0.0], [0.0, 0.0]]);
        let v = effective_kernel_sc(&mom, 2.0, 1.0, 0, 1);
        assert!((v - 1.0).abs() < 1e-12);
        // enormous delta2 kills the cosine term
        let mom = moments_2x2([0.3, 0.1], [[1e8, 0.0], [0.0, 1e8]]);
        let v = effective_kernel_sc(&mom, 2.0, 1.0, 0, 1);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn effective_kernels_match_mc_oracle() {
        let c = [[0.8, 0.3], [0.3, 0.6]];
        let m = [0.25, -0.4];
        let mom = moments_2x2(m, c);
        let cmat = Matrix::from_rows(&[c[0].to_vec(), c[1].to_vec()]);

        let se = BaseKernel::se(1.4, 0.9).unwrap();
        let closed = effective_kernel_se(&mom, 1.4, 0.9, 0, 1);
        let (est, stderr) = mc_oracle_kernel(&se, &m, &cmat, 400_000, 7).unwrap();
        assert!(
            (closed - est).abs() < 3.0 * stderr,
            "SE {closed} vs {est} +- {stderr}"
        );

        let sc = BaseKernel::sc(1.4, 0.9).unwrap();
        let closed = effective_kernel_sc(&mom, 1.4, 0.9, 0, 1);
        let (est, stderr) = mc_oracle_kernel(&sc, &m, &cmat, 400_000, 8).unwrap();
        assert!(
            (closed - est).abs() < 3.0 * stderr,
            "SC {closed} vs {est} +- {stderr}"
        );
    }

    #[test]
    fn effective_kernel_agrees_with_general_lemma_route() {
        // second algebraic route: scale A by 1/l2^2 and use the n-dim lemma
        let c = [[0.7, 0.25], [0.25, 0.9]];
        let m = [0.6, -0.2];
        let mom = moments_2x2(m, c);
        let (s2, l2) = (1.7, 0.65);
        let direct = effective_kernel_se(&mom, s2, l2, 0, 1);
        let a = Matrix::from_rows(&[
            vec![1.0 / (l2 * l2), -1.0 / (l2 * l2)],
            vec![-1.0 / (l2 * l2), 1.0 / (l2 * l2)],
        ]);
        let cmat = Matrix::from_rows(&[c[0].to_vec(), c[1].to_vec()]);
        let lemma = s2 * expectation_exp_quadratic(&m, &cmat, &a).unwrap();
        assert!((direct - lemma).abs() < 1e-12, "{direct} vs {lemma}");
    }

    #[test]
    fn mc_oracle_degenerate_covariance_is_exact() {
        let kernel = BaseKernel::se(1.0, 1.0).unwrap();
        let (est, se) =
            mc_oracle_kernel(&kernel, &[0.0, 1.0], &Matrix::zeros(2, 2), 1_000, 3).unwrap();
        assert_eq!(se, 0.0);
        assert!((est - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn mc_oracle_deterministic() {
        let kernel = BaseKernel::se(1.0, 1.0).unwrap();
        let c = Matrix::identity(2);
        let a = mc_oracle_kernel(&kernel, &[0.0, 0.0], &c, 10_000, 5).unwrap();
        let b = mc_oracle_kernel(&kernel, &[0.0, 0.0], &c, 10_000, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reduced_inverse_identities() {
        assert!(reduced_inverse_identity_check(&Matrix::<f64>::identity(2)).unwrap());
        assert!(reduced_inverse_identity_check(&Matrix::<f64>::zeros(2, 2)).unwrap());
        let c = Matrix::from_rows(&[vec![1.3, 0.4], vec![0.4, 0.9]]);
        assert!(reduced_inverse_identity_check(&c).unwrap());
    }

    #[test]
    fn delta_sq_clamps_roundoff() {
        let eps = -1e-13;
        let mom = moments_2x2([0.0, 0.0], [[1.0, 1.0 - eps / 2.0], [1.0 - eps / 2.0, 1.0]]);
        assert!(mom.delta_sq(0, 1) >= 0.0);
        assert_eq!(mom.delta_sq(0, 0), 0.0);
        assert_eq!(mom.delta_sq(1, 1), 0.0);
    }

    #[test]
    fn grads_match_finite_differences() {
        let mom = moments_2x2([0.45, -0.3], [[0.9, 0.2], [0.2, 0.5]]);
        for family in [KernelFamily::SquaredExponential, KernelFamily::SquaredCosine] {
            let (s2, l2) = (1.2, 0.7);
            let kern = EffectiveKernel::new(BaseKernel::new(family, s2, l2).unwrap(), &mom);
            let g = kern.eval_with_grads(0, 1);
            let h = 1e-6;

            let kp = EffectiveKernel::new(
                BaseKernel::new(family, (s2.ln() + h).exp(), l2).unwrap(),
                &mom,
            );
            let km = EffectiveKernel::new(
                BaseKernel::new(family, (s2.ln() - h).exp(), l2).unwrap(),
                &mom,
            );
            let fd = (kp.eval(0, 1) - km.eval(0, 1)) / (2.0 * h);
            assert!((g.d_log_var - fd).abs() < 1e-8, "{family:?} d_log_var");

            let kp = EffectiveKernel::new(
                BaseKernel::new(family, s2, (l2.ln() + h).exp()).unwrap(),
                &mom,
            );
            let km = EffectiveKernel::new(
                BaseKernel::new(family, s2, (l2.ln() - h).exp()).unwrap(),
                &mom,
            );
            let fd = (kp.eval(0, 1) - km.eval(0, 1)) / (2.0 * h);
            assert!((g.d_log_len - fd).abs() < 1e-8, "{family:?} d_log_len");

            // delta2 and mean-diff pathways, perturbing the moments directly
            let base_d2 = mom.delta_sq(0, 1);
            let u = mom.mean_diff(0, 1);
            let eval_at = |d2: f64, u: f64| -> f64 {
                let c = Matrix::from_rows(&[vec![d2 / 2.0, 0.0], vec![0.0, d2 / 2.0]]);
                let m = ConditionalMoments::new(vec![u, 0.0], c).unwrap();
                EffectiveKernel::new(BaseKernel::new(family, s2, l2).unwrap(), &m).eval(0, 1)
            };
            let fd = (eval_at(base_d2 + h, u) - eval_at(base_d2 - h, u)) / (2.0 * h);
            assert!((g.d_delta_sq - fd).abs() < 1e-7, "{family:?} d_delta_sq");
            let fd = (eval_at(base_d2, u + h) - eval_at(base_d2, u - h)) / (2.0 * h);
            assert!((g.d_mean_diff - fd).abs() < 1e-7, "{family:?} d_mean_diff");
        }
    }
}
