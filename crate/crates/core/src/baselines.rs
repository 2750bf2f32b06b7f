//! Reference models: the linear autoregressive two-fidelity GP (AR1) and a
//! vanilla single-fidelity GP.
//!
//! AR1 models the precise function as f(x) = alpha * f1(x) + h(x) with
//! independent GPs f1 ~ GP(0, k) and h ~ GP(0, k_h), so the stacked
//! observation vector [y; y1] is jointly Gaussian with block covariance
//!
//! ```text
//! [ alpha^2 K_xx + Kh_xx   alpha K_x1 ]
//! [ alpha K_1x             K_11       ]
//! ```

use crate::data::FidelityDataset;
use crate::error::{GpError, Result};
use crate::gp::{posterior_predict_points, Prediction};
use crate::kernel::{BaseKernel, KernelFamily};
use crate::linalg::{cholesky_with_jitter, dot, Matrix};
use crate::num::{ln_2pi, Real};
use crate::rng::rng_from_seed;
use crate::train::{initial_points, run_restarts, TrainConfig};

use rand::Rng;

/// Parameters of the autoregressive two-fidelity model.
#[derive(Clone, Copy, Debug)]
pub struct Ar1Params<T> {
    /// Fidelity scale factor (unconstrained).
    pub alpha: T,
    /// Kernel of the low-fidelity GP f1.
    pub low: BaseKernel<T>,
    /// Kernel of the residual GP h.
    pub residual: BaseKernel<T>,
    /// Observation-noise variance on the low-fidelity level.
    pub noise_low: T,
    /// Observation-noise variance on the high-fidelity level.
    pub noise_high: T,
}

/// Noise-free joint Gram over the stacked (high, low) observation vector.
pub fn ar1_joint_gram<T: Real>(
    params: &Ar1Params<T>,
    x_high: &Matrix<T>,
    x_low: &Matrix<T>,
) -> Result<Matrix<T>> {
    if x_high.nrows() > 0 && x_low.nrows() > 0 && x_high.ncols() != x_low.ncols() {
        return Err(GpError::ShapeMismatch {
            expected: x_high.ncols(),
            got: x_low.ncols(),
        });
    }
    let n = x_high.nrows();
    let n1 = x_low.nrows();
    let a = params.alpha;
    let a2 = a * a;
    let k_xx = params.low.gram_sym(x_high)?;
    let kh_xx = params.residual.gram_sym(x_high)?;
    let k_x1 = params.low.gram(x_high, x_low)?;
    let k_11 = params.low.gram_sym(x_low)?;

    let mut g = Matrix::zeros(n + n1, n + n1);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = a2 * k_xx[(i, j)] + kh_xx[(i, j)];
        }
        for j in 0..n1 {
            let v = a * k_x1[(i, j)];
            g[(i, n + j)] = v;
            g[(n + j, i)] = v;
        }
    }
    for i in 0..n1 {
        for j in 0..n1 {
            g[(n + i, n + j)] = k_11[(i, j)];
        }
    }
    Ok(g)
}

/// Fitted AR1 model together with its stacked-evidence value.
#[derive(Clone, Debug)]
pub struct Ar1Fit<T> {
    pub params: Ar1Params<T>,
    pub lml: T,
}

/// Maximizes the joint stacked-observation evidence over
/// {alpha, both kernels, both noises} and predicts f at the query points.
///
/// With an empty low-fidelity level the stacked model degenerates to an
/// ordinary GP on the high-fidelity data with kernel alpha^2 k + k_h.
pub fn ar1_train_predict<T: Real>(
    data: &FidelityDataset<T>,
    query: &Matrix<T>,
    cfg: &TrainConfig<T>,
) -> Result<(Prediction<T>, Ar1Fit<T>)> {
    if data.num_levels() != 2 {
        return Err(GpError::InvalidConfig(format!(
            "AR1 requires exactly 2 fidelity levels, got {}",
            data.num_levels()
        )));
    }
    cfg.validate()?;
    let low = data.level(0);
    let high = data.level(1);
    if high.outputs.is_empty() {
        return Err(GpError::InvalidData("high-fidelity level is empty".into()));
    }

    let y_stacked: Vec<T> = high
        .outputs
        .iter()
        .chain(low.outputs.iter())
        .copied()
        .collect();

    // parameter vector: [alpha, log var_k, log len_k, log var_h, log len_h,
    //                    log free_noise_high, log free_noise_low]; the noise
    //                    variances are floored at the declared generation
    //                    noise of each level
    let floors = [
        high.noise_std * high.noise_std,
        low.noise_std * low.noise_std,
    ];
    let mut objective = |p: &[T]| -> Result<(T, Vec<T>)> {
        ar1_neg_lml_and_grad(p, floors, &high.inputs, &low.inputs, &y_stacked)
    };

    let inits = ar1_initial_points(cfg);
    let outcome = run_restarts(&mut objective, inits, cfg)?;
    let params = ar1_params_from_vec(&outcome.x, floors)?;
    let lml = -outcome.value;

    // prediction by joint-Gaussian conditioning of f(query) on [y; y1]
    let n = high.inputs.nrows();
    let n1 = low.inputs.nrows();
    let nq = query.nrows();
    let a = params.alpha;
    let a2 = a * a;

    let mut g = ar1_joint_gram(&params, &high.inputs, &low.inputs)?;
    for i in 0..n {
        g[(i, i)] = g[(i, i)] + params.noise_high;
    }
    for i in 0..n1 {
        g[(n + i, n + i)] = g[(n + i, n + i)] + params.noise_low;
    }
    let scale = g.mean_abs_diag();
    let (chol, _) = cholesky_with_jitter(&g, Some(scale))?;
    let alpha_vec = chol.solve_vec(&y_stacked);

    let k_qx = params.low.gram(query, &high.inputs)?;
    let kh_qx = params.residual.gram(query, &high.inputs)?;
    let k_q1 = params.low.gram(query, &low.inputs)?;
    let mut cross = Matrix::zeros(nq, n + n1);
    for i in 0..nq {
        for j in 0..n {
            cross[(i, j)] = a2 * k_qx[(i, j)] + kh_qx[(i, j)];
        }
        for j in 0..n1 {
            cross[(i, n + j)] = a * k_q1[(i, j)];
        }
    }
    let k_qq = params.low.gram_sym(query)?;
    let kh_qq = params.residual.gram_sym(query)?;
    let prior = k_qq.scale(a2).add(&kh_qq);

    let mean = cross.mul_vec(&alpha_vec);
    let v = chol.solve_mat(&cross.transpose());
    let mut cov = prior.sub(&cross.matmul(&v));
    cov.symmetrize();
    let variance = cov.diag().iter().map(|&x| x.max(T::zero())).collect();

    Ok((
        Prediction {
            mean,
            variance,
            covariance: Some(cov),
            lml,
        },
        Ar1Fit { params, lml },
    ))
}

fn ar1_params_from_vec<T: Real>(p: &[T], floors: [T; 2]) -> Result<Ar1Params<T>> {
    Ok(Ar1Params {
        alpha: p[0],
        low: BaseKernel::new(KernelFamily::SquaredExponential, p[1].exp(), p[2].exp())?,
        residual: BaseKernel::new(KernelFamily::SquaredExponential, p[3].exp(), p[4].exp())?,
        noise_high: floors[0] + p[5].exp(),
        noise_low: floors[1] + p[6].exp(),
    })
}

fn ar1_initial_points<T: Real>(cfg: &TrainConfig<T>) -> Vec<Vec<T>> {
    // reuse the kernel/noise ladder and prepend alpha: fixed start at 1,
    // random restarts uniform in [-2, 2]
    let base = initial_points(cfg, 2, 2, 7);
    let mut rng = rng_from_seed(cfg.seed);
    rng.set_stream(0xa1fa);
    base.into_iter()
        .enumerate()
        .map(|(i, p)| {
            let alpha = if i == 0 {
                T::one()
            } else {
                T::of(-2.0 + 4.0 * rng.gen::<f64>())
            };
            let mut v = vec![alpha];
            v.extend(p);
            v
        })
        .collect()
}

fn ar1_neg_lml_and_grad<T: Real>(
    p: &[T],
    floors: [T; 2],
    x_high: &Matrix<T>,
    x_low: &Matrix<T>,
    y: &[T],
) -> Result<(T, Vec<T>)> {
    let params = ar1_params_from_vec(p, floors)?;
    let n = x_high.nrows();
    let n1 = x_low.nrows();
    let total = n + n1;
    let a = params.alpha;
    let a2 = a * a;

    let mut k_xx = Matrix::zeros(n, n);
    let mut dk_xx = Matrix::zeros(n, n);
    let mut kh_xx = Matrix::zeros(n, n);
    let mut dkh_xx = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let (v, _, dl) = params.low.eval_with_grads(x_high.row(i), x_high.row(j));
            k_xx[(i, j)] = v;
            k_xx[(j, i)] = v;
            dk_xx[(i, j)] = dl;
            dk_xx[(j, i)] = dl;
            let (v, _, dl) = params
                .residual
                .eval_with_grads(x_high.row(i), x_high.row(j));
            kh_xx[(i, j)] = v;
            kh_xx[(j, i)] = v;
            dkh_xx[(i, j)] = dl;
            dkh_xx[(j, i)] = dl;
        }
    }
    let mut k_x1 = Matrix::zeros(n, n1);
    let mut dk_x1 = Matrix::zeros(n, n1);
    for i in 0..n {
        for j in 0..n1 {
            let (v, _, dl) = params.low.eval_with_grads(x_high.row(i), x_low.row(j));
            k_x1[(i, j)] = v;
            dk_x1[(i, j)] = dl;
        }
    }
    let mut k_11 = Matrix::zeros(n1, n1);
    let mut dk_11 = Matrix::zeros(n1, n1);
    for i in 0..n1 {
        for j in i..n1 {
            let (v, _, dl) = params.low.eval_with_grads(x_low.row(i), x_low.row(j));
            k_11[(i, j)] = v;
            k_11[(j, i)] = v;
            dk_11[(i, j)] = dl;
            dk_11[(j, i)] = dl;
        }
    }

    let assemble = |hh: &dyn Fn(usize, usize) -> T,
                    h1: &dyn Fn(usize, usize) -> T,
                    ll: &dyn Fn(usize, usize) -> T|
     -> Matrix<T> {
        let mut g = Matrix::zeros(total, total);
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] = hh(i, j);
            }
            for j in 0..n1 {
                let v = h1(i, j);
                g[(i, n + j)] = v;
                g[(n + j, i)] = v;
            }
        }
        for i in 0..n1 {
            for j in 0..n1 {
                g[(n + i, n + j)] = ll(i, j);
            }
        }
        g
    };

    let zero = |_i: usize, _j: usize| T::zero();
    let mut gy = assemble(
        &|i, j| a2 * k_xx[(i, j)] + kh_xx[(i, j)],
        &|i, j| a * k_x1[(i, j)],
        &|i, j| k_11[(i, j)],
    );
    for i in 0..n {
        gy[(i, i)] = gy[(i, i)] + params.noise_high;
    }
    for i in 0..n1 {
        gy[(n + i, n + i)] = gy[(n + i, n + i)] + params.noise_low;
    }

    let scale = gy.mean_abs_diag();
    let (chol, _) = cholesky_with_jitter(&gy, Some(scale))?;
    let alpha_vec = chol.solve_vec(y);
    let half = T::of(0.5);
    let lml = -half * dot(y, &alpha_vec)
        - half * chol.log_det()
        - half * T::of(total as f64) * ln_2pi::<T>();
    let ginv = chol.inverse();

    let grad_for = |dg: &Matrix<T>| -> T {
        let mut quad = T::zero();
        let mut tr = T::zero();
        for i in 0..total {
            for j in 0..total {
                quad = quad + alpha_vec[i] * dg[(i, j)] * alpha_vec[j];
                tr = tr + ginv[(i, j)] * dg[(j, i)];
            }
        }
        half * (quad - tr)
    };

    let two = T::of(2.0);
    let d_alpha = assemble(
        &|i, j| two * a * k_xx[(i, j)],
        &|i, j| k_x1[(i, j)],
        &zero,
    );
    let d_var_k = assemble(
        &|i, j| a2 * k_xx[(i, j)],
        &|i, j| a * k_x1[(i, j)],
        &|i, j| k_11[(i, j)],
    );
    let d_len_k = assemble(
        &|i, j| a2 * dk_xx[(i, j)],
        &|i, j| a * dk_x1[(i, j)],
        &|i, j| dk_11[(i, j)],
    );
    let d_var_h = assemble(&|i, j| kh_xx[(i, j)], &zero, &zero);
    let d_len_h = assemble(&|i, j| dkh_xx[(i, j)], &zero, &zero);

    let mut grads = vec![
        -grad_for(&d_alpha),
        -grad_for(&d_var_k),
        -grad_for(&d_len_k),
        -grad_for(&d_var_h),
        -grad_for(&d_len_h),
    ];
    // noise blocks: d G / d log(free noise) = free noise on the diagonal
    let mut g_nh = T::zero();
    for i in 0..n {
        g_nh = g_nh + alpha_vec[i] * alpha_vec[i] - ginv[(i, i)];
    }
    grads.push(-(half * p[5].exp() * g_nh));
    let mut g_nl = T::zero();
    for i in 0..n1 {
        g_nl = g_nl + alpha_vec[n + i] * alpha_vec[n + i] - ginv[(n + i, n + i)];
    }
    grads.push(-(half * p[6].exp() * g_nl));

    Ok((-lml, grads))
}

/// Fitted single-fidelity SE-kernel GP.
#[derive(Clone, Debug)]
pub struct VanillaFit<T> {
    pub kernel: BaseKernel<T>,
    pub noise_var: T,
    pub lml: T,
}

/// Ordinary SE-kernel GP trained on one set of observations, evaluated at
/// the query points. The learned noise variance is bounded below by
/// `noise_floor_var` (zero when the observation noise is unknown).
pub fn vanilla_gp<T: Real>(
    x: &Matrix<T>,
    y: &[T],
    noise_floor_var: T,
    query: &Matrix<T>,
    cfg: &TrainConfig<T>,
) -> Result<(Prediction<T>, VanillaFit<T>)> {
    cfg.validate()?;
    if y.is_empty() {
        return Err(GpError::InvalidData("training set is empty".into()));
    }
    let stage = crate::train::optimize_base_gp(
        KernelFamily::SquaredExponential,
        x,
        y,
        noise_floor_var,
        cfg,
        11,
    )?;
    let kernel = BaseKernel::se(stage.variance, stage.lengthscale)?;
    let (pred, _) = posterior_predict_points(&kernel, x, y, stage.noise_var, query)?;
    Ok((
        pred,
        VanillaFit {
            kernel,
            noise_var: stage.noise_var,
            lml: stage.lml,
        },
    ))
}
