//! Hyperparameter learning for the conditional multi-fidelity pipeline.
//!
//! Two routes are provided. Sequential training optimizes each layer's GP on
//! its own marginal likelihood, bottom up: the level-1 GP is fitted to the
//! low-fidelity data, its posterior moments feed the effective kernel, and
//! the exposed GP is then fitted to the high-fidelity data. Joint training
//! instead ascends the approximate evidence of the high-fidelity data with
//! respect to all hyperparameters at once, differentiating the effective
//! kernel through the conditional moments by the chain rule.
//!
//! Log-parameter layout used throughout:
//! `[log var_1, log len_1, ..., log var_L, log len_L, log noise_1, ..., log noise_L]`.

use rand::Rng;

use crate::composition::CompositionSpec;
use crate::data::FidelityDataset;
use crate::error::{GpError, Result};
use crate::gp::{posterior_predict, posterior_predict_points, Prediction};
use crate::kernel::{BaseKernel, KernelFamily};
use crate::linalg::{cholesky_with_jitter, dot, Matrix};
use crate::moment_matching::{ConditionalMoments, EffectiveKernel};
use crate::multilevel;
use crate::num::{ln_2pi, Real};
use crate::optim::{minimize, Method, OptimOptions, OptimOutcome};
use crate::rng::rng_from_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainMode {
    Sequential,
    Joint,
}

impl TrainMode {
    pub fn code(self) -> &'static str {
        match self {
            TrainMode::Sequential => "sequential",
            TrainMode::Joint => "joint",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    QuasiNewton,
    GradientDescent,
}

impl OptimizerKind {
    fn method(self) -> Method {
        match self {
            OptimizerKind::QuasiNewton => Method::QuasiNewton,
            OptimizerKind::GradientDescent => Method::GradientDescent,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            OptimizerKind::QuasiNewton => "quasi-newton",
            OptimizerKind::GradientDescent => "gradient-descent",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitStrategy {
    /// Variances and length scales start at 1, noise variances at 1e-2.
    Fixed,
    /// Kernel parameters log-uniform in [1e-2, 1e1], noise variances
    /// log-uniform in [1e-6, 1e-1]. The first restart always uses the fixed
    /// point.
    LogUniformRandom,
}

#[derive(Clone, Copy, Debug)]
pub struct TrainConfig<T> {
    pub mode: TrainMode,
    pub optimizer: OptimizerKind,
    pub max_iters: usize,
    pub restarts: usize,
    pub init_strategy: InitStrategy,
    pub convergence_tol: T,
    pub seed: u64,
}

impl<T: Real> Default for TrainConfig<T> {
    fn default() -> Self {
        TrainConfig {
            mode: TrainMode::Sequential,
            optimizer: OptimizerKind::QuasiNewton,
            max_iters: 200,
            restarts: 5,
            init_strategy: InitStrategy::LogUniformRandom,
            convergence_tol: T::of(1e-5),
            seed: 0,
        }
    }
}

impl<T: Real> TrainConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(GpError::InvalidConfig("max_iters must be >= 1".into()));
        }
        if self.restarts < 1 {
            return Err(GpError::InvalidConfig("restarts must be >= 1".into()));
        }
        if !(self.convergence_tol > T::zero()) {
            return Err(GpError::InvalidConfig(
                "convergence_tol must be > 0".into(),
            ));
        }
        Ok(())
    }

    fn optim_options(&self) -> OptimOptions<T> {
        OptimOptions {
            max_iters: self.max_iters,
            grad_tol: self.convergence_tol,
        }
    }
}

/// Signal variance and length scale of one layer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerParams<T> {
    pub variance: T,
    pub lengthscale: T,
}

/// All hyperparameters of an L-layer pipeline: per-layer kernel parameters
/// (innermost first) and one observation-noise variance per fidelity level
/// (lowest first).
#[derive(Clone, Debug, PartialEq)]
pub struct Hyperparams<T> {
    pub layers: Vec<LayerParams<T>>,
    pub noise_vars: Vec<T>,
}

impl<T: Real> Hyperparams<T> {
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn to_log_params(&self) -> Vec<T> {
        let mut p = Vec::with_capacity(3 * self.layers.len());
        for l in &self.layers {
            p.push(l.variance.ln());
            p.push(l.lengthscale.ln());
        }
        for &n in &self.noise_vars {
            p.push(n.ln());
        }
        p
    }

    pub fn from_log_params(num_layers: usize, p: &[T]) -> Result<Self> {
        if p.len() != 3 * num_layers {
            return Err(GpError::ShapeMismatch {
                expected: 3 * num_layers,
                got: p.len(),
            });
        }
        let layers = (0..num_layers)
            .map(|i| LayerParams {
                variance: p[2 * i].exp(),
                lengthscale: p[2 * i + 1].exp(),
            })
            .collect();
        let noise_vars = (0..num_layers).map(|i| p[2 * num_layers + i].exp()).collect();
        Ok(Hyperparams { layers, noise_vars })
    }

    pub fn kernel(&self, layer: usize, family: KernelFamily) -> Result<BaseKernel<T>> {
        BaseKernel::new(family, self.layers[layer].variance, self.layers[layer].lengthscale)
    }
}

#[derive(Clone, Debug)]
pub struct TrainResult<T> {
    pub hyperparams: Hyperparams<T>,
    /// Final log marginal likelihood of the exposed GP (the approximate
    /// evidence of the highest-fidelity data).
    pub lml: T,
    /// LML after each accepted optimizer step of the winning restart of the
    /// final stage (non-decreasing).
    pub trace: Vec<T>,
    pub mode: TrainMode,
    pub spec: CompositionSpec,
}

/// Entry point: dispatches on mode and composition depth.
pub fn train<T: Real>(
    data: &FidelityDataset<T>,
    spec: &CompositionSpec,
    cfg: &TrainConfig<T>,
) -> Result<TrainResult<T>> {
    match cfg.mode {
        TrainMode::Sequential => train_sequential(data, spec, cfg),
        TrainMode::Joint => train_joint(data, spec, cfg),
    }
}

/// Sequential pipeline: optimize level 1 on its own data, extract moments,
/// then optimize each outer layer on the next fidelity level.
pub fn train_sequential<T: Real>(
    data: &FidelityDataset<T>,
    spec: &CompositionSpec,
    cfg: &TrainConfig<T>,
) -> Result<TrainResult<T>> {
    validate_training_inputs(data, spec, cfg)?;
    match spec.depth() {
        2 => train_sequential_two_level(data, spec, cfg),
        3 => multilevel::train_multilevel(data, spec, cfg),
        d => Err(GpError::InvalidConfig(format!("unsupported depth {d}"))),
    }
}

pub(crate) fn validate_training_inputs<T: Real>(
    data: &FidelityDataset<T>,
    spec: &CompositionSpec,
    cfg: &TrainConfig<T>,
) -> Result<()> {
    cfg.validate()?;
    spec.validate_for(data)?;
    for (i, level) in data.levels().iter().enumerate() {
        if level.outputs.is_empty() {
            return Err(GpError::InvalidData(format!(
                "fidelity level {} is empty",
                i + 1
            )));
        }
    }
    Ok(())
}

fn train_sequential_two_level<T: Real>(
    data: &FidelityDataset<T>,
    spec: &CompositionSpec,
    cfg: &TrainConfig<T>,
) -> Result<TrainResult<T>> {
    let low = data.level(0);
    let high = data.level(1);

    let stage1 = optimize_base_gp(
        spec.family(0),
        &low.inputs,
        &low.outputs,
        low.noise_std * low.noise_std,
        cfg,
        0,
    )?;
    let kernel1 = BaseKernel::new(spec.family(0), stage1.variance, stage1.lengthscale)?;
    let (_, moments) = posterior_predict_points(
        &kernel1,
        &low.inputs,
        &low.outputs,
        stage1.noise_var,
        &high.inputs,
    )?;

    let idx: Vec<usize> = (0..high.inputs.nrows()).collect();
    let stage2 = optimize_effective_gp(
        spec.family(1),
        &moments,
        &idx,
        &high.outputs,
        high.noise_std * high.noise_std,
        cfg,
        1,
    )?;

    Ok(TrainResult {
        hyperparams: Hyperparams {
            layers: vec![
                LayerParams {
                    variance: stage1.variance,
                    lengthscale: stage1.lengthscale,
                },
                LayerParams {
                    variance: stage2.variance,
                    lengthscale: stage2.lengthscale,
                },
            ],
            noise_vars: vec![stage1.noise_var, stage2.noise_var],
        },
        lml: stage2.lml,
        trace: stage2.trace,
        mode: TrainMode::Sequential,
        spec: spec.clone(),
    })
}

/// Gradient ascent on the approximate evidence of the high-fidelity data
/// with respect to all hyperparameters simultaneously (two-level only).
pub fn train_joint<T: Real>(
    data: &FidelityDataset<T>,
    spec: &CompositionSpec,
    cfg: &TrainConfig<T>,
) -> Result<TrainResult<T>> {
    validate_training_inputs(data, spec, cfg)?;
    if spec.depth() != 2 {
        return Err(GpError::InvalidConfig(
            "joint training supports two fidelity levels; use sequential for three".into(),
        ));
    }

    let floors = [
        data.level(0).noise_std * data.level(0).noise_std,
        data.level(1).noise_std * data.level(1).noise_std,
    ];
    // the optimizer's trailing parameters are the logs of the free noise
    // above each level's floor
    let with_floors = |p: &[T]| -> Result<(Hyperparams<T>, [T; 2], [T; 2])> {
        let mut hp = Hyperparams::from_log_params(2, p)?;
        let free = [hp.noise_vars[0], hp.noise_vars[1]];
        hp.noise_vars[0] = floors[0] + free[0];
        hp.noise_vars[1] = floors[1] + free[1];
        let total = [hp.noise_vars[0], hp.noise_vars[1]];
        Ok((hp, free, total))
    };
    let mut objective = |p: &[T]| -> Result<(T, Vec<T>)> {
        let (hp, free, total) = with_floors(p)?;
        let actual = hp.to_log_params();
        let (lml, mut grad) = joint_lml_and_grad(data, spec, &actual)?;
        // chain rule from d/d log(total noise) to d/d log(free noise)
        grad[4] = grad[4] * free[0] / total[0];
        grad[5] = grad[5] * free[1] / total[1];
        Ok((-lml, grad.into_iter().map(|g| -g).collect()))
    };

    let inits = initial_points(cfg, 2, 2, 10);
    let outcome = run_restarts(&mut objective, inits, cfg)?;
    let (hyperparams, _, _) = with_floors(&outcome.x)?;
    Ok(TrainResult {
        lml: -outcome.value,
        trace: outcome.trace.iter().map(|&v| -v).collect(),
        hyperparams,
        mode: TrainMode::Joint,
        spec: spec.clone(),
    })
}

/// Gradient of the approximate evidence with respect to the log-parameter
/// vector `[log var_1, log len_1, log var_2, log len_2, log noise_1,
/// log noise_2]`, evaluated at `hp`.
pub fn lml_gradient_joint<T: Real>(
    data: &FidelityDataset<T>,
    hp: &Hyperparams<T>,
    spec: &CompositionSpec,
) -> Result<Vec<T>> {
    let p = hp.to_log_params();
    let (_, grad) = joint_lml_and_grad(data, spec, &p)?;
    Ok(grad)
}

/// Approximate evidence at the given hyperparameters: rebuilds the moment
/// chain and evaluates log N(y | 0, K_eff + noise I) on the
/// highest-fidelity data.
pub fn evaluate_lml<T: Real>(
    data: &FidelityDataset<T>,
    spec: &CompositionSpec,
    hp: &Hyperparams<T>,
) -> Result<T> {
    let chain = build_moment_chain(data, spec, hp, None)?;
    let top = data.highest();
    let idx: Vec<usize> = (0..top.outputs.len()).collect();
    let outer = hp.kernel(spec.depth() - 1, spec.family(spec.depth() - 1))?;
    let keff = EffectiveKernel::new(outer, chain.last().expect("non-empty chain"));
    let k = keff.gram_sym_over(&idx);
    crate::gp::log_marginal_likelihood(&k, &top.outputs, *hp.noise_vars.last().unwrap())
}

/// Posterior prediction at `query` under trained hyperparameters,
/// recomputing the moment chain over the union of training and query
/// inputs.
pub fn predict<T: Real>(
    trained: &TrainResult<T>,
    data: &FidelityDataset<T>,
    query: &Matrix<T>,
) -> Result<Prediction<T>> {
    let spec = &trained.spec;
    spec.validate_for(data)?;
    if query.ncols() != data.dim() {
        return Err(GpError::ShapeMismatch {
            expected: data.dim(),
            got: query.ncols(),
        });
    }
    let hp = &trained.hyperparams;
    let chain = build_moment_chain(data, spec, hp, Some(query))?;
    let moments = chain.last().expect("non-empty chain");

    let top = data.highest();
    let n = top.outputs.len();
    let outer = hp.kernel(spec.depth() - 1, spec.family(spec.depth() - 1))?;
    let keff = EffectiveKernel::new(outer, moments);
    let train_idx: Vec<usize> = (0..n).collect();
    let query_idx: Vec<usize> = (n..n + query.nrows()).collect();
    let (pred, _) = posterior_predict(
        |i, j| keff.eval(i, j),
        &train_idx,
        &top.outputs,
        *hp.noise_vars.last().unwrap(),
        &query_idx,
    )?;
    Ok(pred)
}

/// Conditional moments of each intermediate layer over the union of all
/// downstream training inputs (and query inputs, when given). The returned
/// chain has one entry per layer boundary; the last entry indexes the
/// highest-fidelity training inputs first, then the query points.
pub(crate) fn build_moment_chain<T: Real>(
    data: &FidelityDataset<T>,
    spec: &CompositionSpec,
    hp: &Hyperparams<T>,
    query: Option<&Matrix<T>>,
) -> Result<Vec<ConditionalMoments<T>>> {
    let depth = spec.depth();
    let kernel1 = hp.kernel(0, spec.family(0))?;
    let low = data.level(0);

    // union of every downstream level's inputs, highest last, query at the end
    let mut downstream: Vec<&Matrix<T>> = (1..depth).map(|l| &data.level(l).inputs).collect();
    if let Some(q) = query {
        downstream.push(q);
    }
    let union = vstack(&downstream);

    let (_, mut moments) = posterior_predict_points(
        &kernel1,
        &low.inputs,
        &low.outputs,
        hp.noise_vars[0],
        &union,
    )?;

    let mut chain = Vec::with_capacity(depth - 1);
    for layer in 1..depth - 1 {
        // regress this level's data in warped space and push the posterior
        // one layer up; its training inputs sit first in the current union
        let level = data.level(layer);
        let n = level.outputs.len();
        let outer = hp.kernel(layer, spec.family(layer))?;
        let keff = EffectiveKernel::new(outer, &moments);
        let train_idx: Vec<usize> = (0..n).collect();
        let rest_idx: Vec<usize> = (n..moments.len()).collect();
        let (_, next) = posterior_predict(
            |i, j| keff.eval(i, j),
            &train_idx,
            &level.outputs,
            hp.noise_vars[layer],
            &rest_idx,
        )?;
        chain.push(moments);
        moments = next;
    }
    chain.push(moments);
    Ok(chain)
}

pub(crate) fn vstack<T: Real>(blocks: &[&Matrix<T>]) -> Matrix<T> {
    let cols = blocks.iter().map(|b| b.ncols()).max().unwrap_or(1);
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        for i in 0..b.nrows() {
            out.row_mut(r).copy_from_slice(b.row(i));
            r += 1;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// stage optimizers

/// A single GP fitted by marginal-likelihood maximization.
#[derive(Clone, Copy, Debug)]
pub struct SingleGpFit<T> {
    pub kernel: BaseKernel<T>,
    pub noise_var: T,
    pub lml: T,
}

/// Fits one base-kernel GP to (x, y): the level-1 step of the pipeline,
/// also usable on its own. The learned observation-noise variance is
/// bounded below by `noise_floor_var` (pass zero when the generation noise
/// is unknown).
pub fn fit_single_gp<T: Real>(
    family: KernelFamily,
    x: &Matrix<T>,
    y: &[T],
    noise_floor_var: T,
    cfg: &TrainConfig<T>,
) -> Result<SingleGpFit<T>> {
    cfg.validate()?;
    if y.is_empty() {
        return Err(GpError::InvalidData("training set is empty".into()));
    }
    let stage = optimize_base_gp(family, x, y, noise_floor_var, cfg, 0)?;
    Ok(SingleGpFit {
        kernel: BaseKernel::new(family, stage.variance, stage.lengthscale)?,
        noise_var: stage.noise_var,
        lml: stage.lml,
    })
}

pub(crate) struct StageOutcome<T> {
    pub variance: T,
    pub lengthscale: T,
    pub noise_var: T,
    pub lml: T,
    pub trace: Vec<T>,
}

/// Maximizes the marginal likelihood of a base-kernel GP over
/// (variance, lengthscale, noise).
pub(crate) fn optimize_base_gp<T: Real>(
    family: KernelFamily,
    x: &Matrix<T>,
    y: &[T],
    noise_floor_var: T,
    cfg: &TrainConfig<T>,
    stage_stream: u64,
) -> Result<StageOutcome<T>> {
    let n = y.len();
    let mut objective = |p: &[T]| -> Result<(T, Vec<T>)> {
        let kernel = BaseKernel::new(family, p[0].exp(), p[1].exp())?;
        let free = p[2].exp();
        let noise = noise_floor_var + free;
        let mut k = Matrix::zeros(n, n);
        let mut dk_len = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let (v, _, dl) = kernel.eval_with_grads(x.row(i), x.row(j));
                k[(i, j)] = v;
                k[(j, i)] = v;
                dk_len[(i, j)] = dl;
                dk_len[(j, i)] = dl;
            }
        }
        let (neg, grads) = neg_lml_and_grads(&k, &[&k, &dk_len], y, noise, free)?;
        Ok((neg, grads))
    };
    let inits = initial_points(cfg, 1, 1, stage_stream);
    let outcome = run_restarts(&mut objective, inits, cfg)?;
    Ok(StageOutcome {
        variance: outcome.x[0].exp(),
        lengthscale: outcome.x[1].exp(),
        noise_var: noise_floor_var + outcome.x[2].exp(),
        lml: -outcome.value,
        trace: outcome.trace.iter().map(|&v| -v).collect(),
    })
}

/// Maximizes the marginal likelihood of an effective-kernel GP over
/// (outer variance, outer lengthscale, noise), with the moments held fixed.
pub(crate) fn optimize_effective_gp<T: Real>(
    family: KernelFamily,
    moments: &ConditionalMoments<T>,
    train_idx: &[usize],
    y: &[T],
    noise_floor_var: T,
    cfg: &TrainConfig<T>,
    stage_stream: u64,
) -> Result<StageOutcome<T>> {
    let n = train_idx.len();
    let mut objective = |p: &[T]| -> Result<(T, Vec<T>)> {
        let outer = BaseKernel::new(family, p[0].exp(), p[1].exp())?;
        let keff = EffectiveKernel::new(outer, moments);
        let free = p[2].exp();
        let noise = noise_floor_var + free;
        let mut k = Matrix::zeros(n, n);
        let mut dk_len = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let g = keff.eval_with_grads(train_idx[i], train_idx[j]);
                k[(i, j)] = g.value;
                k[(j, i)] = g.value;
                dk_len[(i, j)] = g.d_log_len;
                dk_len[(j, i)] = g.d_log_len;
            }
        }
        neg_lml_and_grads(&k, &[&k, &dk_len], y, noise, free)
    };
    let inits = initial_points(cfg, 1, 1, stage_stream);
    let outcome = run_restarts(&mut objective, inits, cfg)?;
    Ok(StageOutcome {
        variance: outcome.x[0].exp(),
        lengthscale: outcome.x[1].exp(),
        noise_var: noise_floor_var + outcome.x[2].exp(),
        lml: -outcome.value,
        trace: outcome.trace.iter().map(|&v| -v).collect(),
    })
}

/// Negative LML and its gradient for a GP with Gram `k`, kernel-parameter
/// derivative matrices `dk` (one per log-parameter, ordered first), and a
/// trailing log-noise parameter.
/// `noise` is the effective observation-noise variance entering K_y;
/// `dnoise` its derivative with respect to the optimizer's trailing noise
/// parameter (equal to `noise` for plain log-noise, or to the free part
/// when the noise carries an additive floor).
fn neg_lml_and_grads<T: Real>(
    k: &Matrix<T>,
    dk: &[&Matrix<T>],
    y: &[T],
    noise: T,
    dnoise: T,
) -> Result<(T, Vec<T>)> {
    let n = y.len();
    let scale = k.mean_abs_diag();
    let mut ky = k.clone();
    ky.add_diag(noise);
    let (chol, _) = cholesky_with_jitter(&ky, Some(scale))?;
    let alpha = chol.solve_vec(y);
    let half = T::of(0.5);
    let lml = -half * dot(y, &alpha)
        - half * chol.log_det()
        - half * T::of(n as f64) * ln_2pi::<T>();

    let kinv = chol.inverse();
    let mut grads = Vec::with_capacity(dk.len() + 1);
    for d in dk {
        grads.push(-lml_grad_term(&alpha, &kinv, d));
    }
    // d K_y / d theta_noise = dnoise * I
    let alpha_sq = dot(&alpha, &alpha);
    let trace = (0..n).fold(T::zero(), |acc, i| acc + kinv[(i, i)]);
    grads.push(-(half * dnoise * (alpha_sq - trace)));
    Ok((-lml, grads))
}

/// 1/2 (alpha' dK alpha - tr(K^-1 dK))
fn lml_grad_term<T: Real>(alpha: &[T], kinv: &Matrix<T>, dk: &Matrix<T>) -> T {
    let n = alpha.len();
    let mut quad = T::zero();
    let mut tr = T::zero();
    for i in 0..n {
        for j in 0..n {
            quad = quad + alpha[i] * dk[(i, j)] * alpha[j];
            tr = tr + kinv[(i, j)] * dk[(j, i)];
        }
    }
    T::of(0.5) * (quad - tr)
}

// ---------------------------------------------------------------------------
// joint objective

/// LML of the approximate evidence and its gradient with respect to all six
/// log-parameters of a two-level pipeline.
fn joint_lml_and_grad<T: Real>(
    data: &FidelityDataset<T>,
    spec: &CompositionSpec,
    p: &[T],
) -> Result<(T, Vec<T>)> {
    let hp = Hyperparams::from_log_params(2, p)?;
    let low = data.level(0);
    let high = data.level(1);
    let n1 = low.outputs.len();
    let n = high.outputs.len();

    let kernel1 = hp.kernel(0, spec.family(0))?;
    let noise1 = hp.noise_vars[0];

    // level-1 Gram blocks and their log-parameter derivatives
    let mut k11 = Matrix::zeros(n1, n1);
    let mut dk11_len = Matrix::zeros(n1, n1);
    for i in 0..n1 {
        for j in i..n1 {
            let (v, _, dl) = kernel1.eval_with_grads(low.inputs.row(i), low.inputs.row(j));
            k11[(i, j)] = v;
            k11[(j, i)] = v;
            dk11_len[(i, j)] = dl;
            dk11_len[(j, i)] = dl;
        }
    }
    let mut ku1 = Matrix::zeros(n, n1);
    let mut dku1_len = Matrix::zeros(n, n1);
    for i in 0..n {
        for j in 0..n1 {
            let (v, _, dl) = kernel1.eval_with_grads(high.inputs.row(i), low.inputs.row(j));
            ku1[(i, j)] = v;
            dku1_len[(i, j)] = dl;
        }
    }
    let mut kuu = Matrix::zeros(n, n);
    let mut dkuu_len = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let (v, _, dl) = kernel1.eval_with_grads(high.inputs.row(i), high.inputs.row(j));
            kuu[(i, j)] = v;
            kuu[(j, i)] = v;
            dkuu_len[(i, j)] = dl;
            dkuu_len[(j, i)] = dl;
        }
    }

    let scale1 = k11.mean_abs_diag();
    let mut k11_y = k11.clone();
    k11_y.add_diag(noise1);
    let (chol1, _) = cholesky_with_jitter(&k11_y, Some(scale1))?;
    let alpha1 = chol1.solve_vec(&low.outputs);

    // moments at the high-fidelity inputs
    let m = ku1.mul_vec(&alpha1);
    let b = chol1.solve_mat(&ku1.transpose()); // N1 x N
    let mut cov = kuu.sub(&ku1.matmul(&b));
    cov.symmetrize();
    let moments = ConditionalMoments::new(m.clone(), cov)?;

    // derivatives of (m, C) with respect to the three level-1 log-parameters:
    // d m = dKu1 a1 - B' dK11y a1
    // d C = dKuu - dKu1 B - (dKu1 B)' + B' dK11y B
    let zeros_u1 = Matrix::zeros(n, n1);
    let zeros_uu = Matrix::zeros(n, n);
    let noise1_eye = {
        let mut e = Matrix::zeros(n1, n1);
        e.add_diag(noise1);
        e
    };
    let level1_param_blocks: [(&Matrix<T>, &Matrix<T>, &Matrix<T>); 3] = [
        (&k11, &ku1, &kuu),                  // d / d log var1 (kernel scales linearly)
        (&dk11_len, &dku1_len, &dkuu_len),   // d / d log len1
        (&noise1_eye, &zeros_u1, &zeros_uu), // d / d log noise1
    ];
    let mut dm_list: Vec<Vec<T>> = Vec::with_capacity(3);
    let mut dc_list: Vec<Matrix<T>> = Vec::with_capacity(3);
    for (dk11, dku1, dkuu) in level1_param_blocks {
        let w = dk11.mul_vec(&alpha1);
        let bw = b.transpose().mul_vec(&w);
        let dm: Vec<T> = dku1
            .mul_vec(&alpha1)
            .iter()
            .zip(&bw)
            .map(|(&a, &c)| a - c)
            .collect();
        let du_b = dku1.matmul(&b);
        let mut dc = dkuu.sub(&du_b).sub(&du_b.transpose());
        let btdb = b.transpose().matmul(&dk11.matmul(&b));
        dc = dc.add(&btdb);
        dc.symmetrize();
        dm_list.push(dm);
        dc_list.push(dc);
    }

    // effective Gram over the high-fidelity inputs and all six derivatives
    let outer = hp.kernel(1, spec.family(1))?;
    let keff = EffectiveKernel::new(outer, &moments);
    let noise2 = hp.noise_vars[1];

    let mut k = Matrix::zeros(n, n);
    let mut dk_var2 = Matrix::zeros(n, n);
    let mut dk_len2 = Matrix::zeros(n, n);
    let mut dk_level1 = [
        Matrix::zeros(n, n),
        Matrix::zeros(n, n),
        Matrix::zeros(n, n),
    ];
    for i in 0..n {
        for j in i..n {
            let g = keff.eval_with_grads(i, j);
            k[(i, j)] = g.value;
            k[(j, i)] = g.value;
            dk_var2[(i, j)] = g.d_log_var;
            dk_var2[(j, i)] = g.d_log_var;
            dk_len2[(i, j)] = g.d_log_len;
            dk_len2[(j, i)] = g.d_log_len;
            for (t, (dm, dc)) in dm_list.iter().zip(&dc_list).enumerate() {
                let dd2 = dc[(i, i)] + dc[(j, j)] - dc[(i, j)] - dc[(j, i)];
                let du = dm[i] - dm[j];
                let v = g.d_delta_sq * dd2 + g.d_mean_diff * du;
                dk_level1[t][(i, j)] = v;
                dk_level1[t][(j, i)] = v;
            }
        }
    }

    let scale = k.mean_abs_diag();
    let mut ky = k.clone();
    ky.add_diag(noise2);
    let (chol, _) = cholesky_with_jitter(&ky, Some(scale))?;
    let alpha = chol.solve_vec(&high.outputs);
    let half = T::of(0.5);
    let lml = -half * dot(&high.outputs, &alpha)
        - half * chol.log_det()
        - half * T::of(n as f64) * ln_2pi::<T>();
    let kinv = chol.inverse();

    let g_var1 = lml_grad_term(&alpha, &kinv, &dk_level1[0]);
    let g_len1 = lml_grad_term(&alpha, &kinv, &dk_level1[1]);
    let g_noise1 = lml_grad_term(&alpha, &kinv, &dk_level1[2]);
    let g_var2 = lml_grad_term(&alpha, &kinv, &dk_var2);
    let g_len2 = lml_grad_term(&alpha, &kinv, &dk_len2);
    let alpha_sq = dot(&alpha, &alpha);
    let trace = (0..n).fold(T::zero(), |acc, i| acc + kinv[(i, i)]);
    let g_noise2 = half * noise2 * (alpha_sq - trace);

    Ok((lml, vec![g_var1, g_len1, g_var2, g_len2, g_noise1, g_noise2]))
}

/// Effective-kernel derivative against level-1 parameters assembled from
/// precomputed moment derivatives; exposed for the chain-rule ablation
/// tests.
#[cfg(test)]
pub(crate) fn keff_level1_derivative<T: Real>(
    keff: &EffectiveKernel<'_, T>,
    dm: &[T],
    dc: &Matrix<T>,
    i: usize,
    j: usize,
) -> T {
    let g = keff.eval_with_grads(i, j);
    let dd2 = dc[(i, i)] + dc[(j, j)] - dc[(i, j)] - dc[(j, i)];
    let du = dm[i] - dm[j];
    g.d_delta_sq * dd2 + g.d_mean_diff * du
}

// ---------------------------------------------------------------------------
// restarts

/// Initial log-parameter vectors: the fixed point first, then random draws.
/// `kernel_layers` counts (variance, lengthscale) pairs; `noise_count` the
/// trailing noise parameters.
///
pub(crate) fn initial_points<T: Real>(
    cfg: &TrainConfig<T>,
    kernel_layers: usize,
    noise_count: usize,
    stage_stream: u64,
) -> Vec<Vec<T>> {
    let fixed: Vec<T> = (0..2 * kernel_layers)
        .map(|_| T::zero())
        .chain((0..noise_count).map(|_| T::of(1e-2f64.ln())))
        .collect();
    match cfg.init_strategy {
        InitStrategy::Fixed => vec![fixed; 1],
        InitStrategy::LogUniformRandom => {
            let mut rng = rng_from_seed(cfg.seed);
            rng.set_stream(0x5eed_0000 + stage_stream);
            let mut inits = vec![fixed];
            let (k_lo, k_hi) = ((1e-2f64).ln(), (1e1f64).ln());
            let (n_lo, n_hi) = ((1e-6f64).ln(), (1e-1f64).ln());
            for _ in 1..cfg.restarts {
                let mut p = Vec::with_capacity(2 * kernel_layers + noise_count);
                for _ in 0..2 * kernel_layers {
                    p.push(T::of(k_lo + (k_hi - k_lo) * rng.gen::<f64>()));
                }
                for _ in 0..noise_count {
                    p.push(T::of(n_lo + (n_hi - n_lo) * rng.gen::<f64>()));
                }
                inits.push(p);
            }
            inits
        }
    }
}

/// Runs the optimizer from every initial point and keeps the best final
/// value. Restarts whose start point cannot be evaluated are skipped; if
/// every restart fails the last error propagates.
pub(crate) fn run_restarts<T: Real, F>(
    objective: &mut F,
    inits: Vec<Vec<T>>,
    cfg: &TrainConfig<T>,
) -> Result<OptimOutcome<T>>
where
    F: FnMut(&[T]) -> Result<(T, Vec<T>)>,
{
    let mut best: Option<OptimOutcome<T>> = None;
    let mut last_err = None;
    for x0 in inits {
        match minimize(cfg.optimizer.method(), objective, &x0, cfg.optim_options()) {
            Ok(out) => {
                if best.as_ref().is_none_or(|b| out.value < b.value) {
                    best = Some(out);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(GpError::SingularMatrix))
}
