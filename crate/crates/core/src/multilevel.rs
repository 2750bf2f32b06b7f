//! Three-fidelity recursion: the two-layer pipeline applied twice.
//!
//! Stage 1 fits the level-1 GP to the lowest-fidelity data and evaluates its
//! posterior moments at the union of all downstream inputs. Stage 2 fits an
//! effective-kernel GP to the mid-fidelity data and pushes *its* posterior
//! moments one layer up. Stage 3 fits the outermost effective-kernel GP to
//! the high-fidelity data. Sequential only; joint gradients stop at two
//! layers.

use crate::composition::CompositionSpec;
use crate::data::FidelityDataset;
use crate::error::{GpError, Result};
use crate::gp::{posterior_predict, posterior_predict_points};
use crate::kernel::BaseKernel;
use crate::moment_matching::EffectiveKernel;
use crate::num::Real;
use crate::train::{
    optimize_base_gp, optimize_effective_gp, validate_training_inputs, vstack, Hyperparams,
    LayerParams, TrainConfig, TrainMode, TrainResult,
};

/// Recursive sequential training over exactly three fidelity levels.
pub fn train_multilevel<T: Real>(
    data: &FidelityDataset<T>,
    spec: &CompositionSpec,
    cfg: &TrainConfig<T>,
) -> Result<TrainResult<T>> {
    validate_training_inputs(data, spec, cfg)?;
    if spec.depth() != 3 {
        return Err(GpError::InvalidConfig(format!(
            "train_multilevel requires depth 3, got {}",
            spec.depth()
        )));
    }
    let low = data.level(0);
    let mid = data.level(1);
    let high = data.level(2);
    let n_mid = mid.outputs.len();
    let n_high = high.outputs.len();

    // stage 1: level-1 GP on the lowest-fidelity data
    let stage1 = optimize_base_gp(
        spec.family(0),
        &low.inputs,
        &low.outputs,
        low.noise_std * low.noise_std,
        cfg,
        0,
    )?;
    let kernel1 = BaseKernel::new(spec.family(0), stage1.variance, stage1.lengthscale)?;
    let union = vstack(&[&mid.inputs, &high.inputs]);
    let (_, moments1) =
        posterior_predict_points(&kernel1, &low.inputs, &low.outputs, stage1.noise_var, &union)?;

    // stage 2: effective-kernel GP on the mid-fidelity data
    let mid_idx: Vec<usize> = (0..n_mid).collect();
    let stage2 = optimize_effective_gp(
        spec.family(1),
        &moments1,
        &mid_idx,
        &mid.outputs,
        mid.noise_std * mid.noise_std,
        cfg,
        1,
    )?;
    let kernel2 = BaseKernel::new(spec.family(1), stage2.variance, stage2.lengthscale)?;
    let keff1 = EffectiveKernel::new(kernel2, &moments1);
    let high_idx: Vec<usize> = (n_mid..n_mid + n_high).collect();
    let (_, moments2) = posterior_predict(
        |i, j| keff1.eval(i, j),
        &mid_idx,
        &mid.outputs,
        stage2.noise_var,
        &high_idx,
    )?;

    // stage 3: outermost effective-kernel GP on the high-fidelity data
    let top_idx: Vec<usize> = (0..n_high).collect();
    let stage3 = optimize_effective_gp(
        spec.family(2),
        &moments2,
        &top_idx,
        &high.outputs,
        high.noise_std * high.noise_std,
        cfg,
        2,
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
                LayerParams {
                    variance: stage3.variance,
                    lengthscale: stage3.lengthscale,
                },
            ],
            noise_vars: vec![stage1.noise_var, stage2.noise_var, stage3.noise_var],
        },
        lml: stage3.lml,
        trace: stage3.trace,
        mode: TrainMode::Sequential,
        spec: spec.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_branin, FidelityLevel};
    use crate::train::predict;

    fn col(values: &[f64]) -> crate::linalg::Matrix<f64> {
        crate::linalg::Matrix::from_rows(&values.iter().map(|&v| vec![v]).collect::<Vec<_>>())
    }

    fn cfg(seed: u64) -> TrainConfig<f64> {
        TrainConfig {
            restarts: 3,
            max_iters: 80,
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn rejects_wrong_depth() {
        let data = gen_branin(1, 10, 6, 4, 0.0);
        let spec: CompositionSpec = "SE[SE]".parse().unwrap();
        assert!(matches!(
            train_multilevel(&data, &spec, &cfg(0)),
            Err(GpError::InvalidConfig(_))
        ));
    }

    #[test]
    fn trains_and_predicts_on_branin() {
        let data = gen_branin(5, 30, 12, 6, 0.0).standardized().0;
        let spec: CompositionSpec = "SE[SE[SE]]".parse().unwrap();
        let trained = train_multilevel(&data, &spec, &cfg(5)).unwrap();
        assert_eq!(trained.hyperparams.layers.len(), 3);
        assert!(trained.lml.is_finite());
        let q = crate::linalg::Matrix::from_rows(&[vec![0.25, 0.5], vec![0.8, 0.3]]);
        let pred = predict(&trained, &data, &q).unwrap();
        assert_eq!(pred.mean.len(), 2);
        assert!(pred.mean.iter().all(|m| m.is_finite()));
        assert!(pred.variance.iter().all(|v| *v >= 0.0));
    }

    /// Consistency at desk scale: when the mid level duplicates the low
    /// level exactly, the learned middle warping is close to the identity
    /// and the three-level prediction agrees with the two-level one.
    #[test]
    fn collapses_to_two_level_when_middle_is_redundant() {
        let n1 = 25;
        let x1: Vec<f64> = (0..n1).map(|i| i as f64 / (n1 - 1) as f64).collect();
        let f1 = |x: f64| (4.0 * std::f64::consts::PI * x).sin();
        let y1: Vec<f64> = x1.iter().map(|&x| f1(x)).collect();
        let xh: Vec<f64> = (0..8).map(|i| 0.06 + 0.88 * i as f64 / 7.0).collect();
        let target = |x: f64| (x - std::f64::consts::SQRT_2) * f1(x) * f1(x);
        let yh: Vec<f64> = xh.iter().map(|&x| target(x)).collect();

        let level = |x: &[f64], y: &[f64], label: &str| FidelityLevel {
            inputs: col(x),
            outputs: y.to_vec(),
            noise_std: 0.0,
            label: label.into(),
        };
        let three = FidelityDataset::new(vec![
            level(&x1, &y1, "low"),
            level(&x1, &y1, "mid"),
            level(&xh, &yh, "high"),
        ])
        .unwrap();
        let two = FidelityDataset::new(vec![
            level(&x1, &y1, "low"),
            level(&xh, &yh, "high"),
        ])
        .unwrap();

        let grid = col(&(0..100).map(|i| i as f64 / 99.0).collect::<Vec<_>>());
        let spec3: CompositionSpec = "SE[SE[SE]]".parse().unwrap();
        let t3 = train_multilevel(&three, &spec3, &cfg(2)).unwrap();
        let p3 = predict(&t3, &three, &grid).unwrap();
        let spec2: CompositionSpec = "SE[SE]".parse().unwrap();
        let t2 = crate::train::train_sequential(&two, &spec2, &cfg(2)).unwrap();
        let p2 = predict(&t2, &two, &grid).unwrap();

        // overlap of the 95% bands, averaged over the grid
        let mut overlap_sum = 0.0;
        for i in 0..grid.nrows() {
            let (lo2, hi2) = band(p2.mean[i], p2.variance[i]);
            let (lo3, hi3) = band(p3.mean[i], p3.variance[i]);
            let inter = (hi2.min(hi3) - lo2.max(lo3)).max(0.0);
            let union = (hi2.max(hi3) - lo2.min(lo3)).max(1e-12);
            overlap_sum += inter / union;
        }
        let mean_overlap = overlap_sum / grid.nrows() as f64;
        assert!(mean_overlap >= 0.99, "mean band overlap {mean_overlap}");
    }

    fn band(mean: f64, var: f64) -> (f64, f64) {
        let half = 1.959963984540054 * var.max(0.0).sqrt();
        (mean - half, mean + half)
    }
}
