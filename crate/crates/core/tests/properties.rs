//! Property tests over the crate's structural invariants.

use proptest::prelude::*;

use mfgp::data::{dataset_from_csv_str, dataset_to_csv_string, FidelityDataset, FidelityLevel};
use mfgp::gp::log_marginal_likelihood;
use mfgp::kernel::BaseKernel;
use mfgp::linalg::{cholesky_with_jitter, Matrix};
use mfgp::moment_matching::{
    effective_kernel_se, reduced_inverse_identity_check, ConditionalMoments, EffectiveKernel,
};

fn psd_2x2(a: f64, b: f64, c: f64, d: f64) -> Matrix<f64> {
    let m = Matrix::from_rows(&[vec![a, b], vec![c, d]]);
    m.matmul(&m.transpose())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn base_kernel_symmetric_and_bounded(
        xs in prop::collection::vec(-2.0f64..2.0, 2..6),
        ys in prop::collection::vec(-2.0f64..2.0, 2..6),
        var in 0.1f64..4.0,
        len in 0.05f64..3.0,
    ) {
        let d = xs.len().min(ys.len());
        let k = BaseKernel::se(var, len).unwrap();
        let a = &xs[..d];
        let b = &ys[..d];
        let kab = k.eval(a, b).unwrap();
        let kba = k.eval(b, a).unwrap();
        prop_assert_eq!(kab, kba);
        prop_assert!(kab <= var + 1e-15);
        prop_assert!(kab >= 0.0);
        prop_assert!((k.eval(a, a).unwrap() - var).abs() < 1e-12);
    }

    #[test]
    fn gram_admits_jittered_cholesky(
        pts in prop::collection::vec(0.0f64..1.0, 2..12),
        var in 0.1f64..4.0,
        len in 0.05f64..2.0,
    ) {
        let x = Matrix::from_rows(&pts.iter().map(|&p| vec![p]).collect::<Vec<_>>());
        let k = BaseKernel::se(var, len).unwrap();
        let g = k.gram_sym(&x).unwrap();
        prop_assert_eq!(g.max_asymmetry(), 0.0);
        prop_assert!(cholesky_with_jitter(&g, Some(var)).is_ok());
    }

    #[test]
    fn delta_sq_nonnegative_and_identities_hold(
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        c in -2.0f64..2.0,
        d in -2.0f64..2.0,
        m0 in -3.0f64..3.0,
        m1 in -3.0f64..3.0,
    ) {
        let cov = psd_2x2(a, b, c, d);
        let mom = ConditionalMoments::new(vec![m0, m1], cov.clone()).unwrap();
        prop_assert!(mom.delta_sq(0, 1) >= 0.0);
        prop_assert_eq!(mom.delta_sq(0, 0), 0.0);
        prop_assert!(reduced_inverse_identity_check(&cov).unwrap());
    }

    #[test]
    fn effective_kernel_bounded_and_symmetric(
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        c in -2.0f64..2.0,
        d in -2.0f64..2.0,
        m0 in -3.0f64..3.0,
        m1 in -3.0f64..3.0,
        var in 0.1f64..4.0,
        len in 0.1f64..3.0,
    ) {
        let mom = ConditionalMoments::new(vec![m0, m1], psd_2x2(a, b, c, d)).unwrap();
        let kij = effective_kernel_se(&mom, var, len, 0, 1);
        let kji = effective_kernel_se(&mom, var, len, 1, 0);
        prop_assert_eq!(kij, kji);
        prop_assert!(kij <= var + 1e-15);
        prop_assert!(kij >= 0.0);
        // equality with the signal variance only without uncertainty and
        // with coinciding warped means
        if mom.delta_sq(0, 1) > 1e-9 || (m0 - m1).abs() > 1e-9 {
            prop_assert!(kij < var);
        }
    }

    #[test]
    fn lml_invariant_under_permutation(
        pts in prop::collection::vec(0.0f64..1.0, 3..8),
        seed in 0u64..1000,
    ) {
        let n = pts.len();
        let ys: Vec<f64> = pts.iter().map(|&p| (5.0 * p).sin()).collect();
        let k = BaseKernel::se(1.0, 0.3).unwrap();
        let x = Matrix::from_rows(&pts.iter().map(|&p| vec![p]).collect::<Vec<_>>());
        let base = log_marginal_likelihood(&k.gram_sym(&x).unwrap(), &ys, 0.1).unwrap();

        // deterministic permutation from the seed
        let mut idx: Vec<usize> = (0..n).collect();
        let mut state = seed;
        for i in (1..n).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            idx.swap(i, (state >> 33) as usize % (i + 1));
        }
        let xp = Matrix::from_rows(&idx.iter().map(|&i| vec![pts[i]]).collect::<Vec<_>>());
        let yp: Vec<f64> = idx.iter().map(|&i| ys[i]).collect();
        let perm = log_marginal_likelihood(&k.gram_sym(&xp).unwrap(), &yp, 0.1).unwrap();
        prop_assert!((base - perm).abs() < 1e-9);
    }

    #[test]
    fn csv_round_trip(
        lows in prop::collection::vec((0.0f64..1.0, -5.0f64..5.0), 1..8),
        highs in prop::collection::vec((0.0f64..1.0, -5.0f64..5.0), 1..8),
    ) {
        let level = |pairs: &[(f64, f64)], label: &str| FidelityLevel {
            inputs: Matrix::from_rows(&pairs.iter().map(|&(x, _)| vec![x]).collect::<Vec<_>>()),
            outputs: pairs.iter().map(|&(_, y)| y).collect(),
            noise_std: 0.0,
            label: label.into(),
        };
        let ds = FidelityDataset::new(vec![level(&lows, "low"), level(&highs, "high")]).unwrap();
        let back = dataset_from_csv_str(&dataset_to_csv_string(&ds)).unwrap();
        prop_assert_eq!(back.num_levels(), 2);
        for (orig, round) in ds.levels().iter().zip(back.levels()) {
            prop_assert_eq!(&orig.inputs, &round.inputs);
            prop_assert_eq!(&orig.outputs, &round.outputs);
        }
    }
}

/// Holding the means fixed, increasing delta^2 strictly decreases the SE
/// effective kernel whenever the warped-mean gap does not exceed the
/// combined scale sqrt(l^2 + delta^2). (Beyond that gap the widening
/// Gaussian bump raises tail values first: d k / d delta^2 has the sign of
/// (m_i - m_j)^2 / (l^2 + delta^2) - 1.)
#[test]
fn effective_kernel_monotone_in_uncertainty() {
    let len: f64 = 0.7;
    for &(m0, m1) in &[(0.0, 0.0), (0.3, -0.1), (1.0, 1.0), (0.5, 0.0)] {
        let gap = m0 - m1;
        let mut last = f64::INFINITY;
        for step in 0..20 {
            let d2 = step as f64 * 0.25;
            let cov = Matrix::from_rows(&[vec![d2 / 2.0, 0.0], vec![0.0, d2 / 2.0]]);
            let mom = ConditionalMoments::new(vec![m0, m1], cov).unwrap();
            let k = effective_kernel_se(&mom, 1.3, len, 0, 1);
            if step > 0 && gap * gap <= len * len {
                assert!(k < last, "k not strictly decreasing at delta2 {d2}");
            }
            last = k;
        }
    }
    // outside that regime the derivative is positive at delta^2 = 0
    let tail = |d2: f64| {
        let cov = Matrix::from_rows(&[vec![d2 / 2.0, 0.0], vec![0.0, d2 / 2.0]]);
        let mom = ConditionalMoments::new(vec![2.0, 0.0], cov).unwrap();
        effective_kernel_se(&mom, 1.3, len, 0, 1)
    };
    assert!(tail(0.25) > tail(0.0));
}

/// As the outer length scale grows with delta^2 fixed, the SE effective
/// kernel approaches the deterministic-warping kernel (uncertainty becomes
/// irrelevant).
#[test]
fn effective_kernel_large_lengthscale_limit() {
    let cov = Matrix::from_rows(&[vec![0.8, 0.1], vec![0.1, 0.5]]);
    let mom = ConditionalMoments::new(vec![0.4, -0.9], cov).unwrap();
    for &len in &[1e2, 1e3] {
        let keff: f64 = effective_kernel_se(&mom, 1.0, len, 0, 1);
        let warped = BaseKernel::se(1.0, len)
            .unwrap()
            .eval_scalar(mom.mean()[0], mom.mean()[1]);
        let rel = (keff - warped).abs() / warped;
        // the residual scales like delta^2 / len^2
        assert!(rel < 2.0 * mom.delta_sq(0, 1) / (len * len), "len {len}: rel {rel}");
    }
}

/// Gram matrices assembled from either effective kernel over any index set
/// pass the jittered Cholesky.
#[test]
fn effective_gram_is_psd_after_jitter() {
    // moments from an actual inner-GP posterior over a grid
    let x = Matrix::from_fn(25, 1, |i, _| i as f64 / 24.0);
    let y: Vec<f64> = (0..25).map(|i| (6.0 * x[(i, 0)]).sin()).collect();
    let kernel = BaseKernel::se(1.0, 0.2).unwrap();
    let grid = Matrix::from_fn(40, 1, |i, _| -0.2 + 1.4 * i as f64 / 39.0);
    let (_, mom) =
        mfgp::gp::posterior_predict_points(&kernel, &x, &y, 1e-4, &grid).unwrap();
    let idx: Vec<usize> = (0..mom.len()).collect();
    for outer in [
        BaseKernel::se(1.7, 0.6).unwrap(),
        BaseKernel::sc(1.7, 0.6).unwrap(),
    ] {
        let keff = EffectiveKernel::new(outer, &mom);
        let gram = keff.gram_sym_over(&idx);
        assert_eq!(gram.max_asymmetry(), 0.0);
        assert!(cholesky_with_jitter(&gram, Some(1.7)).is_ok());
    }
}

/// The whole pipeline is generic over the scalar type: a two-level
/// sequential fit runs in f32 end to end.
#[test]
fn pipeline_runs_in_f32() {
    use mfgp::train::{train_sequential, TrainConfig};

    let xs: Vec<f32> = (0..20).map(|i| i as f32 / 19.0).collect();
    let y1: Vec<f32> = xs.iter().map(|&x| (6.0 * x).sin()).collect();
    let xh: Vec<f32> = (0..6).map(|i| 0.05 + 0.15 * i as f32).collect();
    let yh: Vec<f32> = xh.iter().map(|&x| (6.0 * x).sin().powi(2)).collect();
    let level = |x: &[f32], y: &[f32]| FidelityLevel {
        inputs: Matrix::from_rows(&x.iter().map(|&v| vec![v]).collect::<Vec<_>>()),
        outputs: y.to_vec(),
        noise_std: 0.0f32,
        label: String::new(),
    };
    let data = FidelityDataset::new(vec![level(&xs, &y1), level(&xh, &yh)]).unwrap();
    let cfg = TrainConfig::<f32> {
        restarts: 2,
        max_iters: 40,
        convergence_tol: 1e-3,
        ..TrainConfig::default()
    };
    let spec = "SE[SE]".parse().unwrap();
    let trained = train_sequential(&data, &spec, &cfg).unwrap();
    assert!(trained.lml.is_finite());

    let grid = Matrix::from_rows(&(0..30).map(|i| vec![i as f32 / 29.0]).collect::<Vec<_>>());
    let pred = mfgp::train::predict(&trained, &data, &grid).unwrap();
    assert!(pred.mean.iter().all(|m| m.is_finite()));
    assert!(pred.variance.iter().all(|v| *v >= 0.0));
}
