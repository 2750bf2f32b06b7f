//! Test-set diagnostics: mean negative log likelihood, RMSE, and
//! credible-band coverage. Predictive densities include the observation
//! noise variance on top of the latent variance.

use crate::num::Real;

/// Per-point negative log predictive density of `truth` under
/// N(mean_i, var_i + noise_var).
pub fn neg_log_density_terms<T: Real>(
    truth: &[T],
    mean: &[T],
    variance: &[T],
    noise_var: T,
) -> Vec<T> {
    let half = T::of(0.5);
    let ln_2pi = T::of((2.0 * std::f64::consts::PI).ln());
    truth
        .iter()
        .zip(mean)
        .zip(variance)
        .map(|((&t, &m), &v)| {
            let s2 = (v + noise_var).max(T::of(1e-300));
            let d = t - m;
            half * (ln_2pi + s2.ln()) + d * d / (T::of(2.0) * s2)
        })
        .collect()
}

/// Mean negative log predictive likelihood.
pub fn mnll<T: Real>(truth: &[T], mean: &[T], variance: &[T], noise_var: T) -> T {
    let terms = neg_log_density_terms(truth, mean, variance, noise_var);
    let n = terms.len().max(1);
    terms.into_iter().sum::<T>() / T::of(n as f64)
}

pub fn rmse<T: Real>(truth: &[T], mean: &[T]) -> T {
    let n = truth.len().max(1);
    let sq = truth
        .iter()
        .zip(mean)
        .map(|(&t, &m)| (t - m) * (t - m))
        .sum::<T>();
    (sq / T::of(n as f64)).sqrt()
}

/// Fraction of truth values inside the central 95% band
/// mean +- 1.96 sqrt(var + noise_var).
pub fn coverage95<T: Real>(truth: &[T], mean: &[T], variance: &[T], noise_var: T) -> T {
    if truth.is_empty() {
        return T::zero();
    }
    let z = T::of(1.959963984540054);
    let hits = truth
        .iter()
        .zip(mean)
        .zip(variance)
        .filter(|((&t, &m), &v)| (t - m).abs() <= z * (v + noise_var).max(T::zero()).sqrt())
        .count();
    T::of(hits as f64) / T::of(truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mnll_of_standard_normal_at_mean() {
        // -log N(0 | 0, 1) = 0.5 log(2 pi)
        let v = mnll(&[0.0f64], &[0.0], &[1.0], 0.0);
        assert!((v - 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-12);
    }

    #[test]
    fn rmse_of_constant_offset() {
        let v = rmse(&[1.0f64, 2.0, 3.0], &[0.0, 1.0, 2.0]);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coverage_counts_band_membership() {
        let truth = [0.0f64, 3.0];
        let mean = [0.0, 0.0];
        let var = [1.0, 1.0];
        let c = coverage95(&truth, &mean, &var, 0.0);
        assert!((c - 0.5).abs() < 1e-12);
    }
}
