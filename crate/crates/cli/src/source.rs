//! Dataset source resolution: named generators or CSV files, plus the true
//! high-fidelity functions for generator-backed datasets.

use std::path::PathBuf;

use mfgp::data::{self, FidelityDataset};
use mfgp::{GpError, Result};

#[derive(Debug, Clone)]
pub struct SourceSpec {
    pub generator: Option<String>,
    pub csv: Option<PathBuf>,
    pub seed: u64,
    pub n_low: Option<usize>,
    pub n_mid: Option<usize>,
    pub n_high: Option<usize>,
    pub low_noise: Option<f64>,
    pub obs_noise: Option<f64>,
}

/// True high-fidelity function of a generator-backed dataset.
pub type TruthFn = fn(&[f64]) -> f64;

pub struct ResolvedSource {
    pub dataset: FidelityDataset<f64>,
    /// True high-fidelity function, available for generator sources.
    pub truth: Option<TruthFn>,
    pub description: String,
}

fn truth_a(x: &[f64]) -> f64 {
    data::synthetic_a_high(x[0])
}
fn truth_b(x: &[f64]) -> f64 {
    data::synthetic_b_high(x[0])
}

pub fn resolve(src: &SourceSpec) -> Result<ResolvedSource> {
    match (&src.generator, &src.csv) {
        (Some(_), Some(_)) => Err(GpError::InvalidConfig(
            "--generator and --csv are mutually exclusive".into(),
        )),
        (None, None) => Err(GpError::InvalidConfig(
            "a dataset source is required: --generator <id> or --csv <path>".into(),
        )),
        (None, Some(path)) => Ok(ResolvedSource {
            dataset: data::load_csv(path)?,
            truth: None,
            description: format!("csv:{}", path.display()),
        }),
        (Some(id), None) => {
            let seed = src.seed;
            let n_low = src.n_low;
            let n_high = src.n_high;
            let (dataset, truth): (FidelityDataset<f64>, Option<TruthFn>) =
                match id.as_str() {
                    "synthetic-a" => (
                        data::gen_synthetic_a(seed, n_low.unwrap_or(30), n_high.unwrap_or(10)),
                        Some(truth_a as TruthFn),
                    ),
                    "synthetic-b" => (
                        data::gen_synthetic_b(seed, n_low.unwrap_or(30), n_high.unwrap_or(15)),
                        Some(truth_b as TruthFn),
                    ),
                    "denoising" => (
                        data::gen_denoising(seed, n_low.unwrap_or(30), n_high.unwrap_or(15)),
                        Some(truth_a as TruthFn),
                    ),
                    "borehole" => (
                        data::gen_borehole(
                            seed,
                            n_low.unwrap_or(60),
                            n_high.unwrap_or(10),
                            src.obs_noise.unwrap_or(0.0),
                        ),
                        Some(data::borehole_high as TruthFn),
                    ),
                    "branin" => (
                        data::gen_branin(
                            seed,
                            n_low.unwrap_or(120),
                            src.n_mid.unwrap_or(60),
                            n_high.unwrap_or(8),
                            src.obs_noise.unwrap_or(8.0),
                        ),
                        Some(data::branin_high as TruthFn),
                    ),
                    comp if comp.starts_with("comp-") => {
                        let variant = match &comp[5..] {
                            "identity" => "identity",
                            "tanh" => "tanh",
                            "sin4" => "sin4pi",
                            "sin8" => "sin8pi",
                            other => {
                                return Err(GpError::InvalidConfig(format!(
                                    "unknown compositional variant '{other}'"
                                )))
                            }
                        };
                        (
                            data::gen_compositional(seed, variant, src.low_noise.unwrap_or(0.1))?,
                            Some(truth_a as TruthFn),
                        )
                    }
                    other => {
                        return Err(GpError::InvalidConfig(format!(
                            "unknown generator '{other}' (expected synthetic-a, synthetic-b, \
                             denoising, borehole, branin, comp-identity, comp-tanh, comp-sin4, \
                             comp-sin8)"
                        )))
                    }
                };
            Ok(ResolvedSource {
                dataset,
                truth,
                description: format!("{id}:seed={seed}"),
            })
        }
    }
}
