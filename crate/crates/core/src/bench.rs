//! Benchmark sweeps: scenarios x models x seeds, with per-cell MNLL, RMSE
//! and coverage against the true generating function, plus per-group
//! medians.
//!
//! Scenarios over non-unit boxes (borehole, Branin) are standardized before
//! fitting (inputs to the unit box, each level's outputs z-scored) and
//! metrics are reported in the standardized space; comparisons between
//! models are unaffected.

use std::str::FromStr;

use crate::baselines::{ar1_train_predict, vanilla_gp};
use crate::composition::CompositionSpec;
use crate::data::{self, FidelityDataset};
use crate::error::{GpError, Result};
use crate::linalg::Matrix;
use crate::metrics::{coverage95, mnll, rmse};
use crate::rng::rng_from_seed;
use crate::train::{predict, train, TrainConfig};

use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    SyntheticA,
    SyntheticB,
    Denoising,
    Borehole,
    Branin,
}

impl Scenario {
    pub fn code(self) -> &'static str {
        match self {
            Scenario::SyntheticA => "synthetic-a",
            Scenario::SyntheticB => "synthetic-b",
            Scenario::Denoising => "denoising",
            Scenario::Borehole => "borehole",
            Scenario::Branin => "branin",
        }
    }

    pub fn all() -> [Scenario; 5] {
        [
            Scenario::SyntheticA,
            Scenario::SyntheticB,
            Scenario::Denoising,
            Scenario::Borehole,
            Scenario::Branin,
        ]
    }
}

impl FromStr for Scenario {
    type Err = GpError;
    fn from_str(s: &str) -> Result<Self> {
        Scenario::all()
            .into_iter()
            .find(|sc| sc.code() == s)
            .ok_or_else(|| {
                GpError::InvalidConfig(format!(
                    "unknown scenario '{s}' (expected one of synthetic-a, synthetic-b, \
                     denoising, borehole, branin)"
                ))
            })
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

/// One benchmark result cell. `seed` is `None` for median aggregate rows.
#[derive(Clone, Debug)]
pub struct BenchCell {
    pub scenario: String,
    pub model: String,
    pub seed: Option<u64>,
    pub status: String,
    pub mnll: Option<f64>,
    pub rmse: Option<f64>,
    pub coverage: Option<f64>,
}

/// Scenario data resolved for one seed: training data (already
/// standardized where applicable), test inputs and the true high-fidelity
/// values at them.
pub struct ScenarioInstance {
    pub data: FidelityDataset<f64>,
    pub test_inputs: Matrix<f64>,
    pub test_truth: Vec<f64>,
    pub models: Vec<String>,
}

pub fn scenario_instance(scenario: Scenario, seed: u64) -> ScenarioInstance {
    match scenario {
        Scenario::SyntheticA => {
            let data = data::gen_synthetic_a(seed, 30, 10);
            let (test_inputs, test_truth) = grid_1d(500, data::synthetic_a_high);
            ScenarioInstance {
                data,
                test_inputs,
                test_truth,
                models: two_level_models(),
            }
        }
        Scenario::SyntheticB => {
            let data = data::gen_synthetic_b(seed, 30, 15);
            let (test_inputs, test_truth) = grid_1d(500, data::synthetic_b_high);
            ScenarioInstance {
                data,
                test_inputs,
                test_truth,
                models: two_level_models(),
            }
        }
        Scenario::Denoising => {
            let data = data::gen_denoising(seed, 30, 15);
            let (test_inputs, test_truth) = grid_1d(500, data::synthetic_a_high);
            ScenarioInstance {
                data,
                test_inputs,
                test_truth,
                models: two_level_models(),
            }
        }
        Scenario::Borehole => {
            let data = data::gen_borehole(seed, 60, 10, 0.0);
            let (std_data, tf) = data.standardized();
            let mut rng = rng_from_seed(seed ^ 0x7e57);
            let raw_test = Matrix::from_fn(200, 8, |_, j| {
                let (lo, hi) = data::BOREHOLE_BOUNDS[j];
                lo + (hi - lo) * rng.gen::<f64>()
            });
            let truth: Vec<f64> = (0..raw_test.nrows())
                .map(|i| tf.apply_output(1, data::borehole_high(raw_test.row(i))))
                .collect();
            ScenarioInstance {
                data: std_data,
                test_inputs: tf.apply_inputs(&raw_test),
                test_truth: truth,
                models: vec!["SE[SE]".into(), "SC[SE]".into(), "AR1".into(), "GP".into()],
            }
        }
        Scenario::Branin => {
            // sparse noisy high-fidelity regime: 8 observations with ~10%
            // observation noise, where the low/mid levels carry most of the
            // recoverable signal
            let data = data::gen_branin(seed, 120, 60, 8, 8.0);
            let (std_data, tf) = data.standardized();
            let n = 20;
            let raw_test = Matrix::from_fn(n * n, 2, |i, j| {
                let (lo, hi) = data::BRANIN_BOUNDS[j];
                let (r, c) = (i / n, i % n);
                let t = if j == 0 { r } else { c } as f64 / (n - 1) as f64;
                lo + (hi - lo) * t
            });
            let truth: Vec<f64> = (0..raw_test.nrows())
                .map(|i| tf.apply_output(2, data::branin_high(raw_test.row(i))))
                .collect();
            ScenarioInstance {
                data: std_data,
                test_inputs: tf.apply_inputs(&raw_test),
                test_truth: truth,
                models: vec![
                    "SE[SE[SE]]".into(),
                    "SC[SC[SE]]".into(),
                    "AR1".into(),
                    "GP".into(),
                ],
            }
        }
    }
}

fn two_level_models() -> Vec<String> {
    vec!["SE[SE]".into(), "SC[SE]".into(), "AR1".into(), "GP".into()]
}

fn grid_1d(n: usize, f: impl Fn(f64) -> f64) -> (Matrix<f64>, Vec<f64>) {
    let inputs = Matrix::from_fn(n, 1, |i, _| i as f64 / (n - 1) as f64);
    let truth = (0..n).map(|i| f(inputs[(i, 0)])).collect();
    (inputs, truth)
}

/// Runs one (scenario, model, seed) cell.
pub fn run_model(
    model: &str,
    instance: &ScenarioInstance,
    cfg: &TrainConfig<f64>,
) -> Result<(f64, f64, f64)> {
    let data = &instance.data;
    let (mean, variance, noise) = match model {
        "GP" => {
            let top = data.highest();
            let (pred, fit) = vanilla_gp(
                &top.inputs,
                &top.outputs,
                top.noise_std * top.noise_std,
                &instance.test_inputs,
                cfg,
            )?;
            (pred.mean, pred.variance, fit.noise_var)
        }
        "AR1" => {
            // top two fidelity levels
            let levels = data.levels();
            let two = FidelityDataset::new(vec![
                levels[levels.len() - 2].clone(),
                levels[levels.len() - 1].clone(),
            ])?;
            let (pred, fit) = ar1_train_predict(&two, &instance.test_inputs, cfg)?;
            (pred.mean, pred.variance, fit.params.noise_high)
        }
        spec_str => {
            let spec: CompositionSpec = spec_str.parse()?;
            let trained = train(data, &spec, cfg)?;
            let pred = predict(&trained, data, &instance.test_inputs)?;
            let noise = *trained.hyperparams.noise_vars.last().unwrap();
            (pred.mean, pred.variance, noise)
        }
    };
    Ok((
        mnll(&instance.test_truth, &mean, &variance, noise),
        rmse(&instance.test_truth, &mean),
        coverage95(&instance.test_truth, &mean, &variance, noise),
    ))
}

/// Full sweep over scenarios and seeds; individual model failures are
/// recorded as rows and the sweep continues. Median rows (over seeds with
/// status ok) are appended per (scenario, model).
pub fn run_benchmark(
    scenarios: &[Scenario],
    seeds: &[u64],
    cfg: &TrainConfig<f64>,
) -> Vec<BenchCell> {
    let mut cells = Vec::new();
    for &scenario in scenarios {
        let mut models_seen: Vec<String> = Vec::new();
        for &seed in seeds {
            let mut cfg_seeded = *cfg;
            cfg_seeded.seed = seed;
            let instance = scenario_instance(scenario, seed);
            for model in &instance.models {
                if !models_seen.contains(model) {
                    models_seen.push(model.clone());
                }
                let cell = match run_model(model, &instance, &cfg_seeded) {
                    Ok((m, r, c)) => BenchCell {
                        scenario: scenario.code().into(),
                        model: model.clone(),
                        seed: Some(seed),
                        status: "ok".into(),
                        mnll: Some(m),
                        rmse: Some(r),
                        coverage: Some(c),
                    },
                    Err(e) => BenchCell {
                        scenario: scenario.code().into(),
                        model: model.clone(),
                        seed: Some(seed),
                        status: format!("error: {e}"),
                        mnll: None,
                        rmse: None,
                        coverage: None,
                    },
                };
                cells.push(cell);
            }
        }
        for model in models_seen {
            let ok: Vec<&BenchCell> = cells
                .iter()
                .filter(|c| {
                    c.scenario == scenario.code()
                        && c.model == model
                        && c.status == "ok"
                        && c.seed.is_some()
                })
                .collect();
            let pick = |f: fn(&BenchCell) -> Option<f64>| -> Option<f64> {
                let mut v: Vec<f64> = ok.iter().filter_map(|c| f(c)).collect();
                if v.is_empty() {
                    return None;
                }
                v.sort_by(f64::total_cmp);
                Some(median_sorted(&v))
            };
            cells.push(BenchCell {
                scenario: scenario.code().into(),
                model,
                seed: None,
                status: if ok.is_empty() { "no-data".into() } else { "median".into() },
                mnll: pick(|c| c.mnll),
                rmse: pick(|c| c.rmse),
                coverage: pick(|c| c.coverage),
            });
        }
    }
    cells
}

pub fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Renders cells as the benchmark CSV (schema:
/// `scenario,model,seed,status,mnll,rmse,coverage`).
pub fn cells_to_csv(cells: &[BenchCell]) -> String {
    let mut out = String::from("scenario,model,seed,status,mnll,rmse,coverage\n");
    for c in cells {
        let seed = c.seed.map_or("median".to_string(), |s| s.to_string());
        let fmt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            c.scenario,
            c.model,
            seed,
            c.status.replace(',', ";"),
            fmt(c.mnll),
            fmt(c.rmse),
            fmt(c.coverage)
        ));
    }
    out
}
