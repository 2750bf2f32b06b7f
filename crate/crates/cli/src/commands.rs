//! Command implementations. File outputs are deterministic given the flag
//! set; timings are reported on stderr only.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mfgp::bench::{self, Scenario};
use mfgp::composition::CompositionSpec;
use mfgp::data::{FidelityDataset, Standardization};
use mfgp::gp::sample_prior;
use mfgp::kernel::{gram_sym, BaseKernel};
use mfgp::linalg::Matrix;
use mfgp::metrics::{mnll, rmse};
use mfgp::moment_matching::EffectiveKernel;
use mfgp::train::{
    self, fit_single_gp, InitStrategy, OptimizerKind, TrainConfig, TrainMode,
};
use mfgp::{GpError, Result};

use crate::artifact::ModelArtifact;
use crate::source::{resolve, ResolvedSource, SourceSpec};
use crate::{SourceArgs, TrainOpts};

/// Environment variable naming the default directory for relative output
/// paths.
pub const OUT_DIR_ENV: &str = "MFGP_OUT_DIR";

fn out_path(path: &Path) -> PathBuf {
    if path.is_relative() {
        if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
            if !dir.is_empty() {
                return PathBuf::from(dir).join(path);
            }
        }
    }
    path.to_path_buf()
}

fn source_spec(args: &SourceArgs) -> SourceSpec {
    SourceSpec {
        generator: args.generator.clone(),
        csv: args.csv.clone(),
        seed: args.seed,
        n_low: args.n_low,
        n_mid: args.n_mid,
        n_high: args.n_high,
        low_noise: args.low_noise,
        obs_noise: args.obs_noise,
    }
}

fn train_config(opts: &TrainOpts) -> Result<TrainConfig<f64>> {
    let cfg = TrainConfig {
        mode: match opts.mode.as_str() {
            "sequential" => TrainMode::Sequential,
            "joint" => TrainMode::Joint,
            other => return Err(GpError::InvalidConfig(format!("unknown mode '{other}'"))),
        },
        optimizer: match opts.optimizer.as_str() {
            "quasi-newton" => OptimizerKind::QuasiNewton,
            "gradient-descent" => OptimizerKind::GradientDescent,
            other => {
                return Err(GpError::InvalidConfig(format!(
                    "unknown optimizer '{other}'"
                )))
            }
        },
        max_iters: opts.max_iters,
        restarts: opts.restarts,
        init_strategy: match opts.init_strategy.as_str() {
            "fixed" => InitStrategy::Fixed,
            "log-uniform" => InitStrategy::LogUniformRandom,
            other => {
                return Err(GpError::InvalidConfig(format!(
                    "unknown init strategy '{other}'"
                )))
            }
        },
        convergence_tol: opts.tol,
        seed: opts.train_seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Parses "start:end:count" into a column of grid points.
fn parse_grid(grid: &str) -> Result<Matrix<f64>> {
    let parts: Vec<&str> = grid.split(':').collect();
    let bad = || GpError::InvalidConfig(format!("cannot parse grid '{grid}' (want start:end:count)"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].parse().map_err(|_| bad())?;
    let end: f64 = parts[1].parse().map_err(|_| bad())?;
    let count: usize = parts[2].parse().map_err(|_| bad())?;
    if count == 0 {
        return Err(bad());
    }
    Ok(Matrix::from_fn(count, 1, |i, _| {
        if count == 1 {
            start
        } else {
            start + (end - start) * i as f64 / (count - 1) as f64
        }
    }))
}

/// Query CSV: header x_1..x_d with optional trailing y column.
fn load_query_csv(path: &Path) -> Result<(Matrix<f64>, Option<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(GpError::Parse {
        line: 1,
        msg: "empty query file".into(),
    })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let has_y = cols.last() == Some(&"y");
    let d = if has_y { cols.len() - 1 } else { cols.len() };
    if d == 0 {
        return Err(GpError::Parse {
            line: 1,
            msg: "query file needs at least one x column".into(),
        });
    }
    for (j, col) in cols[..d].iter().enumerate() {
        if *col != format!("x_{}", j + 1) {
            return Err(GpError::Parse {
                line: 1,
                msg: format!("expected column x_{}, got '{col}'", j + 1),
            });
        }
    }
    let mut xs: Vec<Vec<f64>> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(GpError::Parse {
                line: idx + 1,
                msg: format!("expected {} fields, got {}", cols.len(), fields.len()),
            });
        }
        let parse = |f: &str| -> Result<f64> {
            f.parse().map_err(|_| GpError::Parse {
                line: idx + 1,
                msg: format!("non-numeric value '{f}'"),
            })
        };
        xs.push(fields[..d].iter().map(|f| parse(f)).collect::<Result<_>>()?);
        if has_y {
            ys.push(parse(fields[d])?);
        }
    }
    if xs.is_empty() {
        return Err(GpError::InvalidData("query file has no rows".into()));
    }
    Ok((Matrix::from_rows(&xs), has_y.then_some(ys)))
}

pub fn train(
    args: &SourceArgs,
    spec_str: &str,
    opts: &TrainOpts,
    standardize: bool,
    out: &Path,
    metrics_path: Option<&Path>,
) -> Result<()> {
    let started = Instant::now();
    let spec: CompositionSpec = spec_str.parse()?;
    let cfg = train_config(opts)?;
    let src = resolve(&source_spec(args))?;
    let fingerprint = src.dataset.fingerprint();
    let fit_data = if standardize {
        src.dataset.standardized().0
    } else {
        src.dataset.clone()
    };

    let result = train::train(&fit_data, &spec, &cfg)?;
    let artifact = ModelArtifact::from_result(&result, fingerprint, standardize);
    artifact.save(&out_path(out))?;

    if let Some(metrics) = metrics_path {
        let mut text = String::from("key,value\n");
        let _ = writeln!(text, "spec,{}", artifact.spec);
        let _ = writeln!(text, "mode,{}", artifact.mode.code());
        let _ = writeln!(text, "dataset,{}", src.description);
        let _ = writeln!(text, "dataset_fingerprint,{fingerprint:016x}");
        let _ = writeln!(text, "lml,{}", result.lml);
        let _ = writeln!(text, "iterations,{}", result.trace.len().saturating_sub(1));
        std::fs::write(out_path(metrics), text)?;
    }
    eprintln!(
        "trained {} on {} in {:.2?}: lml = {}",
        artifact.spec,
        src.description,
        started.elapsed(),
        result.lml
    );
    Ok(())
}

pub fn predict(
    model: &Path,
    args: &SourceArgs,
    grid: Option<&str>,
    query_csv: Option<&Path>,
    want_truth: bool,
    out: &Path,
) -> Result<()> {
    let artifact = ModelArtifact::load(model)?;
    let src = resolve(&source_spec(args))?;
    let fingerprint = src.dataset.fingerprint();
    if fingerprint != artifact.dataset_fingerprint {
        return Err(GpError::ModelMismatch(format!(
            "dataset fingerprint {:016x} does not match the model's {:016x}",
            fingerprint, artifact.dataset_fingerprint
        )));
    }

    let (raw_query, csv_truth) = match (grid, query_csv) {
        (Some(_), Some(_)) => {
            return Err(GpError::InvalidConfig(
                "--grid and --query-csv are mutually exclusive".into(),
            ))
        }
        (None, None) => {
            return Err(GpError::InvalidConfig(
                "a query is required: --grid or --query-csv".into(),
            ))
        }
        (Some(g), None) => {
            if src.dataset.dim() != 1 {
                return Err(GpError::InvalidConfig(
                    "--grid applies to 1-d inputs; use --query-csv".into(),
                ));
            }
            (parse_grid(g)?, None)
        }
        (None, Some(path)) => load_query_csv(path)?,
    };
    if raw_query.ncols() != src.dataset.dim() {
        return Err(GpError::ShapeMismatch {
            expected: src.dataset.dim(),
            got: raw_query.ncols(),
        });
    }

    // truth values in raw units, from the query CSV or the generator
    let raw_truth: Option<Vec<f64>> = if let Some(t) = csv_truth {
        Some(t)
    } else if want_truth {
        let f = src.truth.ok_or_else(|| {
            GpError::InvalidConfig("--truth requires a generator-backed dataset".into())
        })?;
        Some((0..raw_query.nrows()).map(|i| f(raw_query.row(i))).collect())
    } else {
        None
    };

    let (data, query, truth) = prepare_spaces(&src, &artifact, raw_query, raw_truth);

    let trained = artifact.to_train_result();
    let pred = train::predict(&trained, &data, &query)?;
    let noise = *trained.hyperparams.noise_vars.last().unwrap();

    let mut text = String::new();
    for j in 1..=query.ncols() {
        let _ = write!(text, "x_{j},");
    }
    text.push_str("mean,std");
    if truth.is_some() {
        text.push_str(",truth");
    }
    text.push('\n');
    for i in 0..query.nrows() {
        for &v in query.row(i) {
            let _ = write!(text, "{v},");
        }
        let std = (pred.variance[i] + noise).max(0.0).sqrt();
        let _ = write!(text, "{},{}", pred.mean[i], std);
        if let Some(t) = &truth {
            let _ = write!(text, ",{}", t[i]);
        }
        text.push('\n');
    }
    if let Some(t) = &truth {
        let m = mnll(t, &pred.mean, &pred.variance, noise);
        let r = rmse(t, &pred.mean);
        let _ = writeln!(text, "# mnll = {m}");
        let _ = writeln!(text, "# rmse = {r}");
    }
    std::fs::write(out_path(out), text)?;
    Ok(())
}

/// Maps the dataset, query points and truth values into the space the model
/// was trained in (standardized or raw).
fn prepare_spaces(
    src: &ResolvedSource,
    artifact: &ModelArtifact,
    raw_query: Matrix<f64>,
    raw_truth: Option<Vec<f64>>,
) -> (FidelityDataset<f64>, Matrix<f64>, Option<Vec<f64>>) {
    if !artifact.standardized {
        return (src.dataset.clone(), raw_query, raw_truth);
    }
    let (data, tf): (FidelityDataset<f64>, Standardization<f64>) = src.dataset.standardized();
    let query = tf.apply_inputs(&raw_query);
    let top = data.num_levels() - 1;
    let truth = raw_truth.map(|t| t.iter().map(|&v| tf.apply_output(top, v)).collect());
    (data, query, truth)
}

#[allow(clippy::too_many_arguments)]
pub fn sample(
    args: &SourceArgs,
    spec_str: &str,
    grid: &str,
    n: usize,
    sample_seed: u64,
    outer_variance: f64,
    outer_lengthscale: f64,
    opts: &TrainOpts,
    out: &Path,
) -> Result<()> {
    let spec: CompositionSpec = spec_str.parse()?;
    if spec.depth() != 2 {
        return Err(GpError::InvalidConfig(
            "sample uses a two-level composition (level-1 data plus an outer kernel)".into(),
        ));
    }
    let cfg = train_config(opts)?;
    let src = resolve(&source_spec(args))?;
    if src.dataset.dim() != 1 {
        return Err(GpError::InvalidConfig("sample requires 1-d inputs".into()));
    }
    let grid_x = parse_grid(grid)?;

    // level-1 fit on the lowest-fidelity data, moments on the grid
    let low = src.dataset.level(0);
    let fit = fit_single_gp(spec.family(0), &low.inputs, &low.outputs, 0.0, &cfg)?;
    let (_, moments) = mfgp::gp::posterior_predict_points(
        &fit.kernel,
        &low.inputs,
        &low.outputs,
        fit.noise_var,
        &grid_x,
    )?;
    let outer = BaseKernel::new(spec.family(1), outer_variance, outer_lengthscale)?;
    let keff = EffectiveKernel::new(outer, &moments);
    let k = gram_sym(grid_x.nrows(), |i, j| keff.eval(i, j));

    let mut text = String::from("x");
    for s in 1..=n {
        let _ = write!(text, ",sample_{s}");
    }
    text.push('\n');
    if n > 0 {
        let draws = sample_prior(&k, n, sample_seed)?;
        for i in 0..grid_x.nrows() {
            let _ = write!(text, "{}", grid_x[(i, 0)]);
            for s in 0..n {
                let _ = write!(text, ",{}", draws[(s, i)]);
            }
            text.push('\n');
        }
    } else {
        for i in 0..grid_x.nrows() {
            let _ = writeln!(text, "{}", grid_x[(i, 0)]);
        }
    }
    std::fs::write(out_path(out), text)?;
    Ok(())
}

pub fn benchmark(scenarios_str: &str, seeds: u64, opts: &TrainOpts, out: &Path) -> Result<()> {
    let started = Instant::now();
    let scenarios: Vec<Scenario> = scenarios_str
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse())
        .collect::<Result<_>>()?;
    if scenarios.is_empty() {
        return Err(GpError::InvalidConfig("no scenarios given".into()));
    }
    if seeds == 0 {
        return Err(GpError::InvalidConfig("--seeds must be >= 1".into()));
    }
    let cfg = train_config(opts)?;
    let seed_list: Vec<u64> = (0..seeds).collect();
    let cells = bench::run_benchmark(&scenarios, &seed_list, &cfg);
    std::fs::write(out_path(out), bench::cells_to_csv(&cells))?;
    eprintln!(
        "benchmark over {} scenario(s) x {} seed(s) finished in {:.2?}",
        scenarios.len(),
        seeds,
        started.elapsed()
    );
    Ok(())
}
