//! Multi-fidelity datasets: the benchmark generators, CSV persistence, and
//! standardization helpers.
//!
//! Generation is a pure function of (seed, counts): each level draws from
//! its own ChaCha8 stream (the Latin-hypercube shuffles and jitters first,
//! then that level's observation noise), so datasets reproduce
//! bit-for-bit.
//!
//! The three-fidelity Branin and two-fidelity borehole functions follow the
//! conventions used by the emukit multi-fidelity benchmarks:
//!
//! ```text
//! borehole_high(x) = 2 pi T_u (H_u - H_l) /
//!     (ln(r/r_w) (1 + 2 L T_u / (ln(r/r_w) r_w^2 K_w) + T_u / T_l))
//! borehole_low(x)  = 5 T_u (H_u - H_l) /
//!     (ln(r/r_w) (1.5 + 2 L T_u / (ln(r/r_w) r_w^2 K_w) + T_u / T_l))
//!
//! branin_high(x)  = a (x2 - b x1^2 + c x1 - r)^2 + s (1 - t) cos(x1) + s
//! branin_mid(x)   = 10 sqrt(branin_high(x - 2)) + 2 (x1 - 0.5) - 3 (3 x2 - 1) - 1
//! branin_low(x)   = branin_mid(1.2 (x + 2)) - 3 x2 + 1
//! ```
//!
//! with the usual Branin constants a = 1, b = 5.1/(4 pi^2), c = 5/pi, r = 6,
//! s = 10, t = 1/(8 pi), over the box [-5, 10] x [0, 15]; the borehole box
//! is the canonical 8-dimensional one recorded in [`BOREHOLE_BOUNDS`].

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{GpError, Result};
use crate::linalg::Matrix;
use crate::num::Real;
use crate::rng::{fill_standard_normal, rng_from_seed};

/// One fidelity level: inputs (one row per observation), outputs, and the
/// noise level the observations were generated with. Training treats the
/// declared noise as a lower bound on the learned observation-noise
/// variance; zero means unknown/noiseless.
#[derive(Clone, Debug, PartialEq)]
pub struct FidelityLevel<T> {
    pub inputs: Matrix<T>,
    pub outputs: Vec<T>,
    pub noise_std: T,
    pub label: String,
}

/// Fidelity levels ordered lowest to highest.
#[derive(Clone, Debug, PartialEq)]
pub struct FidelityDataset<T> {
    levels: Vec<FidelityLevel<T>>,
}

impl<T: Real> FidelityDataset<T> {
    pub fn new(levels: Vec<FidelityLevel<T>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(GpError::InvalidData("dataset has no fidelity levels".into()));
        }
        let dim = levels
            .iter()
            .find(|l| l.inputs.nrows() > 0)
            .map_or(1, |l| l.inputs.ncols());
        for (i, level) in levels.iter().enumerate() {
            if level.inputs.nrows() != level.outputs.len() {
                return Err(GpError::InvalidData(format!(
                    "level {}: {} inputs but {} outputs",
                    i + 1,
                    level.inputs.nrows(),
                    level.outputs.len()
                )));
            }
            if level.inputs.nrows() > 0 && level.inputs.ncols() != dim {
                return Err(GpError::InvalidData(format!(
                    "level {}: input dimension {} != {}",
                    i + 1,
                    level.inputs.ncols(),
                    dim
                )));
            }
        }
        Ok(FidelityDataset { levels })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn dim(&self) -> usize {
        self.levels
            .iter()
            .find(|l| l.inputs.nrows() > 0)
            .map_or(1, |l| l.inputs.ncols())
    }

    pub fn level(&self, i: usize) -> &FidelityLevel<T> {
        &self.levels[i]
    }

    pub fn levels(&self) -> &[FidelityLevel<T>] {
        &self.levels
    }

    pub fn highest(&self) -> &FidelityLevel<T> {
        self.levels.last().expect("non-empty by construction")
    }

    /// FNV-1a hash over the dataset structure and value bits; used to tie
    /// model artifacts to the data they were trained on.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv::new();
        h.write_u64(self.levels.len() as u64);
        h.write_u64(self.dim() as u64);
        for level in &self.levels {
            h.write_u64(level.inputs.nrows() as u64);
            for i in 0..level.inputs.nrows() {
                for &v in level.inputs.row(i) {
                    h.write_u64(v.as_f64().to_bits());
                }
            }
            for &v in &level.outputs {
                h.write_u64(v.as_f64().to_bits());
            }
        }
        h.finish()
    }

    /// Rescales inputs to the unit box (per-dimension min/max pooled over
    /// all levels) and z-scores each level's outputs independently.
    /// Returns the transformed dataset and the transform, so query points
    /// and truth values can be mapped into the same space.
    pub fn standardized(&self) -> (FidelityDataset<T>, Standardization<T>) {
        let d = self.dim();
        let mut lo = vec![T::infinity(); d];
        let mut hi = vec![T::neg_infinity(); d];
        for level in &self.levels {
            for i in 0..level.inputs.nrows() {
                for (j, &v) in level.inputs.row(i).iter().enumerate() {
                    lo[j] = lo[j].min(v);
                    hi[j] = hi[j].max(v);
                }
            }
        }
        for j in 0..d {
            if !(hi[j] > lo[j]) {
                lo[j] = lo[j] - T::of(0.5);
                hi[j] = hi[j] + T::of(0.5);
            }
        }
        let mut y_mean = Vec::new();
        let mut y_std = Vec::new();
        for level in &self.levels {
            let n = level.outputs.len().max(1);
            let mean = level.outputs.iter().copied().sum::<T>() / T::of(n as f64);
            let var = level
                .outputs
                .iter()
                .map(|&y| (y - mean) * (y - mean))
                .sum::<T>()
                / T::of(n as f64);
            let std = var.sqrt().max(T::of(1e-12));
            y_mean.push(mean);
            y_std.push(std);
        }
        let tf = Standardization {
            x_lo: lo,
            x_hi: hi,
            y_mean,
            y_std,
        };
        let levels = self
            .levels
            .iter()
            .enumerate()
            .map(|(li, level)| FidelityLevel {
                inputs: tf.apply_inputs(&level.inputs),
                outputs: level
                    .outputs
                    .iter()
                    .map(|&y| (y - tf.y_mean[li]) / tf.y_std[li])
                    .collect(),
                noise_std: level.noise_std / tf.y_std[li],
                label: level.label.clone(),
            })
            .collect();
        (FidelityDataset { levels }, tf)
    }
}

/// Input/output rescaling fitted by [`FidelityDataset::standardized`].
#[derive(Clone, Debug)]
pub struct Standardization<T> {
    pub x_lo: Vec<T>,
    pub x_hi: Vec<T>,
    /// Per-level output mean, lowest level first.
    pub y_mean: Vec<T>,
    /// Per-level output standard deviation, lowest level first.
    pub y_std: Vec<T>,
}

impl<T: Real> Standardization<T> {
    pub fn apply_inputs(&self, x: &Matrix<T>) -> Matrix<T> {
        Matrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (x[(i, j)] - self.x_lo[j]) / (self.x_hi[j] - self.x_lo[j])
        })
    }

    /// Maps a truth value on the original scale of `level` into the
    /// standardized space.
    pub fn apply_output(&self, level: usize, y: T) -> T {
        (y - self.y_mean[level]) / self.y_std[level]
    }
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf29ce484222325)
    }
    fn write_u64(&mut self, v: u64) {
        for b in v.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }
    fn finish(&self) -> u64 {
        self.0
    }
}

// ---------------------------------------------------------------------------
// generators

pub const DEFAULT_LOW_COUNT_A: usize = 30;
pub const DEFAULT_HIGH_COUNT_A: usize = 10;
pub const DEFAULT_LOW_COUNT_B: usize = 30;
pub const DEFAULT_HIGH_COUNT_B: usize = 15;

pub fn synthetic_a_low(x: f64) -> f64 {
    (8.0 * std::f64::consts::PI * x).sin()
}

pub fn synthetic_a_high(x: f64) -> f64 {
    let f1 = synthetic_a_low(x);
    (x - std::f64::consts::SQRT_2) * f1 * f1
}

pub fn synthetic_b_low(x: f64) -> f64 {
    (15.0 * x).cos()
}

pub fn synthetic_b_high(x: f64) -> f64 {
    x * synthetic_b_low(2.0 * x - 0.2).exp() - 1.0
}

fn uniform01(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen::<f64>()
}

/// Jittered Latin-hypercube design on the given box: per dimension, one
/// uniform draw inside each of n equal strata, with the strata assignment
/// shuffled independently per dimension. Matches the space-filling designs
/// conventionally used for these benchmark functions and avoids degenerate
/// clumped realizations.
fn latin_hypercube(rng: &mut ChaCha8Rng, n: usize, bounds: &[(f64, f64)]) -> Matrix<f64> {
    let d = bounds.len();
    let mut out = Matrix::zeros(n, d);
    for j in 0..d {
        let (lo, hi) = bounds[j];
        let mut strata: Vec<usize> = (0..n).collect();
        // Fisher-Yates with draws from the shared stream
        for i in (1..n).rev() {
            let k = (uniform01(rng) * (i + 1) as f64) as usize;
            strata.swap(i, k.min(i));
        }
        for i in 0..n {
            let u = uniform01(rng);
            let t = (strata[i] as f64 + u) / n as f64;
            out[(i, j)] = lo + (hi - lo) * t;
        }
    }
    out
}

fn observe_1d(
    rng: &mut ChaCha8Rng,
    inputs: &Matrix<f64>,
    f: impl Fn(f64) -> f64,
    noise_std: f64,
) -> Vec<f64> {
    observe(rng, inputs, |row| f(row[0]), noise_std)
}

fn observe(
    rng: &mut ChaCha8Rng,
    inputs: &Matrix<f64>,
    f: impl Fn(&[f64]) -> f64,
    noise_std: f64,
) -> Vec<f64> {
    let mut y: Vec<f64> = (0..inputs.nrows()).map(|i| f(inputs.row(i))).collect();
    if noise_std > 0.0 {
        let mut eps = vec![0.0; y.len()];
        fill_standard_normal(rng, &mut eps);
        for (yi, e) in y.iter_mut().zip(&eps) {
            *yi += noise_std * e;
        }
    }
    y
}

fn level_1d(
    seed: u64,
    stream: u64,
    n: usize,
    f: impl Fn(f64) -> f64,
    noise_std: f64,
    label: &str,
) -> FidelityLevel<f64> {
    let mut rng = rng_from_seed(seed);
    rng.set_stream(stream);
    let inputs = latin_hypercube(&mut rng, n, &[(0.0, 1.0)]);
    let outputs = observe_1d(&mut rng, &inputs, f, noise_std);
    FidelityLevel {
        inputs,
        outputs,
        noise_std,
        label: label.to_string(),
    }
}

/// Two-fidelity composite: low level observes sin(8 pi x), high level
/// observes (x - sqrt 2) sin^2(8 pi x). Noiseless.
pub fn gen_synthetic_a(seed: u64, n_low: usize, n_high: usize) -> FidelityDataset<f64> {
    FidelityDataset::new(vec![
        level_1d(seed, 1, n_low, synthetic_a_low, 0.0, "sin8pix"),
        level_1d(seed, 2, n_high, synthetic_a_high, 0.0, "target"),
    ])
    .expect("generator invariants")
}

/// Two-fidelity composite: low level observes cos(15 x), high level
/// observes x exp(cos(15 (2x - 0.2))) - 1. Noiseless.
pub fn gen_synthetic_b(seed: u64, n_low: usize, n_high: usize) -> FidelityDataset<f64> {
    FidelityDataset::new(vec![
        level_1d(seed, 1, n_low, synthetic_b_low, 0.0, "cos15x"),
        level_1d(seed, 2, n_high, synthetic_b_high, 0.0, "target"),
    ])
    .expect("generator invariants")
}

/// The four warping functions used by the compositional-freedom scenario.
pub const COMPOSITIONAL_VARIANTS: [&str; 4] = ["identity", "tanh", "sin4pi", "sin8pi"];

fn compositional_low(variant: &str) -> fn(f64) -> f64 {
    match variant {
        "identity" => |x| x,
        "tanh" => f64::tanh,
        "sin4pi" => |x| (4.0 * std::f64::consts::PI * x).sin(),
        "sin8pi" => |x| (8.0 * std::f64::consts::PI * x).sin(),
        other => panic!("unknown compositional variant {other}"),
    }
}

/// Four datasets sharing byte-identical high-fidelity observations of the
/// synthetic-a target, with low-fidelity data drawn from x, tanh x,
/// sin(4 pi x) and sin(8 pi x) respectively, optionally noisy.
pub fn gen_compositional_variants(seed: u64, low_noise_std: f64) -> Vec<FidelityDataset<f64>> {
    let high = level_1d(seed, 0, DEFAULT_HIGH_COUNT_A, synthetic_a_high, 0.0, "target");
    COMPOSITIONAL_VARIANTS
        .iter()
        .enumerate()
        .map(|(v, name)| {
            let low = level_1d(
                seed,
                1 + v as u64,
                DEFAULT_LOW_COUNT_A,
                compositional_low(name),
                low_noise_std,
                name,
            );
            FidelityDataset::new(vec![low, high.clone()]).expect("generator invariants")
        })
        .collect()
}

/// Single compositional variant by name ("identity", "tanh", "sin4pi",
/// "sin8pi"); same high-fidelity data as the full set.
pub fn gen_compositional(seed: u64, variant: &str, low_noise_std: f64) -> Result<FidelityDataset<f64>> {
    let idx = COMPOSITIONAL_VARIANTS
        .iter()
        .position(|v| *v == variant)
        .ok_or_else(|| {
            GpError::InvalidConfig(format!("unknown compositional variant '{variant}'"))
        })?;
    Ok(gen_compositional_variants(seed, low_noise_std).swap_remove(idx))
}

/// Denoising scenario: both levels observe the synthetic-a target, the low
/// level with noise 0.1 (30 points), the high level with noise 0.001
/// (15 points).
pub fn gen_denoising(seed: u64, n_low: usize, n_high: usize) -> FidelityDataset<f64> {
    FidelityDataset::new(vec![
        level_1d(seed, 1, n_low, synthetic_a_high, 0.1, "noisy"),
        level_1d(seed, 2, n_high, synthetic_a_high, 0.001, "clean"),
    ])
    .expect("generator invariants")
}

/// Canonical borehole input box.
pub const BOREHOLE_BOUNDS: [(f64, f64); 8] = [
    (0.05, 0.15),       // r_w
    (100.0, 50_000.0),  // r
    (63_070.0, 115_600.0), // T_u
    (990.0, 1110.0),    // H_u
    (63.1, 116.0),      // T_l
    (700.0, 820.0),     // H_l
    (1120.0, 1680.0),   // L
    (9855.0, 12_045.0), // K_w
];

pub fn borehole_high(x: &[f64]) -> f64 {
    let (rw, r, tu, hu, tl, hl, l, kw) = (x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7]);
    let log_rrw = (r / rw).ln();
    let frac = 2.0 * l * tu / (log_rrw * rw * rw * kw);
    2.0 * std::f64::consts::PI * tu * (hu - hl) / (log_rrw * (1.0 + frac + tu / tl))
}

pub fn borehole_low(x: &[f64]) -> f64 {
    let (rw, r, tu, hu, tl, hl, l, kw) = (x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7]);
    let log_rrw = (r / rw).ln();
    let frac = 2.0 * l * tu / (log_rrw * rw * rw * kw);
    5.0 * tu * (hu - hl) / (log_rrw * (1.5 + frac + tu / tl))
}

/// Two-fidelity borehole dataset over the canonical 8-d box, with i.i.d.
/// Gaussian observation noise of standard deviation `noise_std` (raw output
/// units) on every level.
pub fn gen_borehole(seed: u64, n_low: usize, n_high: usize, noise_std: f64) -> FidelityDataset<f64> {
    let make = |stream: u64, n: usize, f: fn(&[f64]) -> f64, label: &str| {
        let mut rng = rng_from_seed(seed);
        rng.set_stream(stream);
        let inputs = latin_hypercube(&mut rng, n, &BOREHOLE_BOUNDS);
        let outputs = observe(&mut rng, &inputs, f, noise_std);
        FidelityLevel {
            inputs,
            outputs,
            noise_std,
            label: label.to_string(),
        }
    };
    FidelityDataset::new(vec![
        make(1, n_low, borehole_low, "borehole-low"),
        make(2, n_high, borehole_high, "borehole-high"),
    ])
    .expect("generator invariants")
}

pub const BRANIN_BOUNDS: [(f64, f64); 2] = [(-5.0, 10.0), (0.0, 15.0)];

pub fn branin_high(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    let pi = std::f64::consts::PI;
    let b = 5.1 / (4.0 * pi * pi);
    let c = 5.0 / pi;
    let s = 10.0;
    let t = 1.0 / (8.0 * pi);
    (x2 - b * x1 * x1 + c * x1 - 6.0).powi(2) + s * (1.0 - t) * x1.cos() + s
}

pub fn branin_mid(x: &[f64]) -> f64 {
    let shifted = [x[0] - 2.0, x[1] - 2.0];
    10.0 * branin_high(&shifted).sqrt() + 2.0 * (x[0] - 0.5) - 3.0 * (3.0 * x[1] - 1.0) - 1.0
}

pub fn branin_low(x: &[f64]) -> f64 {
    let scaled = [1.2 * (x[0] + 2.0), 1.2 * (x[1] + 2.0)];
    branin_mid(&scaled) - 3.0 * x[1] + 1.0
}

/// Three-fidelity Branin dataset over [-5, 10] x [0, 15], with i.i.d.
/// Gaussian observation noise of standard deviation `noise_std` (raw output
/// units) on every level.
pub fn gen_branin(
    seed: u64,
    n_low: usize,
    n_mid: usize,
    n_high: usize,
    noise_std: f64,
) -> FidelityDataset<f64> {
    let make = |stream: u64, n: usize, f: fn(&[f64]) -> f64, label: &str| {
        let mut rng = rng_from_seed(seed);
        rng.set_stream(stream);
        let inputs = latin_hypercube(&mut rng, n, &BRANIN_BOUNDS);
        let outputs = observe(&mut rng, &inputs, f, noise_std);
        FidelityLevel {
            inputs,
            outputs,
            noise_std,
            label: label.to_string(),
        }
    };
    FidelityDataset::new(vec![
        make(1, n_low, branin_low, "branin-low"),
        make(2, n_mid, branin_mid, "branin-mid"),
        make(3, n_high, branin_high, "branin-high"),
    ])
    .expect("generator invariants")
}

// ---------------------------------------------------------------------------
// CSV persistence
//
// Schema: header `x_1,...,x_d,y,fidelity_level`, one row per observation,
// fidelity_level a 1-based integer with 1 the lowest fidelity. Floats are
// written as shortest round-trip decimals, so load(save(d)) reproduces the
// values bit-exactly. Noise metadata is not part of the schema; loaded
// levels carry noise_std = 0.

pub fn dataset_to_csv_string<T: Real>(ds: &FidelityDataset<T>) -> String {
    let d = ds.dim();
    let mut out = String::new();
    for j in 1..=d {
        let _ = write!(out, "x_{j},");
    }
    out.push_str("y,fidelity_level\n");
    for (li, level) in ds.levels().iter().enumerate() {
        for i in 0..level.inputs.nrows() {
            for &v in level.inputs.row(i) {
                let _ = write!(out, "{},", v.as_f64());
            }
            let _ = writeln!(out, "{},{}", level.outputs[i].as_f64(), li + 1);
        }
    }
    out
}

pub fn save_csv<T: Real>(ds: &FidelityDataset<T>, path: &Path) -> Result<()> {
    std::fs::write(path, dataset_to_csv_string(ds))?;
    Ok(())
}

pub fn dataset_from_csv_str(s: &str) -> Result<FidelityDataset<f64>> {
    let mut lines = s.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| GpError::Parse {
            line: 1,
            msg: "empty file".into(),
        })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 3 || cols[cols.len() - 1] != "fidelity_level" || cols[cols.len() - 2] != "y" {
        return Err(GpError::Parse {
            line: 1,
            msg: format!("expected header x_1,...,x_d,y,fidelity_level, got '{header}'"),
        });
    }
    let d = cols.len() - 2;
    for (j, col) in cols[..d].iter().enumerate() {
        if *col != format!("x_{}", j + 1) {
            return Err(GpError::Parse {
                line: 1,
                msg: format!("expected column x_{}, got '{col}'", j + 1),
            });
        }
    }

    let mut rows: Vec<(Vec<f64>, f64, usize)> = Vec::new();
    let mut max_level = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != d + 2 {
            return Err(GpError::Parse {
                line: lineno,
                msg: format!("expected {} fields, got {}", d + 2, fields.len()),
            });
        }
        let parse_num = |f: &str| -> Result<f64> {
            f.parse::<f64>().map_err(|_| GpError::Parse {
                line: lineno,
                msg: format!("non-numeric value '{f}'"),
            })
        };
        let x: Vec<f64> = fields[..d].iter().map(|f| parse_num(f)).collect::<Result<_>>()?;
        let y = parse_num(fields[d])?;
        let level: usize = fields[d + 1].parse().map_err(|_| GpError::Parse {
            line: lineno,
            msg: format!("fidelity_level must be a positive integer, got '{}'", fields[d + 1]),
        })?;
        if level == 0 {
            return Err(GpError::Parse {
                line: lineno,
                msg: "fidelity_level is 1-based".into(),
            });
        }
        max_level = max_level.max(level);
        rows.push((x, y, level));
    }
    if rows.is_empty() {
        return Err(GpError::InvalidData("CSV contains no data rows".into()));
    }

    let mut levels = Vec::new();
    for l in 1..=max_level {
        let xs: Vec<Vec<f64>> = rows
            .iter()
            .filter(|(_, _, rl)| *rl == l)
            .map(|(x, _, _)| x.clone())
            .collect();
        let ys: Vec<f64> = rows
            .iter()
            .filter(|(_, _, rl)| *rl == l)
            .map(|(_, y, _)| *y)
            .collect();
        levels.push(FidelityLevel {
            inputs: if xs.is_empty() {
                Matrix::zeros(0, d)
            } else {
                Matrix::from_rows(&xs)
            },
            outputs: ys,
            noise_std: 0.0,
            label: format!("level{l}"),
        });
    }
    FidelityDataset::new(levels)
}

pub fn load_csv(path: &Path) -> Result<FidelityDataset<f64>> {
    let content = std::fs::read_to_string(path)?;
    dataset_from_csv_str(&content)
}
