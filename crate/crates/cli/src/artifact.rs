//! Model artifact: a human-readable key-value text format carrying the
//! composition spec, training mode, every hyperparameter, the final LML and
//! a fingerprint of the training dataset. Floats are written as shortest
//! round-trip decimals so artifacts diff cleanly and reload exactly.

use std::path::Path;

use mfgp::composition::CompositionSpec;
use mfgp::train::{Hyperparams, LayerParams, TrainMode, TrainResult};
use mfgp::{GpError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct ModelArtifact {
    pub spec: CompositionSpec,
    pub mode: TrainMode,
    pub hyperparams: Hyperparams<f64>,
    pub lml: f64,
    pub dataset_fingerprint: u64,
    pub standardized: bool,
}

impl ModelArtifact {
    pub fn from_result(result: &TrainResult<f64>, fingerprint: u64, standardized: bool) -> Self {
        ModelArtifact {
            spec: result.spec.clone(),
            mode: result.mode,
            hyperparams: result.hyperparams.clone(),
            lml: result.lml,
            dataset_fingerprint: fingerprint,
            standardized,
        }
    }

    pub fn to_train_result(&self) -> TrainResult<f64> {
        TrainResult {
            hyperparams: self.hyperparams.clone(),
            lml: self.lml,
            trace: vec![self.lml],
            mode: self.mode,
            spec: self.spec.clone(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("schema_version = {SCHEMA_VERSION}\n"));
        out.push_str(&format!("spec = {}\n", self.spec));
        out.push_str(&format!("mode = {}\n", self.mode.code()));
        out.push_str(&format!(
            "dataset_fingerprint = {:016x}\n",
            self.dataset_fingerprint
        ));
        out.push_str(&format!("standardized = {}\n", self.standardized));
        out.push_str(&format!("levels = {}\n", self.hyperparams.num_layers()));
        for (i, layer) in self.hyperparams.layers.iter().enumerate() {
            out.push_str(&format!("layer{}.variance = {}\n", i + 1, layer.variance));
            out.push_str(&format!(
                "layer{}.lengthscale = {}\n",
                i + 1,
                layer.lengthscale
            ));
            out.push_str(&format!(
                "level{}.noise_variance = {}\n",
                i + 1,
                self.hyperparams.noise_vars[i]
            ));
        }
        out.push_str(&format!("lml = {}\n", self.lml));
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut fields = std::collections::BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| GpError::Parse {
                line: i + 1,
                msg: format!("expected 'key = value', got '{line}'"),
            })?;
            fields.insert(key.trim().to_string(), value.trim().to_string());
        }
        let get = |key: &str| -> Result<&String> {
            fields.get(key).ok_or_else(|| GpError::Parse {
                line: 0,
                msg: format!("missing field '{key}'"),
            })
        };
        let parse_f64 = |key: &str| -> Result<f64> {
            get(key)?.parse::<f64>().map_err(|_| GpError::Parse {
                line: 0,
                msg: format!("field '{key}' is not a number"),
            })
        };

        let version: u32 = get("schema_version")?.parse().map_err(|_| GpError::Parse {
            line: 0,
            msg: "schema_version is not an integer".into(),
        })?;
        if version != SCHEMA_VERSION {
            return Err(GpError::InvalidConfig(format!(
                "unsupported model schema version {version} (expected {SCHEMA_VERSION})"
            )));
        }
        let spec: CompositionSpec = get("spec")?.parse()?;
        let mode = match get("mode")?.as_str() {
            "sequential" => TrainMode::Sequential,
            "joint" => TrainMode::Joint,
            other => {
                return Err(GpError::Parse {
                    line: 0,
                    msg: format!("unknown mode '{other}'"),
                })
            }
        };
        let fingerprint = u64::from_str_radix(get("dataset_fingerprint")?, 16).map_err(|_| {
            GpError::Parse {
                line: 0,
                msg: "dataset_fingerprint is not hex".into(),
            }
        })?;
        let standardized = get("standardized")?.parse::<bool>().map_err(|_| GpError::Parse {
            line: 0,
            msg: "standardized is not a bool".into(),
        })?;
        let levels: usize = get("levels")?.parse().map_err(|_| GpError::Parse {
            line: 0,
            msg: "levels is not an integer".into(),
        })?;
        let mut layers = Vec::new();
        let mut noise_vars = Vec::new();
        for i in 1..=levels {
            layers.push(LayerParams {
                variance: parse_f64(&format!("layer{i}.variance"))?,
                lengthscale: parse_f64(&format!("layer{i}.lengthscale"))?,
            });
            noise_vars.push(parse_f64(&format!("level{i}.noise_variance"))?);
        }
        Ok(ModelArtifact {
            spec,
            mode,
            hyperparams: Hyperparams { layers, noise_vars },
            lml: parse_f64("lml")?,
            dataset_fingerprint: fingerprint,
            standardized,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }
}
