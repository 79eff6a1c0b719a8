//! Experiment configuration: one JSON file per experiment, with dotted-path overrides.

use std::path::{Path, PathBuf};

use csada::data::ToySpec;
use csada::model::Activation;
use csada::trainer::TrainConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{io_err, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Baseline,
    CsadaFull,
    CsadaStochastic,
    PenaltyPair,
    PenaltyAp,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::CsadaFull => "csada_full",
            Method::CsadaStochastic => "csada_stochastic",
            Method::PenaltyPair => "penalty_pair",
            Method::PenaltyAp => "penalty_ap",
        }
    }

    pub fn needs_cost(self) -> bool {
        matches!(self, Method::CsadaFull | Method::CsadaStochastic | Method::PenaltyAp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSource {
    pub train: PathBuf,
    #[serde(default)]
    pub test: Option<PathBuf>,
    #[serde(default = "default_label_column")]
    pub label_column: String,
}

fn default_label_column() -> String {
    "label".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnistSource {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    #[serde(default)]
    pub test_images: Option<PathBuf>,
    #[serde(default)]
    pub test_labels: Option<PathBuf>,
    #[serde(default)]
    pub per_class_cap: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetSection {
    #[serde(default)]
    pub toy: Option<ToySpec>,
    #[serde(default)]
    pub csv: Option<CsvSource>,
    #[serde(default)]
    pub mnist: Option<MnistSource>,
    /// Fraction of the training set held out for periodic validation.
    #[serde(default)]
    pub val_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSection {
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
}

fn default_dims() -> Vec<usize> {
    vec![2, 50, 3]
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            dims: default_dims(),
            activation: Activation::default(),
        }
    }
}

/// At most one source; when none is given the all-ones matrix is used.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CostSection {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub pareto_seed: Option<u64>,
    #[serde(default)]
    pub matrix: Option<Vec<Vec<f64>>>,
    /// Single critical pair `[y, z]` with cost 1.
    #[serde(default)]
    pub pair: Option<[usize; 2]>,
}

impl CostSection {
    fn sources(&self) -> usize {
        [
            self.csv.is_some(),
            self.pareto_seed.is_some(),
            self.matrix.is_some(),
            self.pair.is_some(),
        ]
        .iter()
        .filter(|b| **b)
        .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSection {
    pub method: Method,
    #[serde(flatten)]
    pub config: TrainConfig,
    /// Baseline run that produces the starting point of every non-baseline method.
    #[serde(default)]
    pub pretrain: TrainConfig,
    /// Start from this checkpoint instead of pretraining.
    #[serde(default)]
    pub init_checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub pair: Option<[usize; 2]>,
    #[serde(default)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub cost: CostSection,
    pub train: TrainSection,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
}

fn default_output() -> PathBuf {
    PathBuf::from("runs")
}

fn default_replicates() -> usize {
    1
}

fn invalid(field: &str, reason: &str) -> CliError {
    CliError::validation(format!("`{field}`: {reason}"))
}

/// Re-roots the field named in a library validation error under `prefix`.
fn scoped(e: csada::Error, prefix: &str) -> CliError {
    match e {
        csada::Error::Invalid { field, reason } => {
            let leaf = field.strip_prefix("train.").unwrap_or(&field);
            invalid(&format!("{prefix}.{leaf}"), &reason)
        }
        other => other.into(),
    }
}

impl ExperimentConfig {
    /// Reads a config file and applies `key.path=value` overrides.
    pub fn load(path: &Path, overrides: &[String]) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let raw: Value =
            serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        Self::from_value(raw, overrides)
    }

    pub fn from_value(raw: Value, overrides: &[String]) -> CliResult<Self> {
        let parsed: Self = parse(raw.clone())?;
        let mut canonical = serde_json::to_value(&parsed).expect("config serializes");
        if let Some(field) = unknown_field(&raw, &canonical, "") {
            return Err(invalid(&field, "unknown field"));
        }
        for o in overrides {
            apply_override(&mut canonical, o)?;
        }
        let cfg: Self = parse(canonical)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let d = &self.dataset;
        let sources = [d.toy.is_some(), d.csv.is_some(), d.mnist.is_some()];
        if sources.iter().filter(|b| **b).count() != 1 {
            return Err(invalid("dataset", "exactly one of toy, csv, mnist is required"));
        }
        if let Some(f) = d.val_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(invalid("dataset.val_fraction", "must lie in (0, 1)"));
            }
        }
        if self.model.dims.len() < 2 || self.model.dims.contains(&0) {
            return Err(invalid("model.dims", "needs at least two positive layer widths"));
        }
        if self.cost.sources() > 1 {
            return Err(invalid("cost", "give at most one of csv, pareto_seed, matrix, pair"));
        }
        let t = &self.train;
        if t.method.needs_cost() && self.cost.sources() == 0 {
            return Err(invalid("cost", &format!("required by method {}", t.method.as_str())));
        }
        t.config.validate().map_err(|e| scoped(e, "train"))?;
        t.pretrain.validate().map_err(|e| scoped(e, "train.pretrain"))?;
        match t.method {
            Method::PenaltyPair if t.pair.is_none() => {
                return Err(invalid("train.pair", "required by method penalty_pair"));
            }
            Method::PenaltyAp => match t.alpha {
                None => return Err(invalid("train.alpha", "required by method penalty_ap")),
                Some(a) if !(a >= 0.0) || !a.is_finite() => {
                    return Err(invalid("train.alpha", "must be non-negative"));
                }
                _ => {}
            },
            _ => {}
        }
        if self.replicates < 1 {
            return Err(invalid("replicates", "must be at least 1"));
        }
        Ok(())
    }
}

fn parse(v: Value) -> CliResult<ExperimentConfig> {
    serde_json::from_value(v).map_err(|e| CliError::validation(e.to_string()))
}

/// First key present in `raw` but absent after a parse/serialize round trip.
fn unknown_field(raw: &Value, canonical: &Value, prefix: &str) -> Option<String> {
    let (Value::Object(r), Value::Object(c)) = (raw, canonical) else {
        return None;
    };
    for (k, v) in r {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match c.get(k) {
            None => return Some(path),
            Some(cv) => {
                if let Some(f) = unknown_field(v, cv, &path) {
                    return Some(f);
                }
            }
        }
    }
    None
}

/// Applies `a.b.c=value`. The path must already exist; `value` is read as JSON,
/// falling back to a plain string.
pub fn apply_override(root: &mut Value, assignment: &str) -> CliResult<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::validation(format!("override `{assignment}` is not key=value")))?;
    let mut node = &mut *root;
    for key in path.split('.') {
        node = node
            .as_object_mut()
            .and_then(|o| o.get_mut(key))
            .ok_or_else(|| invalid(path, "unknown field"))?;
    }
    *node = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok(())
}
