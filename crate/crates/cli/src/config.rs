//! Experiment config files (TOML).
//!
//! ```toml
//! output_dir = "results/ablation"
//! seed = 7
//!
//! [dataset]
//! kind = "synthetic"
//! n_classes = 10
//! input_dim = 20
//! samples_per_class = 100
//!
//! [partition]
//! n_clients = 10
//! classes_per_client = 3
//!
//! [scenario]
//! kind = "ablation"
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use fedweight::aggregation::DEFAULT_EPSILON;
use fedweight::data::{self, SamplesPerClass, SyntheticSpec};
use fedweight::orchestrator::{FederationConfig, ScenarioSpec};
use fedweight::partition::{PartitionSpec, SamplesLaw, DEFAULT_TRAIN_FRACTION};
use fedweight::{AggregationStrategy, Dataset, Execution, ModelKind, ModelSpec, StrategyKind, TrainConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub struct ConfigError {
    pub file: PathBuf,
    /// Dotted key path, e.g. `federation.participation_rate`.
    pub key: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.file.display())?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
        }
        if !self.key.is_empty() {
            write!(f, ": {}", self.key)?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSource {
    Synthetic {
        n_classes: usize,
        input_dim: usize,
        samples_per_class: SamplesPerClass,
        #[serde(default = "one")]
        cluster_spread: f64,
        #[serde(default = "one")]
        class_separation: f64,
        /// Defaults to the experiment seed.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        #[serde(default = "ten")]
        n_classes: usize,
    },
    Csv {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_classes: Option<usize>,
    },
}

fn one() -> f64 {
    1.0
}

fn ten() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSection {
    pub n_clients: usize,
    /// Defaults to every class (an iid split).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes_per_client: Option<usize>,
    #[serde(default = "balanced")]
    pub samples_law: SamplesLaw,
    #[serde(default = "train_fraction")]
    pub train_fraction: f64,
}

fn balanced() -> SamplesLaw {
    SamplesLaw::Balanced
}

fn train_fraction() -> f64 {
    DEFAULT_TRAIN_FRACTION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "logistic")]
    pub kind: ModelKind,
    #[serde(default = "hidden_dim")]
    pub hidden_dim: usize,
}

fn logistic() -> ModelKind {
    ModelKind::Logistic
}

fn hidden_dim() -> usize {
    32
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { kind: logistic(), hidden_dim: hidden_dim() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "batch_size")]
    pub batch_size: usize,
    #[serde(default = "local_iterations")]
    pub local_iterations: usize,
}

fn learning_rate() -> f64 {
    0.05
}

fn batch_size() -> usize {
    128
}

fn local_iterations() -> usize {
    1
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            learning_rate: learning_rate(),
            batch_size: batch_size(),
            local_iterations: local_iterations(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FederationSection {
    #[serde(default = "rounds")]
    pub rounds: usize,
    #[serde(default = "participation_rate")]
    pub participation_rate: f64,
    #[serde(default = "strategy")]
    pub strategy: StrategyKind,
    #[serde(default = "epsilon")]
    pub epsilon: f64,
    #[serde(default = "eval_stride")]
    pub eval_stride: usize,
    #[serde(default)]
    pub execution: Execution,
    #[serde(default)]
    pub record_wall_time: bool,
}

fn rounds() -> usize {
    100
}

fn participation_rate() -> f64 {
    1.0
}

fn strategy() -> StrategyKind {
    StrategyKind::Ida
}

fn epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn eval_stride() -> usize {
    1
}

impl Default for FederationSection {
    fn default() -> Self {
        FederationSection {
            rounds: rounds(),
            participation_rate: participation_rate(),
            strategy: strategy(),
            epsilon: epsilon(),
            eval_stride: eval_stride(),
            execution: Execution::default(),
            record_wall_time: false,
        }
    }
}

/// A fully defaulted and validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    pub dataset: DatasetSource,
    pub partition: PartitionSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub federation: FederationSection,
    #[serde(default = "single")]
    pub scenario: ScenarioSpec,
}

fn output_dir() -> PathBuf {
    PathBuf::from("results")
}

fn single() -> ScenarioSpec {
    ScenarioSpec::Single
}

impl ExperimentConfig {
    pub fn n_classes(&self) -> Option<usize> {
        match &self.dataset {
            DatasetSource::Synthetic { n_classes, .. } | DatasetSource::Idx { n_classes, .. } => Some(*n_classes),
            DatasetSource::Csv { n_classes, .. } => *n_classes,
        }
    }

    pub fn load_dataset(&self) -> fedweight::Result<Dataset> {
        match &self.dataset {
            DatasetSource::Synthetic {
                n_classes,
                input_dim,
                samples_per_class,
                cluster_spread,
                class_separation,
                seed,
            } => data::generate_synthetic(&SyntheticSpec {
                n_classes: *n_classes,
                input_dim: *input_dim,
                samples_per_class: samples_per_class.clone(),
                cluster_spread: *cluster_spread,
                class_separation: *class_separation,
                seed: seed.unwrap_or(self.seed),
            }),
            DatasetSource::Idx { images, labels, n_classes } => data::load_idx(images, labels, *n_classes),
            DatasetSource::Csv { path, n_classes } => data::load_csv(path, *n_classes),
        }
    }

    pub fn partition_spec(&self, n_classes: usize) -> PartitionSpec {
        PartitionSpec {
            n_clients: self.partition.n_clients,
            classes_per_client: self.partition.classes_per_client.unwrap_or(n_classes),
            samples_law: self.partition.samples_law,
            train_fraction: self.partition.train_fraction,
            seed: self.seed,
        }
    }

    pub fn federation_config(&self, input_dim: usize, n_classes: usize) -> FederationConfig {
        let model = match self.model.kind {
            ModelKind::Logistic => ModelSpec::logistic(input_dim, n_classes, self.seed),
            ModelKind::Mlp => ModelSpec::mlp(input_dim, self.model.hidden_dim, n_classes, self.seed),
        };
        let train = TrainConfig {
            learning_rate: self.train.learning_rate,
            batch_size: self.train.batch_size,
            local_iterations: self.train.local_iterations,
            seed: self.seed,
        };
        let f = &self.federation;
        FederationConfig {
            rounds: f.rounds,
            participation_rate: f.participation_rate,
            strategy: AggregationStrategy { kind: f.strategy, epsilon: f.epsilon },
            train,
            model,
            seed: self.seed,
            eval_stride: f.eval_stride,
            record_wall_time: f.record_wall_time,
            execution: f.execution,
        }
    }

    /// Checks every constraint that does not need the data loaded. Returns the
    /// offending key path with the message.
    pub fn validate(&self) -> Result<(), (String, String)> {
        let core = |section: &str, e: fedweight::Error| match e {
            fedweight::Error::Invalid { field, reason } if field.contains('.') => (field.to_string(), reason),
            fedweight::Error::Invalid { field, reason } => (format!("{section}.{field}"), reason),
            other => (section.to_string(), other.to_string()),
        };
        match &self.dataset {
            DatasetSource::Synthetic { n_classes, input_dim, samples_per_class, cluster_spread, class_separation, .. } => {
                SyntheticSpec {
                    n_classes: *n_classes,
                    input_dim: *input_dim,
                    samples_per_class: samples_per_class.clone(),
                    cluster_spread: *cluster_spread,
                    class_separation: *class_separation,
                    seed: 0,
                }
                .validate()
                .map_err(|e| core("dataset", e))?;
            }
            DatasetSource::Idx { images, labels, n_classes } => {
                for (key, p) in [("dataset.images", images), ("dataset.labels", labels)] {
                    if !p.is_file() {
                        return Err((key.into(), format!("file {} does not exist", p.display())));
                    }
                }
                if *n_classes < 2 {
                    return Err(("dataset.n_classes".into(), "must be at least 2".into()));
                }
            }
            DatasetSource::Csv { path, n_classes } => {
                if !path.is_file() {
                    return Err(("dataset.path".into(), format!("file {} does not exist", path.display())));
                }
                if matches!(n_classes, Some(n) if *n < 2) {
                    return Err(("dataset.n_classes".into(), "must be at least 2".into()));
                }
            }
        }
        if let Some(n_classes) = self.n_classes() {
            self.partition_spec(n_classes).validate(n_classes).map_err(|e| core("partition", e))?;
            let fed = self.federation_config(1, n_classes);
            fed.validate().map_err(|e| core("federation", e))?;
        } else {
            let fed = self.federation_config(1, 2);
            fed.validate().map_err(|e| core("federation", e))?;
        }
        self.scenario.validate().map_err(|e| core("scenario", e))?;
        if self.output_dir.exists() && !self.output_dir.is_dir() {
            return Err((
                "output_dir".into(),
                format!("{} exists and is not a directory", self.output_dir.display()),
            ));
        }
        Ok(())
    }

    /// The resolved config, suitable for reproducing the run.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Finds the line defining a dotted key, tracking `[table]` headers.
fn line_of_key(text: &str, key: &str) -> Option<usize> {
    let (table, leaf) = match key.rsplit_once('.') {
        Some((t, l)) => (t, l),
        None => ("", key),
    };
    let mut current = String::new();
    let mut table_line = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = header.trim().to_string();
            if current == key {
                table_line = Some(i + 1);
            }
            continue;
        }
        if let Some((k, _)) = line.split_once('=') {
            let k = k.trim().trim_matches('"');
            let full = if current.is_empty() { k.to_string() } else { format!("{current}.{k}") };
            if full == key || (current == table && k == leaf) {
                return Some(i + 1);
            }
        }
    }
    table_line.or_else(|| {
        // Fall back to the enclosing table.
        key.rsplit_once('.').and_then(|(parent, _)| line_of_key(text, parent))
    })
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

/// Parses and validates `text` as if read from `path`. Relative dataset
/// paths resolve against the config file's directory.
pub fn parse_config_str(text: &str, path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let fail = |key: String, line: Option<usize>, message: String| ConfigError {
        file: path.to_path_buf(),
        key,
        line,
        message,
    };
    let de = toml::Deserializer::parse(text).map_err(|e| {
        let line = e.span().map(|s| line_of_offset(text, s.start));
        fail(String::new(), line, e.message().to_string())
    })?;
    let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        let key = if key == "." { String::new() } else { key };
        let inner = e.into_inner();
        let line = inner
            .span()
            .map(|s| line_of_offset(text, s.start))
            .or_else(|| line_of_key(text, &key));
        fail(key, line, inner.message().trim().to_string())
    })?;

    let base = path.parent().unwrap_or(Path::new("."));
    match &mut cfg.dataset {
        DatasetSource::Idx { images, labels, .. } => {
            resolve(base, images);
            resolve(base, labels);
        }
        DatasetSource::Csv { path, .. } => resolve(base, path),
        DatasetSource::Synthetic { .. } => {}
    }
    cfg.validate().map_err(|(key, message)| {
        let line = line_of_key(text, &key);
        fail(key, line, message)
    })?;
    Ok(cfg)
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig, ConfigError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| ConfigError {
        file: path.to_path_buf(),
        key: String::new(),
        line: None,
        message: e.to_string(),
    })?;
    parse_config_str(&text, path)
}
