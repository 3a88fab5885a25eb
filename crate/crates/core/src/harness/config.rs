//! Line-oriented experiment configuration.
//!
//! Config files are `key = value` lines with `#` comments and dotted keys:
//!
//! ```text
//! # three-class synthetic run
//! experiment.runs = 10
//! dataset.source  = motif
//! model.backbone  = gin
//! mixup.alignment = learned
//! mixup.alpha     = 0.2
//! ```
//!
//! Every key is checked: unknown keys, keys that do not apply to the
//! chosen dataset source, and unparsable values are all rejected by name.
//! Omitted keys fall back to documented defaults; learning rate, epoch
//! count, and batch sizes default per dataset (see [`classifier_defaults`]
//! and [`matcher_defaults`]).

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use super::HarnessError;
use crate::gnn::{Backbone, GnnConfig, Readout};
use crate::graph::{BaseKind, FeatureScheme, MotifConfig, MotifKind};
use crate::matcher::{MatcherConfig, MatcherTrainConfig, Normalizer};
use crate::mixup::{Alignment, MixupConfig};
use crate::numerics::{Metric, MixRatioSpec, RangeMode};

/// Default α sweep grid.
pub const DEFAULT_ALPHA_GRID: [f64; 7] = [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0];

/// Parses config text into a raw key→value map. Syntax only; key names
/// are checked later by [`ExperimentConfig::from_map`].
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, HarnessError> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(HarnessError::ConfigSyntax {
                line: idx + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            });
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(HarnessError::ConfigSyntax {
                line: idx + 1,
                msg: "empty key".into(),
            });
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(HarnessError::ConfigSyntax {
                line: idx + 1,
                msg: format!("duplicate key `{key}`"),
            });
        }
    }
    Ok(map)
}

/// Where the experiment's graphs come from.
#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSource {
    /// Flat-file dataset directory (`dir/name_*.txt`).
    TuDataset { dir: PathBuf, name: String },
    /// Synthetic motif-classification dataset, generated in memory.
    Motif(MotifConfig),
}

impl DatasetSource {
    pub fn name(&self) -> &str {
        match self {
            DatasetSource::TuDataset { name, .. } => name,
            DatasetSource::Motif(_) => "MOTIF",
        }
    }
}

/// Classifier optimization settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainSettings {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

/// Benchmark-specific classifier defaults (learning rate, epochs, batch
/// size); unknown datasets get the IMDB-style settings.
pub fn classifier_defaults(dataset: &str) -> TrainSettings {
    let (lr, epochs, batch_size) = match dataset {
        "NCI1" => (0.01, 500, 256),
        "REDDIT-BINARY" | "REDDIT-B" | "REDDIT-MULTI-5K" | "REDDIT-M5" => (0.01, 500, 16),
        // IMDB-BINARY, IMDB-MULTI, PROTEINS, and everything else.
        _ => (0.001, 300, 256),
    };
    TrainSettings {
        lr,
        epochs,
        batch_size,
    }
}

/// Benchmark-specific matcher defaults (depth and triplet batch size).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatcherDefaults {
    pub layers: usize,
    pub batch_size: usize,
}

pub fn matcher_defaults(dataset: &str) -> MatcherDefaults {
    let (layers, batch_size) = match dataset {
        "IMDB-BINARY" | "IMDB-B" => (6, 256),
        "REDDIT-BINARY" | "REDDIT-B" | "REDDIT-MULTI-5K" | "REDDIT-M5" => (4, 8),
        // PROTEINS, NCI1, IMDB-MULTI, and everything else.
        _ => (5, 256),
    };
    MatcherDefaults { layers, batch_size }
}

/// A complete, declarative experiment description.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub runs: usize,
    pub seed: u64,
    pub dataset: DatasetSource,
    /// Featurization for datasets without node attributes.
    pub features: FeatureScheme,
    pub split: (f64, f64, f64),
    pub corrupt_ratio: f64,
    pub backbone: Backbone,
    pub model_layers: usize,
    pub model_hidden: usize,
    pub readout: Readout,
    /// `None` falls back to [`classifier_defaults`] for the dataset.
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    /// `None` = vanilla training (no augmentation).
    pub alignment: Option<Alignment>,
    pub alpha: f64,
    /// When set, the experiment is repeated per α and the summary gets
    /// one row per value.
    pub alpha_sweep: Option<Vec<f64>>,
    pub range_mode: RangeMode,
    pub normalizer: Normalizer,
    pub same_class_only: bool,
    /// Pre-trained matcher; when absent, learned alignment trains one
    /// per run on that run's training split.
    pub matcher_checkpoint: Option<PathBuf>,
    pub matcher_layers: Option<usize>,
    pub matcher_hidden: usize,
    pub matcher_epochs: usize,
    pub matcher_lr: f64,
    pub matcher_batch_size: Option<usize>,
    pub matcher_margin: f64,
    pub matcher_metric: Metric,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            runs: 10,
            seed: 0,
            dataset: DatasetSource::Motif(MotifConfig::default()),
            features: FeatureScheme::Constant,
            split: (0.8, 0.1, 0.1),
            corrupt_ratio: 0.0,
            backbone: Backbone::Gcn,
            model_layers: 4,
            model_hidden: 32,
            readout: Readout::Mean,
            lr: None,
            epochs: None,
            batch_size: None,
            alignment: None,
            alpha: 1.0,
            alpha_sweep: None,
            range_mode: RangeMode::Half,
            normalizer: Normalizer::Softmax,
            same_class_only: false,
            matcher_checkpoint: None,
            matcher_layers: None,
            matcher_hidden: 256,
            matcher_epochs: 500,
            matcher_lr: 0.001,
            matcher_batch_size: None,
            matcher_margin: 1.0,
            matcher_metric: Metric::Cosine,
        }
    }
}

fn take_parsed<T>(
    rest: &mut BTreeMap<String, String>,
    key: &'static str,
) -> Result<Option<T>, HarnessError>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    match rest.remove(key) {
        None => Ok(None),
        Some(v) => v.parse().map(Some).map_err(|e: T::Err| {
            HarnessError::BadValue {
                key: key.into(),
                msg: e.to_string(),
            }
        }),
    }
}

/// Removes `key` and parses it as a comma-separated list of `T`.
fn take_list<T>(
    rest: &mut BTreeMap<String, String>,
    key: &'static str,
) -> Result<Option<Vec<T>>, HarnessError>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    let Some(raw) = rest.remove(key) else {
        return Ok(None);
    };
    let mut out = Vec::new();
    for part in raw.split(',') {
        let part = part.trim();
        if part.is_empty() {
            return Err(HarnessError::BadValue {
                key: key.into(),
                msg: "empty list entry".into(),
            });
        }
        out.push(part.parse::<T>().map_err(|e: T::Err| HarnessError::BadValue {
            key: key.into(),
            msg: e.to_string(),
        })?);
    }
    Ok(Some(out))
}

fn reject_inapplicable(
    present: &[(&'static str, bool)],
    source: &str,
) -> Result<(), HarnessError> {
    for &(key, was_set) in present {
        if was_set {
            return Err(HarnessError::BadValue {
                key: key.into(),
                msg: format!("not applicable when dataset.source = {source}"),
            });
        }
    }
    Ok(())
}

impl ExperimentConfig {
    /// Parses and validates a config file's text.
    pub fn from_text(text: &str) -> Result<Self, HarnessError> {
        Self::from_map(&parse_config_text(text)?)
    }

    /// Builds a config from a raw key→value map, rejecting unknown keys
    /// by name and validating the result.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, HarnessError> {
        let mut rest = map.clone();
        let mut cfg = Self::default();

        if let Some(v) = rest.remove("experiment.name") {
            cfg.name = v;
        }
        if let Some(v) = take_parsed(&mut rest, "experiment.runs")? {
            cfg.runs = v;
        }
        if let Some(v) = take_parsed(&mut rest, "experiment.seed")? {
            cfg.seed = v;
        }

        let source = rest
            .remove("dataset.source")
            .unwrap_or_else(|| "motif".into());
        let path = rest.remove("dataset.path");
        let tu_name = rest.remove("dataset.name");
        let count_per_class = take_parsed::<usize>(&mut rest, "dataset.motif.count_per_class")?;
        let base_min = take_parsed::<usize>(&mut rest, "dataset.motif.base_min")?;
        let base_max = take_parsed::<usize>(&mut rest, "dataset.motif.base_max")?;
        let motif_seed = take_parsed::<u64>(&mut rest, "dataset.motif.seed")?;
        let motif_kinds = take_list::<MotifKind>(&mut rest, "dataset.motif.motifs")?;
        let base_kinds = take_list::<BaseKind>(&mut rest, "dataset.motif.bases")?;
        cfg.dataset = match source.as_str() {
            "tudataset" => {
                reject_inapplicable(
                    &[
                        ("dataset.motif.count_per_class", count_per_class.is_some()),
                        ("dataset.motif.base_min", base_min.is_some()),
                        ("dataset.motif.base_max", base_max.is_some()),
                        ("dataset.motif.seed", motif_seed.is_some()),
                        ("dataset.motif.motifs", motif_kinds.is_some()),
                        ("dataset.motif.bases", base_kinds.is_some()),
                    ],
                    "tudataset",
                )?;
                DatasetSource::TuDataset {
                    dir: PathBuf::from(path.ok_or(HarnessError::MissingKey {
                        key: "dataset.path",
                        why: "required when dataset.source = tudataset",
                    })?),
                    name: tu_name.ok_or(HarnessError::MissingKey {
                        key: "dataset.name",
                        why: "required when dataset.source = tudataset",
                    })?,
                }
            }
            "motif" => {
                reject_inapplicable(
                    &[
                        ("dataset.path", path.is_some()),
                        ("dataset.name", tu_name.is_some()),
                    ],
                    "motif",
                )?;
                let mut mc = MotifConfig::default();
                if let Some(v) = count_per_class {
                    mc.count_per_class = v;
                }
                if let Some(v) = base_min {
                    mc.base_size_min = v;
                }
                if let Some(v) = base_max {
                    mc.base_size_max = v;
                }
                if let Some(v) = motif_seed {
                    mc.seed = v;
                }
                if let Some(v) = motif_kinds {
                    mc.motifs = v;
                }
                if let Some(v) = base_kinds {
                    mc.bases = v;
                }
                DatasetSource::Motif(mc)
            }
            other => {
                return Err(HarnessError::BadValue {
                    key: "dataset.source".into(),
                    msg: format!("unknown source `{other}` (expected tudataset, motif)"),
                })
            }
        };

        if let Some(v) = take_parsed::<FeatureScheme>(&mut rest, "dataset.features")? {
            cfg.features = v;
        }
        if let Some(cap) = take_parsed::<usize>(&mut rest, "dataset.degree_cap")? {
            match cfg.features {
                FeatureScheme::DegreeOnehot { .. } => {
                    cfg.features = FeatureScheme::DegreeOnehot { cap };
                }
                FeatureScheme::Constant => {
                    return Err(HarnessError::BadValue {
                        key: "dataset.degree_cap".into(),
                        msg: "only applies to dataset.features = degree-onehot".into(),
                    })
                }
            }
        }

        if let Some(v) = take_parsed(&mut rest, "split.train")? {
            cfg.split.0 = v;
        }
        if let Some(v) = take_parsed(&mut rest, "split.val")? {
            cfg.split.1 = v;
        }
        if let Some(v) = take_parsed(&mut rest, "split.test")? {
            cfg.split.2 = v;
        }
        if let Some(v) = take_parsed(&mut rest, "corruption.ratio")? {
            cfg.corrupt_ratio = v;
        }

        if let Some(v) = take_parsed(&mut rest, "model.backbone")? {
            cfg.backbone = v;
        }
        if let Some(v) = take_parsed(&mut rest, "model.layers")? {
            cfg.model_layers = v;
        }
        if let Some(v) = take_parsed(&mut rest, "model.hidden")? {
            cfg.model_hidden = v;
        }
        if let Some(v) = take_parsed(&mut rest, "model.readout")? {
            cfg.readout = v;
        }

        cfg.lr = take_parsed(&mut rest, "train.lr")?;
        cfg.epochs = take_parsed(&mut rest, "train.epochs")?;
        cfg.batch_size = take_parsed(&mut rest, "train.batch_size")?;

        if let Some(v) = rest.remove("mixup.alignment") {
            cfg.alignment = match v.as_str() {
                "none" => None,
                other => Some(other.parse().map_err(|e: crate::mixup::MixupError| {
                    HarnessError::BadValue {
                        key: "mixup.alignment".into(),
                        msg: e.to_string(),
                    }
                })?),
            };
        }
        if let Some(v) = take_parsed(&mut rest, "mixup.alpha")? {
            cfg.alpha = v;
        }
        if let Some(v) = rest.remove("mixup.alpha_sweep") {
            let sweep = if v == "default" {
                DEFAULT_ALPHA_GRID.to_vec()
            } else {
                v.split(',')
                    .map(|t| t.trim().parse::<f64>())
                    .collect::<Result<Vec<f64>, _>>()
                    .map_err(|e| HarnessError::BadValue {
                        key: "mixup.alpha_sweep".into(),
                        msg: e.to_string(),
                    })?
            };
            cfg.alpha_sweep = Some(sweep);
        }
        if let Some(v) = take_parsed(&mut rest, "mixup.range")? {
            cfg.range_mode = v;
        }
        if let Some(v) = take_parsed(&mut rest, "mixup.normalizer")? {
            cfg.normalizer = v;
        }
        if let Some(v) = take_parsed(&mut rest, "mixup.same_class_only")? {
            cfg.same_class_only = v;
        }

        cfg.matcher_checkpoint = rest.remove("matcher.checkpoint").map(PathBuf::from);
        cfg.matcher_layers = take_parsed(&mut rest, "matcher.layers")?;
        if let Some(v) = take_parsed(&mut rest, "matcher.hidden")? {
            cfg.matcher_hidden = v;
        }
        if let Some(v) = take_parsed(&mut rest, "matcher.epochs")? {
            cfg.matcher_epochs = v;
        }
        if let Some(v) = take_parsed(&mut rest, "matcher.lr")? {
            cfg.matcher_lr = v;
        }
        cfg.matcher_batch_size = take_parsed(&mut rest, "matcher.batch_size")?;
        if let Some(v) = take_parsed(&mut rest, "matcher.margin")? {
            cfg.matcher_margin = v;
        }
        if let Some(v) = take_parsed(&mut rest, "matcher.metric")? {
            cfg.matcher_metric = v;
        }

        if let Some(key) = rest.keys().next() {
            return Err(HarnessError::UnknownKey { key: key.clone() });
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |reason: &str| {
            Err(HarnessError::BadSettings {
                reason: reason.to_string(),
            })
        };
        if self.runs < 1 {
            return bad("experiment.runs must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.corrupt_ratio) {
            return bad("corruption.ratio must lie in [0,1]");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("mixup.alpha must be positive");
        }
        if let Some(sweep) = &self.alpha_sweep {
            if sweep.is_empty() {
                return bad("mixup.alpha_sweep must not be empty");
            }
            if sweep.iter().any(|a| !(a > &0.0 && a.is_finite())) {
                return bad("mixup.alpha_sweep entries must be positive");
            }
        }
        if let Some(lr) = self.lr {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad("train.lr must be positive");
            }
        }
        if self.epochs == Some(0) {
            return bad("train.epochs must be at least 1");
        }
        if self.batch_size == Some(0) {
            return bad("train.batch_size must be at least 1");
        }
        if let Some(mc) = match &self.dataset {
            DatasetSource::Motif(mc) => Some(mc),
            DatasetSource::TuDataset { .. } => None,
        } {
            mc.validate().map_err(crate::graph::GraphError::from)?;
        }
        Ok(())
    }

    pub fn dataset_name(&self) -> &str {
        self.dataset.name()
    }

    /// Learning rate / epochs / batch size, with per-dataset defaults
    /// filling any unset field.
    pub fn train_settings(&self) -> TrainSettings {
        let d = classifier_defaults(self.dataset_name());
        TrainSettings {
            lr: self.lr.unwrap_or(d.lr),
            epochs: self.epochs.unwrap_or(d.epochs),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
        }
    }

    pub fn gnn_config(&self, num_classes: usize, feature_dim: usize) -> GnnConfig {
        GnnConfig {
            backbone: self.backbone,
            num_layers: self.model_layers,
            hidden: self.model_hidden,
            readout: self.readout,
            num_classes,
            feature_dim,
        }
    }

    pub fn matcher_config(&self, feature_dim: usize) -> MatcherConfig {
        let d = matcher_defaults(self.dataset_name());
        MatcherConfig {
            num_layers: self.matcher_layers.unwrap_or(d.layers),
            hidden: self.matcher_hidden,
            feature_dim,
            metric: self.matcher_metric,
            normalizer: self.normalizer,
        }
    }

    pub fn matcher_train_config(&self, seed: u64) -> MatcherTrainConfig {
        let d = matcher_defaults(self.dataset_name());
        MatcherTrainConfig {
            margin: self.matcher_margin,
            lr: self.matcher_lr,
            epochs: self.matcher_epochs,
            batch_size: self.matcher_batch_size.unwrap_or(d.batch_size),
            seed,
        }
    }

    /// Mixup settings for one α value. Fails on vanilla configs.
    pub fn mixup_config(&self, alpha: f64, seed: u64) -> Result<MixupConfig, HarnessError> {
        let alignment = self.alignment.ok_or(HarnessError::BadSettings {
            reason: "mixup.alignment = none: no augmentation to configure".into(),
        })?;
        Ok(MixupConfig {
            ratio_spec: MixRatioSpec::new(alpha, self.range_mode),
            alignment,
            same_class_only: self.same_class_only,
            normalizer: self.normalizer,
            seed,
        })
    }
}
