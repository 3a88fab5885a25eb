//! Experiment harness: classifier training with optional augmentation,
//! evaluation, and repeat-run orchestration with metrics emission.
//!
//! [`run_experiment`] executes a declarative [`ExperimentConfig`]: for
//! each run it splits the dataset, optionally corrupts training labels,
//! optionally trains (or loads) a matcher, trains a classifier with the
//! configured augmentation, and evaluates the selected model on the test
//! split. Two files land in the output directory:
//!
//! - `metrics.jsonl` — one JSON [`MetricsRecord`] per line, per epoch.
//! - `summary.csv` — header `experiment,dataset,backbone,augmentation,`
//!   `alpha,mean_acc,std_acc,runs`, one row per configuration (α sweeps
//!   get one row per α).
//!
//! Everything is deterministic: the same config produces byte-identical
//! output files.

pub mod config;

pub use config::{
    classifier_defaults, matcher_defaults, parse_config_text, DatasetSource, ExperimentConfig,
    MatcherDefaults, TrainSettings, DEFAULT_ALPHA_GRID,
};

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checkpoint::{load_matcher, CheckpointError};
use crate::gnn::{
    classifier_forward, classifier_loss_record, soft_cross_entropy, GnnConfig, GnnError, GnnParams,
};
use crate::graph::{
    corrupt_labels, featurize_unattributed, gen_motif_dataset, load_tudataset, split_dataset,
    GraphError,
};
use crate::matcher::{train_matcher, MatcherConfig, MatcherError, MatcherParams};
use crate::mixup::{batch_mixup_with_rng, Alignment, MixupConfig, MixupError};
use crate::numerics::NumericsError;
use crate::optim::Adam;
use crate::{Graph, GraphDataset};

#[derive(Error, Debug)]
pub enum HarnessError {
    #[error("config line {line}: {msg}")]
    ConfigSyntax { line: usize, msg: String },
    #[error("unknown config key `{key}`")]
    UnknownKey { key: String },
    #[error("config key `{key}`: {msg}")]
    BadValue { key: String, msg: String },
    #[error("missing config key `{key}`: {why}")]
    MissingKey {
        key: &'static str,
        why: &'static str,
    },
    #[error("bad settings: {reason}")]
    BadSettings { reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("metrics serialization: {0}")]
    Serialize(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error(transparent)]
    Matcher(#[from] MatcherError),
    #[error(transparent)]
    Mixup(#[from] MixupError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// One epoch of one run. `train_loss` is the mean optimization loss over
/// the epoch's (possibly augmented) batches; `val_acc` is the selection
/// signal; test columns are reported for curves only and never influence
/// training. `test_auc` is present for binary problems, `alpha` when
/// augmentation is active.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub run: usize,
    pub epoch: usize,
    pub train_loss: f64,
    pub val_acc: f64,
    pub test_loss: f64,
    pub test_acc: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub test_auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<f64>,
}

/// Aggregate metrics of a model on a dataset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalMetrics {
    /// Mean soft cross-entropy.
    pub loss: f64,
    /// Fraction of graphs whose argmax prediction hits the hard label.
    pub accuracy: f64,
    /// Rank-statistic ROC-AUC; present only for binary problems with both
    /// classes in the data.
    pub auc: Option<f64>,
}

/// Area under the ROC curve by the rank statistic (midranks for ties).
/// `None` when either class is absent.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), positive.len());
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = scores.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].partial_cmp(&scores[j]).expect("finite scores"));
    let mut rank_sum_pos = 0.0;
    let mut k = 0;
    while k < order.len() {
        let mut tie_end = k + 1;
        while tie_end < order.len() && scores[order[tie_end]] == scores[order[k]] {
            tie_end += 1;
        }
        // ranks are 1-based; tied scores share the midrank
        let midrank = (k + 1 + tie_end) as f64 / 2.0;
        for &idx in &order[k..tie_end] {
            if positive[idx] {
                rank_sum_pos += midrank;
            }
        }
        k = tie_end;
    }
    let n_pos = n_pos as f64;
    Some((rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg as f64))
}

/// Evaluates a classifier on every graph of a dataset.
pub fn evaluate(
    params: &GnnParams,
    cfg: &GnnConfig,
    ds: &GraphDataset,
) -> Result<EvalMetrics, HarnessError> {
    if ds.is_empty() {
        return Err(GraphError::EmptyDataset {
            name: ds.name().to_string(),
        }
        .into());
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    let mut scores = Vec::with_capacity(ds.len());
    let mut positive = Vec::with_capacity(ds.len());
    for g in ds.graphs() {
        let p = classifier_forward(g, params, cfg)?;
        loss += soft_cross_entropy(&p, g.label());
        let pred = p
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite probabilities"))
            .map(|(c, _)| c)
            .expect("at least one class");
        if pred == g.hard_label() {
            correct += 1;
        }
        if ds.num_classes() == 2 {
            scores.push(p[1]);
            positive.push(g.hard_label() == 1);
        }
    }
    let auc = if ds.num_classes() == 2 {
        roc_auc(&scores, &positive)
    } else {
        None
    };
    Ok(EvalMetrics {
        loss: loss / ds.len() as f64,
        accuracy: correct as f64 / ds.len() as f64,
        auc,
    })
}

/// Stateful batch augmenter: applies the configured mixing to each batch
/// it is handed, drawing fresh shuffles and mix ratios from its own RNG
/// stream so every epoch mixes differently (yet reproducibly).
pub struct BatchAugmenter {
    matcher: Option<(MatcherParams, MatcherConfig)>,
    cfg: MixupConfig,
    rng: ChaCha8Rng,
}

impl BatchAugmenter {
    pub fn new(
        cfg: MixupConfig,
        matcher: Option<(MatcherParams, MatcherConfig)>,
    ) -> Result<Self, HarnessError> {
        if cfg.alignment == Alignment::Learned && matcher.is_none() {
            return Err(MixupError::MatcherRequired.into());
        }
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Ok(Self { matcher, cfg, rng })
    }

    pub fn augment(&mut self, batch: &[Graph]) -> Result<Vec<Graph>, MixupError> {
        let matcher = self.matcher.as_ref().map(|(p, c)| (p, c));
        batch_mixup_with_rng(batch, matcher, &self.cfg, &mut self.rng)
    }
}

/// Result of one training run: the selected parameters, per-epoch metric
/// rows, and the epoch the selection points at.
#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub params: GnnParams,
    pub records: Vec<MetricsRecord>,
    pub best_epoch: usize,
}

/// Trains a classifier by mini-batch Adam on the soft cross-entropy.
/// When `augmenter` is present every batch is replaced by its mixed
/// counterpart before the loss. Model selection: parameters at the best
/// validation accuracy (earliest epoch wins ties). The test split is
/// evaluated per epoch purely for reporting.
pub fn train_classifier(
    train: &GraphDataset,
    val: &GraphDataset,
    test: &GraphDataset,
    gnn_cfg: &GnnConfig,
    settings: &TrainSettings,
    init_seed: u64,
    mut augmenter: Option<&mut BatchAugmenter>,
) -> Result<TrainOutput, HarnessError> {
    if train.is_empty() {
        return Err(GraphError::EmptyDataset {
            name: train.name().to_string(),
        }
        .into());
    }
    if settings.epochs < 1 {
        return Err(HarnessError::BadSettings {
            reason: "epochs must be at least 1".into(),
        });
    }
    if settings.batch_size < 1 {
        return Err(HarnessError::BadSettings {
            reason: "batch size must be at least 1".into(),
        });
    }
    if !(settings.lr > 0.0 && settings.lr.is_finite()) {
        return Err(HarnessError::BadSettings {
            reason: "learning rate must be positive".into(),
        });
    }
    for ds in [val, test] {
        if ds.feature_dim() != train.feature_dim() || ds.num_classes() != train.num_classes() {
            return Err(HarnessError::BadSettings {
                reason: "train/val/test splits disagree on feature width or class count".into(),
            });
        }
    }

    let mut named = GnnParams::init(gnn_cfg, init_seed)?.to_named();
    let mut adam = Adam::new(settings.lr);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(init_seed);
    let mut records = Vec::with_capacity(settings.epochs);
    let mut best: Option<(f64, GnnParams, usize)> = None;

    for epoch in 0..settings.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut steps = 0usize;
        for chunk in order.chunks(settings.batch_size) {
            let mut batch: Vec<Graph> =
                chunk.iter().map(|&i| train.graph(i).clone()).collect();
            if let Some(aug) = augmenter.as_deref_mut() {
                batch = aug.augment(&batch)?;
            }
            let params = GnnParams::from_named(gnn_cfg, &named)?;
            let rec = classifier_loss_record(&batch, &params, gnn_cfg)?;
            let grads = rec.gradients()?;
            epoch_loss += rec.root_value().expect("loss record has a root");
            steps += 1;
            adam.step(&mut named, &grads);
        }
        let params = GnnParams::from_named(gnn_cfg, &named)?;
        let val_metrics = evaluate(&params, gnn_cfg, val)?;
        let test_metrics = evaluate(&params, gnn_cfg, test)?;
        records.push(MetricsRecord {
            run: 0,
            epoch,
            train_loss: epoch_loss / steps as f64,
            val_acc: val_metrics.accuracy,
            test_loss: test_metrics.loss,
            test_acc: test_metrics.accuracy,
            test_auc: test_metrics.auc,
            alpha: None,
        });
        if best.as_ref().is_none_or(|(acc, _, _)| val_metrics.accuracy > *acc) {
            best = Some((val_metrics.accuracy, params, epoch));
        }
    }
    let (_, params, best_epoch) = best.expect("at least one epoch ran");
    Ok(TrainOutput {
        params,
        records,
        best_epoch,
    })
}

/// Loads (or generates) the configured dataset, featurizing unattributed
/// graphs per the config.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<GraphDataset, HarnessError> {
    let ds = match &cfg.dataset {
        DatasetSource::TuDataset { dir, name } => load_tudataset(dir, name)?,
        DatasetSource::Motif(mc) => gen_motif_dataset(mc)?,
    };
    if ds.feature_dim() == 0 {
        Ok(featurize_unattributed(&ds, cfg.features)?)
    } else {
        Ok(ds)
    }
}

/// One line of `summary.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub experiment: String,
    pub dataset: String,
    pub backbone: String,
    pub augmentation: String,
    pub alpha: Option<f64>,
    pub mean_acc: f64,
    pub std_acc: f64,
    pub runs: usize,
}

pub const SUMMARY_HEADER: &str = "experiment,dataset,backbone,augmentation,alpha,mean_acc,std_acc,runs";

impl SummaryRow {
    pub fn csv_line(&self) -> String {
        let alpha = self.alpha.map(|a| a.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{:.6},{:.6},{}",
            self.experiment,
            self.dataset,
            self.backbone,
            self.augmentation,
            alpha,
            self.mean_acc,
            self.std_acc,
            self.runs
        )
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n−1 denominator); 0 for a single sample.
fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Everything `run_experiment` produced, with the file locations.
#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub rows: Vec<SummaryRow>,
    pub records: Vec<MetricsRecord>,
    pub metrics_path: PathBuf,
    pub summary_path: PathBuf,
}

// Seed-stream offsets: each run derives its sub-seeds from
// `cfg.seed + run` so that independent random consumers never share a
// stream.
const MATCHER_INIT_OFFSET: u64 = 1;
const MATCHER_SAMPLING_OFFSET: u64 = 2;
const MIXER_OFFSET: u64 = 3;

/// Trains a matcher per the experiment's matcher stanza on `train`,
/// deriving disjoint initialization and triplet-sampling seeds from
/// `base_seed`. Returns the trained parameters, their architecture, and
/// the per-step triplet losses.
pub fn train_experiment_matcher(
    cfg: &ExperimentConfig,
    train: &GraphDataset,
    base_seed: u64,
) -> Result<(MatcherParams, MatcherConfig, Vec<f64>), HarnessError> {
    let mcfg = cfg.matcher_config(train.feature_dim());
    let tcfg = cfg.matcher_train_config(base_seed.wrapping_add(MATCHER_SAMPLING_OFFSET));
    let out = train_matcher(
        train,
        &mcfg,
        base_seed.wrapping_add(MATCHER_INIT_OFFSET),
        &tcfg,
    )?;
    Ok((out.params, mcfg, out.step_losses))
}

/// Builds the batch augmenter an experiment run uses, deriving the mixing
/// seed from `base_seed`.
pub fn build_augmenter(
    cfg: &ExperimentConfig,
    alpha: f64,
    matcher: Option<(MatcherParams, MatcherConfig)>,
    base_seed: u64,
) -> Result<BatchAugmenter, HarnessError> {
    let mix_cfg = cfg.mixup_config(alpha, base_seed.wrapping_add(MIXER_OFFSET))?;
    BatchAugmenter::new(mix_cfg, matcher)
}

/// One training run of an experiment: split, optionally corrupt the
/// training labels, set up augmentation (training a matcher on this run's
/// training split unless `checkpointed` supplies one), and train. Records
/// come back stamped with `run` and `alpha`. Pass `alpha: None` for a
/// vanilla (unaugmented) run.
pub fn run_one(
    cfg: &ExperimentConfig,
    ds: &GraphDataset,
    run: usize,
    alpha: Option<f64>,
    checkpointed: Option<&(MatcherParams, MatcherConfig)>,
) -> Result<TrainOutput, HarnessError> {
    let run_seed = cfg.seed.wrapping_add(run as u64);
    let (train, val, test) = split_dataset(ds, cfg.split, run_seed)?;
    let train = if cfg.corrupt_ratio > 0.0 {
        corrupt_labels(&train, cfg.corrupt_ratio, run_seed)?
    } else {
        train
    };
    let gnn_cfg = cfg.gnn_config(ds.num_classes(), ds.feature_dim());
    let settings = cfg.train_settings();
    let mut augmenter = match (cfg.alignment, alpha) {
        (Some(alignment), Some(alpha)) => {
            let matcher = if alignment == Alignment::Learned {
                Some(match checkpointed {
                    Some(pair) => pair.clone(),
                    None => {
                        let (params, mcfg, _) = train_experiment_matcher(cfg, &train, run_seed)?;
                        (params, mcfg)
                    }
                })
            } else {
                None
            };
            Some(build_augmenter(cfg, alpha, matcher, run_seed)?)
        }
        _ => None,
    };
    let mut out = train_classifier(
        &train,
        &val,
        &test,
        &gnn_cfg,
        &settings,
        run_seed,
        augmenter.as_mut(),
    )?;
    for r in &mut out.records {
        r.run = run;
        r.alpha = alpha;
    }
    Ok(out)
}

/// Executes a full experiment and writes `metrics.jsonl` and
/// `summary.csv` into `out_dir` (created if missing).
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<ExperimentReport, HarnessError> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let ds = load_dataset(cfg)?;

    let alphas: Vec<Option<f64>> = match cfg.alignment {
        None => vec![None],
        Some(_) => match &cfg.alpha_sweep {
            Some(sweep) => sweep.iter().copied().map(Some).collect(),
            None => vec![Some(cfg.alpha)],
        },
    };
    // A checkpointed matcher is shared by all runs; otherwise learned
    // alignment trains a fresh matcher per run on that run's train split.
    let checkpointed: Option<(MatcherParams, MatcherConfig)> =
        if cfg.alignment == Some(Alignment::Learned) {
            match &cfg.matcher_checkpoint {
                Some(path) => Some(load_matcher(path)?),
                None => None,
            }
        } else {
            None
        };

    let mut all_records = Vec::new();
    let mut rows = Vec::new();
    for &alpha in &alphas {
        let mut accs = Vec::with_capacity(cfg.runs);
        for run in 0..cfg.runs {
            let out = run_one(cfg, &ds, run, alpha, checkpointed.as_ref())?;
            // The selected parameters reproduce the best epoch's test
            // metrics, so the summary accuracy is that epoch's row.
            accs.push(out.records[out.best_epoch].test_acc);
            all_records.extend(out.records);
        }
        rows.push(SummaryRow {
            experiment: cfg.name.clone(),
            dataset: cfg.dataset_name().to_string(),
            backbone: cfg.backbone.to_string(),
            augmentation: cfg
                .alignment
                .map(|a| a.as_str().to_string())
                .unwrap_or_else(|| "none".into()),
            alpha,
            mean_acc: mean(&accs),
            std_acc: sample_std(&accs),
            runs: cfg.runs,
        });
    }

    let metrics_path = out_dir.join("metrics.jsonl");
    let mut w = std::io::BufWriter::new(
        std::fs::File::create(&metrics_path).map_err(io_err(&metrics_path))?,
    );
    for r in &all_records {
        let line = serde_json::to_string(r).map_err(|e| HarnessError::Serialize(e.to_string()))?;
        writeln!(w, "{line}").map_err(io_err(&metrics_path))?;
    }
    w.flush().map_err(io_err(&metrics_path))?;

    let summary_path = out_dir.join("summary.csv");
    let mut text = String::from(SUMMARY_HEADER);
    text.push('\n');
    for row in &rows {
        text.push_str(&row.csv_line());
        text.push('\n');
    }
    std::fs::write(&summary_path, text).map_err(io_err(&summary_path))?;

    Ok(ExperimentReport {
        rows,
        records: all_records,
        metrics_path,
        summary_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::Backbone;
    use crate::graph::adjacency_from_edges;
    use crate::Matrix;
    use rand::Rng;

    fn labeled(n: usize, edges: &[(usize, usize)], feature: f64, label: Vec<f64>) -> Graph {
        Graph::new(
            adjacency_from_edges(n, edges),
            Matrix::from_elem((n, 1), feature),
            label,
        )
        .unwrap()
    }

    /// Two classes with disjoint constant features: linearly separable.
    fn separable_dataset(per_class: usize) -> GraphDataset {
        let mut graphs = Vec::new();
        for i in 0..per_class {
            let wiggle = i % 3; // vary structure a little
            graphs.push(labeled(
                3,
                &[(0, 1), (1, 2)][..1 + wiggle % 2].as_ref(),
                1.0,
                vec![1.0, 0.0],
            ));
            graphs.push(labeled(3, &[(0, 2)], -1.0, vec![0.0, 1.0]));
        }
        GraphDataset::new("SEP", graphs).unwrap()
    }

    fn tiny_gnn_cfg(ds: &GraphDataset) -> GnnConfig {
        GnnConfig {
            num_layers: 2,
            hidden: 8,
            ..GnnConfig::new(Backbone::Gcn, ds.num_classes(), ds.feature_dim())
        }
    }

    #[test]
    fn auc_extremes_and_midranks() {
        // Perfect separation → 1; reversed → 0.
        let scores = [0.1, 0.2, 0.8, 0.9];
        assert_eq!(
            roc_auc(&scores, &[false, false, true, true]),
            Some(1.0)
        );
        assert_eq!(
            roc_auc(&scores, &[true, true, false, false]),
            Some(0.0)
        );
        // All scores tied → 0.5 by midranks.
        assert_eq!(
            roc_auc(&[0.5, 0.5, 0.5, 0.5], &[true, false, true, false]),
            Some(0.5)
        );
        // Single class → undefined.
        assert_eq!(roc_auc(&scores, &[true, true, true, true]), None);
    }

    #[test]
    fn auc_matches_pairwise_counting_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = rng.random_range(2..30);
            let scores: Vec<f64> = (0..n)
                .map(|_| (rng.random_range(0..6) as f64) / 5.0) // force ties
                .collect();
            let positive: Vec<bool> = (0..n).map(|_| rng.random_range(0.0..1.0) < 0.5).collect();
            let n_pos = positive.iter().filter(|&&p| p).count();
            if n_pos == 0 || n_pos == n {
                continue;
            }
            // P(score_pos > score_neg) + ½·P(tie) over all pairs.
            let mut wins = 0.0;
            let mut pairs = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if positive[i] && !positive[j] {
                        pairs += 1.0;
                        if scores[i] > scores[j] {
                            wins += 1.0;
                        } else if scores[i] == scores[j] {
                            wins += 0.5;
                        }
                    }
                }
            }
            let expect = wins / pairs;
            let got = roc_auc(&scores, &positive).unwrap();
            assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
        }
    }

    #[test]
    fn evaluate_scores_a_perfect_and_a_constant_model() {
        let ds = separable_dataset(10);
        let cfg = tiny_gnn_cfg(&ds);
        let settings = TrainSettings {
            lr: 0.02,
            epochs: 40,
            batch_size: 4,
        };
        let out =
            train_classifier(&ds, &ds, &ds, &cfg, &settings, 0, None).unwrap();
        let m = evaluate(&out.params, &cfg, &ds).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.auc, Some(1.0));
        assert!(m.loss < 0.5);
    }

    #[test]
    fn uninformed_model_on_balanced_data_scores_half() {
        // A random model that never saw the labels is label-independent,
        // so accuracy on balanced binary data concentrates at 1/2.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut graphs = Vec::new();
        for i in 0..10000 {
            let x = Matrix::from_shape_fn((2, 1), |_| rng.random_range(-1.0..1.0));
            let label = if i % 2 == 0 {
                vec![1.0, 0.0]
            } else {
                vec![0.0, 1.0]
            };
            graphs.push(Graph::new(adjacency_from_edges(2, &[(0, 1)]), x, label).unwrap());
        }
        let ds = GraphDataset::new("RAND", graphs).unwrap();
        let cfg = tiny_gnn_cfg(&ds);
        // Noise the zero-initialized head so predictions actually vary.
        let mut named = GnnParams::init(&cfg, 123).unwrap().to_named();
        for m in named.values_mut() {
            m.mapv_inplace(|x| x + rng.random_range(-0.5..0.5));
        }
        let params = GnnParams::from_named(&cfg, &named).unwrap();
        let m = evaluate(&params, &cfg, &ds).unwrap();
        assert!((m.accuracy - 0.5).abs() < 0.02, "accuracy {}", m.accuracy);
        let auc = m.auc.unwrap();
        assert!((auc - 0.5).abs() < 0.05, "auc {auc}");
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let ds = separable_dataset(6);
        let cfg = tiny_gnn_cfg(&ds);
        let settings = TrainSettings {
            lr: 0.01,
            epochs: 5,
            batch_size: 4,
        };
        let a = train_classifier(&ds, &ds, &ds, &cfg, &settings, 7, None).unwrap();
        let b = train_classifier(&ds, &ds, &ds, &cfg, &settings, 7, None).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.params.to_named(), b.params.to_named());
        let c = train_classifier(&ds, &ds, &ds, &cfg, &settings, 8, None).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn separable_data_is_learned_quickly() {
        let ds = separable_dataset(8);
        let cfg = tiny_gnn_cfg(&ds);
        let settings = TrainSettings {
            lr: 0.02,
            epochs: 50,
            batch_size: 8,
        };
        let out = train_classifier(&ds, &ds, &ds, &cfg, &settings, 1, None).unwrap();
        let m = evaluate(&out.params, &cfg, &ds).unwrap();
        assert_eq!(m.accuracy, 1.0, "separable fixture not fit in 50 epochs");
        assert_eq!(out.records.len(), 50);
    }

    #[test]
    fn best_val_selection_points_at_the_peak_epoch() {
        let ds = separable_dataset(6);
        let cfg = tiny_gnn_cfg(&ds);
        let settings = TrainSettings {
            lr: 0.02,
            epochs: 30,
            batch_size: 6,
        };
        let out = train_classifier(&ds, &ds, &ds, &cfg, &settings, 3, None).unwrap();
        let best_by_records = out
            .records
            .iter()
            .enumerate()
            .max_by(|(i, a), (j, b)| {
                a.val_acc
                    .partial_cmp(&b.val_acc)
                    .unwrap()
                    .then(j.cmp(i)) // earlier epoch wins ties
            })
            .map(|(i, _)| i)
            .unwrap();
        assert_eq!(out.best_epoch, best_by_records);
        // The returned parameters reproduce that epoch's test accuracy.
        let m = evaluate(&out.params, &cfg, &ds).unwrap();
        assert_eq!(m.accuracy, out.records[out.best_epoch].test_acc);
    }

    #[test]
    fn augmented_training_keeps_labels_on_the_simplex_and_runs() {
        let ds = separable_dataset(6);
        let cfg = tiny_gnn_cfg(&ds);
        let settings = TrainSettings {
            lr: 0.02,
            epochs: 3,
            batch_size: 4,
        };
        let mix = MixupConfig {
            alignment: Alignment::Random,
            ..MixupConfig::new(1.0, 5)
        };
        let mut aug = BatchAugmenter::new(mix, None).unwrap();
        // Augmentation validity (simplex labels, graph invariants) is
        // enforced by construction inside the mixer; a crash-free run with
        // finite losses is the integration check here.
        let out =
            train_classifier(&ds, &ds, &ds, &cfg, &settings, 2, Some(&mut aug)).unwrap();
        assert!(out.records.iter().all(|r| r.train_loss.is_finite()));
    }

    #[test]
    fn empty_training_set_is_rejected() {
        let ds = separable_dataset(2);
        let empty = GraphDataset::new("E", vec![ds.graph(0).clone()]).unwrap();
        let cfg = tiny_gnn_cfg(&ds);
        let settings = TrainSettings {
            lr: 0.01,
            epochs: 0,
            batch_size: 4,
        };
        let err = train_classifier(&ds, &empty, &empty, &cfg, &settings, 0, None);
        assert!(matches!(err, Err(HarnessError::BadSettings { .. })));
    }

    fn tiny_experiment() -> ExperimentConfig {
        ExperimentConfig::from_text(
            "\
experiment.name = tiny
experiment.runs = 2
dataset.motif.count_per_class = 8
dataset.motif.base_min = 4
dataset.motif.base_max = 6
model.backbone = gcn
model.layers = 2
model.hidden = 8
train.lr = 0.01
train.epochs = 3
train.batch_size = 8
",
        )
        .unwrap()
    }

    #[test]
    fn experiment_emits_consistent_recomputable_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_experiment();
        let report = run_experiment(&cfg, dir.path()).unwrap();
        assert_eq!(report.rows.len(), 1);
        let row = &report.rows[0];
        assert_eq!(row.augmentation, "none");
        assert_eq!(row.runs, 2);

        // Summary numbers are recomputable from the emitted records: per
        // run, the test accuracy at the best-val epoch (earliest on ties).
        let text = std::fs::read_to_string(&report.metrics_path).unwrap();
        let records: Vec<MetricsRecord> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(records, report.records);
        let mut accs = Vec::new();
        for run in 0..2 {
            let rows: Vec<&MetricsRecord> =
                records.iter().filter(|r| r.run == run).collect();
            assert_eq!(rows.len(), 3);
            let best = rows
                .iter()
                .enumerate()
                .max_by(|(i, a), (j, b)| {
                    a.val_acc.partial_cmp(&b.val_acc).unwrap().then(j.cmp(i))
                })
                .map(|(_, r)| *r)
                .unwrap();
            accs.push(best.test_acc);
        }
        let m = accs.iter().sum::<f64>() / 2.0;
        assert!((row.mean_acc - m).abs() < 1e-12);
        let std = ((accs[0] - m).powi(2) + (accs[1] - m).powi(2)).sqrt();
        assert!((row.std_acc - std).abs() < 1e-12);

        let summary = std::fs::read_to_string(&report.summary_path).unwrap();
        let mut lines = summary.lines();
        assert_eq!(lines.next(), Some(SUMMARY_HEADER));
        assert_eq!(lines.next(), Some(row.csv_line().as_str()));
        assert_eq!(lines.next(), None);
    }

    #[test]
    fn experiment_outputs_are_byte_identical_across_invocations() {
        let cfg = tiny_experiment();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let r1 = run_experiment(&cfg, d1.path()).unwrap();
        let r2 = run_experiment(&cfg, d2.path()).unwrap();
        assert_eq!(
            std::fs::read(&r1.metrics_path).unwrap(),
            std::fs::read(&r2.metrics_path).unwrap()
        );
        assert_eq!(
            std::fs::read(&r1.summary_path).unwrap(),
            std::fs::read(&r2.summary_path).unwrap()
        );
    }

    #[test]
    fn alpha_sweep_emits_one_row_per_value() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_experiment();
        cfg.runs = 1;
        cfg.alignment = Some(Alignment::Random);
        cfg.alpha_sweep = Some(vec![0.2, 1.0]);
        let report = run_experiment(&cfg, dir.path()).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.rows[0].alpha, Some(0.2));
        assert_eq!(report.rows[1].alpha, Some(1.0));
        assert!(report.rows.iter().all(|r| r.augmentation == "random"));
        // Records carry the α they were produced under.
        assert!(report.records.iter().all(|r| r.alpha.is_some()));
        let summary = std::fs::read_to_string(&report.summary_path).unwrap();
        assert_eq!(summary.lines().count(), 3);
    }

    #[test]
    fn learned_alignment_trains_a_matcher_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_experiment();
        cfg.runs = 1;
        cfg.alignment = Some(Alignment::Learned);
        cfg.matcher_layers = Some(1);
        cfg.matcher_hidden = 4;
        cfg.matcher_epochs = 1;
        cfg.matcher_batch_size = Some(4);
        let report = run_experiment(&cfg, dir.path()).unwrap();
        assert_eq!(report.rows[0].augmentation, "learned");
        assert!(report.rows[0].mean_acc.is_finite());
    }

    #[test]
    fn corruption_touches_only_the_training_split() {
        // Corruption is applied after splitting; val/test labels reach the
        // evaluator untouched. With ratio 1 every training label moves to
        // a different class, which on a 3-class separable-ish dataset
        // tanks training accuracy but leaves the splits themselves valid.
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_experiment();
        cfg.runs = 1;
        cfg.corrupt_ratio = 1.0;
        let report = run_experiment(&cfg, dir.path()).unwrap();
        assert!(report.rows[0].mean_acc.is_finite());
    }
}
