//! `smixup` — graph-classification experiments with mixup augmentation by
//! soft alignments.
//!
//! Every subcommand reads the same declarative configuration: pass
//! `--config PATH` to load a `key = value` file, and/or set individual
//! keys directly as flags whose long names mirror the dotted config keys
//! (`--mixup.alpha 0.2` overrides `mixup.alpha = 0.2` from the file).
//! Run `smixup <SUBCOMMAND> --help` for the full key list.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smixup_core::checkpoint::{load_gnn, load_matcher, save_gnn, save_matcher};
use smixup_core::ged::{normalized_ged, theorem1_bound, GedError, GedMode};
use smixup_core::graph::{adjacency_from_edges, save_tudataset, split_dataset};
use smixup_core::harness::{
    build_augmenter, evaluate, load_dataset, parse_config_text, run_experiment, run_one,
    train_experiment_matcher, DatasetSource, ExperimentConfig, SUMMARY_HEADER,
};
use smixup_core::matcher::{assignment_matrix, Normalizer};
use smixup_core::mixup::{s_mixup_pair, transform_graph, write_graph_dump, Alignment};
use smixup_core::{Graph, Matrix, Metric};

#[derive(Parser)]
#[command(
    name = "smixup",
    about = "Graph mixup augmentation by soft alignments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic motif dataset in flat-file layout.
    MotifGen(MotifGenArgs),
    /// Train a graph matching network and save its checkpoint.
    TrainMatcher(TrainMatcherArgs),
    /// Mix every graph in a dataset and write the augmented dump.
    Augment(AugmentArgs),
    /// Train one classifier run; save metrics and the selected model.
    TrainClassifier(TrainClassifierArgs),
    /// Evaluate a saved classifier on a dataset.
    Eval(EvalArgs),
    /// Run a full multi-run experiment and write its report files.
    Run(RunArgs),
    /// Sweep mix ratios on random graph pairs and tabulate the
    /// edit-distance drift against its theoretical bound.
    GedVerify(GedVerifyArgs),
}

/// Configuration source: an optional file plus per-key override flags.
/// Flag long-names are exactly the dotted config keys.
#[derive(Args, Default)]
struct ConfigArgs {
    /// Load configuration from a `key = value` file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    #[arg(long = "experiment.name", value_name = "NAME")]
    experiment_name: Option<String>,
    #[arg(long = "experiment.runs", value_name = "N")]
    experiment_runs: Option<String>,
    #[arg(long = "experiment.seed", value_name = "SEED")]
    experiment_seed: Option<String>,

    #[arg(long = "dataset.source", value_name = "tudataset|motif")]
    dataset_source: Option<String>,
    #[arg(long = "dataset.path", value_name = "DIR")]
    dataset_path: Option<String>,
    #[arg(long = "dataset.name", value_name = "NAME")]
    dataset_name: Option<String>,
    #[arg(long = "dataset.features", value_name = "constant|degree-onehot")]
    dataset_features: Option<String>,
    #[arg(long = "dataset.degree_cap", value_name = "N")]
    dataset_degree_cap: Option<String>,
    #[arg(long = "dataset.motif.count_per_class", value_name = "N")]
    dataset_motif_count_per_class: Option<String>,
    #[arg(long = "dataset.motif.base_min", value_name = "N")]
    dataset_motif_base_min: Option<String>,
    #[arg(long = "dataset.motif.base_max", value_name = "N")]
    dataset_motif_base_max: Option<String>,
    #[arg(long = "dataset.motif.seed", value_name = "SEED")]
    dataset_motif_seed: Option<String>,
    #[arg(long = "dataset.motif.motifs", value_name = "LIST")]
    dataset_motif_motifs: Option<String>,
    #[arg(long = "dataset.motif.bases", value_name = "LIST")]
    dataset_motif_bases: Option<String>,

    #[arg(long = "split.train", value_name = "RATIO")]
    split_train: Option<String>,
    #[arg(long = "split.val", value_name = "RATIO")]
    split_val: Option<String>,
    #[arg(long = "split.test", value_name = "RATIO")]
    split_test: Option<String>,
    #[arg(long = "corruption.ratio", value_name = "RATIO")]
    corruption_ratio: Option<String>,

    #[arg(long = "model.backbone", value_name = "gcn|gin")]
    model_backbone: Option<String>,
    #[arg(long = "model.layers", value_name = "N")]
    model_layers: Option<String>,
    #[arg(long = "model.hidden", value_name = "N")]
    model_hidden: Option<String>,
    #[arg(long = "model.readout", value_name = "mean|sum")]
    model_readout: Option<String>,

    #[arg(long = "train.lr", value_name = "LR")]
    train_lr: Option<String>,
    #[arg(long = "train.epochs", value_name = "N")]
    train_epochs: Option<String>,
    #[arg(long = "train.batch_size", value_name = "N")]
    train_batch_size: Option<String>,

    #[arg(long = "mixup.alignment", value_name = "learned|random|identity")]
    mixup_alignment: Option<String>,
    #[arg(long = "mixup.alpha", value_name = "ALPHA")]
    mixup_alpha: Option<String>,
    #[arg(long = "mixup.alpha_sweep", value_name = "LIST|default")]
    mixup_alpha_sweep: Option<String>,
    #[arg(long = "mixup.range", value_name = "half|full")]
    mixup_range: Option<String>,
    #[arg(long = "mixup.normalizer", value_name = "softmax|sinkhorn")]
    mixup_normalizer: Option<String>,
    #[arg(long = "mixup.same_class_only", value_name = "BOOL")]
    mixup_same_class_only: Option<String>,

    #[arg(long = "matcher.checkpoint", value_name = "PATH")]
    matcher_checkpoint: Option<String>,
    #[arg(long = "matcher.layers", value_name = "N")]
    matcher_layers: Option<String>,
    #[arg(long = "matcher.hidden", value_name = "N")]
    matcher_hidden: Option<String>,
    #[arg(long = "matcher.epochs", value_name = "N")]
    matcher_epochs: Option<String>,
    #[arg(long = "matcher.lr", value_name = "LR")]
    matcher_lr: Option<String>,
    #[arg(long = "matcher.batch_size", value_name = "N")]
    matcher_batch_size: Option<String>,
    #[arg(long = "matcher.margin", value_name = "MARGIN")]
    matcher_margin: Option<String>,
    #[arg(long = "matcher.metric", value_name = "cosine|neg-sq-euclidean")]
    matcher_metric: Option<String>,
}

impl ConfigArgs {
    /// File map (if any) with flag overrides applied on top.
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut map: BTreeMap<String, String> = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                parse_config_text(&text)?
            }
            None => BTreeMap::new(),
        };
        let overrides: [(&str, &Option<String>); 39] = [
            ("experiment.name", &self.experiment_name),
            ("experiment.runs", &self.experiment_runs),
            ("experiment.seed", &self.experiment_seed),
            ("dataset.source", &self.dataset_source),
            ("dataset.path", &self.dataset_path),
            ("dataset.name", &self.dataset_name),
            ("dataset.features", &self.dataset_features),
            ("dataset.degree_cap", &self.dataset_degree_cap),
            (
                "dataset.motif.count_per_class",
                &self.dataset_motif_count_per_class,
            ),
            ("dataset.motif.base_min", &self.dataset_motif_base_min),
            ("dataset.motif.base_max", &self.dataset_motif_base_max),
            ("dataset.motif.seed", &self.dataset_motif_seed),
            ("dataset.motif.motifs", &self.dataset_motif_motifs),
            ("dataset.motif.bases", &self.dataset_motif_bases),
            ("split.train", &self.split_train),
            ("split.val", &self.split_val),
            ("split.test", &self.split_test),
            ("corruption.ratio", &self.corruption_ratio),
            ("model.backbone", &self.model_backbone),
            ("model.layers", &self.model_layers),
            ("model.hidden", &self.model_hidden),
            ("model.readout", &self.model_readout),
            ("train.lr", &self.train_lr),
            ("train.epochs", &self.train_epochs),
            ("train.batch_size", &self.train_batch_size),
            ("mixup.alignment", &self.mixup_alignment),
            ("mixup.alpha", &self.mixup_alpha),
            ("mixup.alpha_sweep", &self.mixup_alpha_sweep),
            ("mixup.range", &self.mixup_range),
            ("mixup.normalizer", &self.mixup_normalizer),
            ("mixup.same_class_only", &self.mixup_same_class_only),
            ("matcher.checkpoint", &self.matcher_checkpoint),
            ("matcher.layers", &self.matcher_layers),
            ("matcher.hidden", &self.matcher_hidden),
            ("matcher.epochs", &self.matcher_epochs),
            ("matcher.lr", &self.matcher_lr),
            ("matcher.batch_size", &self.matcher_batch_size),
            ("matcher.margin", &self.matcher_margin),
            ("matcher.metric", &self.matcher_metric),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                map.insert(key.to_string(), v.clone());
            }
        }
        let cfg = ExperimentConfig::from_map(&map)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct MotifGenArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Directory to write the dataset files into.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainMatcherArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Path for the matcher checkpoint.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

#[derive(Args)]
struct AugmentArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Path for the augmented-graph dump (one JSON record per line).
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainClassifierArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Directory for `metrics.jsonl` and `model.ckpt`.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Classifier checkpoint to evaluate.
    #[arg(long, value_name = "PATH")]
    model: PathBuf,
    /// Evaluate only this split of the dataset (seeded by
    /// `experiment.seed`, matching run 0 of `train-classifier`).
    #[arg(long, value_name = "train|val|test|full", default_value = "full")]
    split: String,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Directory for `metrics.jsonl` and `summary.csv`.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct GedVerifyArgs {
    /// Number of random graph pairs to sweep.
    #[arg(long, default_value_t = 20)]
    pairs: usize,
    /// Maximum node count per sampled graph (at least 2).
    #[arg(long = "max-nodes", default_value_t = 6)]
    max_nodes: usize,
    /// Smallest mix ratio in the sweep grid.
    #[arg(long = "lambda-min", default_value_t = 0.5)]
    lambda_min: f64,
    /// Grid step; the sweep runs from lambda-min to 1.0 inclusive.
    #[arg(long = "lambda-step", default_value_t = 0.1)]
    lambda_step: f64,
    /// Edit-distance semantics: `aligned-chain` or `exact`.
    #[arg(long, default_value = "aligned-chain")]
    mode: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Path for the CSV table.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

fn main() {
    if let Err(err) = dispatch(Cli::parse()) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::MotifGen(args) => motif_gen(args),
        Command::TrainMatcher(args) => train_matcher_cmd(args),
        Command::Augment(args) => augment(args),
        Command::TrainClassifier(args) => train_classifier_cmd(args),
        Command::Eval(args) => eval_cmd(args),
        Command::Run(args) => run_cmd(args),
        Command::GedVerify(args) => ged_verify(args),
    }
}

fn motif_gen(args: MotifGenArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    if !matches!(cfg.dataset, DatasetSource::Motif(_)) {
        bail!("motif-gen needs a motif dataset source (leave dataset.source unset or set it to `motif`)");
    }
    let ds = match &cfg.dataset {
        DatasetSource::Motif(mc) => smixup_core::graph::gen_motif_dataset(mc)?,
        DatasetSource::TuDataset { .. } => unreachable!("checked above"),
    };
    save_tudataset(&ds, &args.out)?;
    println!(
        "wrote {} graphs / {} classes to {}",
        ds.len(),
        ds.num_classes(),
        args.out.join(format!("{}_*.txt", ds.name())).display()
    );
    Ok(())
}

fn train_matcher_cmd(args: TrainMatcherArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let ds = load_dataset(&cfg)?;
    let (params, mcfg, losses) = train_experiment_matcher(&cfg, &ds, cfg.seed)?;
    save_matcher(&args.out, &params, &mcfg)?;
    let decile = (losses.len() / 10).max(1);
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    println!(
        "trained matcher on {} ({} graphs): {} steps, triplet loss {:.6} -> {:.6}",
        ds.name(),
        ds.len(),
        losses.len(),
        mean(&losses[..decile]),
        mean(&losses[losses.len() - decile..]),
    );
    println!("checkpoint saved to {}", args.out.display());
    Ok(())
}

fn augment(args: AugmentArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let Some(alignment) = cfg.alignment else {
        bail!("augment needs mixup.alignment set (learned, random, or identity)");
    };
    let ds = load_dataset(&cfg)?;
    let matcher = if alignment == Alignment::Learned {
        Some(match &cfg.matcher_checkpoint {
            Some(path) => load_matcher(path)?,
            None => {
                let (params, mcfg, _) = train_experiment_matcher(&cfg, &ds, cfg.seed)?;
                (params, mcfg)
            }
        })
    } else {
        None
    };
    let mut augmenter = build_augmenter(&cfg, cfg.alpha, matcher, cfg.seed)?;
    let mixed = augmenter.augment(ds.graphs())?;
    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut w = BufWriter::new(file);
    write_graph_dump(&mixed, &mut w)?;
    w.flush()?;
    println!(
        "wrote {} augmented graphs ({} alignment, alpha {}) to {}",
        mixed.len(),
        alignment,
        cfg.alpha,
        args.out.display()
    );
    Ok(())
}

fn train_classifier_cmd(args: TrainClassifierArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let ds = load_dataset(&cfg)?;
    let checkpointed = match (&cfg.alignment, &cfg.matcher_checkpoint) {
        (Some(Alignment::Learned), Some(path)) => Some(load_matcher(path)?),
        _ => None,
    };
    let alpha = cfg.alignment.map(|_| cfg.alpha);
    let out = run_one(&cfg, &ds, 0, alpha, checkpointed.as_ref())?;

    let metrics_path = args.out.join("metrics.jsonl");
    let mut w = BufWriter::new(
        File::create(&metrics_path)
            .with_context(|| format!("creating {}", metrics_path.display()))?,
    );
    for r in &out.records {
        writeln!(w, "{}", serde_json::to_string(r)?)?;
    }
    w.flush()?;

    let model_path = args.out.join("model.ckpt");
    let gnn_cfg = cfg.gnn_config(ds.num_classes(), ds.feature_dim());
    save_gnn(&model_path, &out.params, &gnn_cfg)?;

    let best = &out.records[out.best_epoch];
    println!(
        "trained {} on {}: best epoch {} (val_acc {:.4}, test_acc {:.4})",
        cfg.backbone,
        ds.name(),
        out.best_epoch,
        best.val_acc,
        best.test_acc
    );
    println!(
        "metrics: {} | model: {}",
        metrics_path.display(),
        model_path.display()
    );
    Ok(())
}

fn eval_cmd(args: EvalArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let (params, gnn_cfg) = load_gnn(&args.model)?;
    let ds = load_dataset(&cfg)?;
    let ds = match args.split.as_str() {
        "full" => ds,
        which @ ("train" | "val" | "test") => {
            let (train, val, test) = split_dataset(&ds, cfg.split, cfg.seed)?;
            match which {
                "train" => train,
                "val" => val,
                _ => test,
            }
        }
        other => bail!("unknown split `{other}` (expected train, val, test, or full)"),
    };
    if gnn_cfg.feature_dim != ds.feature_dim() || gnn_cfg.num_classes != ds.num_classes() {
        bail!(
            "checkpoint expects {} features / {} classes but {} has {} / {}",
            gnn_cfg.feature_dim,
            gnn_cfg.num_classes,
            ds.name(),
            ds.feature_dim(),
            ds.num_classes()
        );
    }
    let m = evaluate(&params, &gnn_cfg, &ds)?;
    let mut report = serde_json::json!({
        "dataset": ds.name(),
        "split": args.split,
        "graphs": ds.len(),
        "loss": m.loss,
        "accuracy": m.accuracy,
    });
    if let Some(auc) = m.auc {
        report["auc"] = serde_json::json!(auc);
    }
    println!("{report}");
    Ok(())
}

fn run_cmd(args: RunArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let report = run_experiment(&cfg, &args.out)?;
    println!("{SUMMARY_HEADER}");
    for row in &report.rows {
        println!("{}", row.csv_line());
    }
    println!(
        "metrics: {} | summary: {}",
        report.metrics_path.display(),
        report.summary_path.display()
    );
    Ok(())
}

/// Random simple graph with unit edge weights, no node features, and a
/// fixed single-class label — the shape the drift/bound identity is
/// exact for. At least one edge, so the graph is never at edit distance
/// zero from everything.
fn random_plain_graph(rng: &mut ChaCha8Rng, max_nodes: usize) -> Graph {
    let n = rng.random_range(2..=max_nodes);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_range(0.0..1.0) < 0.5 {
                edges.push((i, j));
            }
        }
    }
    if edges.is_empty() {
        let i = rng.random_range(0..n - 1);
        edges.push((i, i + 1));
    }
    Graph::new(
        adjacency_from_edges(n, &edges),
        Matrix::zeros((n, 0)),
        vec![1.0],
    )
    .expect("constructed within invariants")
}

fn ged_verify(args: GedVerifyArgs) -> Result<()> {
    let mode: GedMode = args.mode.parse()?;
    if args.max_nodes < 2 {
        bail!("max-nodes must be at least 2");
    }
    if !(0.0..=1.0).contains(&args.lambda_min) || args.lambda_step <= 0.0 {
        bail!("lambda grid must start in [0,1] with a positive step");
    }
    let mut grid = Vec::new();
    let mut k = 0usize;
    loop {
        let lambda = args.lambda_min + k as f64 * args.lambda_step;
        if lambda > 1.0 + 1e-12 {
            break;
        }
        grid.push(lambda.min(1.0));
        k += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "lambda,epsilon,bound,abs_diff,mode")?;
    let mut rows = 0usize;
    let mut violations = 0usize;
    let mut max_diff = 0.0f64;
    let mut produced = 0usize;
    let mut attempts = 0usize;
    while produced < args.pairs {
        attempts += 1;
        if attempts > args.pairs.saturating_mul(100) {
            bail!("could not sample enough pairs with a well-defined position");
        }
        let g1 = random_plain_graph(&mut rng, args.max_nodes);
        let g2 = random_plain_graph(&mut rng, args.max_nodes);
        // A soft column-stochastic alignment from random embeddings — the
        // general case of the bound.
        let h1 = Matrix::from_shape_fn((g1.n(), 4), |_| rng.random_range(-1.0..1.0));
        let h2 = Matrix::from_shape_fn((g2.n(), 4), |_| rng.random_range(-1.0..1.0));
        let m = assignment_matrix(&h1, &h2, Metric::NegSqEuclidean, Normalizer::Softmax)?;
        let g2_aligned = transform_graph(&g2, &m)?;
        // A pair can be degenerate under exact semantics (e.g. isomorphic
        // parents put the λ = 1 mix at distance zero from both); such
        // pairs are skipped, not written partially.
        let mut pair_rows = Vec::with_capacity(grid.len());
        let mut degenerate = false;
        for &lambda in &grid {
            let mixed = s_mixup_pair(&g1, &g2, &m, lambda)?;
            let eps = match normalized_ged(&mixed, &g1, &g2, Some(&g2_aligned), &mode) {
                Ok(r) => r.epsilon,
                Err(GedError::DegenerateNormalization) => {
                    degenerate = true;
                    break;
                }
                Err(e) => return Err(e.into()),
            };
            let bound = match theorem1_bound(&g1, &g2, &g2_aligned, lambda, &mode) {
                Ok(b) => b,
                Err(GedError::DegenerateNormalization) => {
                    degenerate = true;
                    break;
                }
                Err(e) => return Err(e.into()),
            };
            pair_rows.push((lambda, eps, bound));
        }
        if degenerate {
            continue;
        }
        for (lambda, eps, bound) in pair_rows {
            let diff = (eps - lambda).abs();
            if diff > bound + 1e-9 {
                violations += 1;
            }
            max_diff = max_diff.max(diff);
            writeln!(w, "{lambda},{eps},{bound},{diff},{mode}")?;
            rows += 1;
        }
        produced += 1;
    }
    w.flush()?;
    println!(
        "wrote {rows} rows ({} pairs x {} ratios, {mode} mode) to {}",
        args.pairs,
        grid.len(),
        args.out.display()
    );
    println!("max |epsilon - lambda| = {max_diff:.6}; bound violations: {violations}");
    Ok(())
}
