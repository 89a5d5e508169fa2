use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use fgat_core::checkpoint::Checkpoint;
use fgat_core::experiment::run_experiment;
use fgat_core::fuzzy::fuzzy_negative_sample;
use fgat_core::graph::{load_edge_list, split_edges, write_edges};
use fgat_core::train::evaluate;
use fgat_core::{
    Bandwidth, DecisionClass, FnsConfig, Graph, Kernel, MetricsReport, Model64, ModelConfig, ScoringContext,
    SplitRatios,
};
use serde::Serialize;

use crate::config::{dataset_name, parse_split, RunConfig, TrainArgs};
use crate::error::CliError;

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::Usage(format!("--out: cannot create {}: {e}", path.display())))
}

fn load_graph(path: &Path) -> Result<Graph, CliError> {
    let (graph, stats) = load_edge_list(path).map_err(|e| CliError::from_data("--graph", e))?;
    log::info!(
        "{}: {} nodes, {} edges ({} duplicates, {} self-loops dropped)",
        path.display(),
        graph.num_nodes(),
        graph.num_edges(),
        stats.duplicates_dropped,
        stats.self_loops_dropped
    );
    Ok(graph)
}

/// One metrics document per trained seed.
#[derive(Debug, Serialize)]
struct RunMetrics<'a> {
    dataset: &'a str,
    seed: u64,
    sampling_mode: &'a str,
    kernel: &'a str,
    alpha: f64,
    precision: f64,
    recall: f64,
    f1: f64,
    roc_auc: f64,
    epochs_trained: usize,
    wall_seconds: Option<f64>,
}

pub fn train(args: &TrainArgs) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(args)?;
    let experiment = cfg.experiment()?;
    let graph = load_graph(&cfg.graph)?;
    // surface too-small datasets as input errors before any training
    split_edges(&graph, cfg.ratios(), cfg.seeds[0]).map_err(|e| CliError::from_data("--graph", e))?;
    create_dir(&cfg.out)?;
    write_file(&cfg.out.join("config.toml"), &cfg.to_toml())?;

    let report = run_experiment::<f64>(&graph, &experiment).map_err(|e| CliError::from_data("train", e))?;
    for run in &report.runs {
        let stem = format!("{}-{}-seed{}", cfg.dataset, run.sampling, run.seed);
        let metrics = RunMetrics {
            dataset: &cfg.dataset,
            seed: run.seed,
            sampling_mode: run.sampling.name(),
            kernel: cfg.kernel.name(),
            alpha: cfg.alpha,
            precision: run.test.precision,
            recall: run.test.recall,
            f1: run.test.f1,
            roc_auc: run.test.roc_auc,
            epochs_trained: run.epochs_trained(),
            wall_seconds: cfg.timing.then_some(run.elapsed.as_secs_f64()),
        };
        let json = serde_json::to_string_pretty(&metrics).expect("metrics serialize") + "\n";
        write_file(&cfg.out.join(format!("{stem}.json")), &json)?;

        let mut meta = BTreeMap::new();
        meta.insert("dataset".to_string(), cfg.dataset.clone());
        meta.insert("sampling_mode".to_string(), run.sampling.name().to_string());
        meta.insert("seed".to_string(), run.seed.to_string());
        meta.insert("threshold".to_string(), format!("{:?}", cfg.threshold));
        meta.insert("best_epoch".to_string(), run.best_epoch.to_string());
        let ck = Checkpoint {
            model: run.model.clone(),
            train_edges: run.data.split.train.clone(),
            test_positives: run.data.split.test.clone(),
            test_negatives: run.data.test_negatives.clone(),
            meta,
        };
        ck.save(cfg.out.join(format!("{stem}.ckpt")))?;
    }

    let mut csv = String::from(
        "dataset,sampling_mode,runs,precision_mean,precision_std,recall_mean,recall_std,f1_mean,f1_std,roc_auc_mean,roc_auc_std,mean_of_four\n",
    );
    for a in &report.aggregates {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            cfg.dataset,
            a.sampling,
            a.runs,
            a.precision.0,
            a.precision.1,
            a.recall.0,
            a.recall.1,
            a.f1.0,
            a.f1.1,
            a.roc_auc.0,
            a.roc_auc.1,
            a.mean_of_four()
        );
        println!(
            "{} {}: precision {:.4}±{:.4} recall {:.4}±{:.4} f1 {:.4}±{:.4} roc_auc {:.4}±{:.4}",
            cfg.dataset,
            a.sampling,
            a.precision.0,
            a.precision.1,
            a.recall.0,
            a.recall.1,
            a.f1.0,
            a.f1.1,
            a.roc_auc.0,
            a.roc_auc.1
        );
    }
    write_file(&cfg.out.join(format!("{}-aggregate.csv", cfg.dataset)), &csv)?;
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Classification threshold; defaults to the one stored at training time.
    #[arg(long)]
    pub threshold: Option<f64>,
}

pub fn evaluate_cmd(args: &EvaluateArgs) -> Result<(), CliError> {
    let ck = Checkpoint::<f64>::load(&args.checkpoint).map_err(|e| CliError::from_data("--checkpoint", e))?;
    let threshold = match args.threshold {
        Some(t) if (0.0..=1.0).contains(&t) => t,
        Some(_) => return Err(CliError::Usage("--threshold: threshold must lie in [0,1]".into())),
        None => ck.meta.get("threshold").and_then(|t| t.parse().ok()).unwrap_or(0.5),
    };
    let graph = Graph::from_edges(ck.model.params.num_nodes(), ck.train_edges.clone())
        .map_err(|e| CliError::from_data("--checkpoint", e))?;
    let report: MetricsReport = evaluate(
        &ck.model,
        &graph.message_edges(),
        &ck.test_positives,
        &ck.test_negatives,
        threshold,
    )
    .map_err(|e| CliError::from_data("--checkpoint", e))?;
    println!("{}", serde_json::to_string_pretty(&report).expect("metrics serialize"));
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    /// Edge-list file.
    #[arg(long)]
    pub graph: PathBuf,
    /// Take node embeddings from this checkpoint instead of a fresh init.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Seed of the split and of a fresh init.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Epoch whose candidate pool to draw (candidate seed is seed + epoch).
    #[arg(long, default_value_t = 1)]
    pub epoch: u64,
    #[arg(long, value_parser = parse_split)]
    pub split: Option<[f64; 3]>,
    #[arg(long, default_value = "gaussian")]
    pub kernel: Kernel,
    #[arg(long, default_value = "auto")]
    pub delta: Bandwidth,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value = "fuzzy")]
    pub decision: DecisionClass,
    /// Embedding width of a fresh init.
    #[arg(long, default_value_t = ModelConfig::default().embedding_dim)]
    pub dim: usize,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn sample(args: &SampleArgs) -> Result<(), CliError> {
    let fns = FnsConfig {
        kernel: args.kernel,
        bandwidth: args.delta,
        alpha: args.alpha,
        decision: args.decision,
    };
    fns.validate().map_err(|e| CliError::Usage(format!("--alpha/--delta: {e}")))?;
    let ratios = match args.split {
        Some([a, b, c]) => SplitRatios::new(a, b, c).map_err(|_| CliError::Usage("--split: fractions must be positive and sum to 1".into()))?,
        None => SplitRatios::default(),
    };
    let graph = load_graph(&args.graph)?;

    let (message_graph, embeddings) = match &args.checkpoint {
        Some(path) => {
            let ck = Checkpoint::<f64>::load(path).map_err(|e| CliError::from_data("--checkpoint", e))?;
            if ck.model.params.num_nodes() != graph.num_nodes() {
                return Err(CliError::Dataset(format!(
                    "--checkpoint has {} nodes, graph has {}",
                    ck.model.params.num_nodes(),
                    graph.num_nodes()
                )));
            }
            let mg = graph
                .with_edge_subset(ck.train_edges.clone())
                .map_err(|e| CliError::from_data("--checkpoint", e))?;
            (mg, ck.model.params.embeddings)
        }
        None => {
            let split = split_edges(&graph, ratios, args.seed).map_err(|e| CliError::from_data("--graph", e))?;
            let mg = graph
                .with_edge_subset(split.train)
                .map_err(|e| CliError::from_data("--graph", e))?;
            let cfg = ModelConfig {
                embedding_dim: args.dim,
                num_heads: 1,
                num_layers: 0,
                seed: args.seed,
                ..ModelConfig::default()
            };
            let model = Model64::new(cfg, graph.num_nodes()).map_err(|e| CliError::Usage(format!("--dim: {e}")))?;
            (mg, model.params.embeddings)
        }
    };

    let ctx = ScoringContext::new(&message_graph, &embeddings, &fns)?;
    let exclusion = graph.symmetric_pairs();
    let count = message_graph.num_edges();
    let selection = fuzzy_negative_sample(&ctx, &exclusion, count, args.seed.wrapping_add(args.epoch))
        .map_err(|e| CliError::from_data("--graph", e))?;
    let chosen: std::collections::HashSet<_> = selection.selected.iter().map(|s| s.edge).collect();
    let labels = graph.labels();
    let mut csv = String::from("src,dst,score,selected\n");
    for c in &selection.candidates {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            labels[c.edge.0],
            labels[c.edge.1],
            c.score,
            u8::from(chosen.contains(&c.edge))
        );
    }
    match &args.out {
        Some(path) => write_file(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    /// Edge-list file.
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = parse_split)]
    pub split: Option<[f64; 3]>,
    /// Directory for the three edge lists.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn split(args: &SplitArgs) -> Result<(), CliError> {
    let ratios = match args.split {
        Some([a, b, c]) => SplitRatios::new(a, b, c).map_err(|_| CliError::Usage("--split: fractions must be positive and sum to 1".into()))?,
        None => SplitRatios::default(),
    };
    let graph = load_graph(&args.graph)?;
    let split = split_edges(&graph, ratios, args.seed).map_err(|e| CliError::from_data("--graph", e))?;
    create_dir(&args.out)?;
    let stem = dataset_name(&args.graph);
    for (name, edges) in [("train", &split.train), ("validation", &split.validation), ("test", &split.test)] {
        let path = args.out.join(format!("{stem}.{name}.edges"));
        write_edges(graph.labels(), edges, &path)?;
        println!("{} {}", path.display(), edges.len());
    }
    Ok(())
}
