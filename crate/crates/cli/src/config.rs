//! Run configuration: built-in defaults, then an optional flat TOML file,
//! then command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use fgat_core::experiment::ExperimentConfig;
use fgat_core::{
    AdamConfig, Bandwidth, DecisionClass, FnsConfig, Kernel, ModelConfig, SamplingMode, SplitRatios, TrainConfig,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingChoice {
    Fuzzy,
    Random,
    /// Both modes on the same seeds.
    Both,
}

impl SamplingChoice {
    pub fn modes(self) -> Vec<SamplingMode> {
        match self {
            SamplingChoice::Fuzzy => vec![SamplingMode::Fuzzy],
            SamplingChoice::Random => vec![SamplingMode::Random],
            SamplingChoice::Both => vec![SamplingMode::Fuzzy, SamplingMode::Random],
        }
    }
}

pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|_| format!("invalid list entry {p:?}")))
        .collect()
}

/// Alias so clap takes the whole list as one value.
pub type SeedList = Vec<u64>;

pub fn parse_seeds(s: &str) -> Result<SeedList, String> {
    let seeds: Vec<u64> = parse_list(s)?;
    if seeds.is_empty() {
        return Err("need at least one seed".into());
    }
    Ok(seeds)
}

pub fn parse_split(s: &str) -> Result<[f64; 3], String> {
    match parse_list::<f64>(s)?.as_slice() {
        &[a, b, c] => Ok([a, b, c]),
        _ => Err("expected three comma-separated fractions".into()),
    }
}

/// `auto` or a number; written back in the same shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaValue {
    Number(f64),
    Text(String),
}

impl DeltaValue {
    fn bandwidth(&self) -> Result<Bandwidth, CliError> {
        match self {
            DeltaValue::Number(d) => Ok(Bandwidth::Fixed(*d)),
            DeltaValue::Text(t) => t
                .parse()
                .map_err(|e| CliError::Usage(format!("delta: {e}"))),
        }
    }

    fn from_bandwidth(b: Bandwidth) -> Self {
        match b {
            Bandwidth::Auto => DeltaValue::Text("auto".into()),
            Bandwidth::Fixed(d) => DeltaValue::Number(d),
        }
    }
}

/// Flags shared by `train` and the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    /// Flat TOML file with any of the keys below; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Edge-list file.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Name used in outputs; defaults to the graph file stem.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated seeds, e.g. 0,1,2,3,4.
    #[arg(long, value_parser = parse_seeds)]
    pub seeds: Option<SeedList>,
    #[arg(long, value_enum)]
    pub sampling: Option<SamplingChoice>,
    /// gaussian, exponential or rational-quadratic.
    #[arg(long)]
    pub kernel: Option<Kernel>,
    /// Kernel bandwidth: auto or a positive number.
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Decision class of a node: fuzzy or crisp.
    #[arg(long)]
    pub decision: Option<DecisionClass>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub dropout: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Train, validation and test fractions, e.g. 0.7,0.1,0.2.
    #[arg(long, value_parser = parse_split)]
    pub split: Option<[f64; 3]>,
    /// Record wall-clock seconds in the metrics JSON (off by default so
    /// repeated runs produce identical files).
    #[arg(long)]
    pub timing: bool,
}

/// Config file contents. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    graph: Option<PathBuf>,
    dataset: Option<String>,
    out: Option<PathBuf>,
    seeds: Option<Vec<u64>>,
    sampling: Option<SamplingChoice>,
    kernel: Option<Kernel>,
    delta: Option<DeltaValue>,
    alpha: Option<f64>,
    decision: Option<DecisionClass>,
    heads: Option<usize>,
    layers: Option<usize>,
    dim: Option<usize>,
    dropout: Option<f64>,
    lr: Option<f64>,
    epochs: Option<usize>,
    patience: Option<usize>,
    split: Option<[f64; 3]>,
    leaky_slope: Option<f64>,
    layer_norm_eps: Option<f64>,
    projection_init_scale: Option<f64>,
    threshold: Option<f64>,
    beta1: Option<f64>,
    beta2: Option<f64>,
    adam_eps: Option<f64>,
}

/// Fully resolved configuration; serializes to a file that reproduces the
/// run when passed back through `--config`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub graph: PathBuf,
    pub dataset: String,
    pub out: PathBuf,
    pub seeds: Vec<u64>,
    pub sampling: SamplingChoice,
    pub kernel: Kernel,
    pub delta: DeltaValue,
    pub alpha: f64,
    pub decision: DecisionClass,
    pub heads: usize,
    pub layers: usize,
    pub dim: usize,
    pub dropout: f64,
    pub lr: f64,
    pub epochs: usize,
    pub patience: usize,
    pub split: [f64; 3],
    pub leaky_slope: f64,
    pub layer_norm_eps: f64,
    pub projection_init_scale: f64,
    pub threshold: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    #[serde(skip)]
    pub timing: bool,
}

fn usage(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{field}: {msg}"))
}

impl RunConfig {
    fn defaults() -> Self {
        let m = ModelConfig::default();
        let t = TrainConfig::default();
        let r = SplitRatios::default();
        Self {
            graph: PathBuf::new(),
            dataset: String::new(),
            out: PathBuf::from("runs"),
            seeds: vec![0, 1, 2, 3, 4],
            sampling: SamplingChoice::Fuzzy,
            kernel: t.fns.kernel,
            delta: DeltaValue::from_bandwidth(t.fns.bandwidth),
            alpha: t.fns.alpha,
            decision: t.fns.decision,
            heads: m.num_heads,
            layers: m.num_layers,
            dim: m.embedding_dim,
            dropout: m.dropout,
            lr: t.adam.lr,
            epochs: t.epochs_max,
            patience: t.patience,
            split: [r.train, r.validation, r.test],
            leaky_slope: m.leaky_slope,
            layer_norm_eps: m.layer_norm_eps,
            projection_init_scale: m.projection_init_scale,
            threshold: t.threshold,
            beta1: t.adam.beta1,
            beta2: t.adam.beta2,
            adam_eps: t.adam.eps,
            timing: false,
        }
    }

    pub fn resolve(args: &TrainArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| usage("--config", format!("cannot read {}: {e}", path.display())))?;
                toml::from_str::<FileConfig>(&text).map_err(|e| usage("--config", format!("{}: {e}", path.display())))?
            }
            None => FileConfig::default(),
        };
        let mut c = Self::defaults();
        macro_rules! layer {
            ($($field:ident),*) => {
                $(if let Some(v) = file.$field.clone() { c.$field = v; })*
            };
        }
        layer!(
            graph, dataset, out, seeds, sampling, kernel, delta, alpha, decision, heads, layers, dim, dropout, lr,
            epochs, patience, split, leaky_slope, layer_norm_eps, projection_init_scale, threshold, beta1, beta2,
            adam_eps
        );
        macro_rules! flag {
            ($($field:ident),*) => {
                $(if let Some(v) = args.$field.clone() { c.$field = v; })*
            };
        }
        flag!(
            graph, dataset, out, seeds, sampling, kernel, alpha, decision, heads, layers, dim, dropout, lr, epochs,
            patience, split
        );
        if let Some(d) = &args.delta {
            c.delta = match d.parse::<f64>() {
                Ok(v) => DeltaValue::Number(v),
                Err(_) => DeltaValue::Text(d.clone()),
            };
        }
        c.timing = args.timing;
        if c.graph.as_os_str().is_empty() {
            return Err(usage("--graph", "a graph file is required"));
        }
        if c.dataset.is_empty() {
            c.dataset = dataset_name(&c.graph);
        }
        c.validate()?;
        Ok(c)
    }

    /// Checks each field and names the first offending one.
    pub fn validate(&self) -> Result<(), CliError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(usage("--alpha", "alpha must lie in [0,1]"));
        }
        self.delta.bandwidth().and_then(|b| match b {
            Bandwidth::Fixed(d) if !(d.is_finite() && d > 0.0) => Err(usage("--delta", "delta must be positive or auto")),
            _ => Ok(()),
        })?;
        if self.seeds.is_empty() {
            return Err(usage("--seeds", "need at least one seed"));
        }
        if self.heads == 0 || self.dim == 0 || !self.dim.is_multiple_of(self.heads) {
            return Err(usage("--dim/--heads", format!("dim {} must be a positive multiple of heads {}", self.dim, self.heads)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(usage("--dropout", "dropout must lie in [0,1)"));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(usage("--lr", "lr must be a non-negative number"));
        }
        if self.epochs == 0 {
            return Err(usage("--epochs", "epochs must be at least 1"));
        }
        if self.patience == 0 {
            return Err(usage("--patience", "patience must be at least 1"));
        }
        SplitRatios::new(self.split[0], self.split[1], self.split[2])
            .map_err(|_| usage("--split", "fractions must be positive and sum to 1"))?;
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(usage("threshold", "threshold must lie in [0,1]"));
        }
        let model = self.model_config();
        model.validate().map_err(|e| usage("model", e))?;
        self.train_config()?.validate().map_err(|e| usage("train", e))?;
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            embedding_dim: self.dim,
            num_heads: self.heads,
            num_layers: self.layers,
            dropout: self.dropout,
            leaky_slope: self.leaky_slope,
            layer_norm_eps: self.layer_norm_eps,
            projection_init_scale: self.projection_init_scale,
            seed: 0,
        }
    }

    pub fn fns_config(&self) -> Result<FnsConfig, CliError> {
        Ok(FnsConfig {
            kernel: self.kernel,
            bandwidth: self.delta.bandwidth()?,
            alpha: self.alpha,
            decision: self.decision,
        })
    }

    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        Ok(TrainConfig {
            epochs_max: self.epochs,
            patience: self.patience,
            adam: AdamConfig {
                lr: self.lr,
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.adam_eps,
            },
            sampling: SamplingMode::Fuzzy,
            fns: self.fns_config()?,
            seed: 0,
            threshold: self.threshold,
        })
    }

    pub fn ratios(&self) -> SplitRatios {
        SplitRatios {
            train: self.split[0],
            validation: self.split[1],
            test: self.split[2],
        }
    }

    pub fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        Ok(ExperimentConfig {
            model: self.model_config(),
            train: self.train_config()?,
            ratios: self.ratios(),
            seeds: self.seeds.clone(),
            modes: self.sampling.modes(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config is always representable")
    }
}

pub fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "graph".into())
}
