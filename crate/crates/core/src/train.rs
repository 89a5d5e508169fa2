//! Full-batch training with per-epoch negative selection, validation-based
//! early stopping and test evaluation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamConfig, AdamState, Tape};
use crate::error::{FgatError, Result};
use crate::fuzzy::{fuzzy_negative_sample, summarize, FnsConfig, ScoringContext};
use crate::graph::{sample_negative_candidates, Edge, EdgeSplit, Graph, MessageEdges, PairSet};
use crate::metrics::{classification_report, MetricsReport};
use crate::model::{link_logits, model_forward, FgatModel, ModelConfig};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    #[default]
    Fuzzy,
    Random,
}

impl SamplingMode {
    pub fn name(self) -> &'static str {
        match self {
            SamplingMode::Fuzzy => "fuzzy",
            SamplingMode::Random => "random",
        }
    }
}

impl fmt::Display for SamplingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplingMode {
    type Err = FgatError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fuzzy" => Ok(SamplingMode::Fuzzy),
            "random" => Ok(SamplingMode::Random),
            other => Err(FgatError::InvalidArgument(format!(
                "unknown sampling mode {other:?} (expected fuzzy or random)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs_max: usize,
    pub patience: usize,
    pub adam: AdamConfig,
    pub sampling: SamplingMode,
    pub fns: FnsConfig,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs_max: 200,
            patience: 20,
            adam: AdamConfig::default(),
            sampling: SamplingMode::Fuzzy,
            fns: FnsConfig::default(),
            seed: 0,
            threshold: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs_max == 0 || self.patience == 0 {
            return Err(FgatError::InvalidArgument("epochs and patience must be at least 1".into()));
        }
        if !(self.adam.lr.is_finite() && self.adam.lr >= 0.0) {
            return Err(FgatError::InvalidArgument("lr must be a non-negative number".into()));
        }
        self.fns.validate()
    }
}

/// SplitMix64 finalizer; derives independent stream seeds from one base seed.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const EVAL_NEGATIVE_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

/// Everything derived from a graph and its split that stays fixed during
/// training.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub split: EdgeSplit,
    /// Same nodes as the input graph, training edges only.
    pub message_graph: Graph,
    pub message_edges: MessageEdges,
    /// Every known positive pair in both directions.
    pub exclusion: PairSet,
    pub val_negatives: Vec<Edge>,
    pub test_negatives: Vec<Edge>,
}

impl TrainingData {
    /// Builds the training message graph and one seeded uniform negative set
    /// per evaluation split (disjoint, same sizes as the positives).
    pub fn prepare(graph: &Graph, split: EdgeSplit, seed: u64) -> Result<Self> {
        let message_graph = graph.with_edge_subset(split.train.clone())?;
        let message_edges = message_graph.message_edges();
        let exclusion = graph.symmetric_pairs();
        let n_val = split.validation.len();
        let needed = n_val + split.test.len();
        let mut eval = sample_negative_candidates(
            graph.num_nodes(),
            &exclusion,
            needed,
            mix_seed(seed, EVAL_NEGATIVE_STREAM),
        )?
        .candidates;
        let test_negatives = eval.split_off(n_val);
        Ok(Self {
            split,
            message_graph,
            message_edges,
            exclusion,
            val_negatives: eval,
            test_negatives,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.message_graph.num_nodes()
    }
}

/// `(min, mean, max)` of a batch of negative-sample quality scores.
pub type ScoreSummary = (f64, f64, f64);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_roc_auc: f64,
    /// Scores of the selected negatives; only in fuzzy mode.
    pub negative_scores: Option<ScoreSummary>,
}

/// Link probabilities of `positives` and `negatives` under `model`, then the
/// four-metric report.
pub fn evaluate<T: Scalar>(
    model: &FgatModel<T>,
    edges: &MessageEdges,
    positives: &[Edge],
    negatives: &[Edge],
    threshold: f64,
) -> Result<MetricsReport> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(FgatError::InvalidArgument("evaluation needs positive and negative edges".into()));
    }
    let pairs: Vec<Edge> = positives.iter().chain(negatives).copied().collect();
    let probs: Vec<f64> = model.predict(edges, &pairs)?.into_iter().map(|p| p.as_f64()).collect();
    let (pos, neg) = probs.split_at(positives.len());
    classification_report(pos, neg, threshold)
}

/// Model, optimizer state and configuration of one training run.
#[derive(Debug, Clone)]
pub struct Trainer<T> {
    pub model: FgatModel<T>,
    pub adam: AdamState<T>,
    pub config: TrainConfig,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(model: FgatModel<T>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let adam = AdamState::new(config.adam, &model.params.tensors());
        Ok(Self { model, adam, config })
    }

    /// Negatives for one epoch, seeded by `seed + epoch`.
    pub fn select_negatives(&self, data: &TrainingData, epoch: usize) -> Result<(Vec<Edge>, Option<ScoreSummary>)> {
        let count = data.split.train.len();
        let seed = self.config.seed.wrapping_add(epoch as u64);
        match self.config.sampling {
            SamplingMode::Fuzzy => {
                let ctx = ScoringContext::new(&data.message_graph, &self.model.params.embeddings, &self.config.fns)?;
                let sel = fuzzy_negative_sample(&ctx, &data.exclusion, count, seed)?;
                Ok((sel.selected_edges(), Some(sel.score_summary())))
            }
            SamplingMode::Random => {
                let set = sample_negative_candidates(data.num_nodes(), &data.exclusion, count, seed)?;
                Ok((set.candidates, None))
            }
        }
    }

    /// Training BCE of the current parameters on `negatives`, without
    /// updating anything.
    pub fn loss_on(&self, data: &TrainingData, negatives: &[Edge], epoch: usize) -> Result<f64> {
        let mut tape = Tape::new();
        let bound = self.model.params.bind(&mut tape, false);
        let loss = self.build_loss(&mut tape, &bound, data, negatives, epoch)?;
        Ok(tape.value(loss).data()[0].as_f64())
    }

    fn build_loss(
        &self,
        tape: &mut Tape<T>,
        bound: &crate::model::BoundParams,
        data: &TrainingData,
        negatives: &[Edge],
        epoch: usize,
    ) -> Result<crate::autodiff::Var> {
        let pass_seed = mix_seed(self.config.seed ^ epoch as u64, DROPOUT_STREAM);
        let h = model_forward(tape, &self.model.config, bound, &data.message_edges, true, pass_seed)?;
        let positives = &data.split.train;
        let pairs: Vec<Edge> = positives.iter().chain(negatives).copied().collect();
        let labels: Vec<T> = (0..pairs.len())
            .map(|i| if i < positives.len() { T::one() } else { T::zero() })
            .collect();
        let logits = link_logits(tape, h, &pairs)?;
        let probs = tape.sigmoid(logits)?;
        tape.bce_loss(probs, &labels)
    }

    /// Negative selection, one forward/backward pass and one Adam step, then
    /// validation ROC-AUC of the updated parameters.
    pub fn train_epoch(&mut self, data: &TrainingData, epoch: usize) -> Result<EpochReport> {
        let (negatives, negative_scores) = self.select_negatives(data, epoch)?;
        let mut tape = Tape::new();
        let bound = self.model.params.bind(&mut tape, true);
        let loss = self.build_loss(&mut tape, &bound, data, &negatives, epoch)?;
        let train_loss = tape.value(loss).data()[0].as_f64();
        tape.backward(loss)?;
        let grads: Vec<_> = bound
            .all
            .iter()
            .map(|&v| tape.grad(v).expect("parameters are trainable"))
            .collect();
        let mut params = self.model.params.tensors_mut();
        self.adam.step(&mut params, &grads)?;
        let val = evaluate(
            &self.model,
            &data.message_edges,
            &data.split.validation,
            &data.val_negatives,
            self.config.threshold,
        )?;
        Ok(EpochReport {
            epoch,
            train_loss,
            val_roc_auc: val.roc_auc,
            negative_scores,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Tracks the best validation score; stops after `patience` epochs without
/// strict improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::NEG_INFINITY,
            best_epoch: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, score: f64) -> StopDecision {
        if score > self.best {
            self.best = score;
            self.best_epoch = epoch;
            StopDecision::Improved
        } else if epoch - self.best_epoch >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

#[derive(Debug, Clone)]
pub struct FitResult<T> {
    /// Parameters restored from the best validation epoch.
    pub model: FgatModel<T>,
    pub history: Vec<EpochReport>,
    pub best_epoch: usize,
    pub best_val_roc_auc: f64,
}

impl<T> FitResult<T> {
    pub fn epochs_trained(&self) -> usize {
        self.history.len()
    }
}

pub fn fit<T: Scalar>(data: &TrainingData, model_config: ModelConfig, config: TrainConfig) -> Result<FitResult<T>> {
    let model = FgatModel::new(model_config, data.num_nodes())?;
    fit_from(data, model, config)
}

/// Like [`fit`], starting from an existing model.
pub fn fit_from<T: Scalar>(data: &TrainingData, model: FgatModel<T>, config: TrainConfig) -> Result<FitResult<T>> {
    let mut trainer = Trainer::new(model, config)?;
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = trainer.model.params.clone();
    let mut history = Vec::new();
    for epoch in 1..=config.epochs_max {
        let report = trainer.train_epoch(data, epoch)?;
        log::debug!(
            "epoch {epoch}: loss {:.6} val_auc {:.4} neg_scores {:?}",
            report.train_loss,
            report.val_roc_auc,
            report.negative_scores
        );
        history.push(report);
        match stopper.observe(epoch, report.val_roc_auc) {
            StopDecision::Improved => best = trainer.model.params.clone(),
            StopDecision::Stop => break,
            StopDecision::Continue => {}
        }
    }
    let mut model = trainer.model;
    model.params = best;
    Ok(FitResult {
        model,
        history,
        best_epoch: stopper.best_epoch(),
        best_val_roc_auc: stopper.best(),
    })
}

/// `(min, mean, max)` over arbitrary values, `(0,0,0)` when empty.
pub fn summary(values: &[f64]) -> (f64, f64, f64) {
    summarize(values.iter().copied())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn early_stop_on_decreasing_validation() {
        let mut s = EarlyStopping::new(1);
        assert_eq!(s.observe(1, 0.8), StopDecision::Improved);
        assert_eq!(s.observe(2, 0.7), StopDecision::Stop);
        assert_eq!(s.best_epoch(), 1);
    }

    #[test]
    fn early_stop_waits_for_patience() {
        let mut s = EarlyStopping::new(3);
        assert_eq!(s.observe(1, 0.5), StopDecision::Improved);
        assert_eq!(s.observe(2, 0.5), StopDecision::Continue);
        assert_eq!(s.observe(3, 0.6), StopDecision::Improved);
        assert_eq!(s.observe(4, 0.1), StopDecision::Continue);
        assert_eq!(s.observe(5, 0.1), StopDecision::Continue);
        assert_eq!(s.observe(6, 0.1), StopDecision::Stop);
        assert_eq!(s.best(), 0.6);
    }

    #[test]
    fn sampling_mode_parsing() {
        assert_eq!("random".parse::<SamplingMode>().unwrap(), SamplingMode::Random);
        assert!("hard".parse::<SamplingMode>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let mut c = TrainConfig::default();
        c.fns.alpha = 1.5;
        assert!(c.validate().is_err());
        let c = TrainConfig {
            patience: 0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn mix_seed_spreads() {
        assert_ne!(mix_seed(0, 1), mix_seed(0, 2));
        assert_ne!(mix_seed(0, 1), mix_seed(1, 1));
    }
}
