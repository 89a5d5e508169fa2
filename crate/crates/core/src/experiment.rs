//! Multi-seed runs and the fuzzy-versus-random sampling comparison.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{FgatError, Result};
use crate::graph::{split_edges, Graph, SplitRatios};
use crate::metrics::{mean_std, MetricsReport};
use crate::model::{FgatModel, ModelConfig};
use crate::scalar::Scalar;
use crate::train::{evaluate, fit, EpochReport, SamplingMode, TrainConfig, TrainingData};

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub ratios: SplitRatios,
    pub seeds: Vec<u64>,
    pub modes: Vec<SamplingMode>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            ratios: SplitRatios::default(),
            seeds: vec![0, 1, 2, 3, 4],
            modes: vec![SamplingMode::Fuzzy],
        }
    }
}

/// One trained and evaluated seed.
#[derive(Debug, Clone)]
pub struct RunResult<T> {
    pub seed: u64,
    pub sampling: SamplingMode,
    pub test: MetricsReport,
    pub best_epoch: usize,
    pub best_val_roc_auc: f64,
    pub history: Vec<EpochReport>,
    pub model: FgatModel<T>,
    pub data: TrainingData,
    /// Wall-clock time of training plus test evaluation.
    pub elapsed: Duration,
}

impl<T> RunResult<T> {
    pub fn epochs_trained(&self) -> usize {
        self.history.len()
    }
}

/// `seed` drives the split, the evaluation negatives, the initialization,
/// dropout and per-epoch negative sampling, so two modes under one seed
/// differ only in how training negatives are chosen.
pub fn run_single<T: Scalar>(
    graph: &Graph,
    model: ModelConfig,
    train: TrainConfig,
    ratios: SplitRatios,
    seed: u64,
) -> Result<RunResult<T>> {
    let start = Instant::now();
    let split = split_edges(graph, ratios, seed)?;
    let data = TrainingData::prepare(graph, split, seed)?;
    let model = ModelConfig { seed, ..model };
    let train = TrainConfig { seed, ..train };
    let fitted = fit::<T>(&data, model, train)?;
    let test = evaluate(
        &fitted.model,
        &data.message_edges,
        &data.split.test,
        &data.test_negatives,
        train.threshold,
    )?;
    Ok(RunResult {
        seed,
        sampling: train.sampling,
        test,
        best_epoch: fitted.best_epoch,
        best_val_roc_auc: fitted.best_val_roc_auc,
        history: fitted.history,
        model: fitted.model,
        data,
        elapsed: start.elapsed(),
    })
}

/// Mean and sample standard deviation of the test metrics for one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregate {
    pub sampling: SamplingMode,
    pub runs: usize,
    pub precision: (f64, f64),
    pub recall: (f64, f64),
    pub f1: (f64, f64),
    pub roc_auc: (f64, f64),
}

impl Aggregate {
    pub fn from_reports(sampling: SamplingMode, reports: &[MetricsReport]) -> Self {
        let col = |f: fn(&MetricsReport) -> f64| mean_std(&reports.iter().map(f).collect::<Vec<_>>());
        Self {
            sampling,
            runs: reports.len(),
            precision: col(|r| r.precision),
            recall: col(|r| r.recall),
            f1: col(|r| r.f1),
            roc_auc: col(|r| r.roc_auc),
        }
    }

    /// Mean over seeds of the four-metric average.
    pub fn mean_of_four(&self) -> f64 {
        (self.precision.0 + self.recall.0 + self.f1.0 + self.roc_auc.0) / 4.0
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport<T> {
    pub runs: Vec<RunResult<T>>,
    pub aggregates: Vec<Aggregate>,
}

impl<T> ExperimentReport<T> {
    pub fn aggregate(&self, mode: SamplingMode) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.sampling == mode)
    }
}

/// Trains every `(mode, seed)` combination and aggregates per mode.
pub fn run_experiment<T: Scalar>(graph: &Graph, cfg: &ExperimentConfig) -> Result<ExperimentReport<T>> {
    if cfg.seeds.is_empty() || cfg.modes.is_empty() {
        return Err(FgatError::InvalidArgument("need at least one seed and one sampling mode".into()));
    }
    let mut runs = Vec::with_capacity(cfg.seeds.len() * cfg.modes.len());
    let mut aggregates = Vec::with_capacity(cfg.modes.len());
    for &mode in &cfg.modes {
        let train = TrainConfig {
            sampling: mode,
            ..cfg.train
        };
        let mut reports = Vec::with_capacity(cfg.seeds.len());
        for &seed in &cfg.seeds {
            let run = run_single::<T>(graph, cfg.model, train, cfg.ratios, seed)?;
            log::info!(
                "{mode} seed {seed}: epochs {} best {} test {:?}",
                run.epochs_trained(),
                run.best_epoch,
                run.test
            );
            reports.push(run.test);
            runs.push(run);
        }
        aggregates.push(Aggregate::from_reports(mode, &reports));
    }
    Ok(ExperimentReport { runs, aggregates })
}
