use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{FgatError, Result};

/// Threshold metrics plus tie-corrected ROC-AUC for one labelled edge set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub roc_auc: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl MetricsReport {
    /// Mean of precision, recall, F1 and ROC-AUC.
    pub fn mean_of_four(&self) -> f64 {
        (self.precision + self.recall + self.f1 + self.roc_auc) / 4.0
    }
}

/// Probability that a random positive outscores a random negative, ties
/// counted half. Sort-based, `O((P+N) log(P+N))`.
pub fn roc_auc(positives: &[f64], negatives: &[f64]) -> Result<f64> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(FgatError::InvalidArgument("ROC-AUC needs positives and negatives".into()));
    }
    if positives.iter().chain(negatives).any(|v| v.is_nan()) {
        return Err(FgatError::NonFinite("roc_auc scores"));
    }
    let mut all: Vec<(f64, bool)> = positives
        .iter()
        .map(|&s| (s, true))
        .chain(negatives.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));

    // twice the win count keeps half-credit ties integral
    let mut twice_wins: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        let (mut pos_here, mut neg_here) = (0u128, 0u128);
        while j < all.len() && all[j].0 == all[i].0 {
            if all[j].1 {
                pos_here += 1;
            } else {
                neg_here += 1;
            }
            j += 1;
        }
        twice_wins += 2 * pos_here * neg_below + pos_here * neg_here;
        neg_below += neg_here;
        i = j;
    }
    let pairs = positives.len() as f64 * negatives.len() as f64;
    Ok(twice_wins as f64 / (2.0 * pairs))
}

/// Precision, recall, F1 (each 0 when undefined) at `threshold`, where a
/// score `≥ threshold` predicts a link, plus ROC-AUC.
pub fn classification_report(positives: &[f64], negatives: &[f64], threshold: f64) -> Result<MetricsReport> {
    let roc_auc = roc_auc(positives, negatives)?;
    let tp = positives.iter().filter(|&&s| s >= threshold).count();
    let fn_ = positives.len() - tp;
    let fp = negatives.iter().filter(|&&s| s >= threshold).count();
    let tn = negatives.len() - fp;
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(MetricsReport {
        precision,
        recall,
        f1,
        roc_auc,
        tp,
        fp,
        tn,
        fn_,
    })
}

/// `(mean, sample standard deviation)`; the deviation is 0 for one value.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
