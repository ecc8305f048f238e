use serde::Serialize;

use super::FusionError;
use crate::ForgeryLabel;

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = e.iter().sum();
    e.into_iter().map(|v| v / sum).collect()
}

pub fn log_softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

/// `−log softmax(z)[target]`
pub fn cross_entropy(logits: &[f64], target: usize) -> f64 {
    -log_softmax(logits)[target]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossReport {
    pub per_sample: Vec<f64>,
    pub weights: Vec<f64>,
    /// `(1/N) Σ α_i L_i`
    pub total: f64,
}

/// Mean of per-sample cross-entropies scaled by their confidence weights.
pub fn rank_weighted_loss(
    logits: &[Vec<f64>],
    labels: &[ForgeryLabel],
    weights: &[f64],
) -> Result<LossReport, FusionError> {
    if logits.len() != labels.len() || logits.len() != weights.len() {
        return Err(FusionError::BatchLength(logits.len(), labels.len().min(weights.len())));
    }
    if logits.is_empty() {
        return Err(FusionError::EmptyTrainSet);
    }
    let per_sample: Vec<f64> = logits.iter().zip(labels).map(|(z, y)| cross_entropy(z, y.index())).collect();
    let total = per_sample.iter().zip(weights).map(|(l, w)| l * w).sum::<f64>() / logits.len() as f64;
    Ok(LossReport { per_sample, weights: weights.to_vec(), total })
}
