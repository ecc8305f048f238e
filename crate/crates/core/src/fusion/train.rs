use log::{debug, info};
use rand::seq::SliceRandom;
use serde::Serialize;

use super::loss::cross_entropy;
use super::model::{backward, forward_prepared, FusionOutput, Prepared};
use super::optim::AdamW;
use super::params::FusionParams;
use super::{FusionConfig, FusionError};
use crate::rng::substream;
use crate::tensor_io::TokenFeatures;
use crate::{ForgeryLabel, Tensor};

#[derive(Debug, Clone)]
pub struct FusionSample {
    pub video_id: String,
    pub tokens: TokenFeatures,
    /// Depth feature map; axis 1 is the channel axis.
    pub depth: Tensor,
    pub label: ForgeryLabel,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
    pub alpha: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the selected epoch.
    pub params: FusionParams,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    pub steps: u64,
}

impl TrainOutcome {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.history.get(self.best_epoch)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    /// Unweighted mean cross-entropy.
    pub loss: f64,
    pub accuracy: f64,
    pub predictions: Vec<usize>,
    pub probs: Vec<Vec<f64>>,
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn prepare_all(samples: &[FusionSample], params: &FusionParams) -> Result<Vec<Prepared>, FusionError> {
    samples.iter().map(|s| Prepared::new(&s.tokens, &s.depth, params)).collect()
}

/// Weighted batch loss `(1/B) Σ α_i L_i` and its gradient.
pub(crate) fn batch_loss_grad(params: &FusionParams, batch: &[(&Prepared, ForgeryLabel, f64)]) -> (f64, FusionParams) {
    let mut grads = params.zeros_like();
    let n = batch.len() as f64;
    let mut loss = 0.0;
    for (prep, label, weight) in batch {
        let (out, cache) = forward_prepared(prep, params);
        loss += weight * cross_entropy(&out.logits, label.index());
        let c = weight / n;
        let mut dz: Vec<f64> = out.probs.iter().map(|p| c * p).collect();
        dz[label.index()] -= c;
        backward(prep, params, &out, &cache, &dz, &mut grads);
    }
    (loss / n, grads)
}

fn evaluate_prepared(params: &FusionParams, preps: &[Prepared], labels: &[ForgeryLabel]) -> EvalSummary {
    let mut loss = 0.0;
    let mut correct = 0usize;
    let mut predictions = Vec::with_capacity(preps.len());
    let mut probs = Vec::with_capacity(preps.len());
    for (prep, label) in preps.iter().zip(labels) {
        let (out, _) = forward_prepared(prep, params);
        loss += cross_entropy(&out.logits, label.index());
        let pred = argmax(&out.probs);
        correct += usize::from(pred == label.index());
        predictions.push(pred);
        probs.push(out.probs);
    }
    let n = preps.len().max(1) as f64;
    EvalSummary { loss: loss / n, accuracy: correct as f64 / n, predictions, probs }
}

pub fn evaluate(params: &FusionParams, samples: &[FusionSample]) -> Result<EvalSummary, FusionError> {
    let preps = prepare_all(samples, params)?;
    let labels: Vec<ForgeryLabel> = samples.iter().map(|s| s.label).collect();
    Ok(evaluate_prepared(params, &preps, &labels))
}

pub fn predict(params: &FusionParams, tokens: &TokenFeatures, depth: &Tensor) -> Result<FusionOutput, FusionError> {
    super::model::forward(tokens, depth, params)
}

/// Mini-batch AdamW. Keeps the epoch with the highest validation accuracy
/// (ties: lower validation loss, then the earlier epoch); without a
/// validation set the final epoch is kept.
pub fn train(
    train_set: &[FusionSample],
    val_set: &[FusionSample],
    config: &FusionConfig,
) -> Result<TrainOutcome, FusionError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(FusionError::EmptyTrainSet);
    }
    let mut params = FusionParams::init(config)?;
    let train_prep = prepare_all(train_set, &params)?;
    let val_prep = prepare_all(val_set, &params)?;
    let val_labels: Vec<ForgeryLabel> = val_set.iter().map(|s| s.label).collect();
    let mut opt = AdamW::new(params.len(), config.beta1, config.beta2, config.eps, config.weight_decay);

    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, f64, FusionParams)> = None;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut step = 0usize;

    for epoch in 0..config.epochs {
        let mut rng = substream(config.seed, &format!("fusion/epoch/{epoch}"));
        order.sort_unstable();
        order.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch) {
            let batch: Vec<(&Prepared, ForgeryLabel, f64)> =
                chunk.iter().map(|&i| (&train_prep[i], train_set[i].label, train_set[i].weight)).collect();
            let (loss, grads) = batch_loss_grad(&params, &batch);
            if !loss.is_finite() || !grads.is_finite() {
                return Err(FusionError::NonFiniteLoss { epoch, step, lr: config.lr });
            }
            opt.step(&mut params, &grads, config.lr);
            if !params.is_finite() {
                return Err(FusionError::NonFiniteLoss { epoch, step, lr: config.lr });
            }
            epoch_loss += loss * chunk.len() as f64;
            step += 1;
        }
        let train_loss = epoch_loss / train_set.len() as f64;

        let (val_loss, val_accuracy) = if val_prep.is_empty() {
            (None, None)
        } else {
            let s = evaluate_prepared(&params, &val_prep, &val_labels);
            (Some(s.loss), Some(s.accuracy))
        };
        debug!("epoch {epoch}: train {train_loss:.5} val {val_loss:?} acc {val_accuracy:?}");
        history.push(EpochRecord { epoch, train_loss, val_loss, val_accuracy, alpha: params.alpha() });

        let (acc, vl) = (val_accuracy.unwrap_or(0.0), val_loss.unwrap_or(0.0));
        let better = match &best {
            None => true,
            Some(_) if val_prep.is_empty() => true,
            Some((_, best_acc, best_loss, _)) => acc > *best_acc || (acc == *best_acc && vl < *best_loss),
        };
        if better {
            best = Some((epoch, acc, vl, params.clone()));
        }
    }

    let (best_epoch, params) = match best {
        Some((e, _, _, p)) => (e, p),
        None => (0, params),
    };
    if let Some(rec) = history.get(best_epoch) {
        info!("selected epoch {best_epoch} (val acc {:?}, val loss {:?})", rec.val_accuracy, rec.val_loss);
    }
    Ok(TrainOutcome { params, best_epoch, history, steps: opt.steps() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[0.25, 0.25, 0.25, 0.25]), 0);
        assert_eq!(argmax(&[0.1, 0.4, 0.4, 0.1]), 1);
    }
}
