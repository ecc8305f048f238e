use serde::Serialize;

use super::params::FusionParams;
use super::train::{batch_loss_grad, prepare_all, FusionSample};
use super::FusionError;
use crate::ForgeryLabel;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

impl GradCheckReport {
    /// Largest relative error within one parameter block.
    pub fn max_rel_error_in(&self, params: &FusionParams, block: &str) -> f64 {
        (0..self.checked)
            .filter(|&i| params.locate(i).map(|(n, _)| n) == Some(block))
            .map(|i| rel_error(self.analytic[i], self.numeric[i]))
            .fold(0.0, f64::max)
    }
}

/// `|a − n| / max(1e-8, |a| + |n|)`
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Full-batch rank-weighted loss and its analytic gradient.
pub fn loss_and_grad(params: &FusionParams, samples: &[FusionSample]) -> Result<(f64, FusionParams), FusionError> {
    if samples.is_empty() {
        return Err(FusionError::EmptyTrainSet);
    }
    let preps = prepare_all(samples, params)?;
    let batch: Vec<_> = preps.iter().zip(samples).map(|(p, s)| (p, s.label, s.weight)).collect();
    Ok(batch_loss_grad(params, &batch))
}

/// Compares every analytic partial derivative against a central difference.
pub fn gradcheck(params: &FusionParams, samples: &[FusionSample], step: f64) -> Result<GradCheckReport, FusionError> {
    if samples.is_empty() {
        return Err(FusionError::EmptyTrainSet);
    }
    let preps = prepare_all(samples, params)?;
    let batch: Vec<_> =
        preps.iter().zip(samples).map(|(p, s)| (p, s.label, s.weight)).collect::<Vec<(_, ForgeryLabel, f64)>>();
    let (_, grads) = batch_loss_grad(params, &batch);
    let analytic = grads.flat();

    let mut probe = params.clone();
    let mut numeric = Vec::with_capacity(analytic.len());
    for i in 0..analytic.len() {
        let orig = probe.get_flat(i);
        probe.set_flat_at(i, orig + step);
        let (plus, _) = batch_loss_grad(&probe, &batch);
        probe.set_flat_at(i, orig - step);
        let (minus, _) = batch_loss_grad(&probe, &batch);
        probe.set_flat_at(i, orig);
        numeric.push((plus - minus) / (2.0 * step));
    }

    let (worst_index, max_rel_error) = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| rel_error(*a, *n))
        .enumerate()
        .fold((0, 0.0), |acc, (i, e)| if e > acc.1 { (i, e) } else { acc });
    let worst_param = params.locate(worst_index).map(|(n, _)| n).unwrap_or("").to_string();
    Ok(GradCheckReport { checked: analytic.len(), max_rel_error, worst_param, worst_index, analytic, numeric })
}
