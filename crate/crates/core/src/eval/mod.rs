//! Classification metrics and the robustness harness.
//!
//! Predictions are 4-way label codes; the binary view merges the three
//! anomaly classes into "fake" (1) and maps real to 0.

mod robustness;

use std::fmt::Write as _;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::{FusionError, CLASS_COUNT};
use crate::scoring::ScoreError;
use crate::tensor_io::{ManifestError, SequenceError, TensorIoError};
use crate::ForgeryLabel;

pub use robustness::{perturb_features, robustness_eval, MetricDeltas, RobustnessReport};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no samples to evaluate")]
    Empty,
    #[error("{preds} predictions but {labels} labels")]
    LengthMismatch { preds: usize, labels: usize },
    #[error("label code {0} out of range 0..=3")]
    InvalidCode(i64),
    #[error("probability row {index} sums to {sum}, expected 1")]
    ProbRow { index: usize, sum: f64 },
    #[error("video {video_id}: no frames artifact to perturb")]
    MissingFrames { video_id: String },
    #[error("video {video_id}: {message}")]
    Video { video_id: String, message: String },
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    TensorIo(#[from] TensorIoError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
}

/// `confusion[true][predicted]`
pub type Confusion = [[u64; CLASS_COUNT]; CLASS_COUNT];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_samples: usize,
    pub acc: f64,
    /// Mean of per-class one-vs-rest AUCs over classes with both positives
    /// and negatives; `None` when no class qualifies.
    pub macro_ovr_auc: Option<f64>,
    pub auc_per_class: [Option<f64>; CLASS_COUNT],
    pub confusion: Confusion,
    pub f1_per_class: [f64; CLASS_COUNT],
    pub binary_acc: f64,
    pub binary_auc: Option<f64>,
}

fn check_lengths(preds: usize, labels: usize) -> Result<(), EvalError> {
    if preds != labels {
        return Err(EvalError::LengthMismatch { preds, labels });
    }
    if preds == 0 {
        return Err(EvalError::Empty);
    }
    Ok(())
}

fn check_codes(v: &[usize]) -> Result<(), EvalError> {
    match v.iter().find(|&&c| c >= CLASS_COUNT) {
        Some(&c) => Err(EvalError::InvalidCode(c as i64)),
        None => Ok(()),
    }
}

pub fn accuracy(preds: &[usize], labels: &[usize]) -> Result<f64, EvalError> {
    check_lengths(preds.len(), labels.len())?;
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / preds.len() as f64)
}

pub fn confusion(preds: &[usize], labels: &[usize]) -> Result<Confusion, EvalError> {
    check_lengths(preds.len(), labels.len())?;
    check_codes(preds)?;
    check_codes(labels)?;
    let mut m = [[0u64; CLASS_COUNT]; CLASS_COUNT];
    for (&p, &l) in preds.iter().zip(labels) {
        m[l][p] += 1;
    }
    Ok(m)
}

/// `2PR/(P+R)` per class, with 0/0 taken as 0.
pub fn f1_per_class(m: &Confusion) -> [f64; CLASS_COUNT] {
    let mut out = [0.0; CLASS_COUNT];
    for (c, f1) in out.iter_mut().enumerate() {
        let tp = m[c][c] as f64;
        let row: u64 = m[c].iter().sum();
        let col: u64 = m.iter().map(|r| r[c]).sum();
        let denom = row as f64 + col as f64;
        *f1 = if denom == 0.0 { 0.0 } else { 2.0 * tp / denom };
    }
    out
}

/// ROC-AUC by the Mann-Whitney rank statistic; tied scores count 1/2.
/// `None` without both positives and negatives.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), positive.len());
    let n_pos = positive.iter().filter(|p| **p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based midrank of the tie block i..=j
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += midrank * order[i..=j].iter().filter(|&&k| positive[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Some((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

fn check_probs(probs: &[Vec<f64>]) -> Result<(), EvalError> {
    for (index, row) in probs.iter().enumerate() {
        let sum: f64 = row.iter().sum();
        if row.len() != CLASS_COUNT || !((sum - 1.0).abs() <= 1e-6) {
            return Err(EvalError::ProbRow { index, sum });
        }
    }
    Ok(())
}

/// Per-class one-vs-rest AUCs and their macro average.
pub fn macro_ovr_auc(
    probs: &[Vec<f64>],
    labels: &[usize],
) -> Result<(Option<f64>, [Option<f64>; CLASS_COUNT]), EvalError> {
    check_lengths(probs.len(), labels.len())?;
    check_codes(labels)?;
    check_probs(probs)?;
    let mut per = [None; CLASS_COUNT];
    for (c, slot) in per.iter_mut().enumerate() {
        let scores: Vec<f64> = probs.iter().map(|p| p[c]).collect();
        let pos: Vec<bool> = labels.iter().map(|&l| l == c).collect();
        *slot = binary_auc(&scores, &pos);
        if slot.is_none() {
            warn!("class {c} has no positives or no negatives; skipped in macro AUC");
        }
    }
    let present: Vec<f64> = per.iter().flatten().copied().collect();
    let mean = (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64);
    Ok((mean, per))
}

/// Spatial/appearance/motion → 1 (fake), real → 0.
pub fn binary_map(code: usize) -> Result<u8, EvalError> {
    match code {
        0..=2 => Ok(1),
        3 => Ok(0),
        c => Err(EvalError::InvalidCode(c as i64)),
    }
}

/// `p0 + p1 + p2`
pub fn fake_probability(probs: &[f64]) -> f64 {
    probs[..3].iter().sum()
}

/// Index of the largest probability, lowest index on ties.
pub fn predict_label(probs: &[f64]) -> usize {
    crate::fusion::argmax(probs)
}

/// Full report from probability rows; predictions are their argmax.
pub fn evaluate_probs(probs: &[Vec<f64>], labels: &[usize]) -> Result<EvalReport, EvalError> {
    check_lengths(probs.len(), labels.len())?;
    check_probs(probs)?;
    let preds: Vec<usize> = probs.iter().map(|p| predict_label(p)).collect();
    let (macro_auc, per) = macro_ovr_auc(probs, labels)?;
    let mut report = evaluate_preds(&preds, labels)?;
    report.macro_ovr_auc = macro_auc;
    report.auc_per_class = per;
    let fake: Vec<f64> = probs.iter().map(|p| fake_probability(p)).collect();
    let is_fake: Vec<bool> = labels.iter().map(|&l| l != ForgeryLabel::Real.index()).collect();
    report.binary_auc = binary_auc(&fake, &is_fake);
    Ok(report)
}

/// Report from hard predictions only; AUC fields stay `None`.
pub fn evaluate_preds(preds: &[usize], labels: &[usize]) -> Result<EvalReport, EvalError> {
    let m = confusion(preds, labels)?;
    let bp: Vec<usize> = preds.iter().map(|&p| binary_map(p).map(usize::from)).collect::<Result<_, _>>()?;
    let bl: Vec<usize> = labels.iter().map(|&l| binary_map(l).map(usize::from)).collect::<Result<_, _>>()?;
    Ok(EvalReport {
        n_samples: preds.len(),
        acc: accuracy(preds, labels)?,
        macro_ovr_auc: None,
        auc_per_class: [None; CLASS_COUNT],
        confusion: m,
        f1_per_class: f1_per_class(&m),
        binary_acc: accuracy(&bp, &bl)?,
        binary_auc: None,
    })
}

/// Confusion matrix as CSV: header of predicted class names, one row per true class.
pub fn confusion_csv(m: &Confusion) -> String {
    let mut s = String::from("true\\pred");
    for l in ForgeryLabel::ALL {
        write!(s, ",{}", l.name()).unwrap();
    }
    s.push('\n');
    for (row, l) in m.iter().zip(ForgeryLabel::ALL) {
        s.push_str(l.name());
        for v in row {
            write!(s, ",{v}").unwrap();
        }
        s.push('\n');
    }
    s
}
