use serde::{Deserialize, Serialize};

use super::{evaluate_probs, EvalError, EvalReport};
use crate::fusion::{forward, FusionParams, CLASS_COUNT};
use crate::scoring::motion_score_with;
use crate::synth::ResponseModel;
use crate::tensor_io::{ArtifactKind, TokenFeatures};
use crate::warp::{Perturbation, WarpOptions};
use crate::{ForgeryLabel, Tensor, VideoManifest};

/// `perturbed − clean`; AUC deltas are `None` when either side is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDeltas {
    pub acc: f64,
    pub macro_ovr_auc: Option<f64>,
    pub binary_acc: f64,
    pub binary_auc: Option<f64>,
    pub f1_per_class: [f64; CLASS_COUNT],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub perturbation: String,
    pub clean: EvalReport,
    pub perturbed: EvalReport,
    pub delta: MetricDeltas,
    pub motion_clean_mean: f64,
    pub motion_perturbed_mean: f64,
}

fn deltas(clean: &EvalReport, pert: &EvalReport) -> MetricDeltas {
    let opt = |a: Option<f64>, b: Option<f64>| Some(b? - a?);
    let mut f1 = [0.0; CLASS_COUNT];
    for (c, d) in f1.iter_mut().enumerate() {
        *d = pert.f1_per_class[c] - clean.f1_per_class[c];
    }
    MetricDeltas {
        acc: pert.acc - clean.acc,
        macro_ovr_auc: opt(clean.macro_ovr_auc, pert.macro_ovr_auc),
        binary_acc: pert.binary_acc - clean.binary_acc,
        binary_auc: opt(clean.binary_auc, pert.binary_auc),
        f1_per_class: f1,
    }
}

/// Scales token channels (last axis) and depth-feature channels (axis 1) by their gains.
pub fn perturb_features(tokens: &Tensor, depth: &Tensor, token_gains: &[f64], depth_gains: &[f64]) -> (Tensor, Tensor) {
    let c = *tokens.shape().last().expect("token rank");
    assert_eq!(c, token_gains.len(), "token gain count");
    let mut t = tokens.clone();
    for (i, v) in t.data_mut().iter_mut().enumerate() {
        *v *= token_gains[i % c];
    }
    let ch = depth.shape()[1];
    assert_eq!(ch, depth_gains.len(), "depth gain count");
    let inner: usize = depth.shape()[2..].iter().product();
    let mut d = depth.clone();
    for (i, v) in d.data_mut().iter_mut().enumerate() {
        *v *= depth_gains[(i / inner) % ch];
    }
    (t, d)
}

fn load(v: &VideoManifest, kind: ArtifactKind) -> Result<Tensor, EvalError> {
    v.load(kind)?
        .ok_or_else(|| EvalError::Video { video_id: v.video_id.clone(), message: format!("missing `{kind}` artifact") })
}

/// Evaluates `params` on clean and perturbed versions of each video. Frames
/// are perturbed and re-scored for motion; token and depth features are
/// re-derived through `response`.
pub fn robustness_eval(
    videos: &[(VideoManifest, ForgeryLabel)],
    params: &FusionParams,
    perturbation: &Perturbation,
    response: &ResponseModel,
    warp: WarpOptions,
) -> Result<RobustnessReport, EvalError> {
    if videos.is_empty() {
        return Err(EvalError::Empty);
    }
    let (tg, dg) = response
        .gains(perturbation)
        .map_err(|e| EvalError::Video { video_id: "<probe>".into(), message: e.to_string() })?;
    let mut clean_probs = Vec::with_capacity(videos.len());
    let mut pert_probs = Vec::with_capacity(videos.len());
    let mut labels = Vec::with_capacity(videos.len());
    let (mut motion_clean, mut motion_pert) = (0.0, 0.0);
    for (v, label) in videos {
        if !v.has(ArtifactKind::Frames) {
            return Err(EvalError::MissingFrames { video_id: v.video_id.clone() });
        }
        motion_clean += motion_score_with(v, warp, None)?;
        motion_pert += motion_score_with(v, warp, Some(perturbation))?;

        let tokens = load(v, ArtifactKind::Tokens)?;
        let depth = load(v, ArtifactKind::DepthFeat)?;
        let (pt, pd) = perturb_features(&tokens, &depth, &tg, &dg);
        let clean = forward(&TokenFeatures::new(tokens)?, &depth, params)?;
        let pert = forward(&TokenFeatures::new(pt)?, &pd, params)?;
        clean_probs.push(clean.probs);
        pert_probs.push(pert.probs);
        labels.push(label.index());
    }
    let clean = evaluate_probs(&clean_probs, &labels)?;
    let perturbed = evaluate_probs(&pert_probs, &labels)?;
    let n = videos.len() as f64;
    Ok(RobustnessReport {
        perturbation: perturbation.to_string(),
        delta: deltas(&clean, &perturbed),
        clean,
        perturbed,
        motion_clean_mean: motion_clean / n,
        motion_perturbed_mean: motion_pert / n,
    })
}
