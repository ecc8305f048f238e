use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;

use anyhow::{bail, Context, Result};
use forgescore_core::eval::{
    confusion_csv, evaluate_preds, evaluate_probs, predict_label, robustness_eval, EvalReport,
};
use forgescore_core::fusion::{evaluate, load_checkpoint, save_checkpoint, train as fit, FusionConfig, FusionSample};
use forgescore_core::labels::SplitManifest;
use forgescore_core::scoring::ScoringConfig;
use forgescore_core::synth::ResponseModel;
use forgescore_core::tensor_io::{load_cohort, ArtifactKind, TokenFeatures};
use forgescore_core::{ForgeryLabel, VideoManifest};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::args::{EvalArgs, Subset, TrainArgs};
use crate::config::{flags, read_json, usage, write_json, Ctx};

/// One row of `predictions.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_id: Option<String>,
    pub label: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
}

fn find<'a>(videos: &'a [VideoManifest], id: &str) -> Result<&'a VideoManifest> {
    videos.iter().find(|v| v.video_id == id).with_context(|| format!("video {id} is not in the cohort"))
}

fn sample(v: &VideoManifest, label: ForgeryLabel, weight: f64) -> Result<FusionSample> {
    let need = |kind: ArtifactKind| -> Result<_> {
        v.load(kind)?.with_context(|| format!("video {} has no {} artifact", v.video_id, kind.field()))
    };
    let tokens = TokenFeatures::new(need(ArtifactKind::Tokens)?).with_context(|| format!("video {}", v.video_id))?;
    Ok(FusionSample { video_id: v.video_id.clone(), tokens, depth: need(ArtifactKind::DepthFeat)?, label, weight })
}

fn samples(videos: &[VideoManifest], split: &SplitManifest, ids: &[String]) -> Result<Vec<FusionSample>> {
    ids.iter()
        .map(|id| {
            let label = *split.labels.get(id).with_context(|| format!("split has no label for {id}"))?;
            let weight = *split.weights.get(id).with_context(|| format!("split has no weight for {id}"))?;
            sample(find(videos, id)?, label, weight)
        })
        .collect()
}

/// Overrides the input dimensions of `cfg` with those of the data.
fn fit_dims(cfg: &mut FusionConfig, s: &FusionSample) {
    let t = &s.tokens;
    let dims = (t.frames(), t.tokens_per_frame(), t.channels(), s.depth.shape().to_vec());
    if (cfg.frames, cfg.token_count, cfg.token_dim, cfg.depth_feat_shape.clone()) != dims {
        info!("input dimensions taken from the data: tokens {:?}, depth {:?}", (dims.0, dims.1, dims.2), dims.3);
    }
    cfg.frames = dims.0;
    cfg.token_count = dims.1;
    cfg.token_dim = dims.2;
    cfg.fused_dim = dims.3.get(1).copied().unwrap_or(0);
    cfg.depth_feat_shape = dims.3;
}

pub fn train(ctx: &Ctx, a: &TrainArgs) -> Result<Value> {
    let over = flags(&[
        ("seed", Some(json!(ctx.seed))),
        ("epochs", a.epochs.map(Value::from)),
        ("lr", a.lr.map(Value::from)),
        ("batch", a.batch.map(Value::from)),
    ]);
    let mut cfg: FusionConfig = ctx.layers.section("fusion", FusionConfig::default(), over)?;
    let split: SplitManifest = read_json(&a.split)?;
    if !split.is_final() {
        bail!("{} videos are still pending review; finalize the split first", split.pending_review.len());
    }
    let videos = load_cohort(&a.cohort)?;
    let tr = samples(&videos, &split, &split.train)?;
    let va = samples(&videos, &split, &split.val)?;
    let Some(first) = tr.first() else { bail!("the split has no training videos") };
    fit_dims(&mut cfg, first);
    cfg.validate().map_err(|e| usage(e.to_string()))?;

    let out = fit(&tr, &va, &cfg)?;
    let best = out.best().cloned();
    fs::create_dir_all(&a.out)?;
    let mut metrics = BTreeMap::new();
    if let Some(b) = &best {
        metrics.insert("train_loss".to_string(), b.train_loss);
        if let Some(l) = b.val_loss {
            metrics.insert("val_loss".to_string(), l);
        }
        if let Some(acc) = b.val_accuracy {
            metrics.insert("val_accuracy".to_string(), acc);
        }
    }
    save_checkpoint(&a.out.join("checkpoint"), &out.params, &cfg, out.best_epoch, metrics.clone())?;

    let mut csv = String::from("epoch,train_loss,val_loss,val_accuracy,alpha\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &out.history {
        writeln!(csv, "{},{},{},{},{}", r.epoch, r.train_loss, opt(r.val_loss), opt(r.val_accuracy), r.alpha)?;
    }
    fs::write(a.out.join("loss_curve.csv"), csv)?;
    write_json(
        &a.out.join("train_summary.json"),
        &json!({
            "best_epoch": out.best_epoch,
            "steps": out.steps,
            "train_videos": tr.len(),
            "val_videos": va.len(),
            "metrics": metrics,
        }),
    )?;
    match best.and_then(|b| b.val_accuracy) {
        Some(acc) => info!("best epoch {} with val accuracy {acc:.4}", out.best_epoch),
        None => info!("trained {} epochs without a validation set", out.history.len()),
    }
    Ok(json!({ "fusion": cfg }))
}

fn write_report(out: &std::path::Path, report: &EvalReport, records: &[PredictionRecord]) -> Result<()> {
    fs::create_dir_all(out)?;
    write_json(&out.join("report.json"), report)?;
    fs::write(out.join("confusion.csv"), confusion_csv(&report.confusion))?;
    write_json(&out.join("predictions.json"), records)?;
    info!("accuracy {:.4} over {} videos", report.acc, report.n_samples);
    Ok(())
}

fn eval_file(a: &EvalArgs, path: &std::path::Path) -> Result<Value> {
    if a.perturb.is_some() {
        return Err(usage("--perturb needs --cohort and --checkpoint"));
    }
    let records: Vec<PredictionRecord> = read_json(path)?;
    let labels: Vec<usize> = records.iter().map(|r| r.label).collect();
    let report = if records.iter().all(|r| r.probs.is_some()) && !records.is_empty() {
        let probs: Vec<Vec<f64>> = records.iter().map(|r| r.probs.clone().unwrap()).collect();
        evaluate_probs(&probs, &labels)?
    } else {
        let preds = records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.pred
                    .or_else(|| r.probs.as_deref().map(predict_label))
                    .with_context(|| format!("record {i} has neither pred nor probs"))
            })
            .collect::<Result<Vec<_>>>()?;
        evaluate_preds(&preds, &labels)?
    };
    write_report(&a.out, &report, &records)?;
    Ok(json!({ "predictions": path }))
}

pub fn eval(ctx: &Ctx, a: &EvalArgs) -> Result<Value> {
    if let Some(p) = &a.predictions {
        return eval_file(a, p);
    }
    let (Some(cohort_dir), Some(ck)) = (&a.cohort, &a.checkpoint) else {
        return Err(usage("eval needs either --predictions or both --cohort and --checkpoint"));
    };
    let scoring: ScoringConfig = ctx.layers.section("scoring", ScoringConfig::default(), json!({}))?;
    let (meta, params) = load_checkpoint(ck)?;
    let videos = load_cohort(cohort_dir)?;

    let chosen: Vec<(VideoManifest, ForgeryLabel, f64)> = match &a.split {
        Some(path) => {
            let split: SplitManifest = read_json(path)?;
            let ids: Vec<&String> = match a.subset {
                Subset::Train => split.train.iter().collect(),
                Subset::Val => split.val.iter().collect(),
                Subset::All => split.train.iter().chain(&split.val).collect(),
            };
            ids.into_iter()
                .map(|id| Ok((find(&videos, id)?.clone(), split.labels[id], split.weights[id])))
                .collect::<Result<_>>()?
        }
        None => {
            if a.subset != Subset::Val {
                warn!("--subset is ignored without --split; evaluating every video against its planted label");
            }
            videos
                .iter()
                .map(|v| {
                    let l = v
                        .planted_label
                        .with_context(|| format!("video {} has no planted label; pass --split", v.video_id))?;
                    Ok((v.clone(), l, 1.0))
                })
                .collect::<Result<_>>()?
        }
    };
    if chosen.is_empty() {
        bail!("no videos to evaluate");
    }
    let set: Vec<FusionSample> = chosen.iter().map(|(v, l, w)| sample(v, *l, *w)).collect::<Result<_>>()?;
    let summary = evaluate(&params, &set)?;
    let labels: Vec<usize> = set.iter().map(|s| s.label.index()).collect();
    let report = evaluate_probs(&summary.probs, &labels)?;
    let records: Vec<PredictionRecord> = set
        .iter()
        .zip(&summary.probs)
        .map(|(s, p)| PredictionRecord {
            video_id: Some(s.video_id.clone()),
            label: s.label.index(),
            pred: Some(predict_label(p)),
            probs: Some(p.clone()),
        })
        .collect();
    write_report(&a.out, &report, &records)?;

    if let Some(p) = &a.perturb {
        let response = ResponseModel::new(meta.config.token_dim, meta.config.fused_dim);
        let pairs: Vec<(VideoManifest, ForgeryLabel)> = chosen.into_iter().map(|(v, l, _)| (v, l)).collect();
        let r = robustness_eval(&pairs, &params, p, &response, scoring.warp)?;
        info!("{}: accuracy {:.4} -> {:.4}", r.perturbation, r.clean.acc, r.perturbed.acc);
        write_json(&a.out.join("robustness.json"), &r)?;
    }
    Ok(json!({
        "checkpoint": ck,
        "split": a.split,
        "subset": format!("{:?}", a.subset).to_lowercase(),
        "perturb": a.perturb.as_ref().map(|p| p.to_string()),
        "scoring": scoring,
    }))
}
