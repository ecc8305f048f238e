use std::collections::BTreeMap;
use std::fs;

use anyhow::{bail, Context, Result};
use forgescore_core::labels::{
    label_cohort, review_candidates, split_cohort, ConfidenceOrientation, LabeledCohort, RankTable, ReviewStatus,
    ScoredVideo,
};
use forgescore_core::scoring::{score_cohort, ScoringConfig};
use forgescore_core::synth::{generate, ClassCounts, Strengths, SynthSpec};
use forgescore_core::tensor_io::load_cohort;
use forgescore_core::ForgeryLabel;
use forgescore_review::{read_journal, ReviewState, Session};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::args::{LabelArgs, ScoreArgs, SplitArgs, SynthArgs};
use crate::config::{flags, read_json, write_json, Ctx};

pub const SCORES_FILE: &str = "scores.json";

/// `scores.json`
#[derive(Debug, Serialize, Deserialize)]
pub struct ScoresFile {
    pub cohort_id: String,
    pub videos: Vec<ScoredVideo>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct LabelSettings {
    confidence_orientation: ConfidenceOrientation,
}

pub fn synth(ctx: &Ctx, a: &SynthArgs) -> Result<Value> {
    let mut over = flags(&[("seed", Some(json!(ctx.seed)))]);
    if let Some(n) = a.per_class {
        over["counts"] = serde_json::to_value(ClassCounts::uniform(n))?;
    }
    if let Some(s) = a.strength {
        over["strengths"] = serde_json::to_value(Strengths::uniform(s))?;
    }
    let spec: SynthSpec = ctx.layers.section("synth", SynthSpec::default(), over)?;
    spec.validate().map_err(|e| crate::config::usage(e.to_string()))?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let videos = generate(&spec, &a.out)?;
    info!("wrote {} videos of cohort {} to {}", videos.len(), spec.cohort_id(), a.out.display());
    Ok(json!({ "synth": spec }))
}

pub fn score(ctx: &Ctx, a: &ScoreArgs) -> Result<Value> {
    let over = json!({
        "warp": flags(&[("border", a.border.map(Value::from))]),
        "consistency": flags(&[("window", a.window.map(Value::from))]),
    });
    let cfg: ScoringConfig = ctx.layers.section("scoring", ScoringConfig::default(), over)?;
    let videos = load_cohort(&a.cohort)?;
    let Some(first) = videos.first() else { bail!("no videos under {}", a.cohort.display()) };
    let cohort_id = first.cohort_id.clone();
    if let Some(v) = videos.iter().find(|v| v.cohort_id != cohort_id) {
        bail!("video {} belongs to cohort {}, expected {cohort_id}", v.video_id, v.cohort_id);
    }
    let scored = score_cohort(&videos, &cfg, ctx.workers)?;
    fs::create_dir_all(&a.out)?;
    write_json(&a.out.join(SCORES_FILE), &ScoresFile { cohort_id, videos: scored })?;
    info!("scored {} videos", videos.len());
    Ok(json!({ "scoring": cfg, "workers": ctx.workers }))
}

/// Share of fake videos whose pseudo-label matches the planted one.
#[derive(Debug, Serialize)]
struct Agreement {
    fakes: usize,
    agreeing: usize,
    rate: f64,
    per_class: BTreeMap<String, (usize, usize)>,
}

pub fn label(ctx: &Ctx, a: &LabelArgs) -> Result<Value> {
    let over = flags(&[(
        "confidence_orientation",
        a.confidence_orientation.map(|o| serde_json::to_value(ConfidenceOrientation::from(o)).unwrap()),
    )]);
    let settings: LabelSettings = ctx.layers.section("labels", LabelSettings::default(), over)?;
    let scores: ScoresFile = read_json(&a.scores)?;
    let cohort = label_cohort(&scores.cohort_id, &scores.videos, settings.confidence_orientation)?;
    let ranks =
        RankTable { ranks: cohort.videos.iter().filter_map(|v| v.ranks.map(|r| (v.video_id.clone(), r))).collect() };
    fs::create_dir_all(&a.out)?;
    write_json(&a.out.join("labels.json"), &cohort)?;
    write_json(&a.out.join("ranks.json"), &ranks)?;

    if let Some(dir) = &a.cohort {
        let planted: BTreeMap<String, Option<ForgeryLabel>> =
            load_cohort(dir)?.into_iter().map(|v| (v.video_id, v.planted_label)).collect();
        let mut ag = Agreement { fakes: 0, agreeing: 0, rate: 0.0, per_class: BTreeMap::new() };
        for v in cohort.videos.iter().filter(|v| !v.is_real) {
            let Some(Some(truth)) = planted.get(&v.video_id) else {
                warn!("no planted label for {}", v.video_id);
                continue;
            };
            let hit = *truth == v.label;
            ag.fakes += 1;
            ag.agreeing += hit as usize;
            let e = ag.per_class.entry(truth.name().to_string()).or_default();
            e.0 += hit as usize;
            e.1 += 1;
        }
        ag.rate = if ag.fakes == 0 { 0.0 } else { ag.agreeing as f64 / ag.fakes as f64 };
        info!("pseudo-labels agree with planted labels on {}/{} fakes", ag.agreeing, ag.fakes);
        write_json(&a.out.join("agreement.json"), &ag)?;
    }
    Ok(json!({ "labels": settings }))
}

pub fn split(ctx: &Ctx, a: &SplitArgs) -> Result<Value> {
    let mut cohort: LabeledCohort = read_json(&a.labels)?;
    if let Some(path) = &a.journal {
        let events = read_journal(path)?;
        let session = Session::new(cohort.clone(), Vec::new(), ctx.seed)?;
        for ev in &events {
            session
                .check_verdict(&ev.video_id, ev.verdict)
                .with_context(|| format!("journal {} event seq {}", path.display(), ev.seq))?;
        }
        cohort = session.reviewed_cohort(&ReviewState::replay(&events));
        info!("applied {} review events", events.len());
    }
    if a.auto_accept {
        let ids: Vec<String> = review_candidates(&cohort).values().flatten().map(|v| v.video_id.clone()).collect();
        for v in cohort.videos.iter_mut().filter(|v| ids.contains(&v.video_id)) {
            if v.review_state == ReviewStatus::Auto {
                v.review_state = ReviewStatus::Accepted;
            }
        }
    }
    let m = split_cohort(&cohort, ctx.seed)?;
    if !m.is_final() {
        warn!("{} videos still pending review", m.pending_review.len());
    }
    fs::create_dir_all(&a.out)?;
    write_json(&a.out.join("split.json"), &m)?;
    Ok(json!({ "seed": ctx.seed, "auto_accept": a.auto_accept, "journal": a.journal }))
}
