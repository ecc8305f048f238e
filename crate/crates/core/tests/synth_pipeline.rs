use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use forgescore_core::eval::robustness_eval;
use forgescore_core::fusion::{save_checkpoint, train, FusionConfig, FusionError, FusionSample};
use forgescore_core::labels::{
    label_cohort, split_cohort, ConfidenceOrientation, LabeledCohort, ReviewStatus, SplitManifest,
};
use forgescore_core::scoring::{missing_artifacts, score_cohort, score_video, ScoreError, ScoringConfig};
use forgescore_core::synth::{generate, ResponseModel, Strengths, SynthSpec};
use forgescore_core::tensor_io::{load_cohort, write_tensor, ArtifactKind, TokenFeatures};
use forgescore_core::warp::{Perturbation, WarpOptions};
use forgescore_core::{ForgeryLabel, Tensor, VideoManifest};

fn labeled(spec: &SynthSpec) -> (tempfile::TempDir, Vec<VideoManifest>, LabeledCohort) {
    let dir = tempfile::tempdir().unwrap();
    generate(spec, dir.path()).unwrap();
    let videos = load_cohort(dir.path()).unwrap();
    let scored = score_cohort(&videos, &ScoringConfig::default(), 2).unwrap();
    let cohort = label_cohort(&spec.cohort_id(), &scored, ConfidenceOrientation::Verbatim).unwrap();
    (dir, videos, cohort)
}

fn recovery(videos: &[VideoManifest], cohort: &LabeledCohort) -> f64 {
    let planted: BTreeMap<&str, ForgeryLabel> =
        videos.iter().map(|v| (v.video_id.as_str(), v.planted_label.unwrap())).collect();
    let fakes: Vec<_> = cohort.videos.iter().filter(|v| !v.is_real).collect();
    let hits = fakes.iter().filter(|v| planted[v.video_id.as_str()] == v.label).count();
    hits as f64 / fakes.len() as f64
}

fn accept_all(cohort: &mut LabeledCohort, seed: u64) -> SplitManifest {
    let pending = split_cohort(cohort, seed).unwrap().pending_review;
    for v in &mut cohort.videos {
        if pending.contains(&v.video_id) {
            v.review_state = ReviewStatus::Accepted;
        }
    }
    split_cohort(cohort, seed).unwrap()
}

fn samples(videos: &[VideoManifest], split: &SplitManifest, ids: &[String]) -> Vec<FusionSample> {
    ids.iter()
        .map(|id| {
            let v = videos.iter().find(|v| &v.video_id == id).unwrap();
            FusionSample {
                video_id: id.clone(),
                tokens: TokenFeatures::new(v.load(ArtifactKind::Tokens).unwrap().unwrap()).unwrap(),
                depth: v.load(ArtifactKind::DepthFeat).unwrap().unwrap(),
                label: split.labels[id],
                weight: split.weights[id],
            }
        })
        .collect()
}

#[test]
fn default_cohort_recovers_planted_labels_and_trains() {
    let spec = SynthSpec::per_class(7, 20);
    let (_dir, videos, mut cohort) = labeled(&spec);
    assert!(recovery(&videos, &cohort) >= 0.95);

    let split = split_cohort(&cohort, 7).unwrap();
    for kind in ForgeryLabel::ANOMALIES {
        let n = cohort.videos.iter().filter(|v| !v.is_real && v.label == kind).count();
        let pending = split.pending_review.iter().filter(|id| split.labels[*id] == kind).count();
        assert_eq!(pending, n.div_ceil(5), "{kind}");
    }

    let split = accept_all(&mut cohort, 7);
    assert!(split.is_final());
    let tr = samples(&videos, &split, &split.train);
    let va = samples(&videos, &split, &split.val);
    let out = train(&tr, &va, &FusionConfig { seed: 7, ..FusionConfig::default() }).unwrap();
    assert!(out.best().unwrap().val_accuracy.unwrap() >= 0.9);
}

#[test]
fn zero_strength_does_not_separate() {
    let spec = SynthSpec { strengths: Strengths::uniform(0.0), ..SynthSpec::per_class(3, 10) };
    let (_dir, videos, cohort) = labeled(&spec);
    let max_of = |real: bool, kind: ForgeryLabel| {
        cohort.videos.iter().filter(|v| v.is_real == real).map(|v| v.scores.get(kind).unwrap()).fold(0.0, f64::max)
    };
    for kind in ForgeryLabel::ANOMALIES {
        let (fake, real) = (max_of(false, kind), max_of(true, kind));
        assert!(fake <= 2.0 * real && real <= 2.0 * fake, "{kind}: fake {fake} real {real}");
    }
    assert!(recovery(&videos, &cohort) < 0.6);
}

#[test]
fn recovery_is_monotone_in_strength() {
    for seed in [1u64, 2, 3] {
        let mut prev = 0.0;
        for s in [0.01, 0.02, 0.04, 0.08, 0.16] {
            let spec = SynthSpec { strengths: Strengths::uniform(s), ..SynthSpec::per_class(seed, 10) };
            let (_dir, videos, cohort) = labeled(&spec);
            let r = recovery(&videos, &cohort);
            println!("seed {seed} strength {s}: {r:.3}");
            assert!(r >= prev, "seed {seed}: {r} < {prev} at strength {s}");
            prev = r;
        }
    }
}

#[test]
fn reals_stay_below_top_fifth_of_each_class() {
    let spec = SynthSpec::per_class(5, 20);
    let (_dir, _videos, cohort) = labeled(&spec);
    for kind in ForgeryLabel::ANOMALIES {
        let mut class: Vec<f64> = cohort
            .videos
            .iter()
            .filter(|v| !v.is_real && v.label == kind)
            .map(|v| v.scores.get(kind).unwrap())
            .collect();
        class.sort_by(|a, b| b.total_cmp(a));
        let threshold = class[class.len().div_ceil(5) - 1];
        for v in cohort.videos.iter().filter(|v| v.is_real) {
            assert!(v.scores.get(kind).unwrap() < threshold, "{} on {kind}", v.video_id);
        }
    }
}

fn tree_bytes(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn identical_seeds_give_identical_bytes() {
    let spec = SynthSpec::per_class(11, 5);
    let mut runs = Vec::new();
    for _ in 0..2 {
        let (dir, videos, mut cohort) = labeled(&spec);
        let split = accept_all(&mut cohort, 11);
        let tr = samples(&videos, &split, &split.train);
        let va = samples(&videos, &split, &split.val);
        let cfg = FusionConfig { seed: 11, epochs: 20, ..FusionConfig::default() };
        let out = train(&tr, &va, &cfg).unwrap();
        let ck = dir.path().join("ck");
        save_checkpoint(&ck, &out.params, &cfg, out.best_epoch, BTreeMap::new()).unwrap();
        fs::write(dir.path().join("split.json"), serde_json::to_vec_pretty(&split).unwrap()).unwrap();
        runs.push(tree_bytes(dir.path()));
    }
    assert!(runs[0].len() > 40);
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn huge_learning_rate_reports_step_and_rate() {
    let spec = SynthSpec::per_class(2, 4);
    let (_dir, videos, mut cohort) = labeled(&spec);
    let split = accept_all(&mut cohort, 2);
    let tr = samples(&videos, &split, &split.train);
    let cfg = FusionConfig { lr: 1e308, epochs: 5, ..FusionConfig::default() };
    match train(&tr, &[], &cfg) {
        Err(FusionError::NonFiniteLoss { lr, .. }) => assert_eq!(lr, 1e308),
        other => panic!("expected a non-finite loss error, got {other:?}"),
    }
}

#[test]
fn scoring_errors_name_the_video() {
    let spec = SynthSpec::per_class(4, 1);
    let dir = tempfile::tempdir().unwrap();
    generate(&spec, dir.path()).unwrap();
    let mut videos = load_cohort(dir.path()).unwrap();

    // single-frame depth cannot be warped
    let v = &videos[0];
    write_tensor(&Tensor::zeros(vec![1, 32, 32]).unwrap(), v.artifact_path(ArtifactKind::Depth).unwrap()).unwrap();
    let err = score_video(v, &ScoringConfig::default()).unwrap_err();
    assert!(err.to_string().contains(&v.video_id), "{err}");

    videos[1].artifacts.depth = None;
    videos[2].artifacts.depth = None;
    let missing = missing_artifacts(&videos);
    assert_eq!(missing[&ArtifactKind::Depth], vec![videos[1].video_id.clone(), videos[2].video_id.clone()]);
    match score_cohort(&videos, &ScoringConfig::default(), 1) {
        Err(ScoreError::MissingInCohort { video_ids, .. }) => assert_eq!(video_ids.len(), 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn scores_do_not_depend_on_worker_count() {
    let spec = SynthSpec::per_class(6, 3);
    let dir = tempfile::tempdir().unwrap();
    generate(&spec, dir.path()).unwrap();
    let videos = load_cohort(dir.path()).unwrap();
    let one = score_cohort(&videos, &ScoringConfig::default(), 1).unwrap();
    let four = score_cohort(&videos, &ScoringConfig::default(), 4).unwrap();
    assert_eq!(one, four);
}

#[test]
fn robustness_identity_and_blur() {
    let spec = SynthSpec::per_class(8, 6);
    let (_dir, videos, mut cohort) = labeled(&spec);
    let split = accept_all(&mut cohort, 8);
    let tr = samples(&videos, &split, &split.train);
    let cfg = FusionConfig { seed: 8, epochs: 60, ..FusionConfig::default() };
    let params = train(&tr, &[], &cfg).unwrap().params;
    let eval_set: Vec<(VideoManifest, ForgeryLabel)> =
        videos.iter().map(|v| (v.clone(), v.planted_label.unwrap())).collect();
    let model = ResponseModel::new(cfg.token_dim, cfg.fused_dim);

    let id = robustness_eval(&eval_set, &params, &Perturbation::Resize { ratio: 1.0 }, &model, WarpOptions::default())
        .unwrap();
    assert_eq!(id.delta.acc, 0.0);
    assert_eq!(id.delta.binary_acc, 0.0);
    assert_eq!(id.delta.macro_ovr_auc, Some(0.0));
    assert_eq!(id.delta.f1_per_class, [0.0; 4]);
    assert_eq!(id.motion_clean_mean, id.motion_perturbed_mean);

    let blur = robustness_eval(&eval_set, &params, &Perturbation::Blur { sigma: 3.0 }, &model, WarpOptions::default())
        .unwrap();
    assert!(blur.delta.acc.is_finite() && blur.delta.binary_acc.is_finite());
    assert!(blur.delta.f1_per_class.iter().all(|d| d.is_finite()));
    assert!(blur.perturbed.auc_per_class.iter().all(|a| a.is_some_and(f64::is_finite)));
    assert!(blur.motion_perturbed_mean < blur.motion_clean_mean);
}
