//! Deterministic synthetic cohorts with planted anomaly types.
//!
//! Real videos are band-limited gratings translating at a constant
//! velocity, with a flow field that matches the motion exactly, a smooth
//! depth map moving the same way, and slowly rotating embeddings. Each fake
//! class differs from real in one artifact only:
//!
//! * spatial: rectangular bursts in some depth frames (depth flow stays smooth)
//! * appearance: cumulative angular drift of both embedding streams
//! * motion: random vectors added to a fraction of the frame-flow pixels
//!
//! Token features and depth features carry a class-dependent mean shift so a
//! classifier can learn the classes. Strengths are dimensionless severities;
//! 0 makes a class indistinguishable from real.

mod response;

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{substream, Rng};
use crate::tensor_io::{
    save_manifest, write_tensor, ArtifactKind, Artifacts, ManifestError, TensorIoError, MANIFEST_DIR,
};
use crate::{ForgeryLabel, Tensor, VideoManifest};

pub use response::{channel_frequency, probe_gain, ResponseModel, FREQ_RANGE};

/// Depth burst height per unit of spatial strength, in depth units.
pub const DEPTH_BURST_UNIT: f64 = 1.0;
/// Extra embedding rotation per frame per unit of appearance strength, in radians.
pub const DRIFT_UNIT: f64 = 0.3;
/// Flow corruption magnitude per unit of motion strength, in pixels.
pub const FLOW_CORRUPTION_UNIT: f64 = 3.0;
/// Fraction of pixels whose flow is corrupted in motion fakes.
pub const FLOW_CORRUPTION_FRACTION: f64 = 0.3;
/// Class mean shift of token and depth features per unit of strength.
pub const FEATURE_SHIFT_UNIT: f64 = 1.0;

const EMBED_NOISE: f64 = 0.005;
const EMBED_ROTATION: f64 = 0.02;

pub const SPEC_FILE: &str = "synth.json";
pub const VIDEO_DIR: &str = "videos";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("cohort has no videos")]
    Empty,
    #[error("invalid synth spec: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    TensorIo(#[from] TensorIoError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub spatial: usize,
    pub appearance: usize,
    pub motion: usize,
    pub real: usize,
}

impl ClassCounts {
    pub fn uniform(n: usize) -> Self {
        Self { spatial: n, appearance: n, motion: n, real: n }
    }

    pub fn get(&self, label: ForgeryLabel) -> usize {
        match label {
            ForgeryLabel::Spatial => self.spatial,
            ForgeryLabel::Appearance => self.appearance,
            ForgeryLabel::Motion => self.motion,
            ForgeryLabel::Real => self.real,
        }
    }

    pub fn total(&self) -> usize {
        self.spatial + self.appearance + self.motion + self.real
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strengths {
    pub spatial: f64,
    pub appearance: f64,
    pub motion: f64,
}

impl Strengths {
    pub fn uniform(s: f64) -> Self {
        Self { spatial: s, appearance: s, motion: s }
    }

    pub fn get(&self, label: ForgeryLabel) -> f64 {
        match label {
            ForgeryLabel::Spatial => self.spatial,
            ForgeryLabel::Appearance => self.appearance,
            ForgeryLabel::Motion => self.motion,
            ForgeryLabel::Real => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub seed: u64,
    pub counts: ClassCounts,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub embed_dim: usize,
    pub token_frames: usize,
    pub token_count: usize,
    pub token_dim: usize,
    pub depth_feat_shape: Vec<usize>,
    pub strengths: Strengths,
    pub token_noise: f64,
    /// Seeds the class directions of the feature shift. Cohorts sharing it
    /// share feature geometry, as if produced by the same backbone.
    pub feature_basis_seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            counts: ClassCounts::uniform(20),
            frames: 8,
            height: 32,
            width: 32,
            channels: 3,
            embed_dim: 32,
            token_frames: 4,
            token_count: 5,
            token_dim: 16,
            depth_feat_shape: vec![2, 32, 3, 3],
            strengths: Strengths::uniform(1.0),
            token_noise: 0.5,
            feature_basis_seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn per_class(seed: u64, n: usize) -> Self {
        Self { seed, counts: ClassCounts::uniform(n), ..Self::default() }
    }

    pub fn cohort_id(&self) -> String {
        format!("synth-{}", self.seed)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Invalid(m.to_string()));
        if self.counts.total() == 0 {
            return Err(SynthError::Empty);
        }
        if self.frames < 2 || self.token_frames == 0 {
            return bad("need at least 2 frames and 1 token frame");
        }
        if self.height < 8 || self.width < 8 {
            return bad("frames must be at least 8x8");
        }
        if !matches!(self.channels, 1 | 3) {
            return bad("channels must be 1 or 3");
        }
        if self.embed_dim < 3 || self.token_count < 2 || self.token_dim < 3 {
            return bad("embed_dim and token_dim must be >= 3, token_count >= 2");
        }
        if self.depth_feat_shape.len() < 2 || self.depth_feat_shape.contains(&0) || self.depth_feat_shape[1] < 3 {
            return bad("depth_feat_shape needs rank >= 2, positive dims and >= 3 channels");
        }
        let s = self.strengths;
        if [s.spatial, s.appearance, s.motion, self.token_noise].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("strengths and token_noise must be finite and >= 0");
        }
        Ok(())
    }
}

/// One generated video held in memory.
#[derive(Debug, Clone)]
pub struct SynthVideo {
    pub video_id: String,
    pub label: ForgeryLabel,
    pub artifacts: Vec<(ArtifactKind, Tensor)>,
}

impl SynthVideo {
    pub fn get(&self, kind: ArtifactKind) -> Option<&Tensor> {
        self.artifacts.iter().find(|(k, _)| *k == kind).map(|(_, t)| t)
    }
}

/// Orthonormal rows from Gaussian draws via Gram–Schmidt.
fn orthonormal(rng: &mut Rng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    while out.len() < count {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        for u in &out {
            let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
        }
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-6 {
            out.push(v.into_iter().map(|a| a / n).collect());
        }
    }
    out
}

struct FeatureBasis {
    token_dirs: Vec<Vec<f64>>,
    depth_dirs: Vec<Vec<f64>>,
}

impl FeatureBasis {
    fn new(spec: &SynthSpec) -> Self {
        let mut rng = substream(spec.feature_basis_seed, "synth/feature-basis");
        Self {
            token_dirs: orthonormal(&mut rng, 3, spec.token_dim),
            depth_dirs: orthonormal(&mut rng, 3, spec.depth_feat_shape[1]),
        }
    }
}

struct Grating {
    fx: f64,
    fy: f64,
    amp: f64,
    phase: [f64; 3],
}

fn frames_and_flow(spec: &SynthSpec, rng: &mut Rng, velocity: (f64, f64)) -> (Tensor, Tensor) {
    let (t_n, h, w, c) = (spec.frames, spec.height, spec.width, spec.channels);
    let gratings: Vec<Grating> = (0..4)
        .map(|_| {
            let f = rng.random_range(0.02..0.08);
            let theta = rng.random_range(0.0..2.0 * PI);
            Grating {
                fx: f * theta.cos(),
                fy: f * theta.sin(),
                amp: 0.1,
                phase: [
                    rng.random_range(0.0..2.0 * PI),
                    rng.random_range(0.0..2.0 * PI),
                    rng.random_range(0.0..2.0 * PI),
                ],
            }
        })
        .collect();
    let (vx, vy) = velocity;
    let frames = Tensor::from_fn(vec![t_n, h, w, c], |i| {
        let ch = i % c;
        let x = ((i / c) % w) as f64 - vx * (i / (c * w * h)) as f64;
        let y = ((i / (c * w)) % h) as f64 - vy * (i / (c * w * h)) as f64;
        0.5 + gratings.iter().map(|g| g.amp * (2.0 * PI * (g.fx * x + g.fy * y) + g.phase[ch]).cos()).sum::<f64>()
    })
    .expect("frame shape");
    // backward flow: frame t+1 at p equals frame t at p − v
    let flow = Tensor::from_fn(vec![t_n - 1, h, w, 2], |i| if i % 2 == 0 { -vx } else { -vy }).expect("flow shape");
    (frames, flow)
}

fn depth_and_flow(spec: &SynthSpec, rng: &mut Rng, velocity: (f64, f64)) -> (Tensor, Tensor) {
    let (t_n, h, w) = (spec.frames, spec.height, spec.width);
    let phase = rng.random_range(0.0..2.0 * PI);
    let cx = rng.random_range(0.3..0.7) * w as f64;
    let cy = rng.random_range(0.3..0.7) * h as f64;
    let radius = 0.2 * w.min(h) as f64;
    let (vx, vy) = velocity;
    let depth = Tensor::from_fn(vec![t_n, h, w], |i| {
        let t = (i / (h * w)) as f64;
        let x = (i % w) as f64 - vx * t;
        let y = ((i / w) % h) as f64 - vy * t;
        let blob = (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * radius * radius)).exp();
        2.0 + 0.3 * (2.0 * PI * (0.03 * x + 0.02 * y) + phase).sin() - 0.8 * blob
    })
    .expect("depth shape");
    let flow = Tensor::from_fn(vec![t_n - 1, h, w, 2], |i| if i % 2 == 0 { -vx } else { -vy }).expect("flow shape");
    (depth, flow)
}

fn add_depth_bursts(depth: &mut Tensor, rng: &mut Rng, amplitude: f64) {
    let (t_n, h, w) = (depth.shape()[0], depth.shape()[1], depth.shape()[2]);
    let mut frames: Vec<usize> = (0..t_n).collect();
    frames.shuffle(rng);
    for &t in &frames[..t_n.div_ceil(2)] {
        let bh = rng.random_range(h / 5..=h / 2);
        let bw = rng.random_range(w / 5..=w / 2);
        let y0 = rng.random_range(0..=h - bh);
        let x0 = rng.random_range(0..=w - bw);
        let data = depth.data_mut();
        for y in y0..y0 + bh {
            for x in x0..x0 + bw {
                data[(t * h + y) * w + x] += amplitude;
            }
        }
    }
}

fn corrupt_flow(flow: &mut Tensor, rng: &mut Rng, magnitude: f64) {
    for v in flow.data_mut().chunks_exact_mut(2) {
        if rng.random_bool(FLOW_CORRUPTION_FRACTION) {
            let theta = rng.random_range(0.0..2.0 * PI);
            v[0] += magnitude * theta.cos();
            v[1] += magnitude * theta.sin();
        }
    }
}

/// Slowly rotating unit-ish vectors, optionally drifting away by `drift` rad per frame.
fn embeddings(frames: usize, dim: usize, rng: &mut Rng, drift: f64) -> Tensor {
    let basis = orthonormal(rng, 3, dim);
    let noise = Normal::new(0.0, EMBED_NOISE).expect("positive std");
    let mut data = Vec::with_capacity(frames * dim);
    for t in 0..frames {
        let (phi, theta) = (EMBED_ROTATION * t as f64, drift * t as f64);
        for d in 0..dim {
            let base = phi.cos() * basis[0][d] + phi.sin() * basis[1][d];
            data.push(theta.cos() * base + theta.sin() * basis[2][d] + noise.sample(rng));
        }
    }
    Tensor::new(vec![frames, dim], data).expect("embedding shape")
}

fn shifted_features(
    shape: Vec<usize>,
    channel_axis_len: usize,
    inner: usize,
    shift: Option<(&[f64], f64)>,
    noise: f64,
    rng: &mut Rng,
) -> Tensor {
    let normal = Normal::new(0.0, noise.max(f64::MIN_POSITIVE)).expect("valid std");
    Tensor::from_fn(shape, |i| {
        let ch = (i / inner) % channel_axis_len;
        let mean = shift.map_or(0.0, |(dir, s)| s * dir[ch]);
        let n = if noise > 0.0 { normal.sample(rng) } else { 0.0 };
        mean + n
    })
    .expect("feature shape")
}

fn synth_video(spec: &SynthSpec, basis: &FeatureBasis, video_id: &str, label: ForgeryLabel) -> SynthVideo {
    let mut rng = substream(spec.seed, &format!("synth/video/{video_id}"));
    let speed = rng.random_range(0.5..1.5);
    let heading = rng.random_range(0.0..2.0 * PI);
    let velocity = (speed * heading.cos(), speed * heading.sin());
    let strength = spec.strengths.get(label);

    let (frames, mut frame_flow) = frames_and_flow(spec, &mut rng, velocity);
    let (mut depth, depth_flow) = depth_and_flow(spec, &mut rng, velocity);
    // every class draws the same amount from the anomaly streams so that
    // strength 0 reproduces the real generator exactly
    let mut anomaly_rng = substream(spec.seed, &format!("synth/anomaly/{video_id}"));
    match label {
        ForgeryLabel::Spatial if strength > 0.0 => {
            add_depth_bursts(&mut depth, &mut anomaly_rng, DEPTH_BURST_UNIT * strength)
        }
        ForgeryLabel::Motion if strength > 0.0 => {
            corrupt_flow(&mut frame_flow, &mut anomaly_rng, FLOW_CORRUPTION_UNIT * strength)
        }
        _ => {}
    }
    let drift = if label == ForgeryLabel::Appearance { DRIFT_UNIT * strength } else { 0.0 };
    let clip = embeddings(spec.frames, spec.embed_dim, &mut rng, drift);
    let dino = embeddings(spec.frames, spec.embed_dim, &mut rng, drift);

    let shift = |dirs: &[Vec<f64>]| -> Option<(Vec<f64>, f64)> {
        (label != ForgeryLabel::Real).then(|| (dirs[label.index()].clone(), FEATURE_SHIFT_UNIT * strength))
    };
    let tshift = shift(&basis.token_dirs);
    let tokens = shifted_features(
        vec![spec.token_frames, spec.token_count, spec.token_dim],
        spec.token_dim,
        1,
        tshift.as_ref().map(|(d, s)| (d.as_slice(), *s)),
        spec.token_noise,
        &mut rng,
    );
    let dshape = spec.depth_feat_shape.clone();
    let inner: usize = dshape[2..].iter().product();
    let dshift = shift(&basis.depth_dirs);
    let depth_feat = shifted_features(
        dshape.clone(),
        dshape[1],
        inner,
        dshift.as_ref().map(|(d, s)| (d.as_slice(), *s)),
        spec.token_noise,
        &mut rng,
    );

    SynthVideo {
        video_id: video_id.to_string(),
        label,
        artifacts: vec![
            (ArtifactKind::Frames, frames),
            (ArtifactKind::Depth, depth),
            (ArtifactKind::FrameFlow, frame_flow),
            (ArtifactKind::DepthFlow, depth_flow),
            (ArtifactKind::ClipEmb, clip),
            (ArtifactKind::DinoEmb, dino),
            (ArtifactKind::Tokens, tokens),
            (ArtifactKind::DepthFeat, depth_feat),
        ],
    }
}

/// Builds every video in memory, sorted by id. Ids are handed out after a
/// seeded shuffle so classes interleave.
pub fn synthesize(spec: &SynthSpec) -> Result<Vec<SynthVideo>, SynthError> {
    spec.validate()?;
    let mut labels: Vec<ForgeryLabel> =
        ForgeryLabel::ALL.iter().flat_map(|&l| std::iter::repeat_n(l, spec.counts.get(l))).collect();
    labels.shuffle(&mut substream(spec.seed, "synth/order"));
    let width = spec.counts.total().to_string().len().max(3);
    let basis = FeatureBasis::new(spec);
    Ok(labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| synth_video(spec, &basis, &format!("v{i:0width$}"), label))
        .collect())
}

fn artifact_file(kind: ArtifactKind) -> String {
    format!("{}.fvt", kind.field())
}

/// Writes the cohort under `dir`: `synth.json`, `manifests/<id>.json` and
/// `videos/<id>/<artifact>.fvt`.
pub fn generate(spec: &SynthSpec, dir: &Path) -> Result<Vec<VideoManifest>, SynthError> {
    let videos = synthesize(spec)?;
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SynthError::Io { path, source }
    };
    let mdir = dir.join(MANIFEST_DIR);
    fs::create_dir_all(&mdir).map_err(io(&mdir))?;
    let spec_path = dir.join(SPEC_FILE);
    let mut text = serde_json::to_string_pretty(spec).expect("spec serializes");
    text.push('\n');
    fs::write(&spec_path, text).map_err(io(&spec_path))?;

    let mut manifests = Vec::with_capacity(videos.len());
    for v in &videos {
        let vdir = dir.join(VIDEO_DIR).join(&v.video_id);
        fs::create_dir_all(&vdir).map_err(io(&vdir))?;
        let mut artifacts = Artifacts::default();
        for (kind, tensor) in &v.artifacts {
            let file = artifact_file(*kind);
            write_tensor(tensor, vdir.join(&file))?;
            artifacts.set(*kind, Some(Path::new("..").join(VIDEO_DIR).join(&v.video_id).join(file)));
        }
        let m = VideoManifest {
            video_id: v.video_id.clone(),
            cohort_id: spec.cohort_id(),
            is_real: v.label == ForgeryLabel::Real,
            artifacts,
            planted_label: Some(v.label),
            base_dir: mdir.clone(),
        };
        save_manifest(&m, mdir.join(format!("{}.json", v.video_id)))?;
        manifests.push(m);
    }
    Ok(manifests)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warp::{warping_error, WarpOptions};

    #[test]
    fn counts_and_interleaving() {
        let spec = SynthSpec::per_class(3, 5);
        let vids = synthesize(&spec).unwrap();
        assert_eq!(vids.len(), 20);
        for l in ForgeryLabel::ALL {
            assert_eq!(vids.iter().filter(|v| v.label == l).count(), 5);
        }
        let first: Vec<ForgeryLabel> = vids.iter().take(5).map(|v| v.label).collect();
        assert!(first.iter().any(|l| *l != first[0]));
    }

    #[test]
    fn real_flow_explains_real_frames() {
        let spec =
            SynthSpec { counts: ClassCounts { spatial: 0, appearance: 0, motion: 0, real: 1 }, ..SynthSpec::default() };
        let v = &synthesize(&spec).unwrap()[0];
        let e = warping_error(
            v.get(ArtifactKind::Frames).unwrap(),
            v.get(ArtifactKind::FrameFlow).unwrap(),
            WarpOptions { border: 2 },
        )
        .unwrap();
        // only bilinear interpolation error of a low-frequency grating remains
        assert!(e.total < 1e-3, "{}", e.total);
    }

    #[test]
    fn zero_strength_fakes_match_real_generator() {
        let spec = SynthSpec { strengths: Strengths::uniform(0.0), ..SynthSpec::per_class(1, 2) };
        for v in synthesize(&spec).unwrap() {
            let tokens = v.get(ArtifactKind::Tokens).unwrap();
            assert!(tokens.data().iter().all(|x| x.is_finite()));
        }
    }

    #[test]
    fn rejects_empty_spec() {
        let spec = SynthSpec::per_class(0, 0);
        assert!(matches!(synthesize(&spec), Err(SynthError::Empty)));
    }
}
