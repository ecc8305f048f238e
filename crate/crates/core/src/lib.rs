//! Per-video anomaly scoring, rank-based pseudo-labeling and a small
//! dual-branch fusion classifier for human-centric video forgery analysis.
//!
//! Backbone outputs (optical flow, depth maps, frame embeddings, token
//! features) are ingested as tensors in the `FVT1` format; everything
//! downstream of them is implemented here:
//!
//! * [`warp`]: bilinear backward warping, warping error, blur/resize perturbations
//! * [`consistency`]: sliding-window cosine consistency of embedding streams
//! * [`scoring`]: spatial / appearance / motion anomaly scores per video
//! * [`labels`]: cohort ranking, pseudo-labels, confidence weights, splits
//! * [`fusion`]: the fusion head, rank-weighted loss, AdamW trainer, gradient checks
//! * [`eval`]: accuracy, confusion, F1, one-vs-rest AUC, robustness harness
//! * [`synth`]: deterministic cohorts with planted anomalies

pub mod consistency;
pub mod eval;
pub mod fusion;
pub mod labels;
pub mod rng;
pub mod scoring;
pub mod synth;
pub mod tensor_io;
pub mod warp;

pub use labels::{AnomalyScores, ForgeryLabel};
pub use tensor_io::{Tensor, VideoManifest};
