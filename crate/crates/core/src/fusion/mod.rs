//! Dual-branch fusion head trained with a rank-weighted cross-entropy.
//!
//! The video branch pools ingested token features two ways (mean over
//! non-CLS tokens, and single-head attention pooling with a mean-pooled
//! query), concatenates them and projects to the depth feature width. The
//! depth branch average-pools its feature map over every non-channel axis.
//! A learnable `α = sigmoid(θ)` blends the two before a linear 4-way head.
//!
//! Gradients are derived by hand; [`gradcheck`] compares them against
//! central finite differences.

mod checkpoint;
mod gradcheck;
mod linalg;
mod loss;
mod model;
mod optim;
mod params;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor_io::{SequenceError, TensorIoError};

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, CHECKPOINT_FILE};
pub use gradcheck::{gradcheck, loss_and_grad, rel_error, GradCheckReport, FD_STEP};
pub use linalg::Matrix;
pub use loss::{cross_entropy, log_softmax, rank_weighted_loss, softmax, LossReport};
pub use model::{attention_pool, depth_pool, forward, pool_tokens, FusionOutput};
pub use optim::AdamW;
pub use params::FusionParams;
pub use train::{argmax, evaluate, predict, train, EpochRecord, EvalSummary, FusionSample, TrainOutcome};

pub const CLASS_COUNT: usize = 4;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("fused dimension mismatch: video branch {video}, depth branch {depth}")]
    FusedDim { video: usize, depth: usize },
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("non-finite loss at epoch {epoch}, step {step} (lr {lr:e})")]
    NonFiniteLoss { epoch: usize, step: usize, lr: f64 },
    #[error("{0} samples but {1} labels/weights")]
    BatchLength(usize, usize),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error(transparent)]
    TensorIo(#[from] TensorIoError),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint header: {0}")]
    Header(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    /// Channel width of each token.
    pub token_dim: usize,
    /// Tokens per frame, CLS included.
    pub token_count: usize,
    pub frames: usize,
    /// Depth feature map shape; axis 1 is the channel axis and must equal `fused_dim`.
    pub depth_feat_shape: Vec<usize>,
    pub fused_dim: usize,
    pub class_count: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            token_dim: 16,
            token_count: 5,
            frames: 4,
            depth_feat_shape: vec![2, 32, 3, 3],
            fused_dim: 32,
            class_count: CLASS_COUNT,
            lr: 5e-3,
            epochs: 200,
            batch: 16,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

impl FusionConfig {
    /// Full-size head: 1408-wide tokens (f_x = 2816), 1024-wide fused
    /// feature, 8 frames, 2×1024×48×48 depth maps, lr 2e-5 for 100 epochs.
    pub fn full_scale() -> Self {
        Self {
            token_dim: 1408,
            token_count: 257,
            frames: 8,
            depth_feat_shape: vec![2, 1024, 48, 48],
            fused_dim: 1024,
            lr: 2e-5,
            epochs: 100,
            batch: 8,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        let bad = |m: String| Err(FusionError::Config(m));
        if self.class_count != CLASS_COUNT {
            return bad(format!("class_count must be {CLASS_COUNT}, got {}", self.class_count));
        }
        if self.fused_dim == 0 || self.token_dim == 0 || self.frames == 0 {
            return bad("fused_dim, token_dim and frames must be positive".into());
        }
        if self.token_count < 2 {
            return bad(format!("token_count must be at least 2, got {}", self.token_count));
        }
        if self.depth_feat_shape.len() < 2 || self.depth_feat_shape.contains(&0) {
            return bad(format!("depth_feat_shape {:?} must have rank >= 2 and positive dims", self.depth_feat_shape));
        }
        if self.depth_feat_shape[1] != self.fused_dim {
            return bad(format!(
                "depth channel axis {} must equal fused_dim {}",
                self.depth_feat_shape[1], self.fused_dim
            ));
        }
        if !(self.lr >= 0.0) || self.batch == 0 {
            return bad("lr must be >= 0 and batch >= 1".into());
        }
        Ok(())
    }
}
