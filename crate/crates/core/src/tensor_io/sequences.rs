//! Validated views over ingested artifacts. Each wrapper owns its tensor and
//! guarantees the layout documented on the type.

use thiserror::Error;

use super::tensor::Tensor;

#[derive(Debug, Error, PartialEq)]
pub enum SequenceError {
    #[error("{kind} expects shape {expected}, got {got:?}")]
    Shape { kind: &'static str, expected: &'static str, got: Vec<usize> },
    #[error("{kind} needs at least 2 frames, got {frames}")]
    TooShort { kind: &'static str, frames: usize },
    #[error("{kind} channel count must be 1 or 3, got {channels}")]
    Channels { kind: &'static str, channels: usize },
    #[error("embedding row {row} has zero norm")]
    ZeroNorm { row: usize },
    #[error("token features need a CLS token plus at least one patch token, got L = {tokens}")]
    TooFewTokens { tokens: usize },
}

fn shape_err(kind: &'static str, expected: &'static str, t: &Tensor) -> SequenceError {
    SequenceError::Shape { kind, expected, got: t.shape().to_vec() }
}

/// RGB or grayscale frames, `[T, H, W, C]`, values clamped into `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence(Tensor);

impl FrameSequence {
    pub fn new(t: Tensor) -> Result<Self, SequenceError> {
        const KIND: &str = "frame sequence";
        let t = match t.rank() {
            3 => {
                let mut shape = t.shape().to_vec();
                shape.push(1);
                t.reshape(shape).expect("same element count")
            }
            4 => t,
            _ => return Err(shape_err(KIND, "[T, H, W, C]", &t)),
        };
        let s = t.shape();
        if s[0] < 2 {
            return Err(SequenceError::TooShort { kind: KIND, frames: s[0] });
        }
        if s[3] != 1 && s[3] != 3 {
            return Err(SequenceError::Channels { kind: KIND, channels: s[3] });
        }
        let mut t = t;
        for v in t.data_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self(t))
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }

    pub fn frames(&self) -> usize {
        self.0.shape()[0]
    }

    /// `(H, W, C)`
    pub fn frame_dims(&self) -> (usize, usize, usize) {
        let s = self.0.shape();
        (s[1], s[2], s[3])
    }

    pub fn frame(&self, t: usize) -> Tensor {
        self.0.outer_tensor(t)
    }
}

/// Per-frame depth, `[T, H, W]`, linearly rescaled per video into `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthSequence(Tensor);

impl DepthSequence {
    /// Normalizes raw depth (any units) by the video-wide min and max. A
    /// constant depth video maps to all zeros.
    pub fn from_raw(t: Tensor) -> Result<Self, SequenceError> {
        const KIND: &str = "depth sequence";
        let t = match t.rank() {
            3 => t,
            4 if t.shape()[3] == 1 => {
                let s = t.shape()[..3].to_vec();
                t.reshape(s).expect("same element count")
            }
            _ => return Err(shape_err(KIND, "[T, H, W]", &t)),
        };
        if t.shape()[0] < 2 {
            return Err(SequenceError::TooShort { kind: KIND, frames: t.shape()[0] });
        }
        let (lo, hi) = t.min_max();
        let span = hi - lo;
        let mut t = t;
        for v in t.data_mut() {
            *v = if span > 0.0 { ((*v - lo) / span).clamp(0.0, 1.0) } else { 0.0 };
        }
        Ok(Self(t))
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn frames(&self) -> usize {
        self.0.shape()[0]
    }
}

/// Backward flow on the target grid, `[T-1, H, W, 2]` holding `(dx, dy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField(Tensor);

impl FlowField {
    pub fn new(t: Tensor) -> Result<Self, SequenceError> {
        if t.rank() != 4 || t.shape()[3] != 2 {
            return Err(shape_err("flow field", "[T-1, H, W, 2]", &t));
        }
        Ok(Self(t))
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn pairs(&self) -> usize {
        self.0.shape()[0]
    }
}

/// Per-frame embedding vectors, `[T, D]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence(Tensor);

impl EmbeddingSequence {
    pub fn new(t: Tensor) -> Result<Self, SequenceError> {
        const KIND: &str = "embedding sequence";
        if t.rank() != 2 {
            return Err(shape_err(KIND, "[T, D]", &t));
        }
        if t.shape()[0] < 2 {
            return Err(SequenceError::TooShort { kind: KIND, frames: t.shape()[0] });
        }
        for row in 0..t.shape()[0] {
            if t.outer(row).iter().all(|v| *v == 0.0) {
                return Err(SequenceError::ZeroNorm { row });
            }
        }
        Ok(Self(t))
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.0.shape()[1]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        self.0.outer(t)
    }
}

/// Token features `[T, L, C]`; token 0 of every frame is the CLS token.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenFeatures(Tensor);

impl TokenFeatures {
    pub fn new(t: Tensor) -> Result<Self, SequenceError> {
        if t.rank() != 3 {
            return Err(shape_err("token features", "[T, L, C]", &t));
        }
        if t.shape()[1] < 2 {
            return Err(SequenceError::TooFewTokens { tokens: t.shape()[1] });
        }
        Ok(Self(t))
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn frames(&self) -> usize {
        self.0.shape()[0]
    }

    pub fn tokens_per_frame(&self) -> usize {
        self.0.shape()[1]
    }

    pub fn channels(&self) -> usize {
        self.0.shape()[2]
    }

    /// Token `l` of frame `t`.
    pub fn token(&self, t: usize, l: usize) -> &[f64] {
        let c = self.channels();
        let start = (t * self.tokens_per_frame() + l) * c;
        &self.0.data()[start..start + c]
    }

    pub fn is_cls(&self, flat_index: usize) -> bool {
        flat_index.is_multiple_of(self.tokens_per_frame())
    }
}
