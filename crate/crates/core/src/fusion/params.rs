use rand_distr::{Distribution, Normal};

use super::linalg::Matrix;
use super::{FusionConfig, FusionError, CLASS_COUNT};
use crate::rng::substream;
use crate::Tensor;

/// Trainable parameters. `alpha_logit` is the unconstrained θ with `α = sigmoid(θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
    /// Maps the 2C pooled video feature to the fused width D.
    pub proj: Matrix,
    pub proj_bias: Vec<f64>,
    pub alpha_logit: f64,
    pub head: Matrix,
    pub head_bias: Vec<f64>,
}

pub(crate) const PARAM_NAMES: [&str; 8] = ["wq", "wk", "wv", "proj", "proj_bias", "alpha", "head", "head_bias"];

impl FusionParams {
    pub fn zeros(token_dim: usize, fused_dim: usize) -> Self {
        let c = token_dim;
        Self {
            wq: Matrix::zeros(c, c),
            wk: Matrix::zeros(c, c),
            wv: Matrix::zeros(c, c),
            proj: Matrix::zeros(fused_dim, 2 * c),
            proj_bias: vec![0.0; fused_dim],
            alpha_logit: 0.0,
            head: Matrix::zeros(CLASS_COUNT, fused_dim),
            head_bias: vec![0.0; CLASS_COUNT],
        }
    }

    /// Scaled-normal initialization from the `"fusion/init"` substream; α starts at 0.5.
    pub fn init(config: &FusionConfig) -> Result<Self, FusionError> {
        config.validate()?;
        let mut rng = substream(config.seed, "fusion/init");
        let mut p = Self::zeros(config.token_dim, config.fused_dim);
        let fill = |m: &mut Matrix, rng: &mut crate::rng::Rng| {
            let std = (1.0 / m.cols as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            for v in &mut m.data {
                *v = normal.sample(rng);
            }
        };
        fill(&mut p.wq, &mut rng);
        fill(&mut p.wk, &mut rng);
        fill(&mut p.wv, &mut rng);
        fill(&mut p.proj, &mut rng);
        fill(&mut p.head, &mut rng);
        Ok(p)
    }

    pub fn token_dim(&self) -> usize {
        self.wq.rows
    }

    pub fn fused_dim(&self) -> usize {
        self.proj.rows
    }

    pub fn alpha(&self) -> f64 {
        sigmoid(self.alpha_logit)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.token_dim(), self.fused_dim())
    }

    pub fn len(&self) -> usize {
        self.segments().iter().map(|(_, n)| n).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(name, length)` of each parameter block in flattening order.
    pub fn segments(&self) -> [(&'static str, usize); 8] {
        [
            ("wq", self.wq.data.len()),
            ("wk", self.wk.data.len()),
            ("wv", self.wv.data.len()),
            ("proj", self.proj.data.len()),
            ("proj_bias", self.proj_bias.len()),
            ("alpha", 1),
            ("head", self.head.data.len()),
            ("head_bias", self.head_bias.len()),
        ]
    }

    /// Maps a flat index back to `(block name, offset within block)`.
    pub fn locate(&self, mut index: usize) -> Option<(&'static str, usize)> {
        for (name, n) in self.segments() {
            if index < n {
                return Some((name, index));
            }
            index -= n;
        }
        None
    }

    fn blocks(&self) -> [&[f64]; 8] {
        [
            &self.wq.data,
            &self.wk.data,
            &self.wv.data,
            &self.proj.data,
            &self.proj_bias,
            std::slice::from_ref(&self.alpha_logit),
            &self.head.data,
            &self.head_bias,
        ]
    }

    fn blocks_mut(&mut self) -> [&mut [f64]; 8] {
        [
            &mut self.wq.data,
            &mut self.wk.data,
            &mut self.wv.data,
            &mut self.proj.data,
            &mut self.proj_bias,
            std::slice::from_mut(&mut self.alpha_logit),
            &mut self.head.data,
            &mut self.head_bias,
        ]
    }

    pub fn flat(&self) -> Vec<f64> {
        self.blocks().concat()
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.len(), "flat parameter length");
        let mut off = 0;
        for block in self.blocks_mut() {
            block.copy_from_slice(&flat[off..off + block.len()]);
            off += block.len();
        }
    }

    pub fn get_flat(&self, index: usize) -> f64 {
        let (name, i) = self.locate(index).expect("index in range");
        let pos = PARAM_NAMES.iter().position(|n| *n == name).unwrap();
        self.blocks()[pos][i]
    }

    pub fn set_flat_at(&mut self, index: usize, value: f64) {
        let (name, i) = self.locate(index).expect("index in range");
        let pos = PARAM_NAMES.iter().position(|n| *n == name).unwrap();
        self.blocks_mut()[pos][i] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Each block as a tensor: matrices keep their 2-D shape, vectors are rank 1.
    pub fn to_tensors(&self) -> Vec<(&'static str, Tensor)> {
        let mat = |m: &Matrix| Tensor::new(vec![m.rows, m.cols], m.data.clone()).expect("matrix shape");
        let vec1 = |v: &[f64]| Tensor::new(vec![v.len()], v.to_vec()).expect("vector shape");
        vec![
            ("wq", mat(&self.wq)),
            ("wk", mat(&self.wk)),
            ("wv", mat(&self.wv)),
            ("proj", mat(&self.proj)),
            ("proj_bias", vec1(&self.proj_bias)),
            ("alpha", vec1(&[self.alpha_logit])),
            ("head", mat(&self.head)),
            ("head_bias", vec1(&self.head_bias)),
        ]
    }

    /// Inverse of [`to_tensors`](Self::to_tensors); checks every block's shape.
    pub fn from_tensors(
        token_dim: usize,
        fused_dim: usize,
        mut get: impl FnMut(&str) -> Result<Tensor, FusionError>,
    ) -> Result<Self, FusionError> {
        let mut p = Self::zeros(token_dim, fused_dim);
        let expected: Vec<(&str, Vec<usize>)> = vec![
            ("wq", vec![token_dim, token_dim]),
            ("wk", vec![token_dim, token_dim]),
            ("wv", vec![token_dim, token_dim]),
            ("proj", vec![fused_dim, 2 * token_dim]),
            ("proj_bias", vec![fused_dim]),
            ("alpha", vec![1]),
            ("head", vec![CLASS_COUNT, fused_dim]),
            ("head_bias", vec![CLASS_COUNT]),
        ];
        for (pos, (name, shape)) in expected.into_iter().enumerate() {
            let t = get(name)?;
            if t.shape() != shape.as_slice() {
                return Err(FusionError::Shape(format!("parameter {name}: expected {shape:?}, found {:?}", t.shape())));
            }
            p.blocks_mut()[pos].copy_from_slice(t.data());
        }
        Ok(p)
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
