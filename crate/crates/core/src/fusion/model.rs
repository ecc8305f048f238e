use serde::Serialize;

use super::linalg::{axpy, dot};
use super::loss::softmax;
use super::params::{sigmoid, FusionParams};
use super::FusionError;
use crate::tensor_io::TokenFeatures;
use crate::Tensor;

/// Every intermediate of one forward pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusionOutput {
    pub f_avg: Vec<f64>,
    pub f_attn: Vec<f64>,
    /// `[f_avg; f_attn]`
    pub f_x: Vec<f64>,
    /// Projected video feature.
    pub x_proj: Vec<f64>,
    pub f_y: Vec<f64>,
    pub alpha: f64,
    pub f_hfr: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Pooled inputs that do not depend on the parameters.
#[derive(Debug, Clone)]
pub(crate) struct Prepared {
    /// All `T·L` tokens, row-major `[N, C]`.
    pub tokens: Vec<f64>,
    pub channels: usize,
    pub f_avg: Vec<f64>,
    /// Mean over all tokens, CLS included; the attention query input.
    pub mean_all: Vec<f64>,
    pub f_y: Vec<f64>,
}

pub(crate) struct Cache {
    q: Vec<f64>,
    attn: Vec<f64>,
    /// `Σ_j a_j x_j`
    attended: Vec<f64>,
}

impl Prepared {
    pub fn new(tokens: &TokenFeatures, depth: &Tensor, params: &FusionParams) -> Result<Self, FusionError> {
        let c = tokens.channels();
        if c != params.token_dim() {
            return Err(FusionError::Shape(format!("token channels {c} but the model expects {}", params.token_dim())));
        }
        let f_y = depth_pool(depth)?;
        if f_y.len() != params.fused_dim() {
            return Err(FusionError::FusedDim { video: params.fused_dim(), depth: f_y.len() });
        }
        Ok(Self {
            tokens: tokens.tensor().data().to_vec(),
            channels: c,
            f_avg: pool_tokens(tokens),
            mean_all: mean_rows(tokens.tensor().data(), c),
            f_y,
        })
    }

    fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.tokens.chunks_exact(self.channels)
    }
}

fn mean_rows(data: &[f64], c: usize) -> Vec<f64> {
    let mut acc = vec![0.0; c];
    let mut n = 0usize;
    for row in data.chunks_exact(c) {
        axpy(&mut acc, 1.0, row);
        n += 1;
    }
    acc.iter().map(|v| v / n as f64).collect()
}

/// Mean over every non-CLS token of every frame.
pub fn pool_tokens(tokens: &TokenFeatures) -> Vec<f64> {
    let c = tokens.channels();
    let mut acc = vec![0.0; c];
    let mut n = 0usize;
    for t in 0..tokens.frames() {
        for l in 1..tokens.tokens_per_frame() {
            axpy(&mut acc, 1.0, tokens.token(t, l));
            n += 1;
        }
    }
    acc.iter().map(|v| v / n as f64).collect()
}

/// Single-head attention pooling over all tokens with the mean token as query.
pub fn attention_pool(tokens: &TokenFeatures, params: &FusionParams) -> Result<Vec<f64>, FusionError> {
    let c = tokens.channels();
    if c != params.token_dim() {
        return Err(FusionError::Shape(format!("token channels {c} but the model expects {}", params.token_dim())));
    }
    let mean = mean_rows(tokens.tensor().data(), c);
    let (f_attn, _) = attend(tokens.tensor().data(), c, &mean, params);
    Ok(f_attn)
}

fn attend(tokens: &[f64], c: usize, mean: &[f64], params: &FusionParams) -> (Vec<f64>, Cache) {
    let scale = 1.0 / (c as f64).sqrt();
    let q = params.wq.matvec(mean);
    // q·(Wk x_j) = (Wkᵀ q)·x_j
    let kq = params.wk.matvec_t(&q);
    let scores: Vec<f64> = tokens.chunks_exact(c).map(|x| scale * dot(&kq, x)).collect();
    let attn = softmax(&scores);
    let mut attended = vec![0.0; c];
    for (a, x) in attn.iter().zip(tokens.chunks_exact(c)) {
        axpy(&mut attended, *a, x);
    }
    let f_attn = params.wv.matvec(&attended);
    (f_attn, Cache { q, attn, attended })
}

/// Mean over every axis except axis 1.
pub fn depth_pool(depth: &Tensor) -> Result<Vec<f64>, FusionError> {
    let shape = depth.shape();
    if shape.len() < 2 {
        return Err(FusionError::Shape(format!("depth features need rank >= 2, got {shape:?}")));
    }
    let (outer, ch) = (shape[0], shape[1]);
    let inner: usize = shape[2..].iter().product();
    let mut acc = vec![0.0; ch];
    for block in depth.data().chunks_exact(ch * inner).take(outer) {
        for (c, lane) in block.chunks_exact(inner).enumerate() {
            acc[c] += lane.iter().sum::<f64>();
        }
    }
    let n = (outer * inner) as f64;
    Ok(acc.into_iter().map(|v| v / n).collect())
}

pub fn forward(tokens: &TokenFeatures, depth: &Tensor, params: &FusionParams) -> Result<FusionOutput, FusionError> {
    let prep = Prepared::new(tokens, depth, params)?;
    Ok(forward_prepared(&prep, params).0)
}

pub(crate) fn forward_prepared(prep: &Prepared, params: &FusionParams) -> (FusionOutput, Cache) {
    let (f_attn, cache) = attend(&prep.tokens, prep.channels, &prep.mean_all, params);
    let f_x = [prep.f_avg.as_slice(), &f_attn].concat();
    let mut x_proj = params.proj.matvec(&f_x);
    axpy(&mut x_proj, 1.0, &params.proj_bias);
    let alpha = sigmoid(params.alpha_logit);
    let f_hfr: Vec<f64> = x_proj.iter().zip(&prep.f_y).map(|(x, y)| alpha * x + (1.0 - alpha) * y).collect();
    let mut logits = params.head.matvec(&f_hfr);
    axpy(&mut logits, 1.0, &params.head_bias);
    let probs = softmax(&logits);
    let out = FusionOutput {
        f_avg: prep.f_avg.clone(),
        f_attn,
        f_x,
        x_proj,
        f_y: prep.f_y.clone(),
        alpha,
        f_hfr,
        logits,
        probs,
    };
    (out, cache)
}

/// Accumulates `∂L/∂params` into `grads` given `dz = ∂L/∂logits`.
pub(crate) fn backward(
    prep: &Prepared,
    params: &FusionParams,
    out: &FusionOutput,
    cache: &Cache,
    dz: &[f64],
    grads: &mut FusionParams,
) {
    let c = prep.channels;
    let scale = 1.0 / (c as f64).sqrt();

    grads.head.add_outer(1.0, dz, &out.f_hfr);
    axpy(&mut grads.head_bias, 1.0, dz);
    let dh = params.head.matvec_t(dz);

    let a = out.alpha;
    let dalpha: f64 = dh.iter().zip(out.x_proj.iter().zip(&out.f_y)).map(|(d, (x, y))| d * (x - y)).sum();
    grads.alpha_logit += dalpha * a * (1.0 - a);

    let dx: Vec<f64> = dh.iter().map(|d| a * d).collect();
    grads.proj.add_outer(1.0, &dx, &out.f_x);
    axpy(&mut grads.proj_bias, 1.0, &dx);
    let dfx = params.proj.matvec_t(&dx);
    let dattn_out = &dfx[c..];

    grads.wv.add_outer(1.0, dattn_out, &cache.attended);
    // da_j = dF_attn · (Wv x_j) = (Wvᵀ dF_attn) · x_j
    let u = params.wv.matvec_t(dattn_out);
    let da: Vec<f64> = prep.rows().map(|x| dot(&u, x)).collect();
    let mean_da = dot(&cache.attn, &da);
    let mut sx = vec![0.0; c];
    for ((aj, daj), x) in cache.attn.iter().zip(&da).zip(prep.rows()) {
        let ds = aj * (daj - mean_da);
        axpy(&mut sx, ds, x);
    }
    // s_j = qᵀ Wk x_j / √C
    grads.wk.add_outer(scale, &cache.q, &sx);
    let dq: Vec<f64> = params.wk.matvec(&sx).into_iter().map(|v| v * scale).collect();
    grads.wq.add_outer(1.0, &dq, &prep.mean_all);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::FusionConfig;

    fn tokens(t: usize, l: usize, c: usize, f: impl Fn(usize, usize, usize) -> f64) -> TokenFeatures {
        let data = (0..t * l * c).map(|i| f(i / (l * c), (i / c) % l, i % c)).collect();
        TokenFeatures::new(Tensor::new(vec![t, l, c], data).unwrap()).unwrap()
    }

    #[test]
    fn avg_pool_skips_cls() {
        let tk = tokens(2, 3, 2, |_, l, ch| if l == 0 { 100.0 } else { (l + ch) as f64 });
        // non-CLS tokens: l=1 → [1,2], l=2 → [2,3]
        assert_eq!(pool_tokens(&tk), vec![1.5, 2.5]);
    }

    #[test]
    fn depth_pool_reduces_all_but_channel_axis() {
        let d = Tensor::from_fn(vec![2, 3, 2, 2], |i| ((i / 4) % 3) as f64 + (i / 12) as f64).unwrap();
        assert_eq!(depth_pool(&d).unwrap(), vec![0.5, 1.5, 2.5]);
        let big = Tensor::full(vec![2, 1024, 48, 48], 0.25).unwrap();
        let pooled = depth_pool(&big).unwrap();
        assert_eq!(pooled.len(), 1024);
        assert!(pooled.iter().all(|v| (v - 0.25).abs() < 1e-15));
        assert!(depth_pool(&Tensor::zeros(vec![4]).unwrap()).is_err());
    }

    #[test]
    fn identical_tokens_attend_uniformly() {
        let cfg = FusionConfig { token_dim: 3, fused_dim: 2, depth_feat_shape: vec![1, 2], ..FusionConfig::default() };
        let params = FusionParams::init(&cfg).unwrap();
        let tk = tokens(2, 3, 3, |_, _, ch| ch as f64 - 1.0);
        let f = attention_pool(&tk, &params).unwrap();
        let expect = params.wv.matvec(&[-1.0, 0.0, 1.0]);
        for (a, b) in f.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn alpha_endpoints_select_one_branch() {
        let cfg =
            FusionConfig { token_dim: 4, fused_dim: 3, depth_feat_shape: vec![2, 3, 2], ..FusionConfig::default() };
        let mut params = FusionParams::init(&cfg).unwrap();
        params.proj_bias = vec![0.1, -0.2, 0.3];
        let tk = tokens(3, 4, 4, |t, l, ch| ((t * 7 + l * 3 + ch) % 5) as f64 * 0.3 - 0.5);
        let depth = Tensor::from_fn(vec![2, 3, 2], |i| (i as f64).sin()).unwrap();
        params.alpha_logit = 40.0;
        let out = forward(&tk, &depth, &params).unwrap();
        assert_eq!(out.alpha, 1.0);
        assert_eq!(out.f_hfr, out.x_proj);
        params.alpha_logit = -800.0;
        let out = forward(&tk, &depth, &params).unwrap();
        assert_eq!(out.alpha, 0.0);
        assert_eq!(out.f_hfr, out.f_y);
    }

    #[test]
    fn fused_width_mismatch_is_reported() {
        let cfg = FusionConfig { token_dim: 2, fused_dim: 3, depth_feat_shape: vec![1, 3], ..FusionConfig::default() };
        let params = FusionParams::init(&cfg).unwrap();
        let tk = tokens(2, 2, 2, |_, _, _| 1.0);
        let depth = Tensor::zeros(vec![1, 5]).unwrap();
        assert!(matches!(forward(&tk, &depth, &params), Err(FusionError::FusedDim { video: 3, depth: 5 })));
    }
}
