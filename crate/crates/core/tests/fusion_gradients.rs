use forgescore_core::fusion::{gradcheck, FusionConfig, FusionParams, FusionSample, FD_STEP};
use forgescore_core::rng::{substream, Rng};
use forgescore_core::tensor_io::TokenFeatures;
use forgescore_core::{ForgeryLabel, Tensor};
use rand::Rng as _;
use std::time::Instant;

fn random_case(seed: u64) -> (FusionParams, Vec<FusionSample>) {
    let mut rng: Rng = substream(seed, "gradcheck/case");
    let c = rng.random_range(2..=6);
    let d = rng.random_range(2..=6);
    let cfg = FusionConfig {
        token_dim: c,
        token_count: rng.random_range(2..=4),
        frames: rng.random_range(1..=3),
        depth_feat_shape: vec![rng.random_range(1..=2), d, rng.random_range(1..=2)],
        fused_dim: d,
        seed,
        ..FusionConfig::default()
    };
    let mut params = FusionParams::init(&cfg).unwrap();
    params.alpha_logit = rng.random_range(-1.5..1.5);
    for v in params.proj_bias.iter_mut().chain(params.head_bias.iter_mut()) {
        *v = rng.random_range(-0.5..0.5);
    }
    let n = rng.random_range(1..=4);
    let samples = (0..n)
        .map(|i| {
            let tshape = vec![cfg.frames, cfg.token_count, c];
            let tokens = Tensor::from_fn(tshape, |_| rng.random_range(-1.5..1.5)).unwrap();
            let depth = Tensor::from_fn(cfg.depth_feat_shape.clone(), |_| rng.random_range(-1.0..1.0)).unwrap();
            FusionSample {
                video_id: format!("s{i}"),
                tokens: TokenFeatures::new(tokens).unwrap(),
                depth,
                label: ForgeryLabel::ALL[rng.random_range(0..4)],
                weight: rng.random_range(1.0..1.32),
            }
        })
        .collect();
    (params, samples)
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let (params, samples) = random_case(seed);
        let r = gradcheck(&params, &samples, FD_STEP).unwrap();
        println!(
            "seed {seed}: {} params, max rel err {:.3e} at {}[{}]",
            r.checked, r.max_rel_error, r.worst_param, r.worst_index
        );
        worst = worst.max(r.max_rel_error);
    }
    println!("worst {worst:.3e} in {:?}", t0.elapsed());
    assert!(worst < 1e-4);
}

#[test]
fn zero_head_only_moves_the_head() {
    let (mut params, samples) = random_case(3);
    params.head.data.iter_mut().for_each(|v| *v = 0.0);
    let r = gradcheck(&params, &samples, FD_STEP).unwrap();
    assert!(r.max_rel_error < 1e-4);
    for i in 0..r.checked {
        let (block, _) = params.locate(i).unwrap();
        match block {
            "head" | "head_bias" => {}
            _ => {
                assert_eq!(r.analytic[i], 0.0, "{block}");
                assert_eq!(r.numeric[i], 0.0, "{block}");
            }
        }
    }
    // with constant logits every sample sees the same softmax p, so
    // ∂L/∂H = (1/N) Σ α_i (p − e_{y_i}) f_hfr,iᵀ
    let (loss, grads) = forgescore_core::fusion::loss_and_grad(&params, &samples).unwrap();
    assert!(loss.is_finite());
    let p = forgescore_core::fusion::softmax(&params.head_bias);
    let n = samples.len() as f64;
    let d = params.fused_dim();
    let mut expect = vec![0.0; 4 * d];
    for s in &samples {
        let out = forgescore_core::fusion::forward(&s.tokens, &s.depth, &params).unwrap();
        for k in 0..4 {
            let dz = s.weight / n * (p[k] - f64::from(u8::from(k == s.label.index())));
            for j in 0..d {
                expect[k * d + j] += dz * out.f_hfr[j];
            }
        }
    }
    for (a, b) in grads.head.data.iter().zip(&expect) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(grads.head.data.iter().any(|v| *v != 0.0));
}
