use super::params::FusionParams;

/// Adam with decoupled weight decay, applied to every parameter block.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamW {
    pub fn new(len: usize, beta1: f64, beta2: f64, eps: f64, weight_decay: f64) -> Self {
        Self { beta1, beta2, eps, weight_decay, m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step_flat(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) {
        assert_eq!(theta.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..theta.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            theta[i] -= lr * (m_hat / (v_hat.sqrt() + self.eps) + self.weight_decay * theta[i]);
        }
    }

    pub fn step(&mut self, params: &mut FusionParams, grads: &FusionParams, lr: f64) {
        let mut theta = params.flat();
        self.step_flat(&mut theta, &grads.flat(), lr);
        params.set_flat(&theta);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut opt = AdamW::new(3, 0.9, 0.999, 1e-8, 0.0);
        let mut theta = vec![1.0, 1.0, 1.0];
        opt.step_flat(&mut theta, &[2.0, -0.5, 0.0], 0.1);
        // bias-corrected m̂ = g, v̂ = g² → update ≈ lr·sign(g)
        assert!((theta[0] - 0.9).abs() < 1e-8);
        assert!((theta[1] - 1.1).abs() < 1e-8);
        assert_eq!(theta[2], 1.0);
    }

    #[test]
    fn decay_is_decoupled_from_gradient() {
        let mut opt = AdamW::new(1, 0.9, 0.999, 1e-8, 0.5);
        let mut theta = vec![2.0];
        opt.step_flat(&mut theta, &[0.0], 0.1);
        assert!((theta[0] - (2.0 - 0.1 * 0.5 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut opt = AdamW::new(2, 0.9, 0.999, 1e-8, 0.0);
        let mut x = vec![3.0, -2.0];
        for _ in 0..2000 {
            let g = vec![2.0 * (x[0] - 1.0), 2.0 * (x[1] + 1.0)];
            opt.step_flat(&mut x, &g, 0.01);
        }
        assert!((x[0] - 1.0).abs() < 1e-3 && (x[1] + 1.0).abs() < 1e-3);
    }
}
