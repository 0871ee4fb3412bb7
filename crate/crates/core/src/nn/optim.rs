use autodiff::Tensor;
use serde::{Deserialize, Serialize};

use super::Module;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias-corrected moment estimates.
///
/// Moments are matched to parameters by visiting order, so one optimizer
/// must always be stepped with the same module.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update; `grads` follow the module's parameter order.
    pub fn step(&mut self, module: &mut dyn Module, grads: &[Tensor]) {
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.numel()]).collect();
            self.v = self.m.clone();
        }
        assert_eq!(grads.len(), self.m.len(), "optimizer used with a different module");
        self.step += 1;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        let mut i = 0;
        module.visit_mut("", &mut |_, p| {
            let g = grads[i].data();
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            assert_eq!(g.len(), p.numel());
            let mut data = p.to_vec();
            for k in 0..data.len() {
                m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
                v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
                data[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
            }
            *p = Tensor::param(data, p.shape());
            i += 1;
        });
        assert_eq!(i, grads.len(), "optimizer used with a different module");
    }
}

/// Rescales `grads` so their joint Euclidean norm is at most `max_norm`;
/// returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.data().iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let scale = max_norm / (norm + 1e-12);
        for g in grads.iter_mut() {
            *g = Tensor::from_vec(g.data().iter().map(|x| x * scale).collect(), g.shape());
        }
    }
    norm
}
