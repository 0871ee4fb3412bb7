use autodiff::Tensor;
use serde::{Deserialize, Serialize};

use super::config::{AttentionNormSign, GanHyperParams};
use crate::error::{Error, Result};

/// Per-sample blend `eps * real + (1 - eps) * fake`.
pub fn interpolate(real: &Tensor, fake: &Tensor, eps: &[f64]) -> Tensor {
    let n = real.dim(0);
    assert_eq!(eps.len(), n, "one interpolation weight per sample");
    let mut shape = vec![1; real.ndim()];
    shape[0] = n;
    let e = Tensor::from_slice(eps, &shape);
    &e * real + e.rsub_scalar(1.0) * fake
}

/// `E[(||grad_x score(x)||_2 - 1)^2]` at the points `x`, where `score` maps
/// `[n, ...]` to one value per sample. Built with a differentiable gradient
/// so the result can be back-propagated into the critic.
pub fn gradient_penalty(score: impl Fn(&Tensor) -> Tensor, x: &Tensor) -> Tensor {
    let x = x.detach().requires_grad_leaf();
    let s = score(&x);
    let g = autodiff::grad(&s.sum(), &[&x], None, true).remove(0);
    let n = x.dim(0);
    let norms = g.reshape(&[n, x.numel() / n]).row_norms();
    norms.add_scalar(-1.0).square().mean()
}

/// Reports the first sample whose score is not finite.
pub fn check_finite(scores: &Tensor, what: &str) -> Result<()> {
    let per = scores.numel() / scores.dim(0).max(1);
    match scores.data().chunks(per.max(1)).position(|c| c.iter().any(|v| !v.is_finite())) {
        Some(i) => Err(Error::Numerical(format!("non-finite {what} at batch index {i}"))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone)]
pub struct AdversarialLoss {
    /// `E[D(fake)] - E[D(real)] + lambda_gp * penalty`, minimised by the critic.
    pub critic: Tensor,
    /// `-E[D(fake)]`, minimised by the generator.
    pub generator: Tensor,
    pub penalty: Tensor,
}

/// Adversarial terms from per-image scores of real and fake batches and
/// the gradient penalty.
pub fn adversarial_loss(real_scores: &Tensor, fake_scores: &Tensor, penalty: Tensor, lambda_gp: f64) -> AdversarialLoss {
    let fake_mean = fake_scores.mean();
    AdversarialLoss {
        critic: &fake_mean - real_scores.mean() + penalty.mul_scalar(lambda_gp),
        generator: -fake_mean,
        penalty,
    }
}

/// Sum of squared horizontal and vertical neighbour differences per
/// sample of `[n, 1, h, w]` masks, shape `[n]`.
pub fn total_variation(a: &Tensor) -> Tensor {
    let [n, h, w] = [a.dim(0), a.dim(2), a.dim(3)];
    let dv = a.narrow(2, 1, h - 1) - a.narrow(2, 0, h - 1);
    let dh = a.narrow(3, 1, w - 1) - a.narrow(3, 0, w - 1);
    let per = |d: Tensor| {
        let m = d.numel() / n;
        d.square().reshape(&[n, m]).sum_axes(&[1], false)
    };
    per(dv) + per(dh)
}

/// Attention regulariser for one mask: batch mean of
/// `lambda_tv * TV(A) + sign * ||A||_2`.
pub fn attention_term(a: &Tensor, lambda_tv: f64, sign: AttentionNormSign) -> Tensor {
    let n = a.dim(0);
    let norm = a.reshape(&[n, a.numel() / n]).row_norms();
    (total_variation(a).mul_scalar(lambda_tv) + norm.mul_scalar(sign.factor())).mean()
}

/// Attention loss over the editing and reconstruction masks.
pub fn attention_loss(a_fake: &Tensor, a_cycle: &Tensor, lambda_tv: f64, sign: AttentionNormSign) -> Tensor {
    attention_term(a_fake, lambda_tv, sign) + attention_term(a_cycle, lambda_tv, sign)
}

/// Batch mean of `||estimate - target||_2^2` for `[n, k]` inputs.
pub fn condition_residual(estimate: &Tensor, target: &Tensor) -> Tensor {
    (estimate - target).square().sum_axes(&[1], false).mean()
}

/// Condition loss on both the edited images (against `z_d`) and the real
/// images (against `z_o`).
pub fn condition_loss(est_fake: &Tensor, z_d: &Tensor, est_real: &Tensor, z_o: &Tensor) -> Tensor {
    condition_residual(est_fake, z_d) + condition_residual(est_real, z_o)
}

/// Mean absolute per-pixel difference between the round trip and the
/// original.
pub fn cycle_loss(reconstructed: &Tensor, original: &Tensor) -> Tensor {
    (reconstructed - original).abs().mean()
}

/// Scalar values of the four objective terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub adversarial: f64,
    pub attention: f64,
    pub condition: f64,
    pub cycle: f64,
}

/// `adv + lambda_a * attention + lambda_z * condition + lambda_cycle * cycle`.
pub fn full_objective(parts: &LossParts, hp: &GanHyperParams) -> f64 {
    parts.adversarial + hp.lambda_a * parts.attention + hp.lambda_z * parts.condition + hp.lambda_cycle * parts.cycle
}

/// [`full_objective`] over tensors, for back-propagation.
pub fn combine(adversarial: &Tensor, attention: &Tensor, condition: &Tensor, cycle: &Tensor, hp: &GanHyperParams) -> Tensor {
    adversarial
        + attention.mul_scalar(hp.lambda_a)
        + condition.mul_scalar(hp.lambda_z)
        + cycle.mul_scalar(hp.lambda_cycle)
}
