use autodiff::Tensor;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::FaceGanConfig;
use super::image::FaceImage;
use super::losses::{
    adversarial_loss, attention_loss, check_finite, combine, condition_residual, cycle_loss, full_objective,
    gradient_penalty, interpolate, LossParts,
};
use super::model::{Critic, Generator};
use crate::au::AuVector;
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamConfig, Module};

/// Images with their original AU activations.
#[derive(Debug, Clone, Default)]
pub struct FaceDataset {
    pub images: Vec<FaceImage>,
    pub aus: Vec<AuVector>,
}

impl FaceDataset {
    pub fn new(images: Vec<FaceImage>, aus: Vec<AuVector>) -> Result<Self> {
        if images.len() != aus.len() {
            return Err(Error::Data(format!("{} images but {} AU vectors", images.len(), aus.len())));
        }
        if images.is_empty() {
            return Err(Error::Data("empty face dataset".into()));
        }
        Ok(FaceDataset { images, aus })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn batch(&self, indices: &[usize]) -> Result<FaceBatch> {
        let imgs: Vec<&FaceImage> = indices.iter().map(|&i| &self.images[i]).collect();
        let au_dim = self.aus[0].len();
        let z: Vec<f64> = indices.iter().flat_map(|&i| self.aus[i].values().iter().copied()).collect();
        Ok(FaceBatch {
            images: FaceImage::batch(&imgs)?,
            z: Tensor::from_vec(z, &[indices.len(), au_dim]),
        })
    }
}

/// `images: [n, 3, s, s]`, `z: [n, au]` original activations.
#[derive(Debug, Clone)]
pub struct FaceBatch {
    pub images: Tensor,
    pub z: Tensor,
}

/// Target activations borrowed from another sample of the batch: row `i`
/// gets the `z` of a uniformly chosen row `j != i` (itself when `n == 1`).
pub fn permuted_targets(z: &Tensor, rng: &mut impl Rng) -> (Tensor, Vec<usize>) {
    let n = z.dim(0);
    let perm: Vec<usize> = (0..n)
        .map(|i| {
            if n == 1 {
                return 0;
            }
            let j = rng.random_range(0..n - 1);
            if j >= i {
                j + 1
            } else {
                j
            }
        })
        .collect();
    (z.detach().index_select(&perm), perm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    pub critic_loss: f64,
    pub gradient_penalty: f64,
    /// `E[D(real)] - E[D(fake)]` at the last critic update.
    pub wasserstein: f64,
    pub critic_condition: f64,
    pub generator_loss: f64,
    pub generator: LossParts,
    pub attention_mean: f64,
}

/// Generator, critic and their optimizers.
#[derive(Debug, Clone)]
pub struct FaceGan {
    pub config: FaceGanConfig,
    pub generator: Generator,
    pub critic: Critic,
    opt_g: Adam,
    opt_d: Adam,
    rng: ChaCha8Rng,
    step: usize,
}

impl FaceGan {
    pub fn new(config: FaceGanConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let generator = Generator::new(&config, &mut rng);
        let critic = Critic::new(&config, &mut rng);
        let adam = |lr| {
            Adam::new(AdamConfig {
                lr,
                beta1: config.hp.beta1,
                beta2: config.hp.beta2,
                eps: 1e-8,
            })
        };
        Ok(FaceGan {
            opt_g: adam(config.hp.lr_generator),
            opt_d: adam(config.hp.lr_critic),
            generator,
            critic,
            rng,
            step: 0,
            config,
        })
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    /// One optimisation round: `critic_steps` critic updates followed by
    /// one generator update, all on `batch`.
    pub fn train_step(&mut self, batch: &FaceBatch) -> Result<StepMetrics> {
        let hp = self.config.hp.clone();
        let real = batch.images.detach();
        let z_o = batch.z.detach();
        let n = real.dim(0);
        let (z_d, _) = permuted_targets(&z_o, &mut self.rng);

        // The generator is fixed during the critic updates, so one edit
        // serves them all and is reused for the generator update.
        let (masks, fake) = self.generator.forward(&real, &z_d)?;
        let fake_fixed = fake.detach();

        let mut last = None;
        for _ in 0..hp.critic_steps {
            let eps: Vec<f64> = (0..n).map(|_| self.rng.random::<f64>()).collect();
            let real_out = self.critic.forward(&real);
            let fake_out = self.critic.forward(&fake_fixed);
            let real_scores = real_out.image_scores();
            let fake_scores = fake_out.image_scores();
            check_finite(&real_scores, "critic score on real images")?;
            check_finite(&fake_scores, "critic score on generated images")?;
            let critic = &self.critic;
            let penalty = gradient_penalty(
                |x| critic.forward(x).image_scores(),
                &interpolate(&real, &fake_fixed, &eps),
            );
            let adv = adversarial_loss(&real_scores, &fake_scores, penalty, hp.lambda_gp);
            let cond = condition_residual(&real_out.au_estimate, &z_o);
            let loss = &adv.critic + cond.mul_scalar(hp.lambda_z);
            if !loss.all_finite() {
                return Err(Error::Numerical(format!("critic loss {} at step {}", loss.item(), self.step)));
            }
            let params = self.critic.parameters();
            let grads = autodiff::grad(&loss, &params.iter().collect::<Vec<_>>(), None, false);
            self.opt_d.step(&mut self.critic, &grads);
            last = Some((
                loss.item(),
                adv.penalty.item(),
                real_scores.mean().item() - fake_scores.mean().item(),
                cond.item(),
            ));
        }
        let (critic_loss, gp, wasserstein, critic_condition) = last.expect("critic_steps >= 1");

        let fake_out = self.critic.forward(&fake);
        let adv_g = -fake_out.image_scores().mean();
        let cond_g = condition_residual(&fake_out.au_estimate, &z_d);
        let (cycle_masks, reconstructed) = self.generator.forward(&fake, &z_o)?;
        let cyc = cycle_loss(&reconstructed, &real);
        let attn = attention_loss(&masks.attention, &cycle_masks.attention, hp.lambda_tv, hp.attention_sign);
        let total = combine(&adv_g, &attn, &cond_g, &cyc, &hp);
        if !total.all_finite() {
            return Err(Error::Numerical(format!("generator loss {} at step {}", total.item(), self.step)));
        }
        let params = self.generator.parameters();
        let grads = autodiff::grad(&total, &params.iter().collect::<Vec<_>>(), None, false);
        self.opt_g.step(&mut self.generator, &grads);

        let parts = LossParts {
            adversarial: adv_g.item(),
            attention: attn.item(),
            condition: cond_g.item(),
            cycle: cyc.item(),
        };
        let metrics = StepMetrics {
            step: self.step,
            critic_loss,
            gradient_penalty: gp,
            wasserstein,
            critic_condition,
            generator_loss: full_objective(&parts, &hp),
            generator: parts,
            attention_mean: masks.attention.mean().item(),
        };
        self.step += 1;
        Ok(metrics)
    }

    /// Runs `steps` rounds over shuffled mini-batches of `data`.
    pub fn train(
        &mut self,
        data: &FaceDataset,
        steps: usize,
        mut on_step: impl FnMut(&StepMetrics),
    ) -> Result<Vec<StepMetrics>> {
        let bs = self.config.hp.batch_size.min(data.len());
        let mut order: Vec<usize> = Vec::new();
        let mut history = Vec::with_capacity(steps);
        for _ in 0..steps {
            if order.len() < bs {
                let mut fresh: Vec<usize> = (0..data.len()).collect();
                fresh.shuffle(&mut self.rng);
                order.extend(fresh);
            }
            let idx: Vec<usize> = order.drain(..bs).collect();
            let m = self.train_step(&data.batch(&idx)?)?;
            on_step(&m);
            history.push(m);
        }
        Ok(history)
    }

    /// Edits `image` towards `z` without recording a graph.
    pub fn edit(&self, image: &FaceImage, z: &AuVector) -> Result<FaceImage> {
        edit_face(&self.generator, image, z)
    }
}

/// Inference-only generator pass on a single image.
pub fn edit_face(generator: &Generator, image: &FaceImage, z: &AuVector) -> Result<FaceImage> {
    z.expect_len(generator.au_dim())?;
    let _guard = autodiff::no_grad();
    let zt = Tensor::from_slice(z.values(), &[1, z.len()]);
    let (_, out) = generator.forward(&image.to_tensor(), &zt)?;
    FaceImage::from_tensor(&out)
}

/// Mean `||D_z(G(I | z_d)) - z_d||_2` over every (image, target) pair.
pub fn condition_error(gan: &FaceGan, images: &[FaceImage], targets: &[AuVector]) -> Result<f64> {
    let _guard = autodiff::no_grad();
    let mut total = 0.0;
    let mut count = 0;
    for t in targets {
        let batch: Vec<&FaceImage> = images.iter().collect();
        let x = FaceImage::batch(&batch)?;
        let z = Tensor::from_vec(t.values().repeat(images.len()), &[images.len(), t.len()]);
        let (_, fake) = gan.generator.forward(&x, &z)?;
        let est = gan.critic.forward(&fake).au_estimate;
        for row in est.data().chunks(t.len()) {
            total += row.iter().zip(t.values()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            count += 1;
        }
    }
    Ok(total / count.max(1) as f64)
}
