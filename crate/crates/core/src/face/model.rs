use autodiff::Tensor;
use rand::Rng;

use super::config::FaceGanConfig;
use crate::error::{Error, Result};
use crate::nn::{impl_module, init_uniform, Conv2d, ConvTranspose2d, InstanceNorm};

/// Attention and colour masks of one generator pass.
#[derive(Debug, Clone)]
pub struct MaskPair {
    /// `[n, 1, h, w]` in `[0, 1]`: how much of the input to keep.
    pub attention: Tensor,
    /// `[n, 3, h, w]` in `[-1, 1]`: the repainted content.
    pub color: Tensor,
}

/// `(1 - A) * C + A * I`, with `A` broadcast over the colour channels.
pub fn compose(attention: &Tensor, color: &Tensor, image: &Tensor) -> Tensor {
    attention.rsub_scalar(1.0) * color + attention * image
}

/// First generator layer: a convolution over the image stacked with the
/// target activations broadcast to every pixel.
///
/// The activation planes are constant, so their contribution is the
/// convolution of an all-ones plane (which only varies near the zero-padded
/// border) weighted by `z`; it is computed once per batch instead of once
/// per image. `z_weight` is stored `[au, out, k, k]` for that reason.
#[derive(Debug, Clone)]
struct ConditionedStem {
    image_weight: Tensor,
    z_weight: Tensor,
    norm: InstanceNorm,
}

impl_module!(ConditionedStem { image_weight, z_weight, norm });

impl ConditionedStem {
    fn new(rng: &mut impl Rng, au: usize, out: usize, k: usize) -> Self {
        let fan_in = (3 + au) * k * k;
        ConditionedStem {
            image_weight: init_uniform(rng, &[out, 3, k, k], fan_in),
            z_weight: init_uniform(rng, &[au, out, k, k], fan_in),
            norm: InstanceNorm::new(out),
        }
    }

    fn forward(&self, images: &Tensor, z: &Tensor) -> Tensor {
        let [au, out, k] = [self.z_weight.dim(0), self.z_weight.dim(1), self.z_weight.dim(2)];
        let (n, s) = (images.dim(0), images.dim(2));
        let pad = k / 2;
        let from_image = images.conv2d(&self.image_weight, 1, pad);
        let ones = Tensor::ones(&[1, 1, s, s]);
        let plane = ones.conv2d(&self.z_weight.reshape(&[au * out, 1, k, k]), 1, pad);
        let from_z = z.matmul(&plane.reshape(&[au, out * s * s])).reshape(&[n, out, s, s]);
        self.norm.forward(&(from_image + from_z)).relu()
    }

    /// The equivalent `[out, 3 + au, k, k]` weight of a single convolution
    /// over the stacked input.
    #[cfg(test)]
    fn stacked_weight(&self) -> Tensor {
        let [au, out, k] = [self.z_weight.dim(0), self.z_weight.dim(1), self.z_weight.dim(2)];
        let zw = self.z_weight.data();
        let iw = self.image_weight.data();
        let mut w = vec![0.0; out * (3 + au) * k * k];
        for o in 0..out {
            for c in 0..3 + au {
                for t in 0..k * k {
                    w[(o * (3 + au) + c) * k * k + t] = if c < 3 {
                        iw[(o * 3 + c) * k * k + t]
                    } else {
                        zw[((c - 3) * out + o) * k * k + t]
                    };
                }
            }
        }
        Tensor::from_vec(w, &[out, 3 + au, k, k])
    }
}

#[derive(Debug, Clone)]
struct ConvNorm {
    conv: Conv2d,
    norm: InstanceNorm,
}

impl_module!(ConvNorm { conv, norm });

impl ConvNorm {
    fn forward(&self, x: &Tensor) -> Tensor {
        self.norm.forward(&self.conv.forward(x)).relu()
    }
}

#[derive(Debug, Clone)]
struct UpNorm {
    conv: ConvTranspose2d,
    norm: InstanceNorm,
}

impl_module!(UpNorm { conv, norm });

#[derive(Debug, Clone)]
struct ResBlock {
    conv1: Conv2d,
    norm1: InstanceNorm,
    conv2: Conv2d,
    norm2: InstanceNorm,
}

impl_module!(ResBlock { conv1, norm1, conv2, norm2 });

impl ResBlock {
    fn forward(&self, x: &Tensor) -> Tensor {
        let h = self.norm1.forward(&self.conv1.forward(x)).relu();
        x + self.norm2.forward(&self.conv2.forward(&h))
    }
}

/// Encoder, residual bottleneck and decoder ending in a joint head whose
/// first channel becomes the attention mask and the rest the colour mask.
#[derive(Debug, Clone)]
pub struct Generator {
    stem: ConditionedStem,
    down: Vec<ConvNorm>,
    blocks: Vec<ResBlock>,
    up: Vec<UpNorm>,
    head: Conv2d,
    au_dim: usize,
}

impl_module!(Generator { stem, down, blocks, up, head });

impl Generator {
    pub fn new(config: &FaceGanConfig, rng: &mut impl Rng) -> Self {
        let c = config.gen_channels;
        let conv_norm = |rng: &mut _, i, o, k, s, p| ConvNorm {
            conv: Conv2d::new(rng, i, o, k, s, p, false),
            norm: InstanceNorm::new(o),
        };
        let stem = ConditionedStem::new(rng, config.au_dim, c, 7);
        let down = vec![conv_norm(rng, c, 2 * c, 4, 2, 1), conv_norm(rng, 2 * c, 4 * c, 4, 2, 1)];
        let blocks = (0..config.res_blocks)
            .map(|_| ResBlock {
                conv1: Conv2d::new(rng, 4 * c, 4 * c, 3, 1, 1, false),
                norm1: InstanceNorm::new(4 * c),
                conv2: Conv2d::new(rng, 4 * c, 4 * c, 3, 1, 1, false),
                norm2: InstanceNorm::new(4 * c),
            })
            .collect();
        let up = [(4 * c, 2 * c), (2 * c, c)]
            .into_iter()
            .map(|(i, o)| UpNorm {
                conv: ConvTranspose2d::new(rng, i, o, 4, 2, 1, false),
                norm: InstanceNorm::new(o),
            })
            .collect();
        Generator {
            stem,
            down,
            blocks,
            up,
            head: Conv2d::new(rng, c, 4, 7, 1, 3, false),
            au_dim: config.au_dim,
        }
    }

    pub fn au_dim(&self) -> usize {
        self.au_dim
    }

    /// Masks for images `[n, 3, s, s]` conditioned on targets `[n, au]`.
    pub fn masks(&self, images: &Tensor, z: &Tensor) -> Result<MaskPair> {
        let shape = images.shape();
        if shape.len() != 4 || shape[1] != 3 || shape[2] != shape[3] || shape[2] % 4 != 0 {
            return Err(Error::Shape(format!("generator input {shape:?}")));
        }
        let n = shape[0];
        if z.shape() != [n, self.au_dim] {
            return Err(Error::Shape(format!(
                "AU targets {:?} for {n} images of {} units",
                z.shape(),
                self.au_dim
            )));
        }
        let mut h = self.stem.forward(images, z);
        for d in &self.down {
            h = d.forward(&h);
        }
        for b in &self.blocks {
            h = b.forward(&h);
        }
        for u in &self.up {
            h = u.norm.forward(&u.conv.forward(&h)).relu();
        }
        let out = self.head.forward(&h);
        Ok(MaskPair {
            attention: out.narrow(1, 0, 1).sigmoid(),
            color: out.narrow(1, 1, 3).tanh(),
        })
    }

    /// Masks and the composed edit of `images` towards `z`.
    pub fn forward(&self, images: &Tensor, z: &Tensor) -> Result<(MaskPair, Tensor)> {
        let masks = self.masks(images, z)?;
        let edited = compose(&masks.attention, &masks.color, images);
        Ok((masks, edited))
    }
}

/// Critic scores for a batch.
#[derive(Debug, Clone)]
pub struct CriticOutput {
    /// `[n, 1, h', w']` realism map.
    pub patch_scores: Tensor,
    /// `[n, au]` regressed activations (unbounded).
    pub au_estimate: Tensor,
}

impl CriticOutput {
    /// Patch scores averaged to one value per image, `[n]`.
    pub fn image_scores(&self) -> Tensor {
        let n = self.patch_scores.dim(0);
        self.patch_scores.reshape(&[n, self.patch_scores.numel() / n]).mean_axes(&[1], false)
    }
}

/// Strided convolution trunk shared by the realism and AU heads.
#[derive(Debug, Clone)]
pub struct Critic {
    trunk: Vec<Conv2d>,
    realism: Conv2d,
    regressor: Conv2d,
}

impl_module!(Critic { trunk, realism, regressor });

impl Critic {
    pub fn new(config: &FaceGanConfig, rng: &mut impl Rng) -> Self {
        let mut trunk = Vec::with_capacity(config.critic_layers);
        let mut ch = 3;
        for i in 0..config.critic_layers {
            let out = (config.critic_channels << i).min(config.critic_max_channels.max(config.critic_channels));
            trunk.push(Conv2d::new(rng, ch, out, 4, 2, 1, true));
            ch = out;
        }
        let k = config.critic_map_size();
        Critic {
            trunk,
            realism: Conv2d::new(rng, ch, 1, 3, 1, 1, false),
            regressor: Conv2d::new(rng, ch, config.au_dim, k, 1, 0, false),
        }
    }

    pub fn forward(&self, images: &Tensor) -> CriticOutput {
        let mut h = images.clone();
        for conv in &self.trunk {
            h = conv.forward(&h).leaky_relu(0.01);
        }
        let n = images.dim(0);
        let au = self.regressor.forward(&h);
        CriticOutput {
            patch_scores: self.realism.forward(&h),
            au_estimate: au.reshape(&[n, au.numel() / n]),
        }
    }
}
