use autodiff::Tensor;
use rand::Rng;

use super::{impl_module, init_uniform};
use crate::error::{Error, Result};

/// `y = x W + b` with `W` stored as `[in, out]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl_module!(Linear { weight, bias });

impl Linear {
    pub fn new(rng: &mut impl Rng, input: usize, output: usize) -> Self {
        Linear {
            weight: init_uniform(rng, &[input, output], input),
            bias: init_uniform(rng, &[output], input),
        }
    }

    /// `[n, in] -> [n, out]`.
    pub fn forward(&self, x: &Tensor) -> Tensor {
        x.matmul(&self.weight) + &self.bias
    }

    pub fn output_dim(&self) -> usize {
        self.weight.dim(1)
    }
}

#[derive(Debug, Clone)]
pub struct Embedding {
    pub weight: Tensor,
}

impl_module!(Embedding { weight });

impl Embedding {
    pub fn new(rng: &mut impl Rng, vocab: usize, dim: usize) -> Self {
        let data = (0..vocab * dim).map(|_| rng.random_range(-0.1..=0.1)).collect();
        Embedding {
            weight: Tensor::param(data, &[vocab, dim]),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.weight.dim(0)
    }

    /// `[ids.len(), dim]`; ids outside the table are an error.
    pub fn forward(&self, ids: &[u32]) -> Result<Tensor> {
        let size = self.vocab_size();
        let idx = ids
            .iter()
            .map(|&id| {
                if (id as usize) < size {
                    Ok(id as usize)
                } else {
                    Err(Error::TokenId { id, size })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.weight.index_select(&idx))
    }
}

/// Gated recurrent unit with reset, update and candidate gates packed
/// along the last axis of each weight.
#[derive(Debug, Clone)]
pub struct GruCell {
    pub w_ih: Tensor,
    pub w_hh: Tensor,
    pub b_ih: Tensor,
    pub b_hh: Tensor,
}

impl_module!(GruCell { w_ih, w_hh, b_ih, b_hh });

impl GruCell {
    pub fn new(rng: &mut impl Rng, input: usize, hidden: usize) -> Self {
        GruCell {
            w_ih: init_uniform(rng, &[input, 3 * hidden], hidden),
            w_hh: init_uniform(rng, &[hidden, 3 * hidden], hidden),
            b_ih: init_uniform(rng, &[3 * hidden], hidden),
            b_hh: init_uniform(rng, &[3 * hidden], hidden),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_hh.dim(0)
    }

    /// Input-side gate pre-activations for a whole sequence at once,
    /// `[steps, in] -> [steps, 3H]`.
    pub fn input_gates(&self, x: &Tensor) -> Tensor {
        x.matmul(&self.w_ih) + &self.b_ih
    }

    /// One step from precomputed input gates `gi` (`[n, 3H]`) and state `h`
    /// (`[n, H]`).
    pub fn step_gates(&self, gi: &Tensor, h: &Tensor) -> Tensor {
        let hd = self.hidden_dim();
        let gh = h.matmul(&self.w_hh) + &self.b_hh;
        let r = (gi.narrow(1, 0, hd) + gh.narrow(1, 0, hd)).sigmoid();
        let z = (gi.narrow(1, hd, hd) + gh.narrow(1, hd, hd)).sigmoid();
        let n = (gi.narrow(1, 2 * hd, hd) + r * gh.narrow(1, 2 * hd, hd)).tanh();
        // h' = (1 - z) n + z h = n + z (h - n)
        &n + z * (h - &n)
    }

    pub fn forward(&self, x: &Tensor, h: &Tensor) -> Tensor {
        self.step_gates(&self.input_gates(x), h)
    }
}

#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weight: Tensor,
    pub bias: Option<Tensor>,
    pub stride: usize,
    pub pad: usize,
}

impl_module!(Conv2d { weight, bias });

impl Conv2d {
    pub fn new(rng: &mut impl Rng, input: usize, output: usize, kernel: usize, stride: usize, pad: usize, bias: bool) -> Self {
        let fan_in = input * kernel * kernel;
        Conv2d {
            weight: init_uniform(rng, &[output, input, kernel, kernel], fan_in),
            bias: bias.then(|| init_uniform(rng, &[output], fan_in)),
            stride,
            pad,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        let y = x.conv2d(&self.weight, self.stride, self.pad);
        match &self.bias {
            Some(b) => y + b.reshape(&[1, b.numel(), 1, 1]),
            None => y,
        }
    }
}

/// Fractionally strided convolution; weight stored as `[in, out, k, k]`.
#[derive(Debug, Clone)]
pub struct ConvTranspose2d {
    pub weight: Tensor,
    pub bias: Option<Tensor>,
    pub stride: usize,
    pub pad: usize,
}

impl_module!(ConvTranspose2d { weight, bias });

impl ConvTranspose2d {
    pub fn new(rng: &mut impl Rng, input: usize, output: usize, kernel: usize, stride: usize, pad: usize, bias: bool) -> Self {
        let fan_in = output * kernel * kernel;
        ConvTranspose2d {
            weight: init_uniform(rng, &[input, output, kernel, kernel], fan_in),
            bias: bias.then(|| init_uniform(rng, &[output], fan_in)),
            stride,
            pad,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        let k = self.weight.dim(2);
        let out = |d: usize| (d - 1) * self.stride + k - 2 * self.pad;
        let y = x.conv_transpose2d(&self.weight, self.stride, self.pad, (out(x.dim(2)), out(x.dim(3))));
        match &self.bias {
            Some(b) => y + b.reshape(&[1, b.numel(), 1, 1]),
            None => y,
        }
    }
}

/// Per-sample, per-channel normalisation with a learned affine map.
#[derive(Debug, Clone)]
pub struct InstanceNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub eps: f64,
}

impl_module!(InstanceNorm { gamma, beta });

impl InstanceNorm {
    pub fn new(channels: usize) -> Self {
        InstanceNorm {
            gamma: Tensor::param(vec![1.0; channels], &[channels]),
            beta: Tensor::param(vec![0.0; channels], &[channels]),
            eps: 1e-5,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        let c = x.dim(1);
        let centered = x - x.mean_axes(&[2, 3], true);
        let var = centered.square().mean_axes(&[2, 3], true);
        let normed = centered / var.add_scalar(self.eps).sqrt();
        normed * self.gamma.reshape(&[1, c, 1, 1]) + self.beta.reshape(&[1, c, 1, 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Module;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gru_matches_scalar_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cell = GruCell::new(&mut rng, 2, 3);
        let x = [0.3, -0.7];
        let h = [0.1, 0.2, -0.4];
        let out = cell.forward(&Tensor::from_slice(&x, &[1, 2]), &Tensor::from_slice(&h, &[1, 3]));
        let (wi, wh, bi, bh) = (cell.w_ih.data(), cell.w_hh.data(), cell.b_ih.data(), cell.b_hh.data());
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let gi = |j: usize| bi[j] + (0..2).map(|i| x[i] * wi[i * 9 + j]).sum::<f64>();
        let gh = |j: usize| bh[j] + (0..3).map(|i| h[i] * wh[i * 9 + j]).sum::<f64>();
        for k in 0..3 {
            let r = sig(gi(k) + gh(k));
            let z = sig(gi(3 + k) + gh(3 + k));
            let n = (gi(6 + k) + r * gh(6 + k)).tanh();
            let expect = (1.0 - z) * n + z * h[k];
            assert!((out.data()[k] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn transpose_conv_doubles_resolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let up = ConvTranspose2d::new(&mut rng, 3, 2, 4, 2, 1, true);
        let y = up.forward(&Tensor::zeros(&[1, 3, 5, 5]));
        assert_eq!(y.shape(), &[1, 2, 10, 10]);
    }

    #[test]
    fn instance_norm_zero_mean_unit_var() {
        let norm = InstanceNorm::new(2);
        let x = Tensor::from_vec((0..32).map(|i| (i as f64).sin() * 3.0 + 1.0).collect(), &[2, 2, 2, 4]);
        let y = norm.forward(&x);
        for plane in y.data().chunks(8) {
            let mean = plane.iter().sum::<f64>() / 8.0;
            let var = plane.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 8.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn embedding_rejects_out_of_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = Embedding::new(&mut rng, 5, 2);
        assert!(matches!(e.forward(&[5]), Err(Error::TokenId { id: 5, size: 5 })));
        assert_eq!(e.forward(&[4, 0]).unwrap().shape(), &[2, 2]);
    }

    #[test]
    fn names_follow_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let conv = Conv2d::new(&mut rng, 1, 1, 3, 1, 1, false);
        let names: Vec<String> = conv.named_parameters().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, ["weight"]);
        let layers = vec![Linear::new(&mut rng, 2, 2), Linear::new(&mut rng, 2, 1)];
        let names: Vec<String> = layers.named_parameters().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, ["0.weight", "0.bias", "1.weight", "1.bias"]);
    }
}
