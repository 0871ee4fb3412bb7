//! Layers, parameter traversal, optimizer and weight files.

mod io;
mod layers;
mod optim;

use autodiff::Tensor;

pub use io::{load_weights, read_weights, save_weights, weights_hash, write_weights};
pub use layers::{Conv2d, ConvTranspose2d, Embedding, GruCell, InstanceNorm, Linear};
pub use optim::{clip_grad_norm, Adam, AdamConfig};

/// Anything that owns parameters.
///
/// Parameters are visited in a fixed order with dotted names, which is
/// what the optimizer state and the weight files key on.
pub trait Module {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor));

    fn parameters(&self) -> Vec<Tensor> {
        let mut out = Vec::new();
        self.visit("", &mut |_, t| out.push(t.clone()));
        out
    }

    fn named_parameters(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        self.visit("", &mut |n, t| out.push((n.to_string(), t.clone())));
        out
    }

    fn num_parameters(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, t| n += t.numel());
        n
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

impl Module for Tensor {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor)) {
        f(prefix, self)
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f(prefix, self)
    }
}

impl<M: Module> Module for Vec<M> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor)) {
        for (i, m) in self.iter().enumerate() {
            m.visit(&join(prefix, &i.to_string()), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        for (i, m) in self.iter_mut().enumerate() {
            m.visit_mut(&join(prefix, &i.to_string()), f);
        }
    }
}

impl<M: Module> Module for Option<M> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor)) {
        if let Some(m) = self {
            m.visit(prefix, f)
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        if let Some(m) = self {
            m.visit_mut(prefix, f)
        }
    }
}

/// Implements [`Module`] for a struct by visiting the listed fields in order.
macro_rules! impl_module {
    ($ty:ty { $($field:ident),* $(,)? }) => {
        impl $crate::nn::Module for $ty {
            fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &autodiff::Tensor)) {
                $( $crate::nn::Module::visit(&self.$field, &$crate::nn::join(prefix, stringify!($field)), f); )*
            }

            fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut autodiff::Tensor)) {
                $( $crate::nn::Module::visit_mut(&mut self.$field, &$crate::nn::join(prefix, stringify!($field)), f); )*
            }
        }
    };
}
pub(crate) use impl_module;

/// Uniform initialisation in `±1/sqrt(fan_in)`.
pub fn init_uniform(rng: &mut impl rand::Rng, shape: &[usize], fan_in: usize) -> Tensor {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
    Tensor::param(data, shape)
}
