use serde::{Deserialize, Serialize};

use crate::au::AU_COUNT;
use crate::error::{Error, Result};

/// Sign applied to the attention-mask norm inside the attention loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionNormSign {
    /// Penalise large masks, which discourages saturating to the input.
    #[default]
    Penalty,
    /// Subtract the norm, rewarding large masks.
    Reward,
}

impl AttentionNormSign {
    pub fn factor(self) -> f64 {
        match self {
            AttentionNormSign::Penalty => 1.0,
            AttentionNormSign::Reward => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanHyperParams {
    pub lambda_gp: f64,
    pub lambda_tv: f64,
    pub lambda_a: f64,
    pub lambda_z: f64,
    pub lambda_cycle: f64,
    pub attention_sign: AttentionNormSign,
    pub critic_steps: usize,
    pub lr_generator: f64,
    pub lr_critic: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
}

impl Default for GanHyperParams {
    fn default() -> Self {
        GanHyperParams {
            lambda_gp: 10.0,
            lambda_tv: 1e-5,
            lambda_a: 0.1,
            lambda_z: 160.0,
            lambda_cycle: 10.0,
            attention_sign: AttentionNormSign::Penalty,
            critic_steps: 5,
            lr_generator: 1e-4,
            lr_critic: 1e-4,
            beta1: 0.5,
            beta2: 0.999,
            batch_size: 16,
        }
    }
}

impl GanHyperParams {
    pub fn validate(&self) -> Result<()> {
        let weights = [
            ("lambda_gp", self.lambda_gp),
            ("lambda_tv", self.lambda_tv),
            ("lambda_a", self.lambda_a),
            ("lambda_z", self.lambda_z),
            ("lambda_cycle", self.lambda_cycle),
            ("lr_generator", self.lr_generator),
            ("lr_critic", self.lr_critic),
        ];
        if let Some((name, v)) = weights.iter().find(|(_, v)| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
        }
        if self.critic_steps == 0 {
            return Err(Error::Config("critic_steps must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FaceGanConfig {
    pub image_size: usize,
    pub au_dim: usize,
    /// Width of the generator's first layer; doubled by each down-sampling.
    pub gen_channels: usize,
    pub res_blocks: usize,
    /// Width of the critic's first layer; doubled per layer up to
    /// `critic_max_channels`.
    pub critic_channels: usize,
    pub critic_max_channels: usize,
    pub critic_layers: usize,
    pub hp: GanHyperParams,
    pub steps: usize,
    pub seed: u64,
}

impl Default for FaceGanConfig {
    fn default() -> Self {
        FaceGanConfig {
            image_size: 64,
            au_dim: AU_COUNT,
            gen_channels: 16,
            res_blocks: 6,
            critic_channels: 16,
            critic_max_channels: 128,
            critic_layers: 6,
            hp: GanHyperParams::default(),
            steps: 2000,
            seed: 0,
        }
    }
}

impl FaceGanConfig {
    pub fn validate(&self) -> Result<()> {
        self.hp.validate()?;
        if self.image_size == 0 || self.image_size % 4 != 0 {
            return Err(Error::Config(format!("image_size {} must be a positive multiple of 4", self.image_size)));
        }
        if self.au_dim == 0 || self.gen_channels == 0 || self.critic_channels == 0 || self.critic_layers == 0 {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        if self.image_size >> self.critic_layers == 0 || self.image_size % (1 << self.critic_layers) != 0 {
            return Err(Error::Config(format!(
                "{} critic layers cannot halve a {}-pixel image",
                self.critic_layers, self.image_size
            )));
        }
        Ok(())
    }

    /// Side of the critic's final feature map.
    pub fn critic_map_size(&self) -> usize {
        self.image_size >> self.critic_layers
    }
}
