use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::EmotionSet;
use crate::model::ModelConfig;
use crate::objectives::{LossWeights, TemporalRegConfig};
use crate::{Error, Result};

/// Switches for the ablation study. Disabling a term zeroes its weight and
/// skips its computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablations {
    pub use_local_disc: bool,
    pub use_landmark_loss: bool,
    pub use_temporal_reg: bool,
}

impl Default for Ablations {
    fn default() -> Self {
        Self {
            use_local_disc: true,
            use_landmark_loss: true,
            use_temporal_reg: true,
        }
    }
}

/// Network size. `full` selects the 256-pixel, eight-level architecture and
/// ignores the other fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScaleConfig {
    pub full: bool,
    pub input_size: usize,
    pub levels: usize,
    pub base_width: usize,
    pub max_width: usize,
}

impl Default for ScaleConfig {
    fn default() -> Self {
        Self {
            full: false,
            input_size: 64,
            levels: 6,
            base_width: 16,
            max_width: 64,
        }
    }
}

impl ScaleConfig {
    pub fn full() -> Self {
        Self {
            full: true,
            input_size: 256,
            levels: 8,
            base_width: 64,
            max_width: 512,
        }
    }

    pub fn model_config(&self, emotions: EmotionSet) -> ModelConfig {
        if self.full {
            ModelConfig::full_scale(emotions)
        } else {
            ModelConfig::scaled(emotions, self.input_size, self.levels, self.base_width, self.max_width)
        }
    }
}

/// Everything that determines a training run. Readable from TOML; every field
/// has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epochs: u64,
    /// Stop after this many steps even if epochs remain.
    pub max_steps: Option<u64>,
    pub batch_size: usize,
    pub weights: LossWeights,
    pub temporal: TemporalRegConfig,
    pub ablations: Ablations,
    pub seed: u64,
    pub scale: ScaleConfig,
    pub random_crop: bool,
    pub checkpoint_every: u64,
    pub keep_last: usize,
    /// Use 64-bit parameters.
    pub double_precision: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.0002,
            beta1: 0.5,
            beta2: 0.999,
            epochs: 2100,
            max_steps: None,
            batch_size: 1,
            weights: LossWeights::default(),
            temporal: TemporalRegConfig::default(),
            ablations: Ablations::default(),
            seed: 0,
            scale: ScaleConfig::default(),
            random_crop: true,
            checkpoint_every: 500,
            keep_last: 3,
            double_precision: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if self.epochs < 1 {
            return Err(Error::Config("epochs ≥ 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size ≥ 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("betas must lie in [0, 1)".into()));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::Config("checkpoint_every ≥ 1".into()));
        }
        self.weights.validate()?;
        self.temporal.validate()
    }

    /// Weights with disabled terms set to zero.
    pub fn effective_weights(&self) -> LossWeights {
        let mut w = self.weights;
        if !self.ablations.use_local_disc {
            w.w_local = 0.0;
        }
        if !self.ablations.use_landmark_loss {
            w.w_landmark = 0.0;
        }
        if !self.ablations.use_temporal_reg {
            w.w_temporal = 0.0;
        }
        w
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = TrainConfig::default();
        assert_eq!(c.learning_rate, 0.0002);
        assert_eq!(c.epochs, 2100);
        assert_eq!((c.beta1, c.beta2), (0.5, 0.999));
        assert_eq!(c.batch_size, 1);
        assert_eq!(c.checkpoint_every, 500);
        c.validate().unwrap();
    }

    #[test]
    fn toml_roundtrip_and_partial() {
        let mut c = TrainConfig {
            seed: 9,
            max_steps: Some(40),
            ..TrainConfig::default()
        };
        c.ablations.use_temporal_reg = false;
        assert_eq!(TrainConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
        let p = TrainConfig::from_toml("epochs = 3\n[weights]\nw_recon = 50.0\n").unwrap();
        assert_eq!(p.epochs, 3);
        assert_eq!(p.weights.w_recon, 50.0);
        assert_eq!(p.weights.w_temporal, 10.0);
    }

    #[test]
    fn rejects_zero_epochs() {
        let err = TrainConfig::from_toml("epochs = 0").unwrap_err();
        assert!(err.to_string().contains("epochs ≥ 1"), "{err}");
        assert!(TrainConfig::from_toml("learning_rate = 0.0").is_err());
        assert!(TrainConfig::from_toml("unknown = 1").is_err());
    }

    #[test]
    fn ablation_zeroes_weights() {
        let mut c = TrainConfig::default();
        c.ablations.use_landmark_loss = false;
        let w = c.effective_weights();
        assert_eq!(w.w_landmark, 0.0);
        assert_eq!(w.w_recon, 100.0);
    }
}
