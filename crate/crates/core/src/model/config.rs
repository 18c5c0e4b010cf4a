use serde::{Deserialize, Serialize};

use crate::data::EmotionSet;
use crate::{Error, Result};

/// Architecture of the generator and discriminators.
///
/// `widths[l]` is the channel count of encoder level `l`; the number of levels
/// is `widths.len()`, and every level halves the spatial size, so
/// `input_size` must be divisible by `2^levels`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_size: usize,
    pub widths: Vec<usize>,
    pub disc_widths: [usize; 3],
    pub emotions: EmotionSet,
    /// Per-sample normalization on the inner layers.
    #[serde(default = "default_true")]
    pub norm: bool,
    #[serde(default = "default_leak")]
    pub leak: f64,
}

fn default_true() -> bool {
    true
}

fn default_leak() -> f64 {
    0.2
}

impl ModelConfig {
    /// 256x256 input, eight levels of 64-128-256-512-512-512-512-512 channels.
    pub fn full_scale(emotions: EmotionSet) -> Self {
        Self {
            input_size: 256,
            widths: vec![64, 128, 256, 512, 512, 512, 512, 512],
            disc_widths: [64, 128, 256],
            emotions,
            norm: true,
            leak: 0.2,
        }
    }

    /// Smaller variant: `levels` levels at `input_size`, widths doubling from
    /// `base_width` up to `max_width`, discriminator widths scaled to match.
    pub fn scaled(emotions: EmotionSet, input_size: usize, levels: usize, base_width: usize, max_width: usize) -> Self {
        let widths = (0..levels).map(|l| (base_width << l).min(max_width)).collect();
        Self {
            input_size,
            widths,
            disc_widths: [base_width, (2 * base_width).min(max_width), (4 * base_width).min(max_width)],
            emotions,
            norm: true,
            leak: 0.2,
        }
    }

    pub fn levels(&self) -> usize {
        self.widths.len()
    }

    pub fn n_emotions(&self) -> usize {
        self.emotions.len()
    }

    /// Spatial side of encoder level `l` (0-based).
    pub fn level_size(&self, l: usize) -> usize {
        self.input_size >> (l + 1)
    }

    /// Side of the landmark heatmaps: the second-to-last decoder resolution.
    pub fn heatmap_size(&self) -> usize {
        self.input_size / 2
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.levels();
        if l < 2 {
            return Err(Error::Config("need at least 2 levels".into()));
        }
        if l >= usize::BITS as usize || self.input_size == 0 || !self.input_size.is_multiple_of(1 << l) {
            return Err(Error::Config(format!(
                "input size {} is not divisible by 2^{l}",
                self.input_size
            )));
        }
        if self.input_size >> 3 == 0 {
            return Err(Error::Config("input size must be at least 8 for the discriminators".into()));
        }
        if self.widths.iter().chain(&self.disc_widths).any(|&w| w == 0) {
            return Err(Error::Config("channel widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.leak) {
            return Err(Error::Config("leak must be in [0, 1)".into()));
        }
        Ok(())
    }

    /// Describes the first difference to `other`, if any.
    pub fn mismatch(&self, other: &ModelConfig) -> Option<String> {
        if self.n_emotions() != other.n_emotions() {
            return Some(format!("n={} vs n={}", self.n_emotions(), other.n_emotions()));
        }
        if self.input_size != other.input_size {
            return Some(format!("input size {} vs {}", self.input_size, other.input_size));
        }
        if self.widths != other.widths || self.disc_widths != other.disc_widths {
            return Some(format!(
                "widths {:?}/{:?} vs {:?}/{:?}",
                self.widths, self.disc_widths, other.widths, other.disc_widths
            ));
        }
        if self.norm != other.norm || self.leak != other.leak {
            return Some("normalization or activation settings differ".into());
        }
        if self.emotions != other.emotions {
            return Some(format!("emotions {:?} vs {:?}", self.emotions.names(), other.emotions.names()));
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emo() -> EmotionSet {
        EmotionSet::new(["happy"]).unwrap()
    }

    #[test]
    fn full_scale_pyramid() {
        let c = ModelConfig::full_scale(emo());
        c.validate().unwrap();
        let sizes: Vec<usize> = (0..c.levels()).map(|l| c.level_size(l)).collect();
        assert_eq!(sizes, vec![128, 64, 32, 16, 8, 4, 2, 1]);
        assert_eq!(c.heatmap_size(), 128);
    }

    #[test]
    fn scaled_variant() {
        let c = ModelConfig::scaled(emo(), 64, 6, 16, 64);
        c.validate().unwrap();
        assert_eq!(c.widths, vec![16, 32, 64, 64, 64, 64]);
        assert_eq!(c.level_size(5), 1);
        assert!(ModelConfig::scaled(emo(), 100, 8, 8, 8).validate().is_err());
        assert!(ModelConfig::scaled(emo(), 64, 1, 8, 8).validate().is_err());
    }
}
