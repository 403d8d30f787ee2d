use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Instance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
}

/// Shape of the click-conditioned U-Net.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    pub base_features: usize,
    pub max_features: usize,
    /// Number of stride-two downsampling stages.
    pub depth: usize,
    pub kernel: usize,
    pub normalization: Normalization,
    pub activation: Activation,
    /// Side length of the square input.
    pub input_size: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            in_channels: 3,
            out_channels: 1,
            base_features: 64,
            max_features: 512,
            depth: 8,
            kernel: 3,
            normalization: Normalization::Instance,
            activation: Activation::Relu,
            input_size: 256,
        }
    }
}

impl NetworkConfig {
    /// Narrow variant of the default network that trains in minutes on a
    /// single CPU core. Depth and input size are unchanged.
    pub fn desk() -> Self {
        Self {
            base_features: 8,
            max_features: 64,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.in_channels != 3 || self.out_channels != 1 {
            return bad(format!(
                "expected 3 input and 1 output channels, got {} and {}",
                self.in_channels, self.out_channels
            ));
        }
        if self.kernel != 3 {
            return bad(format!("only 3x3 kernels are supported, got {}", self.kernel));
        }
        if self.depth == 0 || self.base_features == 0 || self.max_features < self.base_features {
            return bad("depth and feature widths must be positive with max >= base".into());
        }
        if self.depth >= usize::BITS as usize || self.input_size != 1 << self.depth {
            return bad(format!(
                "input size {} must equal 2^depth = 2^{} so the bottleneck is 1x1",
                self.input_size, self.depth
            ));
        }
        Ok(())
    }

    /// Output widths of the encoder stages: doubling from `base_features`
    /// and saturating at `max_features`.
    pub fn encoder_widths(&self) -> Vec<usize> {
        (0..self.depth)
            .map(|i| {
                self.base_features
                    .checked_shl(i as u32)
                    .filter(|&w| w <= self.max_features)
                    .unwrap_or(self.max_features)
            })
            .collect()
    }

    /// Spatial side length after each encoder stage.
    pub fn encoder_sizes(&self) -> Vec<usize> {
        (1..=self.depth).map(|i| self.input_size >> i).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_widths_saturate_at_512() {
        let cfg = NetworkConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.encoder_widths(), vec![64, 128, 256, 512, 512, 512, 512, 512]);
        assert_eq!(*cfg.encoder_sizes().last().unwrap(), 1);
    }

    #[test]
    fn rejects_inconsistent_input_size() {
        let cfg = NetworkConfig {
            input_size: 128,
            ..NetworkConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn parses_partial_toml() {
        let cfg: NetworkConfig = toml::from_str("base_features = 8\nmax_features = 64\n").unwrap();
        assert_eq!(cfg, NetworkConfig::desk());
    }
}
