//! Shared vision-encoder architecture.
//!
//! All pre-training arms (self-distilled, classification, random) build the
//! same backbone so comparisons differ only in the weights it holds.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::nn::{LayerSpec, Network};
use crate::rng::Rng;
use crate::tensor::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub frame_h: usize,
    pub frame_w: usize,
    /// Channels of the stride-2 3x3 conv blocks.
    pub conv_channels: Vec<usize>,
    pub embed_dim: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            frame_h: 64,
            frame_w: 64,
            conv_channels: vec![16, 32, 64, 128],
            embed_dim: 512,
        }
    }
}

impl EncoderConfig {
    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        let mut specs = Vec::new();
        let mut in_ch = 3;
        for &out_ch in &self.conv_channels {
            specs.push(LayerSpec::Conv2d {
                in_ch,
                out_ch,
                kernel: 3,
                stride: 2,
                padding: 1,
            });
            specs.push(LayerSpec::Relu);
            in_ch = out_ch;
        }
        specs.push(LayerSpec::GlobalAvgPool);
        specs.push(LayerSpec::Linear {
            in_dim: in_ch,
            out_dim: self.embed_dim,
        });
        specs.push(LayerSpec::Relu);
        specs
    }

    /// Conv stack + global average pool + FC to the embedding width. The pool
    /// makes the embedding length independent of input resolution, so the same
    /// encoder digests both global and local crops.
    pub fn build_network<T: Scalar>(&self, rng: &mut Rng) -> Result<Network<T>> {
        Network::new(&[3, self.frame_h, self.frame_w], &self.layer_specs(), rng)
    }

    /// Stable identifier of the backbone shape, used for arm-fairness checks.
    pub fn backbone_id(&self) -> String {
        let chans: Vec<String> = self.conv_channels.iter().map(|c| c.to_string()).collect();
        format!("conv{}-e{}", chans.join("-"), self.embed_dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::tensor::Tensor;

    #[test]
    fn encoder_embeds_both_resolutions() {
        let cfg = EncoderConfig {
            frame_h: 16,
            frame_w: 16,
            conv_channels: vec![4, 8],
            embed_dim: 12,
        };
        let net = cfg.build_network::<f64>(&mut rng_from_seed(1)).unwrap();
        let big = Tensor::zeros(vec![1, 3, 16, 16]);
        let small = Tensor::zeros(vec![1, 3, 8, 8]);
        assert_eq!(net.forward(&big).unwrap().shape(), &[1, 12]);
        assert_eq!(net.forward(&small).unwrap().shape(), &[1, 12]);
    }

    #[test]
    fn backbone_id_tracks_shape() {
        assert_eq!(EncoderConfig::default().backbone_id(), "conv16-32-64-128-e512");
    }
}
