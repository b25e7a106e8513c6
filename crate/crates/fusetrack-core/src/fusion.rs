//! BEV fusion tensor assembly.
//!
//! The detection data path concatenates the lifted image features with the
//! radar pillars, runs the result through a BEV feature encoder, and
//! optionally concatenates the radar pillars once more as a residual
//! connection. With the default 64-channel image map, 18 radar channels and
//! a 256-channel encoder this produces the 82x128x128 intermediate and the
//! 274x128x128 detector input.
//!
//! The encoder itself is pluggable: real deployments put a learned network
//! here, while [`LinearEncoder`] is a seed-deterministic per-cell linear
//! map that preserves the shape contracts without any learned weights.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::rng::SeededRng;
use crate::tensor::FeatureMap;
use crate::Result;

/// Channel-wise concatenation, first input's channels first. Inputs are
/// never modified.
fn concat_channels(a: &FeatureMap, b: &FeatureMap) -> Result<FeatureMap> {
    if !a.same_extent(b) {
        return Err(CoreError::ShapeMismatch(format!(
            "cannot concatenate {}x{} with {}x{} grids",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    let mut data = Vec::with_capacity((a.channels() + b.channels()) * a.height() * a.width());
    data.extend_from_slice(a.data());
    data.extend_from_slice(b.data());
    FeatureMap::new(a.channels() + b.channels(), a.height(), a.width(), data)
}

/// Concatenates radar pillars onto the image BEV features ahead of the
/// encoder (64 + 18 channels in the default configuration).
pub fn fuse_concat(image_bev: &FeatureMap, radar_bev: &FeatureMap) -> Result<FeatureMap> {
    concat_channels(image_bev, radar_bev)
}

/// Residual connection: concatenates the radar pillars once more onto the
/// encoded BEV features (256 + 18 channels in the default configuration).
pub fn residual_concat(encoded_bev: &FeatureMap, radar_bev: &FeatureMap) -> Result<FeatureMap> {
    concat_channels(encoded_bev, radar_bev)
}

/// A BEV feature encoder mapping a fused tensor to a fixed channel count.
pub trait FeatureEncoder {
    fn input_channels(&self) -> usize;
    fn output_channels(&self) -> usize;
    fn encode(&self, fused: &FeatureMap) -> Result<FeatureMap>;
}

/// Applies an encoder after checking the channel contract.
pub fn encode_bev(fused: &FeatureMap, encoder: &dyn FeatureEncoder) -> Result<FeatureMap> {
    if fused.channels() != encoder.input_channels() {
        return Err(CoreError::ShapeMismatch(format!(
            "encoder expects {} input channels, got {}",
            encoder.input_channels(),
            fused.channels()
        )));
    }
    let out = encoder.encode(fused)?;
    if out.channels() != encoder.output_channels()
        || out.height() != fused.height()
        || out.width() != fused.width()
    {
        return Err(CoreError::ShapeMismatch(
            "encoder produced a tensor with the wrong shape".into(),
        ));
    }
    Ok(out)
}

/// Seed-deterministic per-cell linear projection. There is no spatial
/// mixing and no bias, so a zero input maps to a zero output and repeated
/// calls are bitwise identical.
#[derive(Debug, Clone)]
pub struct LinearEncoder {
    in_channels: usize,
    out_channels: usize,
    /// Row-major `out_channels x in_channels` weights.
    weights: Vec<f64>,
}

impl LinearEncoder {
    pub fn seeded(seed: u64, in_channels: usize, out_channels: usize) -> Self {
        let mut stream = SeededRng::new(seed).stream(&[0x656e_636f]);
        let scale = (1.0 / in_channels.max(1) as f64).sqrt();
        let weights = (0..in_channels * out_channels)
            .map(|_| stream.uniform_in(-scale, scale))
            .collect();
        LinearEncoder {
            in_channels,
            out_channels,
            weights,
        }
    }
}

impl FeatureEncoder for LinearEncoder {
    fn input_channels(&self) -> usize {
        self.in_channels
    }

    fn output_channels(&self) -> usize {
        self.out_channels
    }

    fn encode(&self, fused: &FeatureMap) -> Result<FeatureMap> {
        let plane = fused.height() * fused.width();
        let mut data = vec![0.0; self.out_channels * plane];
        for o in 0..self.out_channels {
            let w_row = &self.weights[o * self.in_channels..(o + 1) * self.in_channels];
            let out_plane = &mut data[o * plane..(o + 1) * plane];
            for (i, &w) in w_row.iter().enumerate() {
                let in_plane = fused.channel(i);
                for (dst, &src) in out_plane.iter_mut().zip(in_plane) {
                    *dst += w * src;
                }
            }
        }
        FeatureMap::new(self.out_channels, fused.height(), fused.width(), data)
    }
}

/// Which aggregation feeds the fusion step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionVariant {
    /// Direct single-pillar aggregation (the supported path).
    Pillar,
    /// z-binned voxels with a 3D-convolution compressor. Kept so configs
    /// naming it parse, but rejected at runtime: the pillar path replaced it.
    VoxelCompressor,
}

/// Configuration of the fusion tensor assembly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub variant: FusionVariant,
    /// When false the residual concatenation is skipped and the consumer
    /// receives the encoder output unchanged.
    pub residual: bool,
    pub encoder_seed: u64,
    pub image_channels: usize,
    pub encoded_channels: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            variant: FusionVariant::Pillar,
            residual: true,
            encoder_seed: 0,
            image_channels: 64,
            encoded_channels: 256,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.image_channels == 0 || self.encoded_channels == 0 {
            return Err(CoreError::InvalidConfig(
                "fusion channel counts must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Runs the full fusion path: concatenate, encode, and optionally apply the
/// radar residual. Returns the tensor handed to the detection head.
pub fn assemble_detector_input(
    image_bev: &FeatureMap,
    radar_bev: &FeatureMap,
    cfg: &FusionConfig,
) -> Result<FeatureMap> {
    cfg.validate()?;
    match cfg.variant {
        FusionVariant::VoxelCompressor => Err(CoreError::InvalidConfig(
            "voxel fusion variant is not implemented; use the pillar variant".into(),
        )),
        FusionVariant::Pillar => {
            if image_bev.channels() != cfg.image_channels {
                return Err(CoreError::ShapeMismatch(format!(
                    "expected {} image channels, got {}",
                    cfg.image_channels,
                    image_bev.channels()
                )));
            }
            let fused = fuse_concat(image_bev, radar_bev)?;
            let encoder =
                LinearEncoder::seeded(cfg.encoder_seed, fused.channels(), cfg.encoded_channels);
            let encoded = encode_bev(&fused, &encoder)?;
            if cfg.residual {
                residual_concat(&encoded, radar_bev)
            } else {
                Ok(encoded)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn random_map(seed: u64, channels: usize, h: usize, w: usize) -> FeatureMap {
        let mut s = SeededRng::new(seed).stream(&[channels as u64]);
        let data = (0..channels * h * w).map(|_| s.uniform_in(-2.0, 2.0)).collect();
        FeatureMap::new(channels, h, w, data).unwrap()
    }

    #[test]
    fn concat_of_zero_maps_is_zero() {
        let out = fuse_concat(&FeatureMap::zeros(64, 8, 8), &FeatureMap::zeros(18, 8, 8)).unwrap();
        assert_eq!(out.channels(), 82);
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn concat_preserves_both_inputs_channelwise() {
        let img = random_map(1, 64, 4, 4);
        let rad = random_map(2, 18, 4, 4);
        let out = fuse_concat(&img, &rad).unwrap();
        for c in 0..64 {
            assert_eq!(out.channel(c), img.channel(c));
        }
        for k in 0..18 {
            assert_eq!(out.channel(64 + k), rad.channel(k));
        }
    }

    #[test]
    fn concat_rejects_extent_mismatch() {
        let img = FeatureMap::zeros(64, 8, 8);
        let rad = FeatureMap::zeros(18, 4, 8);
        assert!(matches!(
            fuse_concat(&img, &rad),
            Err(CoreError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn residual_concat_appends_radar_exactly() {
        let enc = random_map(3, 256, 4, 4);
        let rad = random_map(4, 18, 4, 4);
        let out = residual_concat(&enc, &rad).unwrap();
        assert_eq!(out.channels(), 274);
        for k in 0..18 {
            assert_eq!(out.channel(256 + k), rad.channel(k));
        }
    }

    #[test]
    fn linear_encoder_is_deterministic_and_linear() {
        let enc = LinearEncoder::seeded(9, 82, 256);
        let input = random_map(5, 82, 4, 4);
        let a = encode_bev(&input, &enc).unwrap();
        let b = encode_bev(&input, &enc).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.channels(), 256);
        let zeros = encode_bev(&FeatureMap::zeros(82, 4, 4), &enc).unwrap();
        assert!(zeros.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn encoder_rejects_channel_mismatch() {
        let enc = LinearEncoder::seeded(9, 82, 256);
        assert!(encode_bev(&FeatureMap::zeros(81, 4, 4), &enc).is_err());
    }

    #[test]
    fn full_path_produces_expected_channel_counts() {
        let img = random_map(6, 64, 8, 8);
        let rad = random_map(7, 18, 8, 8);
        let with_residual = assemble_detector_input(&img, &rad, &FusionConfig::default()).unwrap();
        assert_eq!(with_residual.channels(), 274);
        let cfg = FusionConfig {
            residual: false,
            ..FusionConfig::default()
        };
        let without = assemble_detector_input(&img, &rad, &cfg).unwrap();
        assert_eq!(without.channels(), 256);
    }

    #[test]
    fn voxel_variant_is_rejected() {
        let cfg = FusionConfig {
            variant: FusionVariant::VoxelCompressor,
            ..FusionConfig::default()
        };
        let img = FeatureMap::zeros(64, 4, 4);
        let rad = FeatureMap::zeros(18, 4, 4);
        assert!(matches!(
            assemble_detector_input(&img, &rad, &cfg),
            Err(CoreError::InvalidConfig(_))
        ));
    }
}
