//! Dense channel-major 2D feature tensors.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::Result;

/// A `channels x height x width` tensor stored channel-major: the scalar at
/// `(c, row, col)` lives at index `(c * height + row) * width + col`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFeatureMap", into = "RawFeatureMap")]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawFeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl TryFrom<RawFeatureMap> for FeatureMap {
    type Error = CoreError;

    fn try_from(raw: RawFeatureMap) -> Result<Self> {
        FeatureMap::new(raw.channels, raw.height, raw.width, raw.data)
    }
}

impl From<FeatureMap> for RawFeatureMap {
    fn from(m: FeatureMap) -> Self {
        RawFeatureMap {
            channels: m.channels,
            height: m.height,
            width: m.width,
            data: m.data,
        }
    }
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        let expected = channels
            .checked_mul(height)
            .and_then(|v| v.checked_mul(width))
            .ok_or_else(|| CoreError::ShapeMismatch("feature map dimensions overflow".into()))?;
        if data.len() != expected {
            return Err(CoreError::ShapeMismatch(format!(
                "feature map data length {} does not match {channels}x{height}x{width}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(CoreError::ShapeMismatch(format!(
                "feature map contains non-finite value {v}"
            )));
        }
        Ok(FeatureMap {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        FeatureMap {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    fn index(&self, c: usize, row: usize, col: usize) -> usize {
        debug_assert!(c < self.channels && row < self.height && col < self.width);
        (c * self.height + row) * self.width + col
    }

    #[inline]
    pub fn get(&self, c: usize, row: usize, col: usize) -> f64 {
        self.data[self.index(c, row, col)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, row: usize, col: usize, value: f64) {
        let i = self.index(c, row, col);
        self.data[i] = value;
    }

    /// The contiguous `height x width` slice backing one channel.
    pub fn channel(&self, c: usize) -> &[f64] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }

    /// True when the two maps share the same spatial footprint.
    pub fn same_extent(&self, other: &FeatureMap) -> bool {
        self.height == other.height && self.width == other.width
    }
}
