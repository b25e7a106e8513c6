//! Detection and tracked-box domain types.

use serde::{Deserialize, Serialize};

use crate::angle::wrap_angle;
use crate::error::CoreError;
use crate::Result;

/// Tolerance on the unit-norm embedding invariant.
pub const EMBED_NORM_TOL: f64 = 1e-6;

/// A single 3D detection: oriented box, measured velocity, confidence and an
/// appearance embedding. The embedding is unit-norm; the velocity is the
/// detector's own estimate and is consumed directly by both the association
/// stage and the Kalman update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Box center (x, y, z) in meters, ego frame.
    pub center: [f64; 3],
    /// Box dimensions (l, w, h) in meters, all positive.
    pub dims: [f64; 3],
    /// Heading in radians, wrapped into (-pi, pi].
    pub yaw: f64,
    /// Measured velocity (vx, vy, vz) in m/s.
    pub velocity: [f64; 3],
    /// Confidence in [0, 1].
    pub score: f64,
    /// Object class; association never crosses classes.
    pub class_id: u32,
    /// Unit-norm appearance embedding.
    pub embedding: Vec<f64>,
}

impl Detection {
    /// Builds a detection, wrapping the yaw and normalizing the embedding.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        center: [f64; 3],
        dims: [f64; 3],
        yaw: f64,
        velocity: [f64; 3],
        score: f64,
        class_id: u32,
        embedding: Vec<f64>,
    ) -> Result<Self> {
        let norm = embedding.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm <= 0.0 {
            return Err(CoreError::InvalidDetection(
                "embedding must be non-zero and finite".into(),
            ));
        }
        let embedding = embedding.iter().map(|v| v / norm).collect();
        let det = Detection {
            center,
            dims,
            yaw: wrap_angle(yaw),
            velocity,
            score,
            class_id,
            embedding,
        };
        det.validate()?;
        Ok(det)
    }

    /// Checks every field invariant. Deserialized detections must pass this
    /// before entering the tracker.
    pub fn validate(&self) -> Result<()> {
        let finite = self.center.iter().all(|v| v.is_finite())
            && self.dims.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.yaw.is_finite()
            && self.score.is_finite()
            && self.embedding.iter().all(|v| v.is_finite());
        if !finite {
            return Err(CoreError::InvalidDetection(
                "detection contains non-finite values".into(),
            ));
        }
        if self.dims.iter().any(|&d| d <= 0.0) {
            return Err(CoreError::InvalidDetection(format!(
                "dims must be positive, got {:?}",
                self.dims
            )));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(CoreError::InvalidDetection(format!(
                "score must lie in [0, 1], got {}",
                self.score
            )));
        }
        if self.yaw <= -std::f64::consts::PI || self.yaw > std::f64::consts::PI {
            return Err(CoreError::InvalidDetection(format!(
                "yaw must lie in (-pi, pi], got {}",
                self.yaw
            )));
        }
        let norm = self.embedding.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > EMBED_NORM_TOL {
            return Err(CoreError::InvalidDetection(format!(
                "embedding norm must be 1 within {EMBED_NORM_TOL}, got {norm}"
            )));
        }
        Ok(())
    }
}

/// One tracked object as emitted per frame: detection geometry driven by the
/// Kalman mean plus the persistent track identity. This is also the box
/// schema used for ground-truth logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackedBox {
    pub track_id: u64,
    pub center: [f64; 3],
    pub dims: [f64; 3],
    pub yaw: f64,
    pub velocity: [f64; 3],
    pub score: f64,
    pub class_id: u32,
}

impl TrackedBox {
    pub fn validate(&self) -> Result<()> {
        let finite = self.center.iter().all(|v| v.is_finite())
            && self.dims.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.yaw.is_finite()
            && self.score.is_finite();
        if !finite {
            return Err(CoreError::Data("tracked box contains non-finite values".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_embedding(dim: usize) -> Vec<f64> {
        let mut e = vec![0.0; dim];
        e[0] = 1.0;
        e
    }

    #[test]
    fn new_normalizes_embedding_and_wraps_yaw() {
        let d = Detection::new(
            [1.0, 2.0, 0.5],
            [4.0, 2.0, 1.5],
            4.0,
            [1.0, 0.0, 0.0],
            0.9,
            0,
            vec![3.0, 4.0],
        )
        .unwrap();
        let norm: f64 = d.embedding.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(d.yaw > -std::f64::consts::PI && d.yaw <= std::f64::consts::PI);
    }

    #[test]
    fn validate_rejects_bad_fields() {
        let mut d = Detection::new(
            [0.0; 3],
            [1.0, 1.0, 1.0],
            0.0,
            [0.0; 3],
            0.5,
            0,
            unit_embedding(4),
        )
        .unwrap();
        d.score = 1.5;
        assert!(d.validate().is_err());
        d.score = 0.5;
        d.dims[1] = 0.0;
        assert!(d.validate().is_err());
        d.dims[1] = 1.0;
        d.center[0] = f64::INFINITY;
        assert!(d.validate().is_err());
        d.center[0] = 0.0;
        d.embedding[0] = 0.9;
        assert!(d.validate().is_err());
    }
}
