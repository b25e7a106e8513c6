//! Constant-velocity Kalman filter over a 10-dim box state.
//!
//! State layout: `[x, y, z, yaw, l, w, h, vx, vy, vz]`. Position advances
//! with velocity; yaw, dims and velocity have static dynamics. The filter
//! observes the full state — the detector supplies a velocity measurement,
//! and feeding it into the update is what lets better velocity estimates
//! flow through to association.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::angle::wrap_angle;
use crate::error::CoreError;
use crate::types::Detection;
use crate::Result;

pub const STATE_DIM: usize = 10;
const YAW: usize = 3;

pub type StateVector = SVector<f64, STATE_DIM>;
pub type StateMatrix = SMatrix<f64, STATE_DIM, STATE_DIM>;

/// Gaussian belief over the box state.
#[derive(Debug, Clone, PartialEq)]
pub struct KfState {
    pub mean: StateVector,
    pub covariance: StateMatrix,
}

impl KfState {
    pub fn position(&self) -> [f64; 3] {
        [self.mean[0], self.mean[1], self.mean[2]]
    }

    pub fn yaw(&self) -> f64 {
        self.mean[YAW]
    }

    pub fn dims(&self) -> [f64; 3] {
        [self.mean[4], self.mean[5], self.mean[6]]
    }

    pub fn velocity(&self) -> [f64; 3] {
        [self.mean[7], self.mean[8], self.mean[9]]
    }

    /// Symmetry plus a Cholesky factorization check.
    pub fn covariance_is_spd(&self) -> bool {
        let p = self.covariance;
        let asym = (p - p.transpose()).amax();
        asym <= 1e-9 && p.cholesky().is_some()
    }
}

/// Noise configuration: per-dimension process noise rates (variance per
/// second), measurement variances and initial variances. None of these come
/// from first principles; they are tuning surface and all overridable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KfNoiseConfig {
    pub process_noise: [f64; STATE_DIM],
    pub measurement_noise: [f64; STATE_DIM],
    pub initial_covariance: [f64; STATE_DIM],
}

impl Default for KfNoiseConfig {
    fn default() -> Self {
        KfNoiseConfig {
            // position/velocity rates 0.1, yaw/dims 0.01
            process_noise: [0.1, 0.1, 0.1, 0.01, 0.01, 0.01, 0.01, 0.1, 0.1, 0.1],
            measurement_noise: [0.25, 0.25, 0.25, 0.05, 0.05, 0.05, 0.05, 0.25, 0.25, 0.25],
            initial_covariance: [1.0, 1.0, 1.0, 0.1, 0.1, 0.1, 0.1, 4.0, 4.0, 4.0],
        }
    }
}

impl KfNoiseConfig {
    pub fn validate(&self) -> Result<()> {
        let all = self
            .process_noise
            .iter()
            .chain(&self.measurement_noise)
            .chain(&self.initial_covariance);
        for &v in all {
            if !(v.is_finite() && v > 0.0) {
                return Err(CoreError::InvalidConfig(format!(
                    "kalman noise entries must be strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

fn measurement_of(d: &Detection) -> StateVector {
    StateVector::from_column_slice(&[
        d.center[0],
        d.center[1],
        d.center[2],
        d.yaw,
        d.dims[0],
        d.dims[1],
        d.dims[2],
        d.velocity[0],
        d.velocity[1],
        d.velocity[2],
    ])
}

fn symmetrize(p: &mut StateMatrix) {
    *p = (*p + p.transpose()) * 0.5;
}

/// Initializes a track state from a detection: the mean copies the
/// measurement (velocity included) and the covariance is diagonal.
pub fn init(d: &Detection, cfg: &KfNoiseConfig) -> KfState {
    let mean = measurement_of(d);
    let covariance = StateMatrix::from_diagonal(&StateVector::from_column_slice(
        &cfg.initial_covariance,
    ));
    KfState { mean, covariance }
}

/// Prediction step: advances position by velocity, propagates covariance
/// with the linear transition and adds `Q * dt` process noise.
pub fn predict(s: &KfState, dt: f64, cfg: &KfNoiseConfig) -> Result<KfState> {
    if !(dt.is_finite() && dt >= 0.0) {
        return Err(CoreError::Kalman(format!("dt must be >= 0, got {dt}")));
    }
    let mut f = StateMatrix::identity();
    f[(0, 7)] = dt;
    f[(1, 8)] = dt;
    f[(2, 9)] = dt;

    let mean = f * s.mean;
    let q = StateMatrix::from_diagonal(&StateVector::from_column_slice(&cfg.process_noise)) * dt;
    let mut covariance = f * s.covariance * f.transpose() + q;
    symmetrize(&mut covariance);
    Ok(KfState { mean, covariance })
}

/// Update step: full-state observation with wrapped yaw innovation and a
/// Joseph-form covariance update, which keeps the result SPD.
pub fn update(s: &KfState, d: &Detection, cfg: &KfNoiseConfig) -> Result<KfState> {
    let z = measurement_of(d);
    if z.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::Kalman("non-finite measurement".into()));
    }

    let mut innovation = z - s.mean;
    innovation[YAW] = wrap_angle(innovation[YAW]);

    let r = StateMatrix::from_diagonal(&StateVector::from_column_slice(&cfg.measurement_noise));
    let innovation_cov = s.covariance + r;
    let chol = innovation_cov
        .cholesky()
        .ok_or_else(|| CoreError::Kalman("innovation covariance is not positive definite".into()))?;
    let gain = s.covariance * chol.inverse();

    let mut mean = s.mean + gain * innovation;
    mean[YAW] = wrap_angle(mean[YAW]);

    let i_kh = StateMatrix::identity() - gain;
    let mut covariance = i_kh * s.covariance * i_kh.transpose() + gain * r * gain.transpose();
    symmetrize(&mut covariance);

    Ok(KfState { mean, covariance })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(center: [f64; 3], velocity: [f64; 3]) -> Detection {
        Detection::new(
            center,
            [4.0, 1.8, 1.5],
            0.3,
            velocity,
            0.9,
            0,
            vec![1.0, 0.0, 0.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn init_copies_detection_and_diagonal_covariance() {
        let cfg = KfNoiseConfig::default();
        let d = det([0.0, 0.0, 0.0], [1.0, 0.0, 0.0]);
        let s = init(&d, &cfg);
        assert_eq!(s.mean[0], 0.0);
        assert_eq!(s.mean[3], 0.3);
        assert_eq!(s.mean[4], 4.0);
        assert_eq!(s.mean[7], 1.0);
        for i in 0..STATE_DIM {
            assert_eq!(s.covariance[(i, i)], cfg.initial_covariance[i]);
        }
        let s2 = init(&d, &cfg);
        assert_eq!(s.mean, s2.mean);
        assert_eq!(s.covariance, s2.covariance);
    }

    #[test]
    fn predict_advances_position_by_velocity() {
        let cfg = KfNoiseConfig::default();
        let s = init(&det([2.0, -1.0, 0.5], [1.0, 0.0, 0.0]), &cfg);
        let p = predict(&s, 1.0, &cfg).unwrap();
        assert!((p.mean[0] - 3.0).abs() < 1e-15);
        assert_eq!(p.mean[1], -1.0);
        assert_eq!(p.mean[7], 1.0);
        assert!(p.covariance_is_spd());
    }

    #[test]
    fn predict_with_zero_dt_is_identity() {
        let cfg = KfNoiseConfig::default();
        let s = init(&det([2.0, -1.0, 0.5], [1.0, 2.0, 0.0]), &cfg);
        let p = predict(&s, 0.0, &cfg).unwrap();
        assert_eq!(p.mean, s.mean);
        assert_eq!(p.covariance, s.covariance);
    }

    #[test]
    fn predict_rejects_negative_dt() {
        let cfg = KfNoiseConfig::default();
        let s = init(&det([0.0; 3], [0.0; 3]), &cfg);
        assert!(predict(&s, -0.1, &cfg).is_err());
    }

    #[test]
    fn predict_increases_covariance_trace() {
        let cfg = KfNoiseConfig::default();
        let s = init(&det([0.0; 3], [1.0, 1.0, 0.0]), &cfg);
        let p = predict(&s, 0.5, &cfg).unwrap();
        assert!(p.covariance.trace() > s.covariance.trace());
    }

    #[test]
    fn update_with_predicted_mean_leaves_mean_unchanged() {
        let cfg = KfNoiseConfig::default();
        let d = det([1.0, 2.0, 0.0], [0.5, -0.5, 0.0]);
        let s = init(&d, &cfg);
        let u = update(&s, &d, &cfg).unwrap();
        for i in 0..STATE_DIM {
            assert!((u.mean[i] - s.mean[i]).abs() < 1e-12, "dim {i}");
        }
    }

    #[test]
    fn update_decreases_covariance_trace() {
        let cfg = KfNoiseConfig::default();
        let d = det([1.0, 2.0, 0.0], [0.5, -0.5, 0.0]);
        let s = init(&d, &cfg);
        let u = update(&s, &d, &cfg).unwrap();
        assert!(u.covariance.trace() < s.covariance.trace());
        assert!(u.covariance_is_spd());
    }

    #[test]
    fn yaw_innovation_wraps_through_pi() {
        let cfg = KfNoiseConfig::default();
        let mut s = init(&det([0.0; 3], [0.0; 3]), &cfg);
        s.mean[YAW] = 3.1;
        let mut d = det([0.0; 3], [0.0; 3]);
        d.yaw = -3.1;
        let u = update(&s, &d, &cfg).unwrap();
        // the innovation is +0.083..., so the posterior yaw moves up past pi
        // and wraps, rather than dropping toward -3
        assert!(u.mean[YAW] > 3.1 || u.mean[YAW] < -3.1);
    }

    #[test]
    fn update_rejects_non_finite_measurement() {
        let cfg = KfNoiseConfig::default();
        let s = init(&det([0.0; 3], [0.0; 3]), &cfg);
        let mut d = det([0.0; 3], [0.0; 3]);
        d.center[0] = f64::NAN;
        assert!(update(&s, &d, &cfg).is_err());
    }

    #[test]
    fn noiseless_cv_track_converges_immediately() {
        let cfg = KfNoiseConfig::default();
        let v = [2.0, -1.0, 0.0];
        let dt = 0.5;
        let mut truth = [0.0, 0.0, 0.0];
        let mut s = init(&det(truth, v), &cfg);
        for _ in 0..5 {
            for k in 0..3 {
                truth[k] += v[k] * dt;
            }
            s = predict(&s, dt, &cfg).unwrap();
            s = update(&s, &det(truth, v), &cfg).unwrap();
        }
        let err: f64 = (0..3)
            .map(|k| (s.mean[k] - truth[k]).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-9, "position error {err}");
    }
}
