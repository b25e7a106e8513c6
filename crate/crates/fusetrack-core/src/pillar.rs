//! Radar sweep accumulation and single-pillar BEV aggregation.
//!
//! Multiple radar sweeps are ego-motion compensated into the reference
//! frame and concatenated to densify the point cloud, then aggregated into
//! one pillar per BEV cell by per-channel averaging. No augmentation and no
//! z discretization: every point above a cell lands in the same pillar.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::grid::BevGrid;
use crate::tensor::FeatureMap;
use crate::Result;

/// Number of channels carried by each radar return. The first three are the
/// point's x, y, z position, so the per-cell mean implicitly contains the
/// pillar centroid.
pub const RADAR_CHANNELS: usize = 18;

/// Channel rewritten during accumulation to hold the age of the sweep
/// relative to the reference time, in seconds.
pub const TIMESTAMP_OFFSET_CHANNEL: usize = 17;

/// One radar return: 18 feature channels whose first three entries are the
/// point position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RadarPoint {
    features: [f64; RADAR_CHANNELS],
}

impl RadarPoint {
    pub fn new(features: [f64; RADAR_CHANNELS]) -> Result<Self> {
        if features.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::Data("radar point has non-finite channel".into()));
        }
        Ok(RadarPoint { features })
    }

    pub fn position(&self) -> [f64; 3] {
        [self.features[0], self.features[1], self.features[2]]
    }

    pub fn features(&self) -> &[f64; RADAR_CHANNELS] {
        &self.features
    }

    pub fn is_finite(&self) -> bool {
        self.features.iter().all(|v| v.is_finite())
    }
}

/// 2D rigid transform of a sweep frame relative to the reference frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub theta: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Pose2 {
    pub fn identity() -> Self {
        Pose2 {
            theta: 0.0,
            tx: 0.0,
            ty: 0.0,
        }
    }

    /// Rotate-then-translate a point into the reference frame.
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (c * x - s * y + self.tx, s * x + c * y + self.ty)
    }
}

/// One radar scan with its capture time and ego pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarSweep {
    pub timestamp: f64,
    pub ego_pose: Pose2,
    pub points: Vec<RadarPoint>,
}

/// Accumulates the newest `max_sweeps` sweeps into the reference frame.
///
/// Sweeps must be ordered oldest to newest with the last one being the
/// reference (identity pose). Each point's xy is transformed by its sweep's
/// ego pose (z unchanged), the position channels are rewritten to the
/// transformed position, and the timestamp-offset channel is set to
/// `reference_time - sweep.timestamp`. An empty input yields an empty
/// output.
pub fn accumulate_sweeps(
    sweeps: &[RadarSweep],
    reference_time: f64,
    max_sweeps: usize,
) -> Result<Vec<RadarPoint>> {
    if max_sweeps == 0 {
        return Err(CoreError::InvalidConfig("max_sweeps must be >= 1".into()));
    }
    for pair in sweeps.windows(2) {
        if pair[0].timestamp > pair[1].timestamp {
            return Err(CoreError::Data(format!(
                "sweeps are not sorted by timestamp: {} after {}",
                pair[1].timestamp, pair[0].timestamp
            )));
        }
    }
    let start = sweeps.len().saturating_sub(max_sweeps);
    let mut out = Vec::new();
    for sweep in &sweeps[start..] {
        let offset = reference_time - sweep.timestamp;
        for p in &sweep.points {
            let [x, y, z] = p.position();
            let (xr, yr) = sweep.ego_pose.apply(x, y);
            let mut f = *p.features();
            f[0] = xr;
            f[1] = yr;
            f[2] = z;
            f[TIMESTAMP_OFFSET_CHANNEL] = offset;
            out.push(RadarPoint::new(f)?);
        }
    }
    Ok(out)
}

/// Aggregates radar points into single pillars by per-cell averaging.
///
/// Each cell of the output holds the arithmetic mean of the feature vectors
/// of all points whose xy maps into it; empty cells are all zero and
/// out-of-range points are dropped. Per-cell sums run in input order, so the
/// result is bitwise reproducible.
pub fn pillarize(points: &[RadarPoint], grid: &BevGrid) -> FeatureMap {
    let n = grid.cells_per_side();
    let plane = n * n;
    let mut sums = vec![0.0f64; RADAR_CHANNELS * plane];
    let mut counts = vec![0u64; plane];

    for p in points {
        let [x, y, _] = p.position();
        let Some((row, col)) = grid.world_to_cell(x, y) else {
            continue;
        };
        let cell = row * n + col;
        counts[cell] += 1;
        for (c, &v) in p.features().iter().enumerate() {
            sums[c * plane + cell] += v;
        }
    }

    for cell in 0..plane {
        let count = counts[cell];
        if count > 0 {
            let inv = count as f64;
            for c in 0..RADAR_CHANNELS {
                sums[c * plane + cell] /= inv;
            }
        }
    }

    FeatureMap::new(RADAR_CHANNELS, n, n, sums).expect("pillar sums are finite by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(x: f64, y: f64, z: f64, fill: f64) -> RadarPoint {
        let mut f = [fill; RADAR_CHANNELS];
        f[0] = x;
        f[1] = y;
        f[2] = z;
        RadarPoint::new(f).unwrap()
    }

    #[test]
    fn identity_sweep_passes_through_with_zero_offset() {
        let sweep = RadarSweep {
            timestamp: 10.0,
            ego_pose: Pose2::identity(),
            points: vec![point(1.0, 2.0, 0.5, 3.0), point(-4.0, 0.0, 1.0, 7.0)],
        };
        let out = accumulate_sweeps(&[sweep.clone()], 10.0, 5).unwrap();
        assert_eq!(out.len(), 2);
        for (o, i) in out.iter().zip(&sweep.points) {
            assert_eq!(o.position(), i.position());
            assert_eq!(o.features()[TIMESTAMP_OFFSET_CHANNEL], 0.0);
        }
    }

    #[test]
    fn translation_moves_point_and_rewrites_position_channels() {
        let older = RadarSweep {
            timestamp: 9.5,
            ego_pose: Pose2 {
                theta: 0.0,
                tx: 1.0,
                ty: 0.0,
            },
            points: vec![point(0.0, 0.0, 0.0, 0.0)],
        };
        let reference = RadarSweep {
            timestamp: 10.0,
            ego_pose: Pose2::identity(),
            points: vec![],
        };
        let out = accumulate_sweeps(&[older, reference], 10.0, 5).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].position(), [1.0, 0.0, 0.0]);
        assert_eq!(out[0].features()[0], 1.0);
        assert_eq!(out[0].features()[TIMESTAMP_OFFSET_CHANNEL], 0.5);
    }

    #[test]
    fn rotation_is_applied_before_translation() {
        let older = RadarSweep {
            timestamp: 0.0,
            ego_pose: Pose2 {
                theta: std::f64::consts::FRAC_PI_2,
                tx: 0.0,
                ty: 1.0,
            },
            points: vec![point(1.0, 0.0, 0.25, 0.0)],
        };
        let out = accumulate_sweeps(&[older], 1.0, 5).unwrap();
        let [x, y, z] = out[0].position();
        assert!(x.abs() < 1e-12);
        assert!((y - 2.0).abs() < 1e-12);
        assert_eq!(z, 0.25);
    }

    #[test]
    fn keeps_only_newest_max_sweeps() {
        let sweeps: Vec<RadarSweep> = (0..6)
            .map(|i| RadarSweep {
                timestamp: i as f64,
                ego_pose: Pose2::identity(),
                points: vec![point(i as f64, 0.0, 0.0, i as f64)],
            })
            .collect();
        let out = accumulate_sweeps(&sweeps, 5.0, 5).unwrap();
        assert_eq!(out.len(), 5);
        // sweep 0 dropped, sweeps 1..=5 kept in order
        let xs: Vec<f64> = out.iter().map(|p| p.position()[0]).collect();
        assert_eq!(xs, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn unsorted_sweeps_are_rejected() {
        let a = RadarSweep {
            timestamp: 2.0,
            ego_pose: Pose2::identity(),
            points: vec![],
        };
        let b = RadarSweep {
            timestamp: 1.0,
            ego_pose: Pose2::identity(),
            points: vec![],
        };
        assert!(accumulate_sweeps(&[a, b], 2.0, 5).is_err());
    }

    #[test]
    fn empty_input_gives_empty_output() {
        assert!(accumulate_sweeps(&[], 0.0, 5).unwrap().is_empty());
    }

    #[test]
    fn two_points_in_one_cell_average() {
        let grid = BevGrid::default();
        let a = point(0.1, 0.1, 1.0, 2.0);
        let b = point(0.2, 0.3, 3.0, 6.0);
        let map = pillarize(&[a, b], &grid);
        assert_eq!(map.channels(), RADAR_CHANNELS);
        assert_eq!(map.height(), 128);
        let (row, col) = grid.world_to_cell(0.1, 0.1).unwrap();
        for c in 0..RADAR_CHANNELS {
            let expected = (a.features()[c] + b.features()[c]) / 2.0;
            assert_eq!(map.get(c, row, col), expected);
        }
        // every other cell is zero
        let nonzero = map.data().iter().filter(|v| **v != 0.0).count();
        assert!(nonzero <= RADAR_CHANNELS);
    }

    #[test]
    fn empty_points_give_all_zero_map() {
        let map = pillarize(&[], &BevGrid::default());
        assert!(map.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn out_of_range_points_are_dropped() {
        let grid = BevGrid::default();
        let map = pillarize(&[point(60.0, 0.0, 0.0, 1.0), point(51.2, 0.0, 0.0, 1.0)], &grid);
        assert!(map.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn position_channels_hold_cell_centroid() {
        let grid = BevGrid::default();
        let pts = vec![point(0.1, 0.1, 0.4, 5.0), point(0.3, 0.2, 0.8, 1.0)];
        let map = pillarize(&pts, &grid);
        let (row, col) = grid.world_to_cell(0.1, 0.1).unwrap();
        assert_eq!(map.get(0, row, col), (0.1 + 0.3) / 2.0);
        assert_eq!(map.get(1, row, col), (0.1 + 0.2) / 2.0);
        assert_eq!(map.get(2, row, col), (0.4 + 0.8) / 2.0);
    }
}
