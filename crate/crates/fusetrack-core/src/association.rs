//! Affinity scoring and greedy assignment between tracks and detections.
//!
//! The combined affinity blends an appearance term with a motion-location
//! term:
//!
//! ```text
//! A = w_deep * A_deep + w_motion * (A_motion ∘ A_loc)
//! ```
//!
//! where `∘` is the elementwise product, `A_deep` is a shifted cosine
//! similarity of unit embeddings, `A_loc` an exponential centroid-distance
//! score, and the motion term trades a centroid correlation against a
//! box-state correlation:
//!
//! ```text
//! a_motion = w * a_centroid + (1 - w) * a_pseudo
//! ```
//!
//! The trade-off weight `w` is either the velocity similarity
//! `a_vel = exp(-|v_track - v_det| / r)` comparing filtered against
//! measured velocity, or the baseline cosine of the predicted versus the
//! observed motion direction in the xy plane.
//!
//! Assignment is greedy: repeatedly take the largest remaining affinity at
//! or above the matching threshold and retire its row and column.

use serde::{Deserialize, Serialize};

use crate::angle::angle_diff;
use crate::error::CoreError;
use crate::types::Detection;
use crate::Result;

/// Scale of the box-state correlation `a_pseudo` (L1 distance over
/// `[x, y, z, yaw, l, w, h]` divided by this constant).
const PSEUDO_STATE_SCALE: f64 = 10.0;

/// Which trade-off weight blends `a_centroid` against `a_pseudo`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TradeOffTerm {
    /// Exponential velocity similarity of filtered vs measured velocity.
    #[serde(rename = "velocity")]
    VelocitySimilarity,
    /// Baseline: cosine between the predicted motion direction and the
    /// observed displacement direction in the xy plane.
    #[serde(rename = "cosine")]
    CosineSimilarity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssociationConfig {
    /// Appearance weight in the combined affinity.
    pub w_deep: f64,
    /// Motion-location weight; must equal `1 - w_deep`.
    pub w_motion: f64,
    /// Velocity scale `r` of the velocity similarity, m/s.
    pub r_vel: f64,
    /// Minimum affinity for a greedy match.
    pub match_threshold: f64,
    /// Length scale of the location correlation, m.
    pub loc_scale: f64,
    /// Length scale of the centroid correlation, m.
    pub centroid_scale: f64,
    pub trade_off_term: TradeOffTerm,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        AssociationConfig {
            w_deep: 0.25,
            w_motion: 0.75,
            r_vel: 1.0,
            match_threshold: 0.30,
            loc_scale: 10.0,
            centroid_scale: 10.0,
            trade_off_term: TradeOffTerm::VelocitySimilarity,
        }
    }
}

impl AssociationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.w_deep) || !self.w_deep.is_finite() {
            return Err(CoreError::InvalidConfig(format!(
                "w_deep must lie in [0, 1], got {}",
                self.w_deep
            )));
        }
        if (self.w_deep + self.w_motion - 1.0).abs() > 1e-9 {
            return Err(CoreError::InvalidConfig(format!(
                "w_deep + w_motion must equal 1, got {} + {}",
                self.w_deep, self.w_motion
            )));
        }
        if !(self.r_vel.is_finite() && self.r_vel > 0.0) {
            return Err(CoreError::InvalidConfig(format!(
                "r_vel must be positive, got {}",
                self.r_vel
            )));
        }
        if !(self.match_threshold > 0.0 && self.match_threshold < 1.0) {
            return Err(CoreError::InvalidConfig(format!(
                "match_threshold must lie in (0, 1), got {}",
                self.match_threshold
            )));
        }
        if !(self.loc_scale > 0.0 && self.centroid_scale > 0.0) {
            return Err(CoreError::InvalidConfig(
                "affinity length scales must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Convenience constructor keeping `w_motion = 1 - w_deep`.
    pub fn with_weights(mut self, w_deep: f64) -> Self {
        self.w_deep = w_deep;
        self.w_motion = 1.0 - w_deep;
        self
    }
}

/// Track-side cues consumed by the affinity: the KF-predicted state for the
/// current frame plus the pre-prediction centroid, which anchors the
/// observed motion direction used by the cosine trade-off term.
#[derive(Debug, Clone)]
pub struct TrackCue {
    pub centroid: [f64; 3],
    pub prev_centroid: [f64; 3],
    pub velocity: [f64; 3],
    pub yaw: f64,
    pub dims: [f64; 3],
    pub embedding: Vec<f64>,
    pub class_id: u32,
}

/// Dense track x detection score matrix with entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinityMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl AffinityMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(CoreError::ShapeMismatch(format!(
                "affinity matrix needs {rows}x{cols} entries, got {}",
                values.len()
            )));
        }
        if let Some(v) = values
            .iter()
            .find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(CoreError::ShapeMismatch(format!(
                "affinity entries must lie in [0, 1], got {v}"
            )));
        }
        Ok(AffinityMatrix { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!((0.0..=1.0).contains(&value));
        self.values[row * self.cols + col] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm3([a[0] - b[0], a[1] - b[1], a[2] - b[2]])
}

/// Appearance similarity matrix: `(1 + cos) / 2` of unit embeddings,
/// clamped into `[0, 1]`.
pub fn embedding_affinity(
    track_embeds: &[&[f64]],
    det_embeds: &[&[f64]],
) -> Result<AffinityMatrix> {
    let dim = track_embeds
        .first()
        .or(det_embeds.first())
        .map(|e| e.len())
        .unwrap_or(0);
    for e in track_embeds.iter().chain(det_embeds.iter()) {
        if e.len() != dim {
            return Err(CoreError::ShapeMismatch(format!(
                "embedding dimension mismatch: {} vs {dim}",
                e.len()
            )));
        }
    }
    let mut values = Vec::with_capacity(track_embeds.len() * det_embeds.len());
    for t in track_embeds {
        for d in det_embeds {
            values.push(((1.0 + dot(t, d)) / 2.0).clamp(0.0, 1.0));
        }
    }
    AffinityMatrix::new(track_embeds.len(), det_embeds.len(), values)
}

/// Velocity similarity `exp(-|v_track - v_det| / r)`, in `(0, 1]`.
pub fn velocity_weight(v_track: [f64; 3], v_det: [f64; 3], r_vel: f64) -> f64 {
    (-dist3(v_track, v_det) / r_vel).exp()
}

/// Centroid correlation shared by the motion and location terms.
fn centroid_score(a: [f64; 3], b: [f64; 3], scale: f64) -> f64 {
    (-dist3(a, b) / scale).exp()
}

/// Box-state correlation over `[x, y, z, yaw, l, w, h]` with wrapped yaw.
fn pseudo_score(track: &TrackCue, det: &Detection) -> f64 {
    let mut l1 = 0.0;
    for k in 0..3 {
        l1 += (track.centroid[k] - det.center[k]).abs();
        l1 += (track.dims[k] - det.dims[k]).abs();
    }
    l1 += angle_diff(track.yaw, det.yaw).abs();
    (-l1 / PSEUDO_STATE_SCALE).exp()
}

/// Cosine trade-off weight: `(1 + cos) / 2` between the track's predicted
/// motion direction and the direction of the observed displacement toward
/// the detection, both in the xy plane. Degenerate directions score the
/// neutral 0.5.
fn cosine_weight(track: &TrackCue, det: &Detection, dt: f64) -> f64 {
    let vx = track.velocity[0];
    let vy = track.velocity[1];
    let (px, py) = if dt > 0.0 {
        (
            (det.center[0] - track.prev_centroid[0]) / dt,
            (det.center[1] - track.prev_centroid[1]) / dt,
        )
    } else {
        (0.0, 0.0)
    };
    let nv = (vx * vx + vy * vy).sqrt();
    let np = (px * px + py * py).sqrt();
    if nv < 1e-12 || np < 1e-12 {
        return 0.5;
    }
    let cos = ((vx * px + vy * py) / (nv * np)).clamp(-1.0, 1.0);
    (1.0 + cos) / 2.0
}

/// Motion correlation: the trade-off weight blends the centroid correlation
/// against the box-state correlation.
pub fn motion_affinity(track: &TrackCue, det: &Detection, dt: f64, cfg: &AssociationConfig) -> f64 {
    let w = match cfg.trade_off_term {
        TradeOffTerm::VelocitySimilarity => {
            velocity_weight(track.velocity, det.velocity, cfg.r_vel)
        }
        TradeOffTerm::CosineSimilarity => cosine_weight(track, det, dt),
    };
    let a_centroid = centroid_score(track.centroid, det.center, cfg.centroid_scale);
    let a_pseudo = pseudo_score(track, det);
    w * a_centroid + (1.0 - w) * a_pseudo
}

/// Location correlation `exp(-distance / loc_scale)`.
pub fn location_affinity(track_centroid: [f64; 3], det_center: [f64; 3], loc_scale: f64) -> f64 {
    centroid_score(track_centroid, det_center, loc_scale)
}

/// Builds the combined affinity matrix over all track/detection pairs.
/// Empty inputs yield a matrix with zero rows or columns.
pub fn affinity(
    tracks: &[TrackCue],
    dets: &[Detection],
    dt: f64,
    cfg: &AssociationConfig,
) -> Result<AffinityMatrix> {
    cfg.validate()?;
    let track_embeds: Vec<&[f64]> = tracks.iter().map(|t| t.embedding.as_slice()).collect();
    let det_embeds: Vec<&[f64]> = dets.iter().map(|d| d.embedding.as_slice()).collect();
    let deep = embedding_affinity(&track_embeds, &det_embeds)?;

    let mut values = Vec::with_capacity(tracks.len() * dets.len());
    for (i, track) in tracks.iter().enumerate() {
        for (j, det) in dets.iter().enumerate() {
            let a_motion = motion_affinity(track, det, dt, cfg);
            let a_loc = location_affinity(track.centroid, det.center, cfg.loc_scale);
            let combined = cfg.w_deep * deep.get(i, j) + cfg.w_motion * (a_motion * a_loc);
            values.push(combined.clamp(0.0, 1.0));
        }
    }
    AffinityMatrix::new(tracks.len(), dets.len(), values)
}

/// Outcome of greedy assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchResult {
    /// `(track_index, detection_index)` pairs in selection order.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Greedy assignment: repeatedly select the globally largest remaining
/// entry at or above the threshold and retire its row and column. Ties pick
/// the lower track index, then the lower detection index.
pub fn greedy_match(a: &AffinityMatrix, threshold: f64) -> MatchResult {
    let mut row_used = vec![false; a.rows()];
    let mut col_used = vec![false; a.cols()];
    let mut matches = Vec::new();

    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..a.rows() {
            if row_used[i] {
                continue;
            }
            for j in 0..a.cols() {
                if col_used[j] {
                    continue;
                }
                let v = a.get(i, j);
                if v >= threshold && best.map_or(true, |(bv, _, _)| v > bv) {
                    best = Some((v, i, j));
                }
            }
        }
        match best {
            Some((_, i, j)) => {
                row_used[i] = true;
                col_used[j] = true;
                matches.push((i, j));
            }
            None => break,
        }
    }

    MatchResult {
        matches,
        unmatched_tracks: (0..a.rows()).filter(|&i| !row_used[i]).collect(),
        unmatched_detections: (0..a.cols()).filter(|&j| !col_used[j]).collect(),
    }
}
