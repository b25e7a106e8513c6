//! Per-frame tracking loop: predict, associate, update, manage lifecycle.
//!
//! Each frame the tracker predicts every live track forward, scores
//! same-class track/detection pairs, greedily assigns them, Kalman-updates
//! the matched tracks and smooths their appearance embeddings, ages out
//! tracks that keep missing, and spawns tentative tracks from confident
//! leftover detections. Only confirmed tracks are reported.
//!
//! `TrackerState` is a value: `step` consumes nothing and returns the next
//! state, so distinct scenes can run in parallel without sharing anything.

use serde::{Deserialize, Serialize};

use crate::association::{self, AssociationConfig, TrackCue};
use crate::error::CoreError;
use crate::kalman::{self, KfNoiseConfig, KfState};
use crate::types::{Detection, TrackedBox};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Dead,
}

/// A persistent track: Kalman state plus identity, smoothed embedding and
/// lifecycle counters.
#[derive(Debug, Clone)]
pub struct Track {
    pub id: u64,
    pub kf: KfState,
    pub embedding: Vec<f64>,
    pub class_id: u32,
    /// Consecutive matches; resets on a miss.
    pub hits: u32,
    /// Consecutive misses; resets on a match.
    pub misses: u32,
    /// Frames since birth.
    pub age: u32,
    pub status: TrackStatus,
    pub last_score: f64,
    /// Centroid before the current frame's prediction; anchors the observed
    /// motion direction for the cosine trade-off term.
    prev_centroid: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    pub association: AssociationConfig,
    pub kf_noise: KfNoiseConfig,
    /// Maximum consecutive misses before a track dies.
    pub max_age: u32,
    /// Consecutive matches needed to confirm a track.
    pub min_hits: u32,
    /// Minimum detection score to spawn a new track.
    pub det_score_floor: f64,
    /// EMA momentum of the track embedding.
    pub embed_momentum: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            association: AssociationConfig::default(),
            kf_noise: KfNoiseConfig::default(),
            max_age: 10,
            min_hits: 2,
            det_score_floor: 0.3,
            embed_momentum: 0.9,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        self.association.validate()?;
        self.kf_noise.validate()?;
        if self.max_age < 1 {
            return Err(CoreError::InvalidConfig("max_age must be >= 1".into()));
        }
        if self.min_hits < 1 {
            return Err(CoreError::InvalidConfig("min_hits must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.det_score_floor) {
            return Err(CoreError::InvalidConfig(
                "det_score_floor must lie in [0, 1]".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.embed_momentum) {
            return Err(CoreError::InvalidConfig(
                "embed_momentum must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// All live tracks plus the id counter. Ids are never reused.
#[derive(Debug, Clone, Default)]
pub struct TrackerState {
    tracks: Vec<Track>,
    next_id: u64,
    frame_index: u64,
}

impl TrackerState {
    pub fn new() -> Self {
        TrackerState::default()
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn frame_index(&self) -> u64 {
        self.frame_index
    }

    pub fn confirmed_count(&self) -> usize {
        self.tracks
            .iter()
            .filter(|t| t.status == TrackStatus::Confirmed)
            .count()
    }
}

/// One frame of detector output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionFrame {
    #[serde(default)]
    pub scene_id: u64,
    pub frame_idx: u64,
    pub dt: f64,
    pub detections: Vec<Detection>,
}

/// Per-frame tracker output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackLogFrame {
    pub frame_idx: u64,
    pub boxes: Vec<TrackedBox>,
}

/// Tracking output (or ground truth) for one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackLog {
    pub scene_id: u64,
    pub frames: Vec<TrackLogFrame>,
}

/// Wall-clock throughput of a sequence run. Diagnostic only; never part of
/// deterministic result files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceStats {
    pub frames: usize,
    pub elapsed_s: f64,
    pub frames_per_second: f64,
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 1e-12 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

/// Advances the tracker by one frame and returns the new state plus the
/// confirmed tracks' boxes. A non-finite detection rejects the whole frame
/// and leaves the previous state untouched.
pub fn step(
    state: &TrackerState,
    detections: &[Detection],
    dt: f64,
    cfg: &TrackerConfig,
) -> Result<(TrackerState, Vec<TrackedBox>)> {
    cfg.validate()?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(CoreError::InvalidDetection(format!(
            "frame dt must be > 0, got {dt}"
        )));
    }
    for d in detections {
        d.validate()?;
    }

    // 1. predict
    let mut tracks: Vec<Track> = Vec::with_capacity(state.tracks.len());
    for t in &state.tracks {
        let prev_centroid = t.kf.position();
        let kf = kalman::predict(&t.kf, dt, &cfg.kf_noise)?;
        tracks.push(Track {
            kf,
            prev_centroid,
            ..t.clone()
        });
    }

    // 2. class-gated affinity
    let cues: Vec<TrackCue> = tracks
        .iter()
        .map(|t| TrackCue {
            centroid: t.kf.position(),
            prev_centroid: t.prev_centroid,
            velocity: t.kf.velocity(),
            yaw: t.kf.yaw(),
            dims: t.kf.dims(),
            embedding: t.embedding.clone(),
            class_id: t.class_id,
        })
        .collect();
    let mut affinity = association::affinity(&cues, detections, dt, &cfg.association)?;
    for (i, cue) in cues.iter().enumerate() {
        for (j, det) in detections.iter().enumerate() {
            if cue.class_id != det.class_id {
                affinity.set(i, j, 0.0);
            }
        }
    }

    // 3. greedy assignment
    let assignment = association::greedy_match(&affinity, cfg.association.match_threshold);

    // 4. update matched tracks
    for &(ti, dj) in &assignment.matches {
        let track = &mut tracks[ti];
        let det = &detections[dj];
        track.kf = kalman::update(&track.kf, det, &cfg.kf_noise)?;
        let m = cfg.embed_momentum;
        let blended: Vec<f64> = track
            .embedding
            .iter()
            .zip(&det.embedding)
            .map(|(e, ed)| m * e + (1.0 - m) * ed)
            .collect();
        track.embedding = normalize(blended);
        track.hits += 1;
        track.misses = 0;
        track.age += 1;
        track.last_score = det.score;
        if track.status == TrackStatus::Tentative && track.hits >= cfg.min_hits {
            track.status = TrackStatus::Confirmed;
        }
    }

    // 5. age unmatched tracks, dropping those past max_age
    for &ti in &assignment.unmatched_tracks {
        let track = &mut tracks[ti];
        track.misses += 1;
        track.hits = 0;
        track.age += 1;
        if track.misses > cfg.max_age {
            track.status = TrackStatus::Dead;
        }
    }
    tracks.retain(|t| t.status != TrackStatus::Dead);

    // 6. spawn tentative tracks from confident leftovers
    let mut next_id = state.next_id;
    for &dj in &assignment.unmatched_detections {
        let det = &detections[dj];
        if det.score < cfg.det_score_floor {
            continue;
        }
        let status = if cfg.min_hits <= 1 {
            TrackStatus::Confirmed
        } else {
            TrackStatus::Tentative
        };
        tracks.push(Track {
            id: next_id,
            kf: kalman::init(det, &cfg.kf_noise),
            embedding: det.embedding.clone(),
            class_id: det.class_id,
            hits: 1,
            misses: 0,
            age: 0,
            status,
            last_score: det.score,
            prev_centroid: det.center,
        });
        next_id += 1;
    }

    // 7. report confirmed tracks
    let boxes: Vec<TrackedBox> = tracks
        .iter()
        .filter(|t| t.status == TrackStatus::Confirmed)
        .map(|t| TrackedBox {
            track_id: t.id,
            center: t.kf.position(),
            dims: t.kf.dims(),
            yaw: t.kf.yaw(),
            velocity: t.kf.velocity(),
            score: t.last_score,
            class_id: t.class_id,
        })
        .collect();

    Ok((
        TrackerState {
            tracks,
            next_id,
            frame_index: state.frame_index + 1,
        },
        boxes,
    ))
}

/// Folds `step` over a scene, producing the per-frame output log and
/// throughput stats. Deterministic given identical frames and config.
pub fn run_sequence(
    scene_id: u64,
    frames: &[DetectionFrame],
    cfg: &TrackerConfig,
) -> Result<(TrackLog, SequenceStats)> {
    let started = std::time::Instant::now();
    let mut state = TrackerState::new();
    let mut out = Vec::with_capacity(frames.len());
    for frame in frames {
        let (next, boxes) = step(&state, &frame.detections, frame.dt, cfg)?;
        state = next;
        out.push(TrackLogFrame {
            frame_idx: frame.frame_idx,
            boxes,
        });
    }
    let elapsed = started.elapsed().as_secs_f64();
    let stats = SequenceStats {
        frames: frames.len(),
        elapsed_s: elapsed,
        frames_per_second: if elapsed > 0.0 {
            frames.len() as f64 / elapsed
        } else {
            0.0
        },
    };
    Ok((
        TrackLog {
            scene_id,
            frames: out,
        },
        stats,
    ))
}
