//! BEV camera-radar fusion data path and multi-object 3D tracking.
//!
//! The crate is organized around a per-frame pipeline:
//!
//! 1. [`pillar`] accumulates ego-motion-compensated radar sweeps and
//!    aggregates them into single-pillar BEV feature maps; [`fusion`]
//!    assembles the concatenated detector input tensors.
//! 2. [`association`] scores track/detection pairs (appearance, motion,
//!    location) and performs thresholded greedy assignment.
//! 3. [`kalman`] runs the constant-velocity predict/update loop per track,
//!    and [`tracker`] orchestrates association, filtering and lifecycle.
//! 4. [`metrics`] evaluates predicted track logs against ground truth with
//!    recall-averaged tracking metrics (AMOTA/AMOTP/IDS) plus a mean
//!    velocity error.
//! 5. [`simulator`] generates seed-deterministic synthetic scenarios used
//!    as the benchmark stand-in for a real dataset.
//!
//! All types are plain values; nothing in this crate spawns threads or
//! holds global state, so callers are free to process independent scenes
//! in parallel.

pub mod angle;
pub mod association;
pub mod config;
pub mod error;
pub mod fusion;
pub mod grid;
pub mod io;
pub mod kalman;
pub mod metrics;
pub mod pillar;
pub mod rng;
pub mod simulator;
pub mod tensor;
pub mod tracker;
pub mod types;

pub use error::CoreError;
pub use grid::BevGrid;
pub use tensor::FeatureMap;
pub use types::{Detection, TrackedBox};

/// Convenience alias used throughout the crate.
pub type Result<T, E = CoreError> = std::result::Result<T, E>;
