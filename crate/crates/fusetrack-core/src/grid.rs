//! BEV grid geometry and world-to-cell index mapping.
//!
//! The grid is ego-centered with x pointing right and y pointing forward.
//! Row indices run along y, column indices along x. Cells are half-open:
//! a point whose coordinate equals the far boundary (`+range_m`) is out of
//! bounds, which keeps every in-range point in exactly one cell.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::Result;

/// Square bird's-eye-view grid centered on the ego frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBevGrid", into = "RawBevGrid")]
pub struct BevGrid {
    range_m: f64,
    resolution_m: f64,
    cells_per_side: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RawBevGrid {
    range_m: f64,
    resolution_m: f64,
}

impl TryFrom<RawBevGrid> for BevGrid {
    type Error = CoreError;

    fn try_from(raw: RawBevGrid) -> Result<Self> {
        BevGrid::new(raw.range_m, raw.resolution_m)
    }
}

impl From<BevGrid> for RawBevGrid {
    fn from(g: BevGrid) -> Self {
        RawBevGrid {
            range_m: g.range_m,
            resolution_m: g.resolution_m,
        }
    }
}

impl Default for BevGrid {
    /// 51.2 m half-extent at 0.8 m resolution: a 128x128 grid.
    fn default() -> Self {
        BevGrid::new(51.2, 0.8).expect("default grid parameters are valid")
    }
}

impl BevGrid {
    pub fn new(range_m: f64, resolution_m: f64) -> Result<Self> {
        if !(range_m.is_finite() && range_m > 0.0) {
            return Err(CoreError::InvalidGrid(format!(
                "range_m must be positive and finite, got {range_m}"
            )));
        }
        if !(resolution_m.is_finite() && resolution_m > 0.0) {
            return Err(CoreError::InvalidGrid(format!(
                "resolution_m must be positive and finite, got {resolution_m}"
            )));
        }
        let cells = (2.0 * range_m / resolution_m).round();
        if !(cells >= 1.0 && cells <= 1_000_000.0) {
            return Err(CoreError::InvalidGrid(format!(
                "grid of {cells} cells per side is out of range"
            )));
        }
        Ok(BevGrid {
            range_m,
            resolution_m,
            cells_per_side: cells as usize,
        })
    }

    pub fn range_m(&self) -> f64 {
        self.range_m
    }

    pub fn resolution_m(&self) -> f64 {
        self.resolution_m
    }

    pub fn cells_per_side(&self) -> usize {
        self.cells_per_side
    }

    /// Maps a world xy position to `(row, col)`, or `None` when the point
    /// falls outside the grid. Rows index y, columns index x.
    pub fn world_to_cell(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        if !x.is_finite() || !y.is_finite() {
            return None;
        }
        let row = ((y + self.range_m) / self.resolution_m).floor();
        let col = ((x + self.range_m) / self.resolution_m).floor();
        let n = self.cells_per_side as f64;
        if row >= 0.0 && row < n && col >= 0.0 && col < n {
            Some((row as usize, col as usize))
        } else {
            None
        }
    }

    /// World xy coordinates of a cell's center.
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        let x = (col as f64 + 0.5) * self.resolution_m - self.range_m;
        let y = (row as f64 + 0.5) * self.resolution_m - self.range_m;
        (x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_maps_to_center_cell() {
        let g = BevGrid::default();
        assert_eq!(g.cells_per_side(), 128);
        assert_eq!(g.world_to_cell(0.0, 0.0), Some((64, 64)));
    }

    #[test]
    fn lower_corner_maps_to_first_cell() {
        let g = BevGrid::default();
        assert_eq!(g.world_to_cell(-51.2, -51.2), Some((0, 0)));
    }

    #[test]
    fn far_boundary_is_excluded() {
        let g = BevGrid::default();
        assert_eq!(g.world_to_cell(51.2, 0.0), None);
        assert_eq!(g.world_to_cell(0.0, 51.2), None);
        assert_eq!(g.world_to_cell(51.19, 51.19), Some((127, 127)));
    }

    #[test]
    fn rejects_degenerate_parameters() {
        assert!(BevGrid::new(0.0, 0.8).is_err());
        assert!(BevGrid::new(51.2, -1.0).is_err());
        assert!(BevGrid::new(f64::NAN, 0.8).is_err());
    }

    #[test]
    fn cell_center_round_trip_stays_within_half_resolution() {
        let g = BevGrid::default();
        for &(x, y) in &[(0.3, -7.9), (-51.2, 0.0), (12.345, 44.0), (50.0, -50.0)] {
            let (r, c) = g.world_to_cell(x, y).unwrap();
            let (cx, cy) = g.cell_center(r, c);
            assert!((x - cx).abs() <= g.resolution_m() / 2.0 + 1e-12);
            assert!((y - cy).abs() <= g.resolution_m() / 2.0 + 1e-12);
        }
    }

    #[test]
    fn serde_recomputes_cell_count() {
        let g: BevGrid = serde_json::from_str(r#"{"range_m": 25.6, "resolution_m": 0.8}"#).unwrap();
        assert_eq!(g.cells_per_side(), 64);
        let bad: std::result::Result<BevGrid, _> =
            serde_json::from_str(r#"{"range_m": -1.0, "resolution_m": 0.8}"#);
        assert!(bad.is_err());
    }
}
