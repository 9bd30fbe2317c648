//! Occupancy-grid maps, grid traversal raycasting and map file I/O.

mod io;
mod raycast;

pub use io::{grid_from_pgm, load_map, parse_metadata, parse_pgm, save_map, write_pgm, MapLoadError, MapMetadata, Pgm};
pub use raycast::raycast;

use nalgebra::Point2;
use thiserror::Error;

use crate::geometry::Pose2D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellState {
    Free,
    Occupied,
    Unknown,
}

impl CellState {
    /// UNKNOWN blocks rays the same way OCCUPIED does.
    pub fn blocks_ray(self) -> bool {
        !matches!(self, CellState::Free)
    }
}

/// Column/row index of a cell; `ix` grows with world x, `iy` with world y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub ix: usize,
    pub iy: usize,
}

impl CellIndex {
    pub fn new(ix: usize, iy: usize) -> Self {
        Self { ix, iy }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid dimensions must be at least 1x1, got {width}x{height}")]
    EmptyGrid { width: usize, height: usize },
    #[error("resolution must be positive and finite, got {0}")]
    BadResolution(f64),
    #[error("cell buffer holds {got} cells, expected {expected}")]
    CellCount { expected: usize, got: usize },
    #[error("query point ({x}, {y}) lies outside the map")]
    OutOfBounds { x: f64, y: f64 },
}

/// A reference 2D layout map.
///
/// Cells are stored row-major with row 0 at the lowest world y. The origin is
/// the world position of the outer corner of cell (0, 0); its heading is kept
/// for round-tripping metadata but the grid is always axis-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Pose2D,
    cells: Vec<CellState>,
}

impl OccupancyGrid {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Pose2D,
        cells: Vec<CellState>,
    ) -> Result<Self, GridError> {
        if width == 0 || height == 0 {
            return Err(GridError::EmptyGrid { width, height });
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(GridError::BadResolution(resolution));
        }
        if cells.len() != width * height {
            return Err(GridError::CellCount { expected: width * height, got: cells.len() });
        }
        Ok(Self { width, height, resolution, origin, cells })
    }

    pub fn filled(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Pose2D,
        state: CellState,
    ) -> Result<Self, GridError> {
        Self::new(width, height, resolution, origin, vec![state; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Pose2D {
        self.origin
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    /// World extent (width, height) in meters.
    pub fn extent(&self) -> (f64, f64) {
        (self.width as f64 * self.resolution, self.height as f64 * self.resolution)
    }

    pub fn linear_index(&self, cell: CellIndex) -> usize {
        cell.iy * self.width + cell.ix
    }

    pub fn index_of(&self, linear: usize) -> CellIndex {
        CellIndex::new(linear % self.width, linear / self.width)
    }

    pub fn get(&self, cell: CellIndex) -> CellState {
        self.cells[self.linear_index(cell)]
    }

    /// Cell state, or `None` when the signed index falls outside the grid.
    pub fn get_signed(&self, ix: i64, iy: i64) -> Option<CellState> {
        if ix < 0 || iy < 0 || ix >= self.width as i64 || iy >= self.height as i64 {
            None
        } else {
            Some(self.get(CellIndex::new(ix as usize, iy as usize)))
        }
    }

    pub fn set(&mut self, cell: CellIndex, state: CellState) {
        let i = self.linear_index(cell);
        self.cells[i] = state;
    }

    pub fn contains_point(&self, p: &Point2<f64>) -> bool {
        self.world_to_grid(p).is_some()
    }

    /// Floor-based world to cell conversion. `None` means out of bounds.
    pub fn world_to_grid(&self, p: &Point2<f64>) -> Option<CellIndex> {
        let (fx, fy) = self.world_to_grid_f(p);
        if !(fx.is_finite() && fy.is_finite()) {
            return None;
        }
        let (ix, iy) = (fx.floor(), fy.floor());
        if ix < 0.0 || iy < 0.0 || ix >= self.width as f64 || iy >= self.height as f64 {
            return None;
        }
        Some(CellIndex::new(ix as usize, iy as usize))
    }

    /// Continuous grid coordinates, in cell units, of a world point.
    pub fn world_to_grid_f(&self, p: &Point2<f64>) -> (f64, f64) {
        ((p.x - self.origin.x) / self.resolution, (p.y - self.origin.y) / self.resolution)
    }

    /// World position of a cell center.
    pub fn grid_to_world(&self, cell: CellIndex) -> Point2<f64> {
        Point2::new(
            self.origin.x + (cell.ix as f64 + 0.5) * self.resolution,
            self.origin.y + (cell.iy as f64 + 0.5) * self.resolution,
        )
    }

    pub fn iter_cells(&self) -> impl Iterator<Item = (CellIndex, CellState)> + '_ {
        self.cells.iter().enumerate().map(move |(i, s)| (self.index_of(i), *s))
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|s| **s == state).count()
    }

    /// World positions of every OCCUPIED cell center, in row-major order.
    pub fn occupied_points(&self) -> Vec<Point2<f64>> {
        self.iter_cells().filter(|(_, s)| *s == CellState::Occupied).map(|(c, _)| self.grid_to_world(c)).collect()
    }

    /// Marks every cell whose center lies inside the axis-aligned rectangle.
    pub fn fill_rect(&mut self, min: Point2<f64>, max: Point2<f64>, state: CellState) {
        for iy in 0..self.height {
            for ix in 0..self.width {
                let c = CellIndex::new(ix, iy);
                let p = self.grid_to_world(c);
                if p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y {
                    self.set(c, state);
                }
            }
        }
    }

    /// Marks every cell whose center lies strictly inside the disc.
    pub fn fill_disc(&mut self, center: Point2<f64>, radius: f64, state: CellState) {
        for c in self.cells_in_disc(center, radius) {
            self.set(c, state);
        }
    }

    /// Cells whose centers are strictly within `radius` of `center`.
    pub fn cells_in_disc(&self, center: Point2<f64>, radius: f64) -> Vec<CellIndex> {
        let (fx, fy) = self.world_to_grid_f(&center);
        let r_cells = (radius / self.resolution).ceil() as i64 + 1;
        let (cx, cy) = (fx.floor() as i64, fy.floor() as i64);
        let mut out = Vec::new();
        for iy in (cy - r_cells).max(0)..=(cy + r_cells).min(self.height as i64 - 1) {
            for ix in (cx - r_cells).max(0)..=(cx + r_cells).min(self.width as i64 - 1) {
                let c = CellIndex::new(ix as usize, iy as usize);
                let p = self.grid_to_world(c);
                if (p - center).norm() < radius {
                    out.push(c);
                }
            }
        }
        out
    }
}
