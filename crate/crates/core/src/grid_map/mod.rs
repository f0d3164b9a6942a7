//! Occupancy grids and their truncated Euclidean distance fields.

mod edt;
mod field;
pub mod io;

pub use edt::{compute_edt, edt_squared_cells};
pub use field::{memory_footprint, DistanceField, FieldValues, MemoryFootprint, NumericPolicy};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// State of one map cell. Stored as one byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum CellState {
    Free = 0,
    Occupied = 1,
    Unknown = 2,
}

/// How unknown cells contribute to the distance transform.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownRule {
    /// Unknown cells are not obstacles.
    #[default]
    TreatAsFree,
    TreatAsOccupied,
}

/// A 2D occupancy lattice.
///
/// Cell `(col, row)` covers `[origin.x + col*res, origin.x + (col+1)*res)` by
/// `[origin.y + row*res, origin.y + (row+1)*res)`; row 0 is the bottom row and
/// storage is row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: [f64; 2],
    cells: Vec<CellState>,
}

impl OccupancyGrid {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin: [f64; 2],
        cells: Vec<CellState>,
    ) -> Result<Self> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(Error::input(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        if width.checked_mul(height) != Some(cells.len()) {
            return Err(Error::input(format!(
                "{}x{} grid needs {} cells, got {}",
                width,
                height,
                width * height,
                cells.len()
            )));
        }
        Ok(Self {
            width,
            height,
            resolution,
            origin,
            cells,
        })
    }

    /// Grid with every cell set to `state`.
    pub fn filled(
        width: usize,
        height: usize,
        resolution: f64,
        origin: [f64; 2],
        state: CellState,
    ) -> Result<Self> {
        Self::new(
            width,
            height,
            resolution,
            origin,
            vec![state; width * height],
        )
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

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    #[inline]
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> CellState {
        self.cells[self.index(col, row)]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, state: CellState) {
        let i = self.index(col, row);
        self.cells[i] = state;
    }

    /// Cell containing a world point, if inside the map.
    #[inline]
    pub fn cell_at(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let cx = ((x - self.origin[0]) / self.resolution).floor();
        let cy = ((y - self.origin[1]) / self.resolution).floor();
        if cx >= 0.0 && cy >= 0.0 && cx < self.width as f64 && cy < self.height as f64 {
            Some((cx as usize, cy as usize))
        } else {
            None
        }
    }

    /// World coordinates of a cell center.
    #[inline]
    pub fn cell_center(&self, col: usize, row: usize) -> [f64; 2] {
        [
            self.origin[0] + (col as f64 + 0.5) * self.resolution,
            self.origin[1] + (row as f64 + 0.5) * self.resolution,
        ]
    }

    /// World extent `[xmin, ymin, xmax, ymax]`.
    pub fn bounds(&self) -> [f64; 4] {
        [
            self.origin[0],
            self.origin[1],
            self.origin[0] + self.width as f64 * self.resolution,
            self.origin[1] + self.height as f64 * self.resolution,
        ]
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|&&c| c == state).count()
    }

    /// Indices of all free cells, in storage order.
    pub fn free_cells(&self) -> Vec<usize> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == CellState::Free)
            .map(|(i, _)| i)
            .collect()
    }
}
