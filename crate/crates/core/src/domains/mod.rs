//! Benchmark SSP generators on rectangular grids.
//!
//! Cells are numbered row-major, `id = row * cols + col`, with row 0 at the
//! top. Both families use the four compass actions in the order of
//! [`Direction::ALL`].

mod gridworld;
mod river;

use serde::{Deserialize, Serialize};

pub use gridworld::{make_gridworld, GridworldSpec};
pub use river::{make_river, river_outcomes, RiverSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    North,
    South,
    East,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::South,
        Direction::East,
        Direction::West,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Direction::North => (-1, 0),
            Direction::South => (1, 0),
            Direction::East => (0, 1),
            Direction::West => (0, -1),
        }
    }
}

/// A `(row, col)` cell.
pub type Cell = (usize, usize);

/// Cell reached by one step in `dir`; stepping off the grid stays put.
pub(crate) fn step(rows: usize, cols: usize, (r, c): Cell, dir: Direction) -> Cell {
    let (dr, dc) = dir.delta();
    let (nr, nc) = (r as isize + dr, c as isize + dc);
    if nr < 0 || nc < 0 || nr >= rows as isize || nc >= cols as isize {
        (r, c)
    } else {
        (nr as usize, nc as usize)
    }
}

pub(crate) fn cell_names(rows: usize, cols: usize) -> Vec<String> {
    (0..rows)
        .flat_map(|r| (0..cols).map(move |c| format!("r{r}c{c}")))
        .collect()
}
