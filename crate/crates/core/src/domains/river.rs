use serde::{Deserialize, Serialize};

use super::{cell_names, step, Cell, Direction};
use crate::error::{Error, Result};
use crate::ssp::{SspBuilder, SspMdp};

/// River crossing: banks in the outer columns, a bridge along the top row
/// and a waterfall along the bottom row.
///
/// Bank and bridge cells move deterministically at `deterministic_cost`.
/// In the river, the intended move happens with `move_prob` and the current
/// then pushes one row down with `fall_prob`. Entering the waterfall returns
/// the agent to the start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct RiverSpec {
    pub rows: usize,
    pub cols: usize,
    pub move_prob: f64,
    pub fall_prob: f64,
    pub north_cost: f64,
    pub east_west_cost: f64,
    pub south_cost: f64,
    pub deterministic_cost: f64,
}

impl Default for RiverSpec {
    fn default() -> Self {
        Self {
            rows: 10,
            cols: 3,
            move_prob: 0.8,
            fall_prob: 0.2,
            north_cost: 2.0,
            east_west_cost: 1.0,
            south_cost: 0.5,
            deterministic_cost: 1.0,
        }
    }
}

impl RiverSpec {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            ..Self::default()
        }
    }

    /// Left bank, first row above the waterfall.
    pub fn start_cell(&self) -> Cell {
        (self.rows - 2, 0)
    }

    /// Right bank, opposite the start.
    pub fn goal_cell(&self) -> Cell {
        (self.rows - 2, self.cols - 1)
    }

    pub fn start_state(&self) -> usize {
        let (r, c) = self.start_cell();
        r * self.cols + c
    }

    pub fn goal_state(&self) -> usize {
        let (r, c) = self.goal_cell();
        r * self.cols + c
    }

    pub fn is_waterfall(&self, (r, _): Cell) -> bool {
        r == self.rows - 1
    }

    pub fn is_river(&self, (r, c): Cell) -> bool {
        r > 0 && r < self.rows - 1 && c > 0 && c < self.cols - 1
    }

    fn move_cost(&self, dir: Direction) -> f64 {
        match dir {
            Direction::North => self.north_cost,
            Direction::South => self.south_cost,
            Direction::East | Direction::West => self.east_west_cost,
        }
    }

    fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.cols < 3 || self.rows < 2 {
            return bad(format!(
                "river {}x{} needs at least 2 rows and 3 columns",
                self.rows, self.cols
            ));
        }
        for (name, p) in [("move", self.move_prob), ("fall", self.fall_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} probability {p} outside [0, 1]"));
            }
        }
        let costs = [
            self.north_cost,
            self.east_west_cost,
            self.south_cost,
            self.deterministic_cost,
        ];
        if costs.iter().any(|c| !(*c >= 0.0)) {
            return bad("costs must be non-negative".into());
        }
        Ok(())
    }
}

/// Outcomes of `dir` in river cell `cell` as the product of the move and the
/// drift, before equal cells are merged.
pub fn river_outcomes(spec: &RiverSpec, cell: Cell, dir: Direction) -> Vec<(Cell, f64)> {
    let (rows, cols) = (spec.rows, spec.cols);
    let moved = [
        (step(rows, cols, cell, dir), spec.move_prob),
        (cell, 1.0 - spec.move_prob),
    ];
    let mut out = Vec::with_capacity(4);
    for (m, p1) in moved {
        out.push((m, p1 * (1.0 - spec.fall_prob)));
        out.push((step(rows, cols, m, Direction::South), p1 * spec.fall_prob));
    }
    out
}

pub fn make_river(spec: &RiverSpec) -> Result<SspMdp> {
    spec.check()?;
    let (rows, cols) = (spec.rows, spec.cols);
    let id = |(r, c): Cell| r * cols + c;
    let (start, goal) = (spec.start_state(), spec.goal_state());

    let mut b = SspBuilder::new(rows * cols, 4)
        .goal(goal)
        .names(cell_names(rows, cols));
    for r in 0..rows {
        for c in 0..cols {
            let cell = (r, c);
            let s = id(cell);
            if s == goal {
                continue;
            }
            for dir in Direction::ALL {
                let a = dir.index();
                if spec.is_waterfall(cell) {
                    b.set_action(s, a, spec.deterministic_cost, vec![(start, 1.0)]);
                } else if spec.is_river(cell) {
                    let next = river_outcomes(spec, cell, dir)
                        .into_iter()
                        .map(|(x, p)| (id(x), p))
                        .collect();
                    b.set_action(s, a, spec.move_cost(dir), next);
                } else {
                    let next = id(step(rows, cols, cell, dir));
                    b.set_action(s, a, spec.deterministic_cost, vec![(next, 1.0)]);
                }
            }
        }
    }
    b.build()
}
