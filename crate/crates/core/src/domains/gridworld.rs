use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{cell_names, step, Cell, Direction};
use crate::error::{Error, Result};
use crate::ssp::{SspBuilder, SspMdp};

/// Navigation grid where entering an obstacle ends the episode at a penalty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct GridworldSpec {
    pub rows: usize,
    pub cols: usize,
    /// Explicit obstacle cells; `None` draws a seeded random layout.
    pub obstacles: Option<Vec<Cell>>,
    /// Fraction of free cells turned into obstacles by the random layout.
    pub obstacle_density: f64,
    pub success_prob: f64,
    pub obstacle_penalty: f64,
    pub step_cost: f64,
    pub seed: u64,
    /// Defaults to the bottom-right corner.
    pub start: Option<Cell>,
    /// Defaults to the top-right corner.
    pub goal: Option<Cell>,
}

impl Default for GridworldSpec {
    fn default() -> Self {
        Self {
            rows: 5,
            cols: 5,
            obstacles: None,
            obstacle_density: 0.1,
            success_prob: 0.95,
            obstacle_penalty: 100.0,
            step_cost: 1.0,
            seed: 0,
            start: None,
            goal: None,
        }
    }
}

impl GridworldSpec {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            ..Self::default()
        }
    }

    pub fn start_cell(&self) -> Cell {
        self.start
            .unwrap_or((self.rows.saturating_sub(1), self.cols.saturating_sub(1)))
    }

    pub fn goal_cell(&self) -> Cell {
        self.goal.unwrap_or((0, self.cols.saturating_sub(1)))
    }

    pub fn start_state(&self) -> usize {
        let (r, c) = self.start_cell();
        r * self.cols + c
    }

    pub fn goal_state(&self) -> usize {
        let (r, c) = self.goal_cell();
        r * self.cols + c
    }

    /// Obstacle cells in ascending order, drawn from the seed when not given.
    pub fn obstacle_cells(&self) -> Vec<Cell> {
        let mut cells = match &self.obstacles {
            Some(list) => list.clone(),
            None => {
                let (start, goal) = (self.start_cell(), self.goal_cell());
                let mut free: Vec<Cell> = (0..self.rows)
                    .flat_map(|r| (0..self.cols).map(move |c| (r, c)))
                    .filter(|&x| x != start && x != goal)
                    .collect();
                let count =
                    (self.obstacle_density * (self.rows * self.cols) as f64).round() as usize;
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                free.shuffle(&mut rng);
                free.truncate(count.min(free.len()));
                free
            }
        };
        cells.sort_unstable();
        cells.dedup();
        cells
    }

    fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.rows == 0 || self.cols == 0 || self.rows * self.cols < 2 {
            return bad(format!(
                "grid {}x{} needs at least two cells",
                self.rows, self.cols
            ));
        }
        if !(self.success_prob > 0.0 && self.success_prob <= 1.0) {
            return bad(format!(
                "success probability {} outside (0, 1]",
                self.success_prob
            ));
        }
        if !(self.obstacle_density >= 0.0 && self.obstacle_density < 1.0) {
            return bad(format!(
                "obstacle density {} outside [0, 1)",
                self.obstacle_density
            ));
        }
        if !(self.obstacle_penalty >= 0.0 && self.step_cost >= 0.0) {
            return bad("costs must be non-negative".into());
        }
        let inside = |(r, c): Cell| r < self.rows && c < self.cols;
        let (start, goal) = (self.start_cell(), self.goal_cell());
        if !inside(start) || !inside(goal) || start == goal {
            return bad("start and goal must be distinct cells inside the grid".into());
        }
        let obstacles = self.obstacle_cells();
        if let Some(&o) = obstacles.iter().find(|&&o| !inside(o)) {
            return bad(format!("obstacle {o:?} outside the grid"));
        }
        if obstacles.contains(&start) || obstacles.contains(&goal) {
            return bad("start and goal cells cannot be obstacles".into());
        }
        Ok(())
    }
}

/// Builds the gridworld SSP.
///
/// The intended move succeeds with `success_prob`; the remaining mass is
/// split evenly over the other three directions. Every action in an obstacle
/// cell moves to the goal at `obstacle_penalty`.
pub fn make_gridworld(spec: &GridworldSpec) -> Result<SspMdp> {
    spec.check()?;
    let (rows, cols) = (spec.rows, spec.cols);
    let id = |(r, c): Cell| r * cols + c;
    let goal = spec.goal_state();
    let mut is_obstacle = vec![false; rows * cols];
    for o in spec.obstacle_cells() {
        is_obstacle[id(o)] = true;
    }
    let slip = (1.0 - spec.success_prob) / 3.0;

    let mut b = SspBuilder::new(rows * cols, 4)
        .goal(goal)
        .names(cell_names(rows, cols));
    for r in 0..rows {
        for c in 0..cols {
            let s = id((r, c));
            if s == goal {
                continue;
            }
            for dir in Direction::ALL {
                if is_obstacle[s] {
                    b.set_action(s, dir.index(), spec.obstacle_penalty, vec![(goal, 1.0)]);
                    continue;
                }
                let next = Direction::ALL
                    .iter()
                    .map(|&d| {
                        let p = if d == dir { spec.success_prob } else { slip };
                        (id(step(rows, cols, (r, c), d)), p)
                    })
                    .collect();
                b.set_action(s, dir.index(), spec.step_cost, next);
            }
        }
    }
    b.build()
}
