use serde::{Deserialize, Serialize};

use super::{cvar, DiscreteDistribution};
use crate::error::{Error, Result};

/// How `y -> y CVaR_y` is continued on `(0, atoms[0])`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LowerTail {
    /// Interpolate to `(0, 0)`: the first quantile step has value `V(s, atoms[0])`.
    #[default]
    Origin,
    /// Continue the `[atoms[0], atoms[1]]` segment linearly below the first atom.
    Extend,
}

/// Piecewise-linear `y CVaR_y` known at the atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PwlYcvar {
    atoms: Vec<f64>,
    yv: Vec<f64>,
}

/// Slopes of a [`PwlYcvar`]: the quantile (VaR) step on each segment.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantileSteps {
    /// Slope on `(0, atoms[0]]` under the chosen [`LowerTail`].
    pub lower: f64,
    /// `(y_i, y_{i+1}, slope)` for consecutive atoms.
    pub segments: Vec<(f64, f64, f64)>,
}

impl PwlYcvar {
    pub fn new(atoms: Vec<f64>, yv: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != yv.len() {
            return Err(Error::InvalidArgument("atoms and yv lengths differ".into()));
        }
        if atoms[0] <= 0.0 || *atoms.last().unwrap() > 1.0 || atoms.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidArgument(
                "atoms must ascend strictly within (0, 1]".into(),
            ));
        }
        Ok(Self { atoms, yv })
    }

    /// From CVaR values `V(y_i)` at the atoms.
    pub fn from_values(atoms: &[f64], values: &[f64]) -> Self {
        debug_assert_eq!(atoms.len(), values.len());
        Self {
            atoms: atoms.to_vec(),
            yv: atoms.iter().zip(values).map(|(y, v)| y * v).collect(),
        }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn yv(&self) -> &[f64] {
        &self.yv
    }

    fn segment_slope(&self, i: usize) -> f64 {
        (self.yv[i + 1] - self.yv[i]) / (self.atoms[i + 1] - self.atoms[i])
    }

    pub fn lower_slope(&self, tail: LowerTail) -> f64 {
        match tail {
            LowerTail::Extend if self.atoms.len() > 1 => self.segment_slope(0),
            _ => self.yv[0] / self.atoms[0],
        }
    }

    /// Value of the continuation at `y = 0`.
    pub fn origin_value(&self, tail: LowerTail) -> f64 {
        self.yv[0] - self.lower_slope(tail) * self.atoms[0]
    }

    /// Linear interpolation `I[V](y)`, with `y` clamped to at most one.
    pub fn eval(&self, y: f64, tail: LowerTail) -> f64 {
        let a = &self.atoms;
        if y <= a[0] {
            return if y == a[0] {
                self.yv[0]
            } else {
                self.origin_value(tail) + self.lower_slope(tail) * y.max(0.0)
            };
        }
        let last = a.len() - 1;
        if y >= a[last] {
            return self.yv[last];
        }
        // a[i] < y < a[i + 1] or y == a[i]
        let i = a.partition_point(|&x| x <= y) - 1;
        if y == a[i] {
            return self.yv[i];
        }
        self.yv[i] + self.segment_slope(i) * (y - a[i])
    }

    /// `(length, slope)` pieces covering `(0, atoms[last]]` in order.
    pub fn pieces(&self, tail: LowerTail) -> impl Iterator<Item = (f64, f64)> + '_ {
        std::iter::once((self.atoms[0], self.lower_slope(tail))).chain(
            (0..self.atoms.len() - 1)
                .map(move |i| (self.atoms[i + 1] - self.atoms[i], self.segment_slope(i))),
        )
    }

    /// Segment slopes, which are the VaR steps of the represented distribution.
    ///
    /// Fails with [`Error::ConcavityViolation`] if a slope exceeds its left
    /// neighbour by more than `1e-9` (relative for large slopes).
    pub fn quantile_steps(&self, tail: LowerTail) -> Result<QuantileSteps> {
        let lower = self.lower_slope(tail);
        let segments: Vec<(f64, f64, f64)> = (0..self.atoms.len() - 1)
            .map(|i| (self.atoms[i], self.atoms[i + 1], self.segment_slope(i)))
            .collect();
        let mut prev = lower;
        for (k, &(_, _, slope)) in segments.iter().enumerate() {
            if slope - prev > 1e-9 * prev.abs().max(1.0) {
                return Err(Error::ConcavityViolation {
                    segment: k,
                    left: prev,
                    right: slope,
                });
            }
            prev = slope;
        }
        Ok(QuantileSteps { lower, segments })
    }
}

/// `yv[i] = y_i * CVaR_{y_i}(Z)`.
pub fn ycvar_from_dist(dist: &DiscreteDistribution, atoms: &[f64]) -> Result<PwlYcvar> {
    PwlYcvar::new(
        atoms.to_vec(),
        atoms.iter().map(|&y| y * cvar(dist, y)).collect(),
    )
}
