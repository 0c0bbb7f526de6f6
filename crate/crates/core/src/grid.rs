//! Confidence-level atom grids shared by both solvers and the evaluator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::risk::{LowerTail, PwlYcvar};

/// Ascending confidence levels `Y` in `(0, 1]` ending at `1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AtomGrid {
    atoms: Vec<f64>,
    #[serde(skip)]
    log_atoms: Vec<f64>,
}

impl AtomGrid {
    /// Log-spaced grid `atoms[k] = alpha0^(1 - k/(n-1))`.
    pub fn log_spaced(alpha0: f64, n: usize) -> Result<Self> {
        if !(alpha0 > 0.0 && alpha0 < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha0 {alpha0} outside (0, 1)"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidArgument(format!("atom count {n} below 2")));
        }
        let mut atoms: Vec<f64> = (0..n)
            .map(|k| alpha0.powf(1.0 - k as f64 / (n - 1) as f64))
            .collect();
        atoms[0] = alpha0;
        atoms[n - 1] = 1.0;
        Self::from_atoms(atoms)
    }

    /// Arbitrary strictly ascending atoms in `(0, 1]` whose last entry is `1`.
    pub fn from_atoms(atoms: Vec<f64>) -> Result<Self> {
        if atoms.is_empty()
            || atoms[0] <= 0.0
            || *atoms.last().unwrap() != 1.0
            || atoms.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidArgument(
                "atoms must ascend strictly within (0, 1] and end at 1".into(),
            ));
        }
        let log_atoms = atoms.iter().map(|y| y.ln()).collect();
        Ok(Self { atoms, log_atoms })
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn alpha0(&self) -> f64 {
        self.atoms[0]
    }

    #[inline]
    pub fn atom(&self, k: usize) -> f64 {
        self.atoms[k]
    }

    /// Index of an atom equal to `y` up to `1e-12` relative.
    pub fn position(&self, y: f64) -> Option<usize> {
        self.atoms.iter().position(|&a| (a - y).abs() <= 1e-12 * a)
    }

    /// Atom closest to `alpha` in log distance; exact ties go to the smaller atom.
    pub fn nearest_log(&self, alpha: f64) -> Result<usize> {
        if !(alpha > 0.0) {
            return Err(Error::DegenerateAlpha(alpha));
        }
        let la = alpha.ln();
        let hi = self.log_atoms.partition_point(|&l| l < la);
        if hi == 0 {
            return Ok(0);
        }
        if hi == self.atoms.len() {
            return Ok(hi - 1);
        }
        let (d_lo, d_hi) = (la - self.log_atoms[hi - 1], self.log_atoms[hi] - la);
        Ok(if d_hi < d_lo { hi } else { hi - 1 })
    }

    /// Approximate `V(s, y)` from a state's values at the atoms, taking
    /// `y V(s, y)` linear between atoms.
    pub fn interpolate(&self, values: &[f64], y: f64, tail: LowerTail) -> f64 {
        if let Some(k) = self.position(y) {
            return values[k];
        }
        PwlYcvar::from_values(&self.atoms, values).eval(y, tail) / y
    }
}

impl TryFrom<Vec<f64>> for AtomGrid {
    type Error = Error;

    fn try_from(atoms: Vec<f64>) -> Result<Self> {
        Self::from_atoms(atoms)
    }
}

impl From<AtomGrid> for Vec<f64> {
    fn from(g: AtomGrid) -> Self {
        g.atoms
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig2(x: f64) -> f64 {
        let mag = 10f64.powf(x.log10().floor() - 1.0);
        (x / mag).round() * mag
    }

    #[test]
    fn grids_round_to_published_values() {
        let g = AtomGrid::log_spaced(0.01, 7).unwrap();
        let rounded: Vec<f64> = g.atoms().iter().map(|&a| sig2(a)).collect();
        let want = [0.01, 0.022, 0.046, 0.1, 0.22, 0.46, 1.0];
        for (r, w) in rounded.iter().zip(want) {
            assert!((r - w).abs() < 1e-12, "{rounded:?}");
        }
        assert!((g.atom(1) - 0.0215443).abs() < 1e-6);

        let g = AtomGrid::log_spaced(0.001, 7).unwrap();
        let rounded: Vec<f64> = g.atoms().iter().map(|&a| sig2(a)).collect();
        let want = [0.001, 0.0032, 0.01, 0.032, 0.1, 0.32, 1.0];
        for (r, w) in rounded.iter().zip(want) {
            assert!((r - w).abs() < 1e-12, "{rounded:?}");
        }

        assert_eq!(AtomGrid::log_spaced(0.5, 2).unwrap().atoms(), &[0.5, 1.0]);
    }

    #[test]
    fn log_spacing_invariant() {
        let g = AtomGrid::log_spaced(0.001, 25).unwrap();
        for (k, &a) in g.atoms().iter().enumerate() {
            assert!((a - 0.001f64.powf(1.0 - k as f64 / 24.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(AtomGrid::log_spaced(0.0, 7).is_err());
        assert!(AtomGrid::log_spaced(1.0, 7).is_err());
        assert!(AtomGrid::log_spaced(0.1, 1).is_err());
        assert!(AtomGrid::from_atoms(vec![0.2, 0.1, 1.0]).is_err());
        assert!(AtomGrid::from_atoms(vec![0.2, 0.5]).is_err());
    }

    #[test]
    fn nearest_log_examples() {
        let g = AtomGrid::from_atoms(vec![0.01, 0.022, 0.046, 0.1, 0.22, 0.46, 1.0]).unwrap();
        assert_eq!(g.nearest_log(0.03).unwrap(), 1);
        assert_eq!(g.nearest_log(0.1).unwrap(), 3);
        assert_eq!(g.nearest_log(5.0).unwrap(), 6);
        assert_eq!(g.nearest_log(1e-9).unwrap(), 0);
        assert!(matches!(g.nearest_log(0.0), Err(Error::DegenerateAlpha(_))));

        // geometric midpoint of 0.25 and 1 is 0.5: tie goes down
        let g = AtomGrid::from_atoms(vec![0.25, 1.0]).unwrap();
        assert_eq!(g.nearest_log(0.5).unwrap(), 0);
    }

    #[test]
    fn serde_uses_plain_list() {
        let g = AtomGrid::log_spaced(0.1, 3).unwrap();
        let text = serde_json::to_string(&g).unwrap();
        let back: AtomGrid = serde_json::from_str(&text).unwrap();
        assert_eq!(back, g);
        assert!(serde_json::from_str::<AtomGrid>("[0.5, 0.2, 1.0]").is_err());
    }

    #[test]
    fn interpolation_is_linear_in_y_times_value() {
        let g = AtomGrid::from_atoms(vec![0.1, 0.2, 1.0]).unwrap();
        let v = [100.0, 50.5, 10.9];
        assert_eq!(g.interpolate(&v, 0.2, LowerTail::Origin), 50.5);
        // y V runs from 10 at 0.1 to 10.1 at 0.2
        assert!((g.interpolate(&v, 0.15, LowerTail::Origin) - 10.05 / 0.15).abs() < 1e-12);
        assert!((g.interpolate(&v, 0.05, LowerTail::Origin) - 100.0).abs() < 1e-12);
    }
}
