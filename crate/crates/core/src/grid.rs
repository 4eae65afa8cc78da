//! Uniform discretizations of intervals and rectangles, and the sampled
//! paths and fields that live on them.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Uniform grid `start, start + step, ..., end` with `n_points` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub end: f64,
    pub n_points: usize,
}

impl GridSpec {
    pub fn new(start: f64, end: f64, n_points: usize) -> Result<Self> {
        ensure(start.is_finite() && end.is_finite(), "grid", || {
            format!("endpoints must be finite, got [{start}, {end}]")
        })?;
        ensure(end > start, "grid", || format!("need end > start, got [{start}, {end}]"))?;
        ensure(n_points >= 2, "grid", || format!("need at least 2 points, got {n_points}"))?;
        Ok(Self { start, end, n_points })
    }

    /// Grid on `[start, end]` whose step is as close as possible to `1 / points_per_unit`.
    pub fn with_density(start: f64, end: f64, points_per_unit: f64) -> Result<Self> {
        ensure(points_per_unit > 0.0, "points_per_unit", || {
            format!("must be positive, got {points_per_unit}")
        })?;
        let n = ((end - start) * points_per_unit).round().max(1.0) as usize + 1;
        Self::new(start, end, n)
    }

    pub fn step(&self) -> f64 {
        (self.end - self.start) / (self.n_points - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.end
        } else {
            self.start + i as f64 * self.step()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.point(i)).collect()
    }

    /// Length of the interval, `end - start`.
    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    /// Counting measure of the whole grid, `step * n_points`.
    pub fn total_measure(&self) -> f64 {
        self.step() * self.n_points as f64
    }

    /// Index of the node equal to `t` (up to 1e-6 of a step), if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let pos = (t - self.start) / self.step();
        let k = pos.round();
        if (pos - k).abs() <= 1e-6 && k >= 0.0 && (k as usize) < self.n_points {
            Some(k as usize)
        } else {
            None
        }
    }

    /// Index of the node closest to `t`, clamped to the grid.
    pub fn nearest_index(&self, t: f64) -> usize {
        let pos = ((t - self.start) / self.step()).round();
        pos.clamp(0.0, (self.n_points - 1) as f64) as usize
    }
}

/// Product of two grids, indexed `(i, j)` with `i` along `axis1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice2D {
    pub axis1: GridSpec,
    pub axis2: GridSpec,
}

impl Lattice2D {
    pub fn new(axis1: GridSpec, axis2: GridSpec) -> Self {
        Self { axis1, axis2 }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.axis1.n_points, self.axis2.n_points)
    }

    pub fn cell_area(&self) -> f64 {
        self.axis1.step() * self.axis2.step()
    }

    pub fn area(&self) -> f64 {
        self.axis1.length() * self.axis2.length()
    }
}

/// A real-valued sample on a 1D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl SamplePath {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        ensure(values.len() == grid.n_points, "values", || {
            format!("length {} does not match grid size {}", values.len(), grid.n_points)
        })?;
        ensure(values.iter().all(|v| v.is_finite()), "values", || {
            "all values must be finite".into()
        })?;
        Ok(Self { grid, values })
    }
}

/// A real-valued sample on a lattice, stored row-major (`axis2` fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    pub lattice: Lattice2D,
    pub values: Vec<f64>,
}

impl Field2D {
    pub fn new(lattice: Lattice2D, values: Vec<f64>) -> Result<Self> {
        let (n1, n2) = lattice.shape();
        ensure(values.len() == n1 * n2, "values", || {
            format!("length {} does not match lattice {n1}x{n2}", values.len())
        })?;
        ensure(values.iter().all(|v| v.is_finite()), "values", || {
            "all values must be finite".into()
        })?;
        Ok(Self { lattice, values })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.lattice.axis2.n_points + j]
    }
}

/// Either kind of parameter set accepted by the process simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Line(GridSpec),
    Plane(Lattice2D),
}

/// A simulated path or field.
#[derive(Debug, Clone, PartialEq)]
pub enum Realization {
    Path(SamplePath),
    Field(Field2D),
}

impl Realization {
    pub fn values(&self) -> &[f64] {
        match self {
            Realization::Path(p) => &p.values,
            Realization::Field(f) => &f.values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_grids() {
        assert!(GridSpec::new(0.0, 0.0, 10).is_err());
        assert!(GridSpec::new(1.0, 0.0, 10).is_err());
        assert!(GridSpec::new(0.0, 1.0, 1).is_err());
        assert!(GridSpec::new(0.0, f64::NAN, 3).is_err());
    }

    #[test]
    fn step_and_points() {
        let g = GridSpec::new(-1.0, 1.0, 5).unwrap();
        assert_eq!(g.step(), 0.5);
        assert_eq!(g.points(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(g.index_of(0.0), Some(2));
        assert_eq!(g.index_of(0.2), None);
        assert_eq!(g.total_measure(), 2.5);
    }

    #[test]
    fn path_length_must_match() {
        let g = GridSpec::new(0.0, 1.0, 3).unwrap();
        assert!(SamplePath::new(g, vec![0.0, 1.0]).is_err());
        assert!(SamplePath::new(g, vec![0.0, f64::INFINITY, 1.0]).is_err());
        assert!(SamplePath::new(g, vec![0.0, 1.0, 2.0]).is_ok());
    }
}
