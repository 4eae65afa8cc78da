//! Sojourn-time functionals of discretized paths and fields.
//!
//! The measure of `{t : w(t) > z}` is the counting measure times the cell
//! size (left-point rule); ties at exactly `z` do not count. For a path with
//! values `w` and cell size `Δ`, the level
//!
//! `z_x = sup { z : Δ · #{w > z} > x }`
//!
//! satisfies `Δ·#{w > z} > x ⟺ z < z_x`, hence
//! `∫ I(Δ·#{w > z} > x) e^z dz = e^{z_x}`.

use std::cmp::Ordering;

use crate::grid::{Field2D, SamplePath};

/// Anything made of grid values with a common cell measure.
pub trait Sampled {
    fn values(&self) -> &[f64];
    fn cell_measure(&self) -> f64;

    fn total_measure(&self) -> f64 {
        self.cell_measure() * self.values().len() as f64
    }
}

impl Sampled for SamplePath {
    fn values(&self) -> &[f64] {
        &self.values
    }

    fn cell_measure(&self) -> f64 {
        self.grid.step()
    }
}

impl Sampled for Field2D {
    fn values(&self) -> &[f64] {
        &self.values
    }

    fn cell_measure(&self) -> f64 {
        self.lattice.cell_area()
    }
}

/// Values with an explicit cell measure, for callers that work on raw slices.
#[derive(Debug, Clone, Copy)]
pub struct RawSample<'a> {
    pub values: &'a [f64],
    pub cell: f64,
}

impl Sampled for RawSample<'_> {
    fn values(&self) -> &[f64] {
        self.values
    }

    fn cell_measure(&self) -> f64 {
        self.cell
    }
}

/// The threshold `z_x`, or `−∞` when the requested sojourn is never reached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Level {
    Finite(f64),
    NegInfinity,
}

impl Level {
    /// `e^{z_x}`, with `e^{−∞} = 0` exactly.
    pub fn exp(self) -> f64 {
        match self {
            Level::Finite(z) => z.exp(),
            Level::NegInfinity => 0.0,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Level::Finite(z) => Some(z),
            Level::NegInfinity => None,
        }
    }

    pub fn is_neg_infinity(self) -> bool {
        matches!(self, Level::NegInfinity)
    }

    /// Adds a constant to a finite level.
    pub fn shifted(self, by: f64) -> Level {
        match self {
            Level::Finite(z) => Level::Finite(z + by),
            Level::NegInfinity => Level::NegInfinity,
        }
    }
}

impl PartialOrd for Level {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Level::NegInfinity, Level::NegInfinity) => Some(Ordering::Equal),
            (Level::NegInfinity, _) => Some(Ordering::Less),
            (_, Level::NegInfinity) => Some(Ordering::Greater),
            (Level::Finite(a), Level::Finite(b)) => a.partial_cmp(b),
        }
    }
}

/// Number of cells needed for a sojourn strictly above `x`: the smallest
/// `k` with `cell * k > x` (evaluated in floating point exactly as the
/// sojourn measure is).
pub fn cells_needed(cell: f64, x: f64) -> usize {
    debug_assert!(cell > 0.0 && x >= 0.0);
    let mut k = (x / cell).floor() as usize + 1;
    while k > 1 && cell * (k - 1) as f64 > x {
        k -= 1;
    }
    while cell * k as f64 <= x {
        k += 1;
    }
    k
}

/// `cell · #{v > u}`.
pub fn sojourn_time<S: Sampled + ?Sized>(sample: &S, u: f64) -> f64 {
    sample.cell_measure() * count_above(sample.values(), u) as f64
}

pub fn count_above(values: &[f64], u: f64) -> usize {
    values.iter().filter(|&&v| v > u).count()
}

/// Largest grid value.
pub fn supremum<S: Sampled + ?Sized>(sample: &S) -> f64 {
    max_value(sample.values())
}

pub fn max_value(values: &[f64]) -> f64 {
    values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// `z_x` computed by selection in `O(n)`; `scratch` is reused between calls.
pub fn level_for_sojourn_in(values: &[f64], cell: f64, x: f64, scratch: &mut Vec<f64>) -> Level {
    let m = cells_needed(cell, x);
    let n = values.len();
    if m > n {
        return Level::NegInfinity;
    }
    if m == 1 {
        return Level::Finite(max_value(values));
    }
    scratch.clear();
    scratch.extend_from_slice(values);
    // m-th largest = element at index m-1 in descending order
    let (_, v, _) = scratch.select_nth_unstable_by(m - 1, |a, b| b.total_cmp(a));
    Level::Finite(*v)
}

/// `z_x` for several sojourn lengths at once (one sort).
pub fn levels_for_sojourns(values: &[f64], cell: f64, xs: &[f64], scratch: &mut Vec<f64>) -> Vec<Level> {
    if xs.len() == 1 {
        return vec![level_for_sojourn_in(values, cell, xs[0], scratch)];
    }
    scratch.clear();
    scratch.extend_from_slice(values);
    scratch.sort_unstable_by(|a, b| b.total_cmp(a));
    xs.iter()
        .map(|&x| {
            let m = cells_needed(cell, x);
            if m > scratch.len() {
                Level::NegInfinity
            } else {
                Level::Finite(scratch[m - 1])
            }
        })
        .collect()
}

/// Nonincreasing rearrangement of a sample, answering sojourn and level
/// queries in `O(log n)` and `O(1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SojournProfile {
    step: f64,
    sorted_values: Vec<f64>,
}

impl SojournProfile {
    pub fn new<S: Sampled + ?Sized>(sample: &S) -> Self {
        Self::from_values(sample.values(), sample.cell_measure())
    }

    pub fn from_values(values: &[f64], step: f64) -> Self {
        let mut sorted_values = values.to_vec();
        sorted_values.sort_unstable_by(|a, b| b.total_cmp(a));
        Self {
            step,
            sorted_values,
        }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted_values
    }

    pub fn total_measure(&self) -> f64 {
        self.step * self.sorted_values.len() as f64
    }

    /// `step · #{values > z}`.
    pub fn measure_above(&self, z: f64) -> f64 {
        self.step * self.sorted_values.partition_point(|&v| v > z) as f64
    }

    pub fn level_for_sojourn(&self, x: f64) -> Level {
        assert!(x >= 0.0, "sojourn length must be nonnegative");
        let m = cells_needed(self.step, x);
        if m > self.sorted_values.len() {
            Level::NegInfinity
        } else {
            Level::Finite(self.sorted_values[m - 1])
        }
    }

    pub fn supremum(&self) -> f64 {
        self.sorted_values[0]
    }
}

/// `z_x` for a path or field.
pub fn level_for_sojourn<S: Sampled + ?Sized>(sample: &S, x: f64) -> Level {
    assert!(x >= 0.0, "sojourn length must be nonnegative");
    let mut scratch = Vec::new();
    level_for_sojourn_in(sample.values(), sample.cell_measure(), x, &mut scratch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use proptest::prelude::*;

    fn raw(values: &[f64], cell: f64) -> RawSample<'_> {
        RawSample { values, cell }
    }

    #[test]
    fn sojourn_examples() {
        let v = [1.0, 3.0, 2.0];
        assert_eq!(sojourn_time(&raw(&v, 0.5), 1.5), 1.0);
        assert_eq!(sojourn_time(&raw(&v, 0.5), 3.0), 0.0);
        assert_eq!(sojourn_time(&raw(&v, 0.5), 0.9), 1.5);
        // ties at the level do not count
        assert_eq!(sojourn_time(&raw(&v, 0.5), 2.0), 0.5);
    }

    #[test]
    fn profile_examples() {
        let p = SojournProfile::from_values(&[1.0, 3.0, 2.0], 0.5);
        assert_eq!(p.sorted_values(), &[3.0, 2.0, 1.0]);
        let c = SojournProfile::from_values(&[4.0; 6], 0.25);
        assert_eq!(c.measure_above(3.999), 1.5);
        assert_eq!(c.measure_above(4.0), 0.0);
        assert_eq!(c.measure_above(10.0), 0.0);
        assert!(p.measure_above(p.supremum()) < p.total_measure());
    }

    #[test]
    fn level_examples() {
        let p = SojournProfile::from_values(&[3.0, 2.0, 1.0], 0.5);
        assert_eq!(p.level_for_sojourn(0.0), Level::Finite(3.0));
        assert_eq!(p.level_for_sojourn(0.6), Level::Finite(2.0));
        assert_eq!(p.level_for_sojourn(1.5), Level::NegInfinity);
        assert_eq!(Level::NegInfinity.exp(), 0.0);
        // boundary: exactly one cell requested needs two cells
        assert_eq!(p.level_for_sojourn(0.5), Level::Finite(2.0));
    }

    #[test]
    fn supremum_examples() {
        let g = GridSpec::new(0.0, 1.0, 3).unwrap();
        let path = SamplePath::new(g, vec![1.0, 3.0, 2.0]).unwrap();
        assert_eq!(supremum(&path), 3.0);
        let c = SamplePath::new(g, vec![-2.0; 3]).unwrap();
        assert_eq!(supremum(&c), -2.0);
        assert_eq!(level_for_sojourn(&path, 0.0), Level::Finite(3.0));
    }

    #[test]
    fn cells_needed_handles_exact_multiples() {
        assert_eq!(cells_needed(0.5, 0.0), 1);
        assert_eq!(cells_needed(0.5, 0.6), 2);
        assert_eq!(cells_needed(0.5, 1.0), 3);
        // 0.1 * 3.0 rounds above 0.3, so three cells already exceed it.
        let expect = if 0.1 * 3.0 > 0.3 { 3 } else { 4 };
        assert_eq!(cells_needed(0.1, 0.3), expect);
    }

    proptest! {
        #[test]
        fn level_contract_holds(values in prop::collection::vec(-5.0f64..5.0, 1..40),
                                cell in 0.01f64..1.0, x in 0.0f64..10.0, z in -6.0f64..6.0) {
            let s = raw(&values, cell);
            let level = level_for_sojourn(&s, x);
            let lhs = sojourn_time(&s, z) > x;
            let rhs = match level { Level::Finite(zx) => z < zx, Level::NegInfinity => false };
            prop_assert_eq!(lhs, rhs);
            prop_assert_eq!(level.is_neg_infinity(), x >= cell * values.len() as f64);
            let prof = SojournProfile::from_values(&values, cell);
            prop_assert_eq!(prof.level_for_sojourn(x), level);
            prop_assert_eq!(prof.measure_above(z), sojourn_time(&s, z));
        }

        #[test]
        fn monotone_in_level_and_length(values in prop::collection::vec(-5.0f64..5.0, 1..40),
                                        cell in 0.01f64..1.0, a in 0.0f64..5.0, b in 0.0f64..5.0) {
            let s = raw(&values, cell);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(level_for_sojourn(&s, hi) <= level_for_sojourn(&s, lo));
            prop_assert!(sojourn_time(&s, hi) <= sojourn_time(&s, lo));
            prop_assert_eq!(supremum(&s), level_for_sojourn(&s, 0.0).finite().unwrap());
            prop_assert_eq!(sojourn_time(&s, lo) > 0.0, supremum(&s) > lo);
            let many = levels_for_sojourns(&values, cell, &[lo, hi], &mut Vec::new());
            prop_assert_eq!(many, vec![level_for_sojourn(&s, lo), level_for_sojourn(&s, hi)]);
        }
    }
}
