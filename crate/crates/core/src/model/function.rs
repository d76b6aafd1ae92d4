use std::ops::Index;

use crate::error::{Error, Result};
use crate::model::TypeGrid;

/// Values of a function on the type space, one per grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction(Vec<f64>);

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Self {
        GridFunction(values)
    }

    pub fn constant(len: usize, value: f64) -> Self {
        GridFunction(vec![value; len])
    }

    pub fn zeros(len: usize) -> Self {
        Self::constant(len, 0.0)
    }

    /// Samples `f` at the grid midpoints.
    pub fn from_fn(grid: &TypeGrid, f: impl Fn(f64) -> f64) -> Self {
        GridFunction(grid.midpoints().iter().map(|&x| f(x)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn integral(&self, grid: &TypeGrid) -> f64 {
        grid.integrate(&self.0)
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &GridFunction, b: f64) -> GridFunction {
        GridFunction(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        )
    }

    pub fn scaled(&self, a: f64) -> GridFunction {
        GridFunction(self.0.iter().map(|x| a * x).collect())
    }

    /// Pointwise `self <= other + slack`.
    pub fn le(&self, other: &GridFunction, slack: f64) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| *a <= *b + slack)
    }

    /// Linear interpolation between midpoints, constant beyond the outer ones.
    pub fn interpolate(&self, grid: &TypeGrid, x: f64) -> f64 {
        let mids = grid.midpoints();
        let idx = mids.partition_point(|&m| m <= x);
        if idx == 0 {
            return self.0[0];
        }
        if idx == mids.len() {
            return self.0[mids.len() - 1];
        }
        let (x0, x1) = (mids[idx - 1], mids[idx]);
        let t = (x - x0) / (x1 - x0);
        self.0[idx - 1] * (1.0 - t) + self.0[idx] * t
    }

    /// Checks membership in the `[0, 1]`-valued class.
    pub fn check_unit_range(&self) -> Result<()> {
        match self.0.iter().position(|v| !(0.0..=1.0).contains(v)) {
            None => Ok(()),
            Some(i) => Err(Error::invalid(format!(
                "value {} at cell {i} outside [0, 1]",
                self.0[i]
            ))),
        }
    }

    /// Checks membership in the non-negative bounded class.
    pub fn check_nonnegative(&self) -> Result<()> {
        match self.0.iter().position(|v| !v.is_finite() || *v < 0.0) {
            None => Ok(()),
            Some(i) => Err(Error::invalid(format!(
                "value {} at cell {i} is negative or not finite",
                self.0[i]
            ))),
        }
    }

    pub(crate) fn check_len(&self, expected: usize) -> Result<()> {
        if self.len() == expected {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "grid function has {} cells, expected {expected}",
                self.len()
            )))
        }
    }
}

impl Index<usize> for GridFunction {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl From<Vec<f64>> for GridFunction {
    fn from(v: Vec<f64>) -> Self {
        GridFunction(v)
    }
}
