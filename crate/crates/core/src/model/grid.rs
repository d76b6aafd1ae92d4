use crate::error::{Error, Result};

/// Discretization of the type space `[0, 1]` into contiguous cells, each
/// carrying its share of the type distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeGrid {
    edges: Vec<f64>,
    weights: Vec<f64>,
    midpoints: Vec<f64>,
}

impl TypeGrid {
    /// Equal-width cells with uniform weights.
    pub fn uniform(cell_count: usize) -> Result<Self> {
        if cell_count == 0 {
            return Err(Error::invalid("grid needs at least one cell"));
        }
        let m = cell_count as f64;
        let edges: Vec<f64> = (0..=cell_count).map(|i| i as f64 / m).collect();
        let weights = vec![1.0 / m; cell_count];
        Self::from_parts(edges, weights)
    }

    /// Equal-width cells with caller-supplied (non-uniform) cell masses.
    /// Weights are rescaled to sum to one.
    pub fn with_weights(weights: Vec<f64>) -> Result<Self> {
        let cell_count = weights.len();
        if cell_count == 0 {
            return Err(Error::invalid("grid needs at least one cell"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid(
                "cell weights must be finite and non-negative",
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("cell weights sum to zero"));
        }
        let m = cell_count as f64;
        let edges = (0..=cell_count).map(|i| i as f64 / m).collect();
        Self::from_parts(edges, weights.into_iter().map(|w| w / total).collect())
    }

    fn from_parts(edges: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if edges.first() != Some(&0.0) || edges.last() != Some(&1.0) {
            return Err(Error::invalid("cell edges must span [0, 1]"));
        }
        if edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("cell edges must be strictly increasing"));
        }
        let midpoints = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Ok(TypeGrid {
            edges,
            weights,
            midpoints,
        })
    }

    pub fn cell_count(&self) -> usize {
        self.weights.len()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn midpoints(&self) -> &[f64] {
        &self.midpoints
    }

    /// Index of the cell containing `x`; `x = 1` belongs to the last cell.
    pub fn cell_of(&self, x: f64) -> usize {
        let idx = self.edges.partition_point(|&e| e <= x);
        idx.saturating_sub(1).min(self.cell_count() - 1)
    }

    /// Midpoint-rule integral of cell values against the cell weights.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.cell_count());
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }
}
