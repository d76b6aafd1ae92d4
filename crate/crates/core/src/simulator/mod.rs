//! Finite-graph simulation of bootstrap percolation.
//!
//! Randomness comes from ChaCha8 generators seeded with the run seed and
//! split into two streams: [`TYPE_STREAM`] draws vertex types and
//! thresholds, [`GRAPH_STREAM`] draws edges. Graphs sampled under different
//! kernels from the same seed therefore share vertices, and with
//! [`sample_coupled`] also share the per-pair uniforms.

mod cascade;
mod monte_carlo;
mod sampling;

pub use cascade::{percolate, run_percolation, Cascade};
pub use monte_carlo::{monte_carlo, MonteCarloSummary};
pub use sampling::{
    sample_coupled, sample_graph, EdgeSampler, SimulationModel, GRAPH_STREAM, TYPE_STREAM,
};

use serde::Serialize;

/// A sampled directed graph with vertex types and thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct PercolationGraph {
    pub seed: u64,
    pub types: Vec<f64>,
    pub thresholds: Vec<usize>,
    /// `out_edges[i]` lists every `j` with an edge `i -> j` (j hears from i).
    pub out_edges: Vec<Vec<usize>>,
}

impl PercolationGraph {
    pub fn n(&self) -> usize {
        self.types.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out_edges.iter().map(Vec::len).sum()
    }

    pub fn seed_count(&self) -> usize {
        self.thresholds.iter().filter(|&&k| k == 0).count()
    }
}

/// Outcome of one percolation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationRecord {
    pub seed: u64,
    pub n: usize,
    pub final_infected: usize,
    /// Generations after the seeds in which new vertices were infected.
    pub rounds: usize,
    /// Infected vertices per equal-width type bin.
    pub per_bin_counts: Vec<usize>,
    /// All vertices per type bin.
    pub per_bin_totals: Vec<usize>,
}

impl SimulationRecord {
    pub fn final_fraction(&self) -> f64 {
        self.final_infected as f64 / self.n as f64
    }
}

/// Index of the equal-width bin containing `x` in `[0, 1]`.
pub fn bin_of(x: f64, bins: usize) -> usize {
    ((x * bins as f64) as usize).min(bins - 1)
}
