use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{KernelModel, ThresholdMeasure, TypeGrid};
use crate::simulator::PercolationGraph;

/// Stream carrying vertex types and thresholds.
pub const TYPE_STREAM: u64 = 0;
/// Stream carrying edge indicators.
pub const GRAPH_STREAM: u64 = 1;

/// How edge indicators are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EdgeSampler {
    /// One Bernoulli trial per ordered pair: `O(n^2)`.
    #[default]
    Dense,
    /// Candidate pairs at the envelope rate `min(1, bound / n)` by geometric
    /// skipping, each accepted with probability `p_ij / envelope`. Exact in
    /// law; expected cost `O(n * bound)`.
    Thinned,
}

impl std::str::FromStr for EdgeSampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(EdgeSampler::Dense),
            "thinned" => Ok(EdgeSampler::Thinned),
            _ => Err(Error::invalid(format!(
                "unknown edge sampler '{s}' (expected 'dense' or 'thinned')"
            ))),
        }
    }
}

/// Everything needed to sample graphs: kernel, type grid, threshold law.
#[derive(Debug, Clone)]
pub struct SimulationModel {
    kernel: KernelModel,
    grid: TypeGrid,
    /// Cumulative cell weights.
    type_cdf: Vec<f64>,
    /// Per-cell cumulative threshold probabilities.
    threshold_cdf: Vec<Vec<f64>>,
    sampler: EdgeSampler,
}

impl SimulationModel {
    pub fn new(kernel: KernelModel, grid: TypeGrid, measure: &ThresholdMeasure) -> Result<Self> {
        if measure.cell_count() != grid.cell_count() {
            return Err(Error::invalid(
                "measure and grid have different cell counts",
            ));
        }
        let type_cdf = cumulative(grid.weights().iter().copied());
        let kmax = measure.support_max();
        let threshold_cdf = (0..grid.cell_count())
            .map(|c| cumulative((0..=kmax).map(|k| measure.eta(k, c))))
            .collect();
        Ok(SimulationModel {
            kernel,
            grid,
            type_cdf,
            threshold_cdf,
            sampler: EdgeSampler::Dense,
        })
    }

    pub fn with_sampler(mut self, sampler: EdgeSampler) -> Self {
        self.sampler = sampler;
        self
    }

    pub fn kernel(&self) -> &KernelModel {
        &self.kernel
    }

    pub fn grid(&self) -> &TypeGrid {
        &self.grid
    }

    pub fn sampler(&self) -> EdgeSampler {
        self.sampler
    }

    /// Types and thresholds for `n` vertices from the type stream.
    fn sample_vertices(&self, n: usize, seed: u64) -> (Vec<f64>, Vec<usize>) {
        let mut rng = stream(seed, TYPE_STREAM);
        let edges = self.grid.edges();
        let mut types = Vec::with_capacity(n);
        let mut thresholds = Vec::with_capacity(n);
        for _ in 0..n {
            let c = pick(&self.type_cdf, rng.random());
            let u: f64 = rng.random();
            types.push(edges[c] + u * (edges[c + 1] - edges[c]));
            thresholds.push(pick(&self.threshold_cdf[c], rng.random()));
        }
        (types, thresholds)
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn cumulative(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    values
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

/// Inverse-CDF draw: the first bucket whose cumulative weight exceeds
/// `u * total`. Empty buckets are never returned.
fn pick(cdf: &[f64], u: f64) -> usize {
    let total = cdf[cdf.len() - 1];
    let mut idx = cdf.partition_point(|&c| c <= u * total).min(cdf.len() - 1);
    while idx > 0 && cdf[idx] == cdf[idx - 1] {
        idx -= 1;
    }
    idx
}

/// Samples a graph with `n` vertices; deterministic in `seed`.
pub fn sample_graph(model: &SimulationModel, n: usize, seed: u64) -> Result<PercolationGraph> {
    let mut graphs = sample_coupled(model, &[&model.kernel], n, seed)?;
    Ok(graphs.pop().expect("one kernel in, one graph out"))
}

/// Samples one graph per kernel from the same seed. Vertices are shared and
/// every ordered pair uses one uniform `U` for all kernels, with edge
/// `i -> j` present under kernel `m` iff `U < min(1, kernel_m(s_i, s_j) / n)`
/// (scaled by the common envelope for the thinned sampler). Pointwise
/// ordered kernels therefore give nested edge sets.
pub fn sample_coupled(
    model: &SimulationModel,
    kernels: &[&KernelModel],
    n: usize,
    seed: u64,
) -> Result<Vec<PercolationGraph>> {
    if n < 2 {
        return Err(Error::invalid("graphs need at least two vertices"));
    }
    if kernels.is_empty() {
        return Err(Error::invalid("at least one kernel is required"));
    }
    let (types, thresholds) = model.sample_vertices(n, seed);
    let mut rng = stream(seed, GRAPH_STREAM);
    let nf = n as f64;
    let mut out_edges = vec![vec![Vec::new(); n]; kernels.len()];
    let mut probs = vec![0.0; kernels.len()];
    let mut visit = |i: usize, j: usize, u: f64, scale: f64, out: &mut Vec<Vec<Vec<usize>>>| {
        for (m, k) in kernels.iter().enumerate() {
            probs[m] = (k.evaluate(types[i], types[j]) / nf).min(1.0);
            if u * scale < probs[m] {
                out[m][i].push(j);
            }
        }
    };
    match model.sampler {
        EdgeSampler::Dense => {
            for i in 0..n {
                for j in (0..n).filter(|&j| j != i) {
                    let u: f64 = rng.random();
                    visit(i, j, u, 1.0, &mut out_edges);
                }
            }
        }
        EdgeSampler::Thinned => {
            let bound = kernels.iter().map(|k| k.bound()).fold(0.0, f64::max);
            let envelope = (bound / nf).min(1.0);
            if envelope > 0.0 {
                let log_q = (1.0 - envelope).ln();
                for i in 0..n {
                    // Candidate offsets among the n - 1 targets j != i.
                    let mut t = 0usize;
                    loop {
                        if envelope < 1.0 {
                            let u: f64 = rng.random();
                            let skip = ((1.0 - u).ln() / log_q).floor();
                            if skip >= (n - 1 - t) as f64 {
                                break;
                            }
                            t += skip as usize;
                        }
                        if t >= n - 1 {
                            break;
                        }
                        let j = if t < i { t } else { t + 1 };
                        let u: f64 = rng.random();
                        visit(i, j, u, envelope, &mut out_edges);
                        t += 1;
                    }
                }
            }
        }
    }
    Ok(out_edges
        .into_iter()
        .map(|edges| PercolationGraph {
            seed,
            types: types.clone(),
            thresholds: thresholds.clone(),
            out_edges: edges,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(kernel: KernelModel, sampler: EdgeSampler) -> SimulationModel {
        let grid = TypeGrid::uniform(10).unwrap();
        let measure = ThresholdMeasure::constant(&grid, &[(0, 0.1), (2, 0.9)], 8).unwrap();
        SimulationModel::new(kernel, grid, &measure)
            .unwrap()
            .with_sampler(sampler)
    }

    #[test]
    fn zero_kernel_is_edgeless() {
        for s in [EdgeSampler::Dense, EdgeSampler::Thinned] {
            let g = sample_graph(&model(KernelModel::constant(0.0).unwrap(), s), 50, 1).unwrap();
            assert_eq!(g.edge_count(), 0);
        }
    }

    #[test]
    fn clamped_kernel_is_complete() {
        let n = 30;
        for s in [EdgeSampler::Dense, EdgeSampler::Thinned] {
            let k = KernelModel::constant(2.0 * n as f64).unwrap();
            let g = sample_graph(&model(k, s), n, 3).unwrap();
            assert_eq!(g.edge_count(), n * (n - 1));
            for (i, out) in g.out_edges.iter().enumerate() {
                assert!(!out.contains(&i));
            }
        }
    }

    #[test]
    fn deterministic_in_seed() {
        for s in [EdgeSampler::Dense, EdgeSampler::Thinned] {
            let m = model(KernelModel::case_study(), s);
            assert_eq!(
                sample_graph(&m, 200, 9).unwrap(),
                sample_graph(&m, 200, 9).unwrap()
            );
            assert_ne!(
                sample_graph(&m, 200, 9).unwrap(),
                sample_graph(&m, 200, 10).unwrap()
            );
        }
    }

    #[test]
    fn samplers_share_vertices() {
        let a = sample_graph(
            &model(KernelModel::case_study(), EdgeSampler::Dense),
            100,
            4,
        )
        .unwrap();
        let b = sample_graph(
            &model(KernelModel::case_study(), EdgeSampler::Thinned),
            100,
            4,
        )
        .unwrap();
        assert_eq!(a.types, b.types);
        assert_eq!(a.thresholds, b.thresholds);
    }

    #[test]
    fn types_and_thresholds_follow_laws() {
        let m = model(KernelModel::constant(0.0).unwrap(), EdgeSampler::Dense);
        let g = sample_graph(&m, 20_000, 5).unwrap();
        let seeds = g.seed_count() as f64 / 20_000.0;
        assert!((seeds - 0.1).abs() < 0.01);
        assert!(g.thresholds.iter().all(|&k| k == 0 || k == 2));
        let mean = g.types.iter().sum::<f64>() / 20_000.0;
        assert!((mean - 0.5).abs() < 0.01);
        assert!(g.types.iter().all(|t| (0.0..=1.0).contains(t)));
    }

    #[test]
    fn pick_skips_empty_buckets() {
        let cdf = cumulative([0.0, 0.5, 0.0, 0.5].into_iter());
        assert_eq!(pick(&cdf, 0.0), 1);
        assert_eq!(pick(&cdf, 0.49), 1);
        assert_eq!(pick(&cdf, 0.5), 3);
        assert_eq!(pick(&cdf, 0.999), 3);
    }

    #[test]
    fn rejects_tiny_graphs() {
        let m = model(KernelModel::constant(1.0).unwrap(), EdgeSampler::Dense);
        assert!(sample_graph(&m, 1, 0).is_err());
    }
}
