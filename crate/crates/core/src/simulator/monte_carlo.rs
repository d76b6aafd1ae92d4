use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::simulator::{run_percolation, sample_graph, SimulationModel, SimulationRecord};

/// Aggregate over independent runs at one graph size.
#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloSummary {
    pub n: usize,
    pub runs: usize,
    pub base_seed: u64,
    pub mean: f64,
    /// Sample standard deviation (zero for a single run).
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// Mean infected fraction per type bin, averaged over runs in which the
    /// bin is non-empty; `None` if it was empty in every run.
    pub per_bin_mean: Vec<Option<f64>>,
    #[serde(skip)]
    pub records: Vec<SimulationRecord>,
}

impl MonteCarloSummary {
    pub fn fractions(&self) -> Vec<f64> {
        self.records
            .iter()
            .map(SimulationRecord::final_fraction)
            .collect()
    }
}

/// Runs `runs` independent simulations with seeds `base_seed + r`, in
/// parallel on the current rayon pool. Results do not depend on the
/// number of threads.
pub fn monte_carlo(
    model: &SimulationModel,
    n: usize,
    runs: usize,
    base_seed: u64,
    bins: usize,
) -> Result<MonteCarloSummary> {
    if runs == 0 {
        return Err(Error::invalid("at least one run is required"));
    }
    if bins == 0 {
        return Err(Error::invalid("bin count must be positive"));
    }
    let records = (0..runs as u64)
        .into_par_iter()
        .map(|r| run_percolation(&sample_graph(model, n, base_seed.wrapping_add(r))?, bins))
        .collect::<Result<Vec<_>>>()?;

    let fractions: Vec<f64> = records
        .iter()
        .map(SimulationRecord::final_fraction)
        .collect();
    let mean = fractions.iter().sum::<f64>() / runs as f64;
    let std = if runs > 1 {
        (fractions.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (runs - 1) as f64).sqrt()
    } else {
        0.0
    };
    let per_bin_mean = (0..bins)
        .map(|b| {
            let (sum, count) = records.iter().filter(|r| r.per_bin_totals[b] > 0).fold(
                (0.0, 0usize),
                |(s, c), r| {
                    (
                        s + r.per_bin_counts[b] as f64 / r.per_bin_totals[b] as f64,
                        c + 1,
                    )
                },
            );
            (count > 0).then(|| sum / count as f64)
        })
        .collect();
    Ok(MonteCarloSummary {
        n,
        runs,
        base_seed,
        mean,
        std,
        min: fractions.iter().copied().fold(f64::INFINITY, f64::min),
        max: fractions.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        per_bin_mean,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{KernelModel, ThresholdMeasure, TypeGrid};
    use crate::simulator::EdgeSampler;

    fn model() -> SimulationModel {
        let grid = TypeGrid::uniform(10).unwrap();
        let measure = ThresholdMeasure::constant(&grid, &[(0, 0.1), (2, 0.9)], 8).unwrap();
        SimulationModel::new(KernelModel::case_study(), grid, &measure)
            .unwrap()
            .with_sampler(EdgeSampler::Thinned)
    }

    #[test]
    fn summary_is_consistent() {
        let s = monte_carlo(&model(), 300, 8, 11, 5).unwrap();
        assert_eq!(s.records.len(), 8);
        assert!(s.min <= s.mean && s.mean <= s.max);
        for (r, rec) in s.records.iter().enumerate() {
            assert_eq!(rec.seed, 11 + r as u64);
            assert_eq!(rec.per_bin_totals.iter().sum::<usize>(), 300);
            assert_eq!(rec.per_bin_counts.iter().sum::<usize>(), rec.final_infected);
        }
        assert!(s.per_bin_mean.iter().all(|m| m.is_some()));
    }

    #[test]
    fn single_run_has_zero_std() {
        let s = monte_carlo(&model(), 100, 1, 0, 3).unwrap();
        assert_eq!(s.std, 0.0);
        assert_eq!(s.min, s.max);
    }

    #[test]
    fn rejects_zero_runs() {
        assert!(monte_carlo(&model(), 100, 0, 0, 3).is_err());
    }
}
