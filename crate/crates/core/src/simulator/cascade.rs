use crate::error::{Error, Result};
use crate::simulator::{bin_of, PercolationGraph, SimulationRecord};

/// Final state of the infection process on one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Cascade {
    pub infected: Vec<bool>,
    pub rounds: usize,
}

impl Cascade {
    pub fn infected_count(&self) -> usize {
        self.infected.iter().filter(|&&b| b).count()
    }
}

/// Event-driven spread: every newly infected vertex decrements the
/// remaining threshold of its out-neighbours once, and a vertex whose
/// remaining threshold reaches zero joins the next generation. Runs in
/// `O(n + edges)`.
pub fn percolate(graph: &PercolationGraph) -> Cascade {
    let n = graph.n();
    let mut remaining = graph.thresholds.clone();
    let mut infected = vec![false; n];
    let mut layer: Vec<usize> = (0..n).filter(|&i| remaining[i] == 0).collect();
    for &i in &layer {
        infected[i] = true;
    }
    let mut rounds = 0;
    let mut next = Vec::new();
    loop {
        for &u in &layer {
            for &v in &graph.out_edges[u] {
                if !infected[v] {
                    remaining[v] -= 1;
                    if remaining[v] == 0 {
                        infected[v] = true;
                        next.push(v);
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        rounds += 1;
        std::mem::swap(&mut layer, &mut next);
        next.clear();
    }
    Cascade { infected, rounds }
}

/// Runs the process and bins vertices by type into `bins` equal-width bins.
pub fn run_percolation(graph: &PercolationGraph, bins: usize) -> Result<SimulationRecord> {
    if bins == 0 {
        return Err(Error::invalid("bin count must be positive"));
    }
    let cascade = percolate(graph);
    let mut per_bin_counts = vec![0; bins];
    let mut per_bin_totals = vec![0; bins];
    for (i, &x) in graph.types.iter().enumerate() {
        let b = bin_of(x, bins);
        per_bin_totals[b] += 1;
        if cascade.infected[i] {
            per_bin_counts[b] += 1;
        }
    }
    Ok(SimulationRecord {
        seed: graph.seed,
        n: graph.n(),
        final_infected: cascade.infected_count(),
        rounds: cascade.rounds,
        per_bin_counts,
        per_bin_totals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(thresholds: Vec<usize>, edges: &[(usize, usize)]) -> PercolationGraph {
        let n = thresholds.len();
        let mut out_edges = vec![Vec::new(); n];
        for &(a, b) in edges {
            out_edges[a].push(b);
        }
        PercolationGraph {
            seed: 0,
            types: (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect(),
            thresholds,
            out_edges,
        }
    }

    #[test]
    fn no_seeds_no_infection() {
        let g = graph(vec![1, 2, 1], &[(0, 1), (1, 2), (2, 0)]);
        let r = run_percolation(&g, 3).unwrap();
        assert_eq!(r.final_infected, 0);
        assert_eq!(r.rounds, 0);
    }

    #[test]
    fn all_seeds_round_zero() {
        let g = graph(vec![0; 5], &[(0, 1)]);
        let r = run_percolation(&g, 2).unwrap();
        assert_eq!(r.final_infected, 5);
        assert_eq!(r.rounds, 0);
        assert_eq!(r.per_bin_totals.iter().sum::<usize>(), 5);
        assert_eq!(r.per_bin_counts, r.per_bin_totals);
    }

    #[test]
    fn chain_counts_generations() {
        // 0 seeds 1, 1 seeds 2; 3 needs two infected in-neighbours.
        let g = graph(vec![0, 1, 1, 2], &[(0, 1), (1, 2), (2, 3), (0, 3)]);
        let c = percolate(&g);
        assert_eq!(c.infected, vec![true; 4]);
        assert_eq!(c.rounds, 3);
    }

    #[test]
    fn threshold_not_reached() {
        let g = graph(vec![0, 2, 2], &[(0, 1), (0, 2), (1, 2)]);
        let c = percolate(&g);
        assert_eq!(c.infected, vec![true, false, false]);
    }

    #[test]
    fn rejects_zero_bins() {
        assert!(run_percolation(&graph(vec![0], &[]), 0).is_err());
    }
}
