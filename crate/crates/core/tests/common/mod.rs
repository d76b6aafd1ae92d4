//! Shared fixtures and independent reference implementations.
#![allow(dead_code)]

use bootperc::model::{KernelModel, ThresholdMeasure, TypeGrid};
use bootperc::operators::OperatorContext;
use bootperc::simulator::PercolationGraph;

pub const CASE_STUDY_SEEDS: f64 = 0.1;

pub fn case_study_measure(grid: &TypeGrid) -> ThresholdMeasure {
    ThresholdMeasure::constant(grid, &[(0, 0.1), (2, 0.9)], 8).unwrap()
}

pub fn case_study_ctx(cells: usize) -> OperatorContext {
    let grid = TypeGrid::uniform(cells).unwrap();
    let measure = case_study_measure(&grid);
    OperatorContext::new(grid, &KernelModel::case_study(), measure).unwrap()
}

/// Final infected set by recomputing generations from scratch on the dense
/// adjacency matrix: `D_m = {i : |D_{m-1} ∩ N(i)| >= k_i}`.
pub fn brute_force_infected(graph: &PercolationGraph) -> Vec<bool> {
    let n = graph.types.len();
    let mut adj = vec![vec![false; n]; n];
    for (i, outs) in graph.out_edges.iter().enumerate() {
        for &j in outs {
            adj[j][i] = true;
        }
    }
    let mut current: Vec<bool> = graph.thresholds.iter().map(|&k| k == 0).collect();
    for _ in 0..=n {
        let next: Vec<bool> = (0..n)
            .map(|i| {
                let hits = (0..n).filter(|&j| adj[i][j] && current[j]).count();
                hits >= graph.thresholds[i]
            })
            .collect();
        if next == current {
            break;
        }
        current = next;
    }
    current
}

/// `Σ_k masses[k] P(Poisson(lambda) >= k)` with the tail summed directly.
pub fn tail_mix(masses: &[f64], lambda: f64) -> f64 {
    let mut total = 0.0;
    for (k, &m) in masses.iter().enumerate() {
        let mut below = 0.0;
        let mut term = (-lambda).exp();
        for j in 0..k {
            below += term;
            term *= lambda / (j + 1) as f64;
        }
        total += m * (1.0 - below);
    }
    total
}

/// Smallest root of `z = g(z)` for increasing `g` with `g(0) >= 0`, by
/// bisection on the first sign change of `g(z) - z` found on a fine scan.
pub fn smallest_root(g: impl Fn(f64) -> f64, hi: f64) -> f64 {
    let h = |z: f64| g(z) - z;
    let steps = 2_000;
    let mut lo = 0.0;
    let mut up = hi;
    for i in 1..=steps {
        let z = hi * i as f64 / steps as f64;
        if h(z) <= 0.0 {
            up = z;
            break;
        }
        lo = z;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + up);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            up = mid;
        }
    }
    0.5 * (lo + up)
}

/// Composite Simpson rule on `[0, 1]` with `panels` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, panels: usize) -> f64 {
    let h = 1.0 / panels as f64;
    let mut s = f(0.0) + f(1.0);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(i as f64 * h);
    }
    s * h / 3.0
}

/// Final fraction for the rank-one kernel `phi(x) phi(y)` with
/// type-independent threshold masses: `∫ g(phi(x) a) dx` where `a` is the
/// smallest root of `a = ∫ phi(x) g(phi(x) a) dx`.
pub fn rank_one_reference(phi: impl Fn(f64) -> f64 + Copy, masses: &[f64]) -> f64 {
    let panels = 4000;
    let image = |a: f64| simpson(|x| phi(x) * tail_mix(masses, phi(x) * a), panels);
    let bound = simpson(phi, panels);
    let a = smallest_root(image, bound + 1e-9);
    simpson(|x| tail_mix(masses, phi(x) * a), panels)
}
