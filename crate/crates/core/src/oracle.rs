//! Reference values for kernels whose fixed point reduces to a scalar
//! equation, computed without the grid machinery.
//!
//! For a rank-one kernel `phi(x) phi(y)` and type-independent threshold
//! masses `eta_k`, `Lambda[f](y) = phi(y) a` with `a = ∫ phi f dmu`, so the
//! minimal fixed point is `f(y) = g(phi(y) a)` where
//! `g(lambda) = Σ_k eta_k P(Poisson(lambda) >= k)` and `a` is the minimal
//! root of `a = ∫ phi(x) g(phi(x) a) dx` on `[0, 1]` with uniform types.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::operators::poisson_term;

/// Panels and nodes per panel of the composite Gauss-Legendre rule.
const PANELS: usize = 64;
const NODES: usize = 8;

/// Result of a rank-one oracle evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankOneSolution {
    /// `∫ phi f_hat dmu`.
    pub scale: f64,
    /// `∫ f_hat dmu`.
    pub integral: f64,
    pub iterations: usize,
}

/// `Σ_k masses[k] P(Poisson(lambda) >= k)`.
pub fn infection_probability(masses: &[f64], lambda: f64) -> f64 {
    let mut below = 0.0f64;
    let mut total = 0.0;
    for (k, &eta) in masses.iter().enumerate() {
        total += eta * (1.0 - below).max(0.0);
        below += poisson_term(k, lambda).expect("non-negative intensity");
    }
    total
}

fn check_masses(masses: &[f64]) -> Result<()> {
    if masses.is_empty() || masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
        return Err(Error::invalid("threshold masses must be non-negative"));
    }
    let total: f64 = masses.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::invalid(format!(
            "threshold masses sum to {total}, expected 1"
        )));
    }
    Ok(())
}

/// Minimal fixed point of a rank-one kernel with polynomial factor
/// `phi(x) = Σ_i coeffs[i] x^i` under uniform types.
pub fn rank_one_fixed_point(
    coeffs: &[f64],
    masses: &[f64],
    tolerance: f64,
    max_iterations: usize,
) -> Result<RankOneSolution> {
    check_masses(masses)?;
    let phi = |x: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
    let (nodes, weights) = composite_gauss_legendre(PANELS, NODES);
    let phis: Vec<f64> = nodes.iter().map(|&x| phi(x)).collect();
    if phis.iter().any(|&p| p < 0.0) {
        return Err(Error::invalid(
            "kernel factor must be non-negative on [0, 1]",
        ));
    }
    let image = |a: f64| -> f64 {
        phis.iter()
            .zip(&weights)
            .map(|(&p, &w)| w * p * infection_probability(masses, p * a))
            .sum()
    };
    let mut a = 0.0;
    for iteration in 0..=max_iterations {
        let next = image(a);
        if (next - a).abs() < tolerance {
            let integral = phis
                .iter()
                .zip(&weights)
                .map(|(&p, &w)| w * infection_probability(masses, p * a))
                .sum();
            return Ok(RankOneSolution {
                scale: a,
                integral,
                iterations: iteration,
            });
        }
        a = next;
    }
    Err(Error::Convergence {
        what: "rank-one scalar iteration",
        iterations: max_iterations,
        residual: (image(a) - a).abs(),
        last: None,
        trace: Vec::new(),
    })
}

/// Constant kernel `c`: the fixed point is the constant minimal root of
/// `z = g(c z)`.
pub fn constant_fixed_point(
    c: f64,
    masses: &[f64],
    tolerance: f64,
    max_iterations: usize,
) -> Result<RankOneSolution> {
    if !(c >= 0.0) {
        return Err(Error::invalid("constant kernel must be non-negative"));
    }
    rank_one_fixed_point(&[c.sqrt()], masses, tolerance, max_iterations)
}

/// Spectral radius of `h -> eta_1 Lambda[h]` for a rank-one kernel:
/// `eta_1 ∫ phi^2 dmu`.
pub fn rank_one_eigenvalue(coeffs: &[f64], eta1: f64) -> f64 {
    let phi = |x: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
    let (nodes, weights) = composite_gauss_legendre(PANELS, NODES);
    eta1 * nodes
        .iter()
        .zip(&weights)
        .map(|(&x, &w)| w * phi(x).powi(2))
        .sum::<f64>()
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on
/// the Legendre recurrence.
fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(order);
    let mut weights = Vec::with_capacity(order);
    let nf = order as f64;
    for i in 0..order {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut deriv = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            deriv = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / deriv;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * deriv * deriv));
    }
    (nodes, weights)
}

fn composite_gauss_legendre(panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (base_x, base_w) = gauss_legendre(order);
    let h = 1.0 / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let left = p as f64 * h;
        for (x, w) in base_x.iter().zip(&base_w) {
            nodes.push(left + 0.5 * h * (x + 1.0));
            weights.push(0.5 * h * w);
        }
    }
    (nodes, weights)
}
