//! Resilience of an initially uninfected configuration, decided by the
//! dominant mode of the derivative of the infection operator at zero.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::GridFunction;
use crate::operators::OperatorContext;

pub const DEFAULT_TOLERANCE_BAND: f64 = 1e-3;
pub const DEFAULT_POWER_STEPS: usize = 200;

/// Sup-normalized power iteration for a non-negative linear map, started
/// from the all-ones vector. Returns the last ratio `|A h|_inf / |h|_inf`
/// and the normalized direction.
pub fn power_iteration(
    dim: usize,
    steps: usize,
    apply: impl Fn(&[f64]) -> Vec<f64>,
) -> (f64, Vec<f64>) {
    let mut h = vec![1.0; dim];
    let mut rho = 0.0;
    for _ in 0..steps.max(1) {
        let y = apply(&h);
        let norm = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if norm == 0.0 {
            return (0.0, h);
        }
        rho = norm;
        h = y.into_iter().map(|v| v / norm).collect();
    }
    (rho, h)
}

/// Dense matrix of `h -> Lambda[h] · eta_1` on the grid.
#[derive(Debug, Clone)]
pub struct DerivativeAtZero {
    dim: usize,
    /// Row-major; row `m` is the target cell.
    matrix: Vec<f64>,
}

impl DerivativeAtZero {
    /// Wraps a square, entrywise non-negative matrix (row = target cell).
    pub fn from_matrix(dim: usize, matrix: Vec<f64>) -> Result<Self> {
        if matrix.len() != dim * dim {
            return Err(Error::invalid("derivative matrix must be square"));
        }
        if matrix.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(
                "derivative matrix must be entrywise non-negative",
            ));
        }
        Ok(DerivativeAtZero { dim, matrix })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::from_matrix(self.dim, self.matrix.iter().map(|v| v * c).collect())
    }

    pub fn apply(&self, h: &GridFunction) -> Result<GridFunction> {
        h.check_len(self.dim)?;
        Ok(GridFunction::new(self.apply_values(h.values())))
    }

    fn apply_values(&self, h: &[f64]) -> Vec<f64> {
        self.matrix
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(h).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Derivative at zero of the operator of an uninfected configuration.
/// The context's measure must put no mass on threshold zero.
pub fn derivative_at_zero(ctx: &OperatorContext) -> Result<DerivativeAtZero> {
    let seeds = ctx.measure().density(0);
    if seeds.max() > 0.0 {
        return Err(Error::invalid(
            "derivative at zero requires an uninfected measure (no threshold-0 mass)",
        ));
    }
    let m = ctx.cell_count();
    let w = ctx.grid().weights();
    let k = ctx.kernel_matrix();
    let eta1 = ctx.measure().density(1);
    let mut matrix = vec![0.0; m * m];
    for target in 0..m {
        let e = eta1[target];
        if e == 0.0 {
            continue;
        }
        let row = &mut matrix[target * m..(target + 1) * m];
        for (src, a) in row.iter_mut().enumerate() {
            *a = k[src * m + target] * w[src] * e;
        }
    }
    DerivativeAtZero::from_matrix(m, matrix)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Resilient,
    NonResilient,
    Inconclusive,
}

/// Which pointwise inequality the eigen-direction satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointwiseWitness {
    /// `A h >= (1 + band) h` everywhere.
    Amplifying,
    /// `A h <= (1 - band) h` everywhere.
    Damping,
    None,
}

#[derive(Debug, Clone)]
pub struct ResilienceVerdict {
    pub spectral_radius: f64,
    pub eigen_direction: GridFunction,
    pub verdict: Verdict,
    pub margin: f64,
    pub witness: PointwiseWitness,
}

/// Classifies by the spectral radius of `map`, then confirms the pointwise
/// inequality on the computed eigen-direction. Disagreement between the two
/// yields [`Verdict::Inconclusive`].
pub fn classify(
    map: &DerivativeAtZero,
    tolerance_band: f64,
    power_steps: usize,
) -> Result<ResilienceVerdict> {
    if !(tolerance_band >= 0.0) {
        return Err(Error::invalid("tolerance band must be non-negative"));
    }
    let (rho, h) = power_iteration(map.dim, power_steps, |x| map.apply_values(x));
    let ah = map.apply_values(&h);
    let amplifying = ah
        .iter()
        .zip(&h)
        .all(|(a, x)| *a >= (1.0 + tolerance_band) * x);
    let damping = ah
        .iter()
        .zip(&h)
        .all(|(a, x)| *a <= (1.0 - tolerance_band) * x);
    let witness = match (amplifying, damping) {
        (true, false) => PointwiseWitness::Amplifying,
        (false, true) => PointwiseWitness::Damping,
        // Both can only hold for h = 0, which the normalization excludes.
        _ => PointwiseWitness::None,
    };
    let verdict = if rho > 1.0 + tolerance_band && witness == PointwiseWitness::Amplifying {
        Verdict::NonResilient
    } else if rho < 1.0 - tolerance_band && witness == PointwiseWitness::Damping {
        Verdict::Resilient
    } else {
        Verdict::Inconclusive
    };
    Ok(ResilienceVerdict {
        spectral_radius: rho,
        eigen_direction: GridFunction::new(h),
        verdict,
        margin: (rho - 1.0).abs(),
        witness,
    })
}
