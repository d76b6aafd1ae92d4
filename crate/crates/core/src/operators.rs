//! The integral operator, the Poisson infection operator and its Fréchet
//! derivative, discretized with the midpoint rule on a [`TypeGrid`].
//!
//! For `f` in the unit class,
//!
//! ```text
//! Lambda[f](y) = ∫ kernel(x, y) f(x) dmu(x)
//! Psi[f](y)    = Σ_k eta_k(y) P(Poisson(Lambda[f](y)) >= k)
//! DPsi f [h]   = Lambda[h] · Σ_{k>=1} eta_k p(k - 1, Lambda[f])
//! ```

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::{GridFunction, KernelModel, StepKernel, ThresholdMeasure, TypeGrid};

/// Above this intensity the Poisson masses are evaluated term by term in
/// log space instead of by recurrence from `exp(-lambda)`.
const LOG_SPACE_LAMBDA: f64 = 30.0;
const LOG_SPACE_K: usize = 20;

/// Poisson probability `lambda^k e^{-lambda} / k!`.
pub fn poisson_term(k: usize, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!(
            "Poisson intensity {lambda} must be non-negative"
        )));
    }
    Ok(poisson_term_unchecked(k, lambda))
}

fn poisson_term_unchecked(k: usize, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if k > LOG_SPACE_K || lambda > LOG_SPACE_LAMBDA {
        let kf = k as f64;
        (kf * lambda.ln() - lambda - ln_gamma(kf + 1.0)).exp()
    } else {
        let mut term = (-lambda).exp();
        for i in 1..=k {
            term *= lambda / i as f64;
        }
        term
    }
}

/// Poisson masses `p(0..=kmax, lambda)` written into `out`.
fn poisson_masses(lambda: f64, out: &mut [f64]) {
    if lambda > LOG_SPACE_LAMBDA {
        for (k, o) in out.iter_mut().enumerate() {
            *o = poisson_term_unchecked(k, lambda);
        }
        return;
    }
    let mut term = (-lambda).exp();
    for (k, o) in out.iter_mut().enumerate() {
        if k > 0 {
            term *= lambda / k as f64;
        }
        *o = term;
    }
}

/// Upper tails `P(Poisson >= k)` for `k = 0..masses.len()`, from a
/// compensated running sum of the masses.
fn poisson_tails(masses: &[f64], tails: &mut [f64]) {
    let mut sum = 0.0f64;
    let mut comp = 0.0;
    for (k, t) in tails.iter_mut().enumerate() {
        *t = (1.0 - sum).max(0.0);
        let y = masses[k] - comp;
        let s = sum + y;
        comp = (s - sum) - y;
        sum = s;
    }
}

/// Grid, threshold measure and tabulated kernel for one operator family.
#[derive(Debug, Clone)]
pub struct OperatorContext {
    grid: TypeGrid,
    measure: ThresholdMeasure,
    /// Row-major, entry `(i, j)` = kernel(midpoint_i, midpoint_j).
    kernel_matrix: Vec<f64>,
    kernel_name: String,
    kernel_bound: f64,
}

impl OperatorContext {
    pub fn new(grid: TypeGrid, kernel: &KernelModel, measure: ThresholdMeasure) -> Result<Self> {
        let matrix = kernel.tabulate(&grid)?;
        Self::from_matrix(grid, matrix, kernel.name(), kernel.bound(), measure)
    }

    pub fn from_step(
        grid: TypeGrid,
        kernel: &StepKernel,
        measure: ThresholdMeasure,
    ) -> Result<Self> {
        if kernel.partition().cell_count() != grid.cell_count() {
            return Err(Error::invalid(
                "step kernel partition does not match the grid",
            ));
        }
        let bound = kernel.block_values().iter().copied().fold(0.0, f64::max);
        let name = format!("step:{:?}:{}", kernel.side(), kernel.level()).to_lowercase();
        Self::from_matrix(grid, kernel.tabulate(), &name, bound, measure)
    }

    pub fn from_matrix(
        grid: TypeGrid,
        kernel_matrix: Vec<f64>,
        kernel_name: &str,
        kernel_bound: f64,
        measure: ThresholdMeasure,
    ) -> Result<Self> {
        let m = grid.cell_count();
        if kernel_matrix.len() != m * m {
            return Err(Error::invalid(format!(
                "kernel matrix has {} entries, expected {}",
                kernel_matrix.len(),
                m * m
            )));
        }
        if measure.cell_count() != m {
            return Err(Error::invalid(format!(
                "threshold measure has {} cells, grid has {m}",
                measure.cell_count()
            )));
        }
        if kernel_matrix
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0 || *v > kernel_bound * (1.0 + 1e-12))
        {
            return Err(Error::invalid(
                "kernel matrix entries must lie in [0, bound]",
            ));
        }
        Ok(OperatorContext {
            grid,
            measure,
            kernel_matrix,
            kernel_name: kernel_name.to_string(),
            kernel_bound,
        })
    }

    /// Same grid and kernel with a different threshold measure.
    pub fn with_measure(&self, measure: ThresholdMeasure) -> Result<Self> {
        Self::from_matrix(
            self.grid.clone(),
            self.kernel_matrix.clone(),
            &self.kernel_name,
            self.kernel_bound,
            measure,
        )
    }

    pub fn grid(&self) -> &TypeGrid {
        &self.grid
    }

    pub fn measure(&self) -> &ThresholdMeasure {
        &self.measure
    }

    pub fn kernel_matrix(&self) -> &[f64] {
        &self.kernel_matrix
    }

    pub fn kernel_name(&self) -> &str {
        &self.kernel_name
    }

    pub fn kernel_bound(&self) -> f64 {
        self.kernel_bound
    }

    pub fn cell_count(&self) -> usize {
        self.grid.cell_count()
    }

    /// `Lambda[f]` by the midpoint rule.
    pub fn lambda_op(&self, f: &GridFunction) -> Result<GridFunction> {
        f.check_len(self.cell_count())?;
        f.check_nonnegative()?;
        Ok(GridFunction::new(self.lambda_values(f.values())))
    }

    pub(crate) fn lambda_values(&self, f: &[f64]) -> Vec<f64> {
        let m = self.cell_count();
        let mut out = vec![0.0; m];
        for (i, (fi, wi)) in f.iter().zip(self.grid.weights()).enumerate() {
            let a = fi * wi;
            if a == 0.0 {
                continue;
            }
            let row = &self.kernel_matrix[i * m..(i + 1) * m];
            for (o, k) in out.iter_mut().zip(row) {
                *o += k * a;
            }
        }
        out
    }

    /// `Psi[f]`; `f` must take values in `[0, 1]`.
    pub fn psi_op(&self, f: &GridFunction) -> Result<GridFunction> {
        f.check_len(self.cell_count())?;
        f.check_unit_range()?;
        Ok(GridFunction::new(self.psi_values(f.values())))
    }

    pub(crate) fn psi_values(&self, f: &[f64]) -> Vec<f64> {
        let lambda = self.lambda_values(f);
        self.psi_from_lambda(&lambda)
    }

    /// `Psi` given precomputed intensities, one per cell. The output is
    /// clamped to `[0, 1]` to absorb rounding in the density sums.
    pub(crate) fn psi_from_lambda(&self, lambda: &[f64]) -> Vec<f64> {
        let kmax = self.measure.support_max();
        let mut masses = vec![0.0; kmax + 1];
        let mut tails = vec![0.0; kmax + 1];
        lambda
            .iter()
            .enumerate()
            .map(|(c, &lam)| {
                poisson_masses(lam, &mut masses);
                poisson_tails(&masses, &mut tails);
                let v: f64 = (0..=kmax).map(|k| self.measure.eta(k, c) * tails[k]).sum();
                v.clamp(0.0, 1.0)
            })
            .collect()
    }

    /// `V[f] = Σ_{k>=1} eta_k p(k - 1, lambda)` from precomputed intensities.
    pub(crate) fn v_from_lambda(&self, lambda: &[f64]) -> Vec<f64> {
        let kmax = self.measure.support_max();
        let mut masses = vec![0.0; kmax.max(1)];
        lambda
            .iter()
            .enumerate()
            .map(|(c, &lam)| {
                poisson_masses(lam, &mut masses);
                (1..=kmax)
                    .map(|k| self.measure.eta(k, c) * masses[k - 1])
                    .sum()
            })
            .collect()
    }

    /// Multiplier of the derivative at `f`: `DPsi f [h] = Lambda[h] · V[f]`.
    pub fn derivative_factor(&self, f: &GridFunction) -> Result<GridFunction> {
        f.check_len(self.cell_count())?;
        f.check_unit_range()?;
        Ok(GridFunction::new(
            self.v_from_lambda(&self.lambda_values(f.values())),
        ))
    }

    /// Fréchet derivative `DPsi f [h]`; `h` may take either sign.
    pub fn frechet_derivative(&self, f: &GridFunction, h: &GridFunction) -> Result<GridFunction> {
        h.check_len(self.cell_count())?;
        if let Some(i) = h.values().iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "direction is not finite at cell {i}"
            )));
        }
        let v = self.derivative_factor(f)?;
        let lh = self.lambda_values(h.values());
        Ok(GridFunction::new(
            lh.iter().zip(v.values()).map(|(a, b)| a * b).collect(),
        ))
    }
}
