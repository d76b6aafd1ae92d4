//! Minimal fixed point of the infection operator: monotone iteration from
//! zero, a neural-network approximation, and step-kernel brackets.

mod nn;
mod picard;
mod sandwich;

use serde::Serialize;

use crate::error::Result;
use crate::model::GridFunction;
use crate::operators::OperatorContext;
use crate::resilience::power_iteration;

pub use nn::{solve_nn, LearningRateSchedule, NeuralApproximator, NnOptions, Optimizer};
pub use picard::{solve_picard, PicardOptions};
pub use sandwich::{coupling_sandwich, SandwichLevel, SandwichReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionStatus {
    Satisfied,
    Violated,
    Inconclusive,
}

/// Outcome of testing `DPsi f [h] - h < -eps` at a fixed point.
#[derive(Debug, Clone)]
pub struct DerivativeCondition {
    pub status: ConditionStatus,
    /// Candidate direction `h` (sup-norm 1).
    pub direction: GridFunction,
    /// `-max(DPsi f [h] - h)`; positive when the condition holds.
    pub margin: f64,
    /// Spectral radius estimate of the linearization, when it was needed.
    pub spectral_radius: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub residual: f64,
    pub integral: f64,
}

#[derive(Debug, Clone)]
pub struct FixedPointResult {
    pub f_hat: GridFunction,
    /// `∫ f_hat dmu`, the predicted final infected fraction.
    pub integral: f64,
    pub iterations: usize,
    /// `|Psi[f_hat] - f_hat|_inf`.
    pub residual: f64,
    pub derivative_condition: Option<DerivativeCondition>,
    pub trace: Vec<TraceRow>,
}

/// Power-iteration steps used for the derivative-condition fallback.
pub const CONDITION_POWER_STEPS: usize = 50;
pub const CONDITION_BAND: f64 = 1e-3;

/// Tests the derivative condition at `f`: first along `h = 1`, then along
/// the dominant direction of `h -> Lambda[h] V[f]`.
pub fn derivative_condition(
    ctx: &OperatorContext,
    f: &GridFunction,
    power_steps: usize,
    band: f64,
) -> Result<DerivativeCondition> {
    let v = ctx.derivative_factor(f)?;
    let slope = |h: &[f64]| -> Vec<f64> {
        ctx.lambda_values(h)
            .iter()
            .zip(v.values())
            .map(|(a, b)| a * b)
            .collect()
    };
    let excess = |h: &[f64]| -> f64 {
        slope(h)
            .iter()
            .zip(h)
            .map(|(d, x)| d - x)
            .fold(f64::NEG_INFINITY, f64::max)
    };

    let m = ctx.cell_count();
    let ones = vec![1.0; m];
    let worst = excess(&ones);
    if worst < 0.0 {
        return Ok(DerivativeCondition {
            status: ConditionStatus::Satisfied,
            direction: GridFunction::new(ones),
            margin: -worst,
            spectral_radius: None,
        });
    }

    let (rho, h) = power_iteration(m, power_steps, slope);
    let worst = excess(&h);
    let status = if (rho - 1.0).abs() <= band {
        ConditionStatus::Inconclusive
    } else if rho > 1.0 {
        ConditionStatus::Violated
    } else if worst < 0.0 {
        ConditionStatus::Satisfied
    } else {
        // rho < 1 but the eigen-direction vanishes somewhere.
        ConditionStatus::Inconclusive
    };
    Ok(DerivativeCondition {
        status,
        direction: GridFunction::new(h),
        margin: -worst,
        spectral_radius: Some(rho),
    })
}
