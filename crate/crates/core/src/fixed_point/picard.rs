use crate::error::{Error, Result};
use crate::fixed_point::{
    derivative_condition, FixedPointResult, TraceRow, CONDITION_BAND, CONDITION_POWER_STEPS,
};
use crate::model::GridFunction;
use crate::operators::OperatorContext;

/// Iterates may decrease by at most this much between steps (rounding).
const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct PicardOptions {
    /// Stop once `|f_{n+1} - f_n|_inf` falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Evaluate the derivative condition at the fixed point.
    pub check_derivative: bool,
    pub power_steps: usize,
    pub band: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            tolerance: 1e-10,
            max_iterations: 10_000,
            check_derivative: true,
            power_steps: CONDITION_POWER_STEPS,
            band: CONDITION_BAND,
        }
    }
}

/// Monotone iteration `f_{n+1} = Psi[f_n]` from `f_0 = 0`.
///
/// The iterates increase pointwise and stay below every fixed point, so the
/// limit is the minimal one. The returned `f_hat` is the last iterate whose
/// image moved by less than the tolerance; `iterations` counts the operator
/// applications that produced it.
pub fn solve_picard(ctx: &OperatorContext, options: &PicardOptions) -> Result<FixedPointResult> {
    if !(options.tolerance > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let grid = ctx.grid();
    let mut f = vec![0.0; ctx.cell_count()];
    let mut trace = Vec::new();
    for iteration in 0..=options.max_iterations {
        let next = ctx.psi_values(&f);
        let mut step = 0.0f64;
        for (a, b) in f.iter().zip(&next) {
            if b - a < -MONOTONE_SLACK {
                return Err(Error::invalid(format!(
                    "iterates decreased by {} at iteration {iteration}; kernel or measure is inconsistent",
                    a - b
                )));
            }
            step = step.max((b - a).abs());
        }
        trace.push(TraceRow {
            iteration,
            residual: step,
            integral: grid.integrate(&f),
        });
        if step < options.tolerance {
            let f_hat = GridFunction::new(f);
            let derivative = if options.check_derivative {
                Some(derivative_condition(
                    ctx,
                    &f_hat,
                    options.power_steps,
                    options.band,
                )?)
            } else {
                None
            };
            return Ok(FixedPointResult {
                integral: f_hat.integral(grid),
                f_hat,
                iterations: iteration,
                residual: step,
                derivative_condition: derivative,
                trace,
            });
        }
        f = next;
    }
    let residual = trace.last().map_or(f64::INFINITY, |r| r.residual);
    Err(Error::Convergence {
        what: "monotone fixed-point iteration",
        iterations: options.max_iterations,
        residual,
        trace: trace.iter().map(|r| r.residual).collect(),
        last: Some(GridFunction::new(f)),
    })
}
