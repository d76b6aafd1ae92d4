use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixed_point::{solve_picard, PicardOptions};
use crate::model::{BlockPartition, StepKernel, StepSide};
use crate::operators::OperatorContext;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SandwichLevel {
    pub level: usize,
    pub lower_integral: f64,
    pub upper_integral: f64,
}

impl SandwichLevel {
    pub fn width(&self) -> f64 {
        self.upper_integral - self.lower_integral
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub base_integral: f64,
    pub levels: Vec<SandwichLevel>,
}

/// Minimal fixed points under the lower and upper step kernels of the
/// context's kernel, for each level. Levels must be strictly ascending and
/// divide the cell count.
pub fn coupling_sandwich(
    ctx: &OperatorContext,
    levels: &[usize],
    options: &PicardOptions,
) -> Result<SandwichReport> {
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("sandwich levels must be strictly ascending"));
    }
    let opts = PicardOptions {
        check_derivative: false,
        ..options.clone()
    };
    let base_integral = solve_picard(ctx, &opts)?.integral;
    let mut out = Vec::with_capacity(levels.len());
    for &level in levels {
        let partition = BlockPartition::new(ctx.cell_count(), level)?;
        let solve = |side| -> Result<f64> {
            let step = StepKernel::from_matrix(ctx.kernel_matrix(), partition.clone(), side);
            let sub = OperatorContext::from_step(ctx.grid().clone(), &step, ctx.measure().clone())?;
            Ok(solve_picard(&sub, &opts)?.integral)
        };
        out.push(SandwichLevel {
            level,
            lower_integral: solve(StepSide::Lower)?,
            upper_integral: solve(StepSide::Upper)?,
        });
    }
    Ok(SandwichReport {
        base_integral,
        levels: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{KernelModel, ThresholdMeasure, TypeGrid};

    fn ctx(kernel: &KernelModel, m: usize) -> OperatorContext {
        let grid = TypeGrid::uniform(m).unwrap();
        let measure = ThresholdMeasure::constant(&grid, &[(0, 0.1), (2, 0.9)], 8).unwrap();
        OperatorContext::new(grid, kernel, measure).unwrap()
    }

    #[test]
    fn constant_kernel_brackets_collapse() {
        let c = ctx(&KernelModel::constant(4.0).unwrap(), 20);
        let r = coupling_sandwich(&c, &[1, 5, 20], &PicardOptions::default()).unwrap();
        for l in &r.levels {
            assert!((l.lower_integral - r.base_integral).abs() < 1e-12);
            assert!((l.upper_integral - r.base_integral).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_kernel_bracket_tightens() {
        let grid = TypeGrid::uniform(100).unwrap();
        let k = KernelModel::with_estimated_bound("sum", &grid, |x, y| 3.0 * (x + y)).unwrap();
        let c = ctx(&k, 100);
        let r = coupling_sandwich(&c, &[1, 100], &PicardOptions::default()).unwrap();
        let (coarse, fine) = (r.levels[0], r.levels[1]);
        for l in [coarse, fine] {
            assert!(l.lower_integral <= r.base_integral + 1e-12);
            assert!(r.base_integral <= l.upper_integral + 1e-12);
        }
        assert!(fine.width() < coarse.width());
        // At full resolution the step kernels equal the grid kernel.
        assert!(fine.width() < 1e-9);
    }

    #[test]
    fn rejects_unsorted_levels() {
        let c = ctx(&KernelModel::constant(1.0).unwrap(), 10);
        assert!(coupling_sandwich(&c, &[5, 2], &PicardOptions::default()).is_err());
        assert!(coupling_sandwich(&c, &[3], &PicardOptions::default()).is_err());
    }
}
