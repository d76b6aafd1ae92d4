use std::ops::Range;

use crate::error::{Error, Result};
use crate::model::{KernelModel, TypeGrid};

/// Partition of the grid cells into contiguous, equally sized blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    cell_count: usize,
    block_len: usize,
}

impl BlockPartition {
    /// `level` blocks over `cell_count` cells; `level` must divide the cell
    /// count so that block boundaries fall on cell edges.
    pub fn new(cell_count: usize, level: usize) -> Result<Self> {
        if level == 0 || cell_count == 0 || !cell_count.is_multiple_of(level) {
            return Err(Error::invalid(format!(
                "level {level} does not divide the cell count {cell_count}"
            )));
        }
        Ok(BlockPartition {
            cell_count,
            block_len: cell_count / level,
        })
    }

    pub fn block_count(&self) -> usize {
        self.cell_count / self.block_len
    }

    pub fn cell_count(&self) -> usize {
        self.cell_count
    }

    pub fn block(&self, l: usize) -> Range<usize> {
        l * self.block_len..(l + 1) * self.block_len
    }

    pub fn blocks(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.block_count()).map(|l| self.block(l))
    }

    #[inline]
    pub fn block_of(&self, cell: usize) -> usize {
        cell / self.block_len
    }

    /// True if each block of `self` lies inside a single block of `coarse`.
    pub fn refines(&self, coarse: &BlockPartition) -> bool {
        self.cell_count == coarse.cell_count && coarse.block_len.is_multiple_of(self.block_len)
    }

    /// Blockwise masses of the grid weights.
    pub fn block_masses(&self, grid: &TypeGrid) -> Vec<f64> {
        self.blocks()
            .map(|r| grid.weights()[r].iter().sum())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepSide {
    Upper,
    Lower,
}

/// Blockwise supremum or infimum of a kernel over the grid midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct StepKernel {
    level: usize,
    side: StepSide,
    partition: BlockPartition,
    /// Row-major `level x level`, source block as row.
    block_values: Vec<f64>,
}

impl StepKernel {
    pub(crate) fn from_matrix(
        matrix: &[f64],
        partition: BlockPartition,
        side: StepSide,
    ) -> StepKernel {
        let m = partition.cell_count();
        let nb = partition.block_count();
        let init = match side {
            StepSide::Upper => f64::NEG_INFINITY,
            StepSide::Lower => f64::INFINITY,
        };
        let mut block_values = vec![init; nb * nb];
        for i in 0..m {
            let bi = partition.block_of(i);
            for j in 0..m {
                let slot = &mut block_values[bi * nb + partition.block_of(j)];
                let v = matrix[i * m + j];
                *slot = match side {
                    StepSide::Upper => slot.max(v),
                    StepSide::Lower => slot.min(v),
                };
            }
        }
        StepKernel {
            level: nb,
            side,
            partition,
            block_values,
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn side(&self) -> StepSide {
        self.side
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    /// Value on the block pair (source `l`, target `l2`).
    pub fn block_value(&self, l: usize, l2: usize) -> f64 {
        self.block_values[l * self.level + l2]
    }

    pub fn block_values(&self) -> &[f64] {
        &self.block_values
    }

    /// Value at the cell pair `(i, j)`.
    #[inline]
    pub fn cell_value(&self, i: usize, j: usize) -> f64 {
        self.block_value(self.partition.block_of(i), self.partition.block_of(j))
    }

    /// Grid tabulation, row-major with the source cell as row.
    pub fn tabulate(&self) -> Vec<f64> {
        let m = self.partition.cell_count();
        let mut out = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                out.push(self.cell_value(i, j));
            }
        }
        out
    }

    /// The step kernel as a function on `[0, 1]^2`, locating types through
    /// the cells of `grid`.
    pub fn to_kernel_model(&self, grid: &TypeGrid) -> KernelModel {
        let me = self.clone();
        let grid = grid.clone();
        let bound = self.block_values.iter().copied().fold(0.0, f64::max);
        let side = match self.side {
            StepSide::Upper => "upper",
            StepSide::Lower => "lower",
        };
        KernelModel::new(format!("step:{side}:{}", self.level), bound, move |x, y| {
            me.cell_value(grid.cell_of(x), grid.cell_of(y))
        })
        .expect("block values are finite and non-negative")
    }
}

/// Upper and lower step kernels of `kernel` at `level` blocks.
pub fn make_step_kernels(
    kernel: &KernelModel,
    grid: &TypeGrid,
    level: usize,
) -> Result<(StepKernel, StepKernel)> {
    let partition = BlockPartition::new(grid.cell_count(), level)?;
    let matrix = kernel.tabulate(grid)?;
    Ok((
        StepKernel::from_matrix(&matrix, partition.clone(), StepSide::Upper),
        StepKernel::from_matrix(&matrix, partition, StepSide::Lower),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum_kernel(grid: &TypeGrid) -> KernelModel {
        KernelModel::with_estimated_bound("sum", grid, |x, y| x + y).unwrap()
    }

    #[test]
    fn monotone_kernel_extremes() {
        let g = TypeGrid::uniform(4).unwrap();
        let (up, lo) = make_step_kernels(&sum_kernel(&g), &g, 2).unwrap();
        // 1-based block (2,2) is index (1,1).
        assert!((up.block_value(1, 1) - 1.75).abs() < 1e-12);
        assert!((lo.block_value(0, 0) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn constant_kernel_collapses() {
        let g = TypeGrid::uniform(12).unwrap();
        let k = KernelModel::constant(3.0).unwrap();
        for level in [1, 2, 3, 4, 6, 12] {
            let (up, lo) = make_step_kernels(&k, &g, level).unwrap();
            assert!(up.block_values().iter().all(|&v| v == 3.0));
            assert!(lo.block_values().iter().all(|&v| v == 3.0));
        }
    }

    #[test]
    fn misaligned_level_rejected() {
        let g = TypeGrid::uniform(10).unwrap();
        let k = KernelModel::constant(1.0).unwrap();
        assert!(make_step_kernels(&k, &g, 3).is_err());
        assert!(make_step_kernels(&k, &g, 0).is_err());
    }

    #[test]
    fn case_study_gap_shrinks() {
        let g = TypeGrid::uniform(100).unwrap();
        let k = KernelModel::case_study();
        let gap = |level| {
            let (up, lo) = make_step_kernels(&k, &g, level).unwrap();
            up.block_values()
                .iter()
                .zip(lo.block_values())
                .fold(0.0f64, |m, (u, l)| m.max(u - l))
        };
        assert!(gap(10) < gap(2));
    }

    #[test]
    fn refinement() {
        let a = BlockPartition::new(100, 10).unwrap();
        let b = BlockPartition::new(100, 20).unwrap();
        let c = BlockPartition::new(100, 25).unwrap();
        assert!(b.refines(&a));
        assert!(!c.refines(&a));
        assert!(a.refines(&a));
    }

    #[test]
    fn sandwich_and_monotone_refinement() {
        let g = TypeGrid::uniform(40).unwrap();
        let k = KernelModel::case_study();
        let base = k.tabulate(&g).unwrap();
        let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
        for level in [1, 2, 4, 20, 40] {
            let (up, lo) = make_step_kernels(&k, &g, level).unwrap();
            let (ut, lt) = (up.tabulate(), lo.tabulate());
            for idx in 0..base.len() {
                assert!(lt[idx] <= base[idx] && base[idx] <= ut[idx]);
            }
            if let Some((pu, pl)) = &prev {
                for idx in 0..base.len() {
                    assert!(ut[idx] <= pu[idx] && lt[idx] >= pl[idx]);
                }
            }
            prev = Some((ut, lt));
        }
    }
}
