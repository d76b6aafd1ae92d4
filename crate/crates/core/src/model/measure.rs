use crate::error::{Error, Result};
use crate::model::{GridFunction, TypeGrid};

/// Default truncation level for thresholds.
pub const DEFAULT_MAX_THRESHOLD: usize = 64;

/// Joint law of (threshold, type): per-threshold densities `eta_k` against
/// the type distribution, for `k = 0..=max_threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdMeasure {
    densities: Vec<GridFunction>,
    tail_mass: f64,
    /// Largest `k` whose density is not identically zero.
    support_max: usize,
}

impl ThresholdMeasure {
    /// Builds the measure from `(threshold, density)` pairs. Densities may be
    /// unnormalized; each cell is rescaled so the retained densities sum to
    /// one. Mass on thresholds above `max_threshold` is dropped and reported
    /// as `tail_mass`. Repeated thresholds are summed.
    pub fn new(
        grid: &TypeGrid,
        entries: &[(usize, GridFunction)],
        max_threshold: usize,
    ) -> Result<Self> {
        let m = grid.cell_count();
        if entries.is_empty() {
            return Err(Error::invalid(
                "threshold measure needs at least one density",
            ));
        }
        let mut densities = vec![vec![0.0; m]; max_threshold + 1];
        let mut dropped = vec![0.0; m];
        for (k, density) in entries {
            density.check_len(m)?;
            density
                .check_nonnegative()
                .map_err(|e| Error::invalid(format!("density for threshold {k}: {e}")))?;
            let target = match densities.get_mut(*k) {
                Some(d) => d,
                None => &mut dropped,
            };
            for (t, v) in target.iter_mut().zip(density.values()) {
                *t += v;
            }
        }

        let mut tail_mass = 0.0;
        for c in 0..m {
            let kept: f64 = densities.iter().map(|d| d[c]).sum();
            if kept <= 0.0 {
                return Err(Error::invalid(format!(
                    "no retained threshold mass at cell {c}"
                )));
            }
            let total = kept + dropped[c];
            for d in densities.iter_mut() {
                d[c] /= kept;
            }
            tail_mass += grid.weights()[c] * dropped[c] / total;
        }

        let support_max = densities
            .iter()
            .rposition(|d| d.iter().any(|&v| v > 0.0))
            .unwrap_or(0);
        Ok(ThresholdMeasure {
            densities: densities.into_iter().map(GridFunction::new).collect(),
            tail_mass,
            support_max,
        })
    }

    /// Type-independent measure from `(threshold, probability)` constants.
    pub fn constant(
        grid: &TypeGrid,
        entries: &[(usize, f64)],
        max_threshold: usize,
    ) -> Result<Self> {
        let m = grid.cell_count();
        let entries: Vec<_> = entries
            .iter()
            .map(|&(k, p)| (k, GridFunction::constant(m, p)))
            .collect();
        Self::new(grid, &entries, max_threshold)
    }

    /// Seeds `seed_fraction` of the vertices; all others have threshold `k`.
    pub fn seeded(grid: &TypeGrid, seed_fraction: f64, k: usize) -> Result<Self> {
        Self::constant(
            grid,
            &[(0, seed_fraction), (k, 1.0 - seed_fraction)],
            DEFAULT_MAX_THRESHOLD.max(k),
        )
    }

    /// Reads a CSV table with one row per grid cell and one column per
    /// threshold `0, 1, ...` (lines starting with `#` are skipped).
    pub fn from_csv_text(grid: &TypeGrid, text: &str, max_threshold: usize) -> Result<Self> {
        let rows = crate::model::kernel::parse_csv_matrix(text)?;
        if rows.len() != grid.cell_count() {
            return Err(Error::invalid(format!(
                "threshold table has {} rows, grid has {} cells",
                rows.len(),
                grid.cell_count()
            )));
        }
        let width = rows.iter().map(Vec::len).max().unwrap_or(0);
        let entries: Vec<_> = (0..width)
            .map(|k| {
                let col = rows
                    .iter()
                    .map(|r| r.get(k).copied().unwrap_or(0.0))
                    .collect();
                (k, GridFunction::new(col))
            })
            .collect();
        Self::new(grid, &entries, max_threshold)
    }

    pub fn max_threshold(&self) -> usize {
        self.densities.len() - 1
    }

    /// Largest threshold carrying positive density somewhere.
    pub fn support_max(&self) -> usize {
        self.support_max
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn density(&self, k: usize) -> &GridFunction {
        &self.densities[k]
    }

    pub fn densities(&self) -> &[GridFunction] {
        &self.densities
    }

    /// `eta_k` at cell `c`, zero beyond the truncation level.
    #[inline]
    pub fn eta(&self, k: usize, c: usize) -> f64 {
        self.densities.get(k).map_or(0.0, |d| d[c])
    }

    pub fn cell_count(&self) -> usize {
        self.densities[0].len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_study_measure() {
        let g = TypeGrid::uniform(10).unwrap();
        let m =
            ThresholdMeasure::constant(&g, &[(0, 0.1), (2, 0.9)], DEFAULT_MAX_THRESHOLD).unwrap();
        assert_eq!(m.max_threshold(), 64);
        assert_eq!(m.support_max(), 2);
        for c in 0..10 {
            assert!((m.eta(0, c) - 0.1).abs() < 1e-15);
            assert_eq!(m.eta(1, c), 0.0);
            assert!((m.eta(2, c) - 0.9).abs() < 1e-15);
        }
        assert_eq!(m.tail_mass(), 0.0);
    }

    #[test]
    fn degenerate_measures() {
        let g = TypeGrid::uniform(3).unwrap();
        let all_seed = ThresholdMeasure::constant(&g, &[(0, 1.0)], 4).unwrap();
        assert_eq!(all_seed.support_max(), 0);
        let unit = ThresholdMeasure::constant(&g, &[(1, 1.0)], 4).unwrap();
        assert_eq!(unit.eta(0, 0), 0.0);
        assert_eq!(unit.eta(1, 2), 1.0);
    }

    #[test]
    fn normalizes_any_scaling() {
        let g = TypeGrid::uniform(4).unwrap();
        let entries = vec![
            (0, GridFunction::new(vec![1.0, 2.0, 0.0, 5.0])),
            (3, GridFunction::new(vec![3.0, 2.0, 7.0, 5.0])),
        ];
        let m = ThresholdMeasure::new(&g, &entries, 8).unwrap();
        for c in 0..4 {
            let s: f64 = (0..=8).map(|k| m.eta(k, c)).sum();
            assert!((s - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn truncation_records_tail() {
        let g = TypeGrid::uniform(2).unwrap();
        let m = ThresholdMeasure::constant(&g, &[(0, 0.5), (1, 0.25), (9, 0.25)], 4).unwrap();
        assert!((m.tail_mass() - 0.25).abs() < 1e-15);
        assert!((m.eta(0, 0) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        let g = TypeGrid::uniform(2).unwrap();
        let neg = vec![(0, GridFunction::new(vec![0.5, -0.1]))];
        assert!(ThresholdMeasure::new(&g, &neg, 4).is_err());
        let zero_col = vec![(0, GridFunction::new(vec![0.5, 0.0]))];
        assert!(ThresholdMeasure::new(&g, &zero_col, 4).is_err());
        assert!(ThresholdMeasure::new(&g, &[], 4).is_err());
    }

    #[test]
    fn csv_table() {
        let g = TypeGrid::uniform(2).unwrap();
        let m = ThresholdMeasure::from_csv_text(&g, "# k0,k1\n0.2,0.8\n1,0\n", 4).unwrap();
        assert!((m.eta(1, 0) - 0.8).abs() < 1e-15);
        assert_eq!(m.eta(0, 1), 1.0);
        assert!(ThresholdMeasure::from_csv_text(&g, "1,0\n", 4).is_err());
    }
}
