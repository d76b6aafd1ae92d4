//! Graphs with finitely many vertex types.
//!
//! With `N` types, a discrete kernel `kd(l', l)` and initial masses
//! `nu_k^l(0)` (fraction of vertices of type `l` with threshold `k`), the
//! state after exploring a fraction `z^l` of infected type-`l` vertices is
//!
//! ```text
//! lambda^l(z) = Σ_{l'} kd(l', l) z^{l'}
//! nu_0^l(z)   = -z^l + Σ_{k'} nu_{k'}^l(0) P(Poisson(lambda^l) >= k')
//! nu_k^l(z)   = Σ_{k'>=k} nu_{k'}^l(0) p(k' - k, lambda^l),   k >= 1
//! ```
//!
//! The final fraction is `Σ_l z_hat^l` at the componentwise-minimal joint
//! zero `z_hat` of `nu_0`.

use crate::error::{Error, Result};
use crate::model::{BlockPartition, GridFunction, StepKernel, ThresholdMeasure, TypeGrid};
use crate::operators::poisson_term;

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteTypeSystem {
    type_count: usize,
    /// Row-major, entry `(l', l)` is the intensity from type `l'` to `l`.
    kernel_d: Vec<f64>,
    /// `initial_masses[l][k]`, absolute fractions summing to one.
    initial_masses: Vec<Vec<f64>>,
}

impl FiniteTypeSystem {
    pub fn new(kernel_d: Vec<f64>, initial_masses: Vec<Vec<f64>>) -> Result<Self> {
        let n = initial_masses.len();
        if n == 0 {
            return Err(Error::invalid("finite-type system needs at least one type"));
        }
        if kernel_d.len() != n * n {
            return Err(Error::invalid(format!(
                "discrete kernel has {} entries, expected {}",
                kernel_d.len(),
                n * n
            )));
        }
        if kernel_d.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("discrete kernel must be non-negative"));
        }
        if initial_masses
            .iter()
            .flatten()
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(Error::invalid("initial masses must be non-negative"));
        }
        let total: f64 = initial_masses.iter().flatten().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(format!(
                "initial masses sum to {total}, expected 1"
            )));
        }
        Ok(FiniteTypeSystem {
            type_count: n,
            kernel_d,
            initial_masses,
        })
    }

    /// Collapses each block of a step kernel into one type; threshold
    /// masses are the block integrals of the measure densities.
    pub fn from_step_kernel(
        step: &StepKernel,
        grid: &TypeGrid,
        measure: &ThresholdMeasure,
    ) -> Result<Self> {
        let partition = step.partition();
        if partition.cell_count() != grid.cell_count() || measure.cell_count() != grid.cell_count()
        {
            return Err(Error::invalid("step kernel, grid and measure sizes differ"));
        }
        let kmax = measure.support_max();
        let w = grid.weights();
        let masses = partition
            .blocks()
            .map(|r| {
                (0..=kmax)
                    .map(|k| r.clone().map(|c| measure.eta(k, c) * w[c]).sum())
                    .collect()
            })
            .collect();
        Self::new(step.block_values().to_vec(), masses)
    }

    pub fn type_count(&self) -> usize {
        self.type_count
    }

    pub fn max_threshold(&self) -> usize {
        self.initial_masses.iter().map(Vec::len).max().unwrap_or(1) - 1
    }

    /// Intensity from type `from` into type `to`.
    pub fn kernel(&self, from: usize, to: usize) -> f64 {
        self.kernel_d[from * self.type_count + to]
    }

    pub fn initial_mass(&self, l: usize, k: usize) -> f64 {
        self.initial_masses[l].get(k).copied().unwrap_or(0.0)
    }

    fn check_point(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.type_count {
            return Err(Error::invalid(format!(
                "point has {} components, system has {} types",
                z.len(),
                self.type_count
            )));
        }
        Ok(())
    }

    fn intensities(&self, z: &[f64]) -> Vec<f64> {
        (0..self.type_count)
            .map(|l| {
                (0..self.type_count)
                    .map(|lp| self.kernel(lp, l) * z[lp])
                    .sum()
            })
            .collect()
    }

    /// Infected mass reachable from `z`: `Σ_{k'} nu_{k'}^l(0) P(Poisson >= k')`.
    fn infected_mass(&self, l: usize, lambda: f64) -> f64 {
        let masses = &self.initial_masses[l];
        let mut below = 0.0f64;
        let mut total = 0.0;
        for (k, &nu) in masses.iter().enumerate() {
            total += nu * (1.0 - below).max(0.0);
            below += poisson_term(k, lambda).expect("intensity is non-negative");
        }
        total
    }

    /// `nu_k^l(z)` for every type `l` and `k = 0..=max_threshold`.
    pub fn nu_functions(&self, z: &[f64]) -> Result<NuValues> {
        self.check_point(z)?;
        if z.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("explored fractions must lie in [0, 1]"));
        }
        let lambda = self.intensities(z);
        let kmax = self.max_threshold();
        let values = (0..self.type_count)
            .map(|l| {
                let lam = lambda[l];
                let mut row = vec![-z[l] + self.infected_mass(l, lam)];
                row.extend((1..=kmax).map(|k| {
                    (k..=kmax)
                        .map(|kp| {
                            self.initial_mass(l, kp)
                                * poisson_term(kp - k, lam).expect("non-negative")
                        })
                        .sum::<f64>()
                }));
                row
            })
            .collect();
        Ok(NuValues { values })
    }

    /// Componentwise-minimal joint zero of `nu_0`, by the monotone map
    /// `z^l <- Σ_{k'} nu_{k'}^l(0) P(Poisson(lambda^l(z)) >= k')` from zero.
    pub fn first_joint_zero(&self, tolerance: f64, max_iterations: usize) -> Result<JointZero> {
        self.first_joint_zero_from(&vec![0.0; self.type_count], tolerance, max_iterations)
    }

    /// Same iteration started at `start`, which must lie below the minimal
    /// zero for the limit to be the minimal one.
    pub fn first_joint_zero_from(
        &self,
        start: &[f64],
        tolerance: f64,
        max_iterations: usize,
    ) -> Result<JointZero> {
        self.check_point(start)?;
        if !(tolerance > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        let mut z = start.to_vec();
        let mut step = f64::INFINITY;
        for iteration in 0..=max_iterations {
            let lambda = self.intensities(&z);
            let next: Vec<f64> = (0..self.type_count)
                .map(|l| self.infected_mass(l, lambda[l]))
                .collect();
            step = z
                .iter()
                .zip(&next)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if step < tolerance {
                let tau_hat = z.iter().sum();
                return Ok(JointZero {
                    z_hat: z,
                    tau_hat,
                    iterations: iteration,
                });
            }
            z = next;
        }
        Err(Error::Convergence {
            what: "finite-type joint zero iteration",
            iterations: max_iterations,
            residual: step,
            last: None,
            trace: Vec::new(),
        })
    }

    /// `max_l Σ_{l'} w^{l'} d nu_0^l / d z^{l'}` at `z`, that is
    /// `max_l (-w^l + (Σ_{l'} kd(l', l) w^{l'}) nu_1^l(z))`. Negative means
    /// the derivative condition holds along `w`.
    pub fn derivative_margin(&self, z: &[f64], w: &[f64]) -> Result<f64> {
        self.check_point(w)?;
        if w.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::invalid("direction must be componentwise positive"));
        }
        let nu = self.nu_functions(z)?;
        let mixed = self.intensities(w);
        Ok((0..self.type_count)
            .map(|l| -w[l] + mixed[l] * nu.get(l, 1))
            .fold(f64::NEG_INFINITY, f64::max))
    }

    /// Default direction `w^l = 1 / N`.
    pub fn uniform_direction(&self) -> Vec<f64> {
        vec![1.0 / self.type_count as f64; self.type_count]
    }
}

/// `nu_k^l(z)` values, indexed by type then threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct NuValues {
    values: Vec<Vec<f64>>,
}

impl NuValues {
    pub fn get(&self, l: usize, k: usize) -> f64 {
        self.values[l].get(k).copied().unwrap_or(0.0)
    }

    pub fn nu0(&self) -> Vec<f64> {
        self.values.iter().map(|r| r[0]).collect()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointZero {
    pub z_hat: Vec<f64>,
    pub tau_hat: f64,
    pub iterations: usize,
}

/// Piecewise-constant grid function with value `z^l / mu(block l)` on
/// block `l`.
pub fn embed_step_function(
    grid: &TypeGrid,
    partition: &BlockPartition,
    z: &[f64],
) -> Result<GridFunction> {
    if partition.cell_count() != grid.cell_count() || z.len() != partition.block_count() {
        return Err(Error::invalid("partition, grid and vector sizes differ"));
    }
    let masses = partition.block_masses(grid);
    let mut values = vec![0.0; grid.cell_count()];
    for (l, range) in partition.blocks().enumerate() {
        if masses[l] <= 0.0 {
            return Err(Error::invalid(format!("block {l} has zero measure")));
        }
        let v = z[l] / masses[l];
        values[range].iter_mut().for_each(|x| *x = v);
    }
    Ok(GridFunction::new(values))
}

/// Blockwise integrals of a grid function.
pub fn block_integrals(grid: &TypeGrid, partition: &BlockPartition, f: &GridFunction) -> Vec<f64> {
    let w = grid.weights();
    partition
        .blocks()
        .map(|r| r.map(|c| f[c] * w[c]).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar() -> FiniteTypeSystem {
        FiniteTypeSystem::new(vec![2.0], vec![vec![0.1, 0.9]]).unwrap()
    }

    #[test]
    fn validates_inputs() {
        assert!(FiniteTypeSystem::new(vec![1.0], vec![vec![0.5, 0.4]]).is_err());
        assert!(FiniteTypeSystem::new(vec![1.0, 1.0], vec![vec![0.5, 0.5]]).is_err());
        assert!(FiniteTypeSystem::new(vec![-1.0], vec![vec![1.0]]).is_err());
        assert!(FiniteTypeSystem::new(vec![], vec![]).is_err());
    }

    #[test]
    fn nu_at_zero_is_initial() {
        let sys = FiniteTypeSystem::new(
            vec![1.0, 2.0, 0.5, 3.0],
            vec![vec![0.1, 0.2, 0.1], vec![0.05, 0.25, 0.3]],
        )
        .unwrap();
        let nu = sys.nu_functions(&[0.0, 0.0]).unwrap();
        for l in 0..2 {
            for k in 0..3 {
                assert!((nu.get(l, k) - sys.initial_mass(l, k)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn scalar_closed_form() {
        let nu = scalar().nu_functions(&[0.3]).unwrap();
        let expected = -0.3 + 0.1 + 0.9 * (1.0 - (-0.6f64).exp());
        assert!((nu.get(0, 0) - expected).abs() < 1e-15);
        assert!((nu.get(0, 1) - 0.9 * (-0.6f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn symmetric_types() {
        let sys = FiniteTypeSystem::new(
            vec![1.0, 2.0, 2.0, 1.0],
            vec![vec![0.1, 0.2, 0.2], vec![0.1, 0.2, 0.2]],
        )
        .unwrap();
        let nu = sys.nu_functions(&[0.3, 0.3]).unwrap();
        assert_eq!(nu.rows()[0], nu.rows()[1]);
    }

    #[test]
    fn all_seeds_zero() {
        let sys =
            FiniteTypeSystem::new(vec![1.0, 1.0, 1.0, 1.0], vec![vec![0.3], vec![0.7]]).unwrap();
        let jz = sys.first_joint_zero(1e-12, 100).unwrap();
        assert_eq!(jz.z_hat, vec![0.3, 0.7]);
        assert!((jz.tau_hat - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_kernel_margin() {
        let sys =
            FiniteTypeSystem::new(vec![0.0; 4], vec![vec![0.2, 0.3], vec![0.1, 0.4]]).unwrap();
        let z = [0.2, 0.1];
        let w = [0.3, 0.6];
        assert!((sys.derivative_margin(&z, &w).unwrap() + 0.3).abs() < 1e-15);
        assert!(sys.derivative_margin(&z, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn scalar_margin_matches_slope() {
        let sys = scalar();
        let z = sys.first_joint_zero(1e-14, 10_000).unwrap().z_hat[0];
        let margin = sys.derivative_margin(&[z], &[1.0]).unwrap();
        let nu1 = 0.9 * (-2.0 * z).exp();
        assert!((margin - (-1.0 + 2.0 * nu1)).abs() < 1e-12);
        let h = 1e-6;
        let nu0 = |x: f64| sys.nu_functions(&[x]).unwrap().get(0, 0);
        let fd = (nu0(z + h) - nu0(z - h)) / (2.0 * h);
        assert_eq!(margin.signum(), fd.signum());
        assert!((fd - margin).abs() < 1e-6);
    }

    #[test]
    fn embedding_examples() {
        let g1 = TypeGrid::uniform(4).unwrap();
        let p1 = BlockPartition::new(4, 1).unwrap();
        let f = embed_step_function(&g1, &p1, &[0.4]).unwrap();
        assert!(f.values().iter().all(|v| (v - 0.4).abs() < 1e-15));

        let g2 = TypeGrid::uniform(6).unwrap();
        let p2 = BlockPartition::new(6, 2).unwrap();
        let f = embed_step_function(&g2, &p2, &[0.1, 0.3]).unwrap();
        assert!((f[0] - 0.2).abs() < 1e-15 && (f[5] - 0.6).abs() < 1e-15);
        let back = block_integrals(&g2, &p2, &f);
        assert!((back[0] - 0.1).abs() < 1e-15 && (back[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn embedding_rejects_zero_block() {
        let g = TypeGrid::with_weights(vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let p = BlockPartition::new(4, 2).unwrap();
        assert!(embed_step_function(&g, &p, &[0.1, 0.2]).is_err());
    }
}
