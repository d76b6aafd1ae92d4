use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::TypeGrid;

type KernelFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// Safety factor applied when the kernel bound is estimated from samples.
const BOUND_SAFETY: f64 = 1.0 + 1e-6;

/// A non-negative, bounded connection kernel on `[0, 1]^2`.
///
/// A directed edge `i -> j` between vertices of types `x` and `y` is present
/// with probability `min(1, kernel(x, y) / n)`.
#[derive(Clone)]
pub struct KernelModel {
    name: String,
    bound: f64,
    eval: Arc<KernelFn>,
}

impl fmt::Debug for KernelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelModel")
            .field("name", &self.name)
            .field("bound", &self.bound)
            .finish()
    }
}

impl KernelModel {
    /// Wraps an arbitrary kernel with a caller-supplied bound.
    pub fn new(
        name: impl Into<String>,
        bound: f64,
        eval: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !bound.is_finite() || bound < 0.0 {
            return Err(Error::invalid(
                "kernel bound must be finite and non-negative",
            ));
        }
        Ok(KernelModel {
            name: name.into(),
            bound,
            eval: Arc::new(eval),
        })
    }

    /// Wraps an arbitrary kernel and estimates its bound from the grid
    /// midpoints and cell edges. Fails if a negative value is found.
    pub fn with_estimated_bound(
        name: impl Into<String>,
        grid: &TypeGrid,
        eval: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let mut max = 0.0f64;
        for pts in [grid.midpoints(), grid.edges()] {
            for &x in pts {
                for &y in pts {
                    let v = eval(x, y);
                    if !v.is_finite() || v < 0.0 {
                        return Err(Error::invalid(format!(
                            "kernel value {v} at ({x}, {y}) is negative or not finite"
                        )));
                    }
                    max = max.max(v);
                }
            }
        }
        Self::new(name, max * BOUND_SAFETY, eval)
    }

    /// `10 sqrt(x^2 + y^2) / (1 + sqrt|x - y|)`: clustering along the
    /// diagonal, connectivity increasing in the type.
    pub fn case_study() -> Self {
        KernelModel {
            name: "case_study".into(),
            bound: 10.0 * std::f64::consts::SQRT_2,
            eval: Arc::new(|x: f64, y: f64| 10.0 * x.hypot(y) / (1.0 + (x - y).abs().sqrt())),
        }
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !c.is_finite() || c < 0.0 {
            return Err(Error::invalid(
                "constant kernel must be finite and non-negative",
            ));
        }
        Self::new(format!("constant:{c}"), c, move |_, _| c)
    }

    /// Rank-one kernel `phi(x) phi(y)` with `phi(x) = sum_i coeffs[i] x^i`.
    pub fn product(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid(
                "product kernel needs finite polynomial coefficients",
            ));
        }
        let phi = polynomial(coeffs.clone());
        // Dense scan of phi on [0, 1]; phi must stay non-negative.
        let mut max = 0.0f64;
        for i in 0..=10_000 {
            let v = phi(i as f64 / 10_000.0);
            if v < 0.0 {
                return Err(Error::invalid(
                    "product kernel factor is negative on [0, 1]",
                ));
            }
            max = max.max(v);
        }
        let name = format!(
            "product:{}",
            coeffs
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(",")
        );
        Self::new(name, max * max * BOUND_SAFETY, move |x, y| phi(x) * phi(y))
    }

    /// Piecewise-constant kernel from a square table of values on an
    /// equal-width partition of `[0, 1]`. Row index is the source type.
    pub fn table(name: impl Into<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let t = rows.len();
        if t == 0 || rows.iter().any(|r| r.len() != t) {
            return Err(Error::invalid(
                "kernel table must be a non-empty square matrix",
            ));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        if flat.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(
                "kernel table entries must be finite and non-negative",
            ));
        }
        let bound = flat.iter().copied().fold(0.0, f64::max);
        let cell = move |x: f64| ((x * t as f64).floor() as usize).min(t - 1);
        Self::new(name, bound, move |x, y| flat[cell(x) * t + cell(y)])
    }

    /// Reads a comma-separated square matrix (one row per line; blank lines
    /// and lines starting with `#` are skipped).
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::invalid(format!("cannot read kernel table {}: {e}", path.display()))
        })?;
        let rows = parse_csv_matrix(&text)?;
        Self::table(format!("table:{}", path.display()), rows)
    }

    /// The grid tabulation as a piecewise-constant kernel: value on cell
    /// pair `(i, j)` equals the kernel at the midpoints `(x_i, x_j)`.
    pub fn tabulated(&self, grid: &TypeGrid) -> Self {
        let m = grid.cell_count();
        let mids = grid.midpoints();
        let mut flat = Vec::with_capacity(m * m);
        for &x in mids {
            for &y in mids {
                flat.push(self.evaluate(x, y));
            }
        }
        let bound = flat.iter().copied().fold(0.0, f64::max);
        let grid = grid.clone();
        KernelModel {
            name: format!("{}@grid{m}", self.name),
            bound,
            eval: Arc::new(move |x, y| flat[grid.cell_of(x) * m + grid.cell_of(y)]),
        }
    }

    /// Parses a kernel selector: `case_study`, `constant:c`,
    /// `product:c0,c1,...` (polynomial factor) or `table:<path>`. Relative
    /// table paths resolve against `base_dir`.
    pub fn from_spec(spec: &str, base_dir: &Path) -> Result<Self> {
        let (kind, arg) = match spec.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (spec.trim(), None),
        };
        match (kind, arg) {
            ("case_study", None) => Ok(Self::case_study()),
            ("constant", Some(a)) => Self::constant(parse_f64(a)?),
            ("product", Some(a)) => {
                let coeffs = a.split(',').map(parse_f64).collect::<Result<Vec<_>>>()?;
                Self::product(coeffs)
            }
            ("table", Some(p)) => Self::from_csv(&base_dir.join(p)),
            _ => Err(Error::invalid(format!("unknown kernel selector '{spec}'"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    #[inline]
    pub fn evaluate(&self, x: f64, y: f64) -> f64 {
        (self.eval)(x, y)
    }

    /// Kernel values at all midpoint pairs, row-major with the source type
    /// as row index. Fails if a value is negative or exceeds the bound.
    pub fn tabulate(&self, grid: &TypeGrid) -> Result<Vec<f64>> {
        let mids = grid.midpoints();
        let mut out = Vec::with_capacity(mids.len() * mids.len());
        for &x in mids {
            for &y in mids {
                let v = self.evaluate(x, y);
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::invalid(format!(
                        "kernel '{}' is negative or not finite at ({x}, {y})",
                        self.name
                    )));
                }
                if v > self.bound * (1.0 + 1e-12) {
                    return Err(Error::invalid(format!(
                        "kernel '{}' value {v} at ({x}, {y}) exceeds its bound {}",
                        self.name, self.bound
                    )));
                }
                out.push(v);
            }
        }
        Ok(out)
    }
}

fn polynomial(coeffs: Vec<f64>) -> impl Fn(f64) -> f64 + Send + Sync + Clone {
    move |x| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::invalid(format!("cannot parse '{s}' as a number")))
}

pub(crate) fn parse_csv_matrix(text: &str) -> Result<Vec<Vec<f64>>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.split(',').map(parse_f64).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_study_values() {
        let k = KernelModel::case_study();
        assert_eq!(k.evaluate(0.0, 0.0), 0.0);
        assert!((k.evaluate(1.0, 1.0) - 10.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!((k.evaluate(1.0, 0.0) - 5.0).abs() < 1e-12);
        assert!((k.bound() - 14.142135623730951).abs() < 1e-12);
    }

    #[test]
    fn case_study_bounded_on_grid() {
        let g = TypeGrid::uniform(200).unwrap();
        let t = KernelModel::case_study().tabulate(&g).unwrap();
        assert!(t.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn product_kernel() {
        let k = KernelModel::product(vec![0.0, 2.0]).unwrap();
        assert!((k.evaluate(0.5, 0.25) - 0.5).abs() < 1e-12);
        assert!(k.bound() >= 4.0);
        assert!(KernelModel::product(vec![0.5, -1.0]).is_err());
    }

    #[test]
    fn table_lookup() {
        let k = KernelModel::table("t", vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(k.evaluate(0.1, 0.9), 2.0);
        assert_eq!(k.evaluate(1.0, 0.0), 3.0);
        assert_eq!(k.bound(), 4.0);
        assert!(KernelModel::table("t", vec![vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn spec_parsing() {
        let dir = Path::new(".");
        assert_eq!(
            KernelModel::from_spec("case_study", dir).unwrap().name(),
            "case_study"
        );
        assert_eq!(
            KernelModel::from_spec("constant:2.5", dir).unwrap().bound(),
            2.5
        );
        let p = KernelModel::from_spec("product:1,1", dir).unwrap();
        assert!((p.evaluate(1.0, 1.0) - 4.0).abs() < 1e-12);
        assert!(KernelModel::from_spec("bogus", dir).is_err());
        assert!(KernelModel::from_spec("constant:-1", dir).is_err());
    }

    #[test]
    fn estimated_bound_covers_midpoints() {
        let g = TypeGrid::uniform(10).unwrap();
        let k = KernelModel::with_estimated_bound("sum", &g, |x, y| x + y).unwrap();
        assert!(k.bound() >= 2.0);
        assert!(KernelModel::with_estimated_bound("neg", &g, |x, _| x - 0.5).is_err());
    }

    #[test]
    fn tabulated_kernel_is_piecewise_constant() {
        let g = TypeGrid::uniform(4).unwrap();
        let k = KernelModel::case_study();
        let t = k.tabulated(&g);
        assert_eq!(t.evaluate(0.01, 0.99), k.evaluate(0.125, 0.875));
        assert_eq!(t.evaluate(0.2, 0.3), k.evaluate(0.125, 0.375));
    }
}
