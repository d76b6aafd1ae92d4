use std::path::{Path, PathBuf};

use bootperc::model::{KernelModel, ThresholdMeasure, TypeGrid, DEFAULT_MAX_THRESHOLD};
use bootperc::resilience::{DEFAULT_POWER_STEPS, DEFAULT_TOLERANCE_BAND};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// One experiment, as read from a TOML file. Every section except
/// `[kernel]` and `[measure]` has defaults; the resolved form (defaults
/// filled in) is echoed next to the outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kernel: KernelConfig,
    pub measure: MeasureConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub sandwich: SandwichConfig,
    #[serde(default)]
    pub finite: FiniteConfig,
    #[serde(default)]
    pub resilience: ResilienceConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    /// `case_study`, `constant:c`, `product:c0,c1,...` or `table:<csv>`.
    pub spec: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdMass {
    pub k: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    /// Type-independent threshold masses.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub thresholds: Vec<ThresholdMass>,
    /// CSV with one row per grid cell and one column per threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
    #[serde(default = "default_max_threshold")]
    pub max_threshold: usize,
}

fn default_max_threshold() -> usize {
    DEFAULT_MAX_THRESHOLD
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub cells: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { cells: 1000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Also train the neural approximation.
    pub nn: bool,
    pub gamma: f64,
    pub hidden: Vec<usize>,
    /// `adam` or `gradient_descent`.
    pub optimizer: String,
    pub learning_rate: Option<f64>,
    pub max_steps: Option<usize>,
    pub stop_epsilon: Option<f64>,
    /// Training cells per step; all cells when absent.
    pub sample_count: Option<usize>,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-10,
            max_iterations: 10_000,
            nn: false,
            gamma: 1e-3,
            hidden: vec![20, 20],
            optimizer: "adam".into(),
            learning_rate: None,
            max_steps: None,
            stop_epsilon: None,
            sample_count: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub n: Vec<usize>,
    pub runs: usize,
    pub bins: usize,
    pub base_seed: u64,
    /// `dense` or `thinned`.
    pub sampler: String,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n: vec![3000],
            runs: 200,
            bins: 1000,
            base_seed: 7,
            sampler: "dense".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SandwichConfig {
    pub levels: Vec<usize>,
}

impl Default for SandwichConfig {
    fn default() -> Self {
        SandwichConfig {
            levels: vec![10, 50, 250],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiniteConfig {
    /// Number of blocks when the system is derived from a step kernel.
    pub level: usize,
    /// `lower` or `upper` step kernel.
    pub side: String,
    /// Explicit discrete kernel (row = source type); overrides `level`.
    pub kernel: Option<Vec<Vec<f64>>>,
    /// Explicit masses `[type][threshold]`, used with `kernel`.
    pub masses: Option<Vec<Vec<f64>>>,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FiniteConfig {
    fn default() -> Self {
        FiniteConfig {
            level: 10,
            side: "lower".into(),
            kernel: None,
            masses: None,
            tolerance: 1e-12,
            max_iterations: 100_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResilienceConfig {
    pub band: f64,
    pub power_steps: usize,
}

impl Default for ResilienceConfig {
    fn default() -> Self {
        ResilienceConfig {
            band: DEFAULT_TOLERANCE_BAND,
            power_steps: DEFAULT_POWER_STEPS,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
        }
    }
}

/// A loaded config plus the directory relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let parent = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let base_dir = std::fs::canonicalize(parent).unwrap_or_else(|_| parent.to_path_buf());
        let mut loaded = LoadedConfig { config, base_dir };
        loaded.resolve_paths();
        loaded.validate()?;
        Ok(loaded)
    }

    /// Rewrites relative file references so the echoed config is usable
    /// from any working directory.
    fn resolve_paths(&mut self) {
        let base = &self.base_dir;
        if let Some(rest) = self.config.kernel.spec.strip_prefix("table:") {
            let p = Path::new(rest.trim());
            if p.is_relative() {
                self.config.kernel.spec = format!("table:{}", base.join(p).display());
            }
        }
        if let Some(t) = &self.config.measure.table {
            if t.is_relative() {
                self.config.measure.table = Some(base.join(t));
            }
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        let c = &self.config;
        let bad = |msg: &str| Err(CliError::Config(msg.to_string()));
        if c.grid.cells == 0 {
            return bad("grid.cells must be positive");
        }
        if !(c.solver.tolerance > 0.0) {
            return bad("solver.tolerance must be positive");
        }
        if !(c.solver.gamma > 0.0 && c.solver.gamma < 1.0) {
            return bad("solver.gamma must lie in (0, 1)");
        }
        if !matches!(c.solver.optimizer.as_str(), "adam" | "gradient_descent") {
            return bad("solver.optimizer must be 'adam' or 'gradient_descent'");
        }
        if c.simulation.n.iter().any(|&n| n < 2) {
            return bad("simulation.n entries must be at least 2");
        }
        if c.simulation.runs == 0 || c.simulation.bins == 0 {
            return bad("simulation.runs and simulation.bins must be positive");
        }
        if !matches!(c.simulation.sampler.as_str(), "dense" | "thinned") {
            return bad("simulation.sampler must be 'dense' or 'thinned'");
        }
        if !matches!(c.finite.side.as_str(), "lower" | "upper") {
            return bad("finite.side must be 'lower' or 'upper'");
        }
        if c.finite.kernel.is_some() != c.finite.masses.is_some() {
            return bad("finite.kernel and finite.masses must be given together");
        }
        if !(c.resilience.band >= 0.0) {
            return bad("resilience.band must be non-negative");
        }
        match (&c.measure.table, c.measure.thresholds.is_empty()) {
            (Some(t), true) => {
                if !t.exists() {
                    return Err(CliError::Config(format!(
                        "measure table {} does not exist",
                        t.display()
                    )));
                }
            }
            (None, false) => {}
            _ => return bad("measure needs exactly one of 'thresholds' or 'table'"),
        }
        if let Some(rest) = c.kernel.spec.strip_prefix("table:") {
            if !Path::new(rest.trim()).exists() {
                return Err(CliError::Config(format!(
                    "kernel table {rest} does not exist"
                )));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TypeGrid, CliError> {
        TypeGrid::uniform(self.config.grid.cells).map_err(CliError::config)
    }

    pub fn kernel(&self) -> Result<KernelModel, CliError> {
        // Table paths were already resolved against the config directory.
        KernelModel::from_spec(&self.config.kernel.spec, Path::new(".")).map_err(CliError::config)
    }

    pub fn measure(&self, grid: &TypeGrid) -> Result<ThresholdMeasure, CliError> {
        let m = &self.config.measure;
        match &m.table {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Config(format!("cannot read {}: {e}", path.display()))
                })?;
                ThresholdMeasure::from_csv_text(grid, &text, m.max_threshold)
                    .map_err(CliError::config)
            }
            None => {
                let entries: Vec<(usize, f64)> =
                    m.thresholds.iter().map(|t| (t.k, t.mass)).collect();
                ThresholdMeasure::constant(grid, &entries, m.max_threshold)
                    .map_err(CliError::config)
            }
        }
    }

    /// Threshold masses when they do not depend on the type.
    pub fn constant_masses(&self) -> Option<Vec<f64>> {
        let m = &self.config.measure;
        if m.table.is_some() {
            return None;
        }
        let kmax = m.thresholds.iter().map(|t| t.k).max()?;
        let mut out = vec![0.0; kmax + 1];
        for t in &m.thresholds {
            out[t.k] += t.mass;
        }
        let total: f64 = out.iter().sum();
        Some(out.into_iter().map(|v| v / total).collect())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(&self.config).expect("config is serializable")
    }
}

impl CliError {
    pub fn config(e: bootperc::Error) -> Self {
        CliError::Config(e.to_string())
    }
}
