use bootperc::finite_type::FiniteTypeSystem;
use bootperc::fixed_point::{
    coupling_sandwich, solve_nn, solve_picard, ConditionStatus, FixedPointResult,
    LearningRateSchedule, NeuralApproximator, NnOptions, PicardOptions,
};
use bootperc::model::{make_step_kernels, GridFunction, KernelModel, TypeGrid};
use bootperc::operators::OperatorContext;
use bootperc::oracle::{rank_one_eigenvalue, rank_one_fixed_point};
use bootperc::resilience::{classify, derivative_at_zero, PointwiseWitness, Verdict};
use bootperc::simulator::{monte_carlo, EdgeSampler, SimulationModel};
use serde::Serialize;

use crate::config::LoadedConfig;
use crate::error::CliError;
use crate::output::OutputDir;

/// Library errors: bad inputs are configuration problems, solver
/// failures are numerical ones.
fn lib(e: bootperc::Error) -> CliError {
    match e {
        bootperc::Error::InvalidArgument(_) => CliError::config(e),
        bootperc::Error::Convergence { .. } => CliError::numeric(e),
    }
}

struct Setup {
    grid: TypeGrid,
    kernel: KernelModel,
    ctx: OperatorContext,
}

fn setup(cfg: &LoadedConfig) -> Result<Setup, CliError> {
    let grid = cfg.grid()?;
    let kernel = cfg.kernel()?;
    let measure = cfg.measure(&grid)?;
    let ctx = OperatorContext::new(grid.clone(), &kernel, measure).map_err(lib)?;
    Ok(Setup { grid, kernel, ctx })
}

fn picard_options(cfg: &LoadedConfig, check_derivative: bool) -> PicardOptions {
    PicardOptions {
        tolerance: cfg.config.solver.tolerance,
        max_iterations: cfg.config.solver.max_iterations,
        check_derivative,
        ..PicardOptions::default()
    }
}

#[derive(Serialize)]
struct ConditionReport {
    status: ConditionStatus,
    margin: f64,
    spectral_radius: Option<f64>,
}

#[derive(Serialize)]
struct NnReport {
    integral: f64,
    residual: f64,
    steps: usize,
    objective: f64,
    picard_gap: f64,
}

#[derive(Serialize)]
struct FixedPointReport<'a> {
    kernel_name: &'a str,
    grid_size: usize,
    integral: f64,
    residual: f64,
    iterations: usize,
    derivative_condition: Option<ConditionReport>,
    nn: Option<NnReport>,
}

fn condition(r: &FixedPointResult) -> Option<ConditionReport> {
    r.derivative_condition.as_ref().map(|c| ConditionReport {
        status: c.status,
        margin: c.margin,
        spectral_radius: c.spectral_radius,
    })
}

fn nn_options(cfg: &LoadedConfig) -> NnOptions {
    let s = &cfg.config.solver;
    let mut opts = if s.optimizer == "adam" {
        NnOptions::adam(s.gamma)
    } else {
        NnOptions::gradient_descent(s.gamma)
    };
    if let Some(lr) = s.learning_rate {
        opts.schedule = LearningRateSchedule {
            initial: lr,
            ..opts.schedule
        };
    }
    if let Some(v) = s.max_steps {
        opts.max_steps = v;
    }
    if let Some(v) = s.stop_epsilon {
        opts.stop_epsilon = v;
    }
    if let Some(v) = s.sample_count {
        opts.sample_count = v;
    }
    opts.seed = s.seed;
    opts
}

pub fn solve(cfg: &LoadedConfig, out: &OutputDir) -> Result<(), CliError> {
    let s = setup(cfg)?;
    let picard = solve_picard(&s.ctx, &picard_options(cfg, true)).map_err(lib)?;
    out.csv(
        "trace.csv",
        "trace",
        "iteration,residual,integral",
        picard
            .trace
            .iter()
            .map(|r| format!("{},{:e},{}", r.iteration, r.residual, r.integral)),
    )?;

    let solver = &cfg.config.solver;
    let mut nn_values: Option<GridFunction> = None;
    let mut nn_report = None;
    let mut nn_error = None;
    if solver.nn {
        let mut net =
            NeuralApproximator::new(&solver.hidden, solver.gamma, solver.seed).map_err(lib)?;
        match solve_nn(&s.ctx, &mut net, &nn_options(cfg)) {
            Ok(r) => {
                nn_report = Some(NnReport {
                    integral: r.integral,
                    residual: r.residual,
                    steps: r.iterations,
                    objective: r.trace.last().map_or(f64::NAN, |t| t.residual),
                    picard_gap: (r.integral - picard.integral).abs(),
                });
                nn_values = Some(r.f_hat);
            }
            Err(e) => nn_error = Some(lib(e)),
        }
    }

    let report = FixedPointReport {
        kernel_name: s.kernel.name(),
        grid_size: s.grid.cell_count(),
        integral: picard.integral,
        residual: picard.residual,
        iterations: picard.iterations,
        derivative_condition: condition(&picard),
        nn: nn_report,
    };
    out.json("fixedpoint.json", "fixedpoint", &report)?;
    let mids = s.grid.midpoints();
    match &nn_values {
        Some(nn) => out.csv(
            "fhat.csv",
            "fhat",
            "midpoint,value,nn_value",
            (0..mids.len()).map(|i| format!("{},{},{}", mids[i], picard.f_hat[i], nn[i])),
        )?,
        None => out.csv(
            "fhat.csv",
            "fhat",
            "midpoint,value",
            (0..mids.len()).map(|i| format!("{},{}", mids[i], picard.f_hat[i])),
        )?,
    }
    eprintln!(
        "integral {:.6} after {} iterations (residual {:.2e})",
        picard.integral, picard.iterations, picard.residual
    );
    match nn_error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct SizeSummary {
    n: usize,
    runs: usize,
    mean: f64,
    std: f64,
    min: f64,
    max: f64,
}

#[derive(Serialize)]
struct SimulationReport<'a> {
    kernel_name: &'a str,
    sampler: &'a str,
    base_seed: u64,
    bins: usize,
    fixed_point_integral: f64,
    sizes: Vec<SizeSummary>,
}

pub fn simulate(cfg: &LoadedConfig, out: &OutputDir) -> Result<(), CliError> {
    let s = setup(cfg)?;
    let sim = &cfg.config.simulation;
    let fhat = solve_picard(&s.ctx, &picard_options(cfg, false)).map_err(lib)?;
    let sampler: EdgeSampler = sim.sampler.parse().map_err(lib)?;
    let model = SimulationModel::new(s.kernel.clone(), s.grid.clone(), s.ctx.measure())
        .map_err(lib)?
        .with_sampler(sampler);

    let mut run_rows = Vec::new();
    let mut bin_rows = Vec::new();
    let mut sizes = Vec::new();
    for &n in &sim.n {
        let summary = monte_carlo(&model, n, sim.runs, sim.base_seed, sim.bins).map_err(lib)?;
        for r in &summary.records {
            run_rows.push(format!(
                "{},{},{},{}",
                r.seed,
                r.n,
                r.final_fraction(),
                r.rounds
            ));
        }
        let width = 1.0 / sim.bins as f64;
        for (b, mean) in summary.per_bin_mean.iter().enumerate() {
            let left = b as f64 * width;
            let right = if b + 1 == sim.bins {
                1.0
            } else {
                (b + 1) as f64 * width
            };
            let fv = fhat.f_hat.interpolate(&s.grid, 0.5 * (left + right));
            let m = mean.map_or(String::new(), |m| m.to_string());
            bin_rows.push(format!("{n},{left},{right},{m},{fv}"));
        }
        eprintln!(
            "n = {n}: mean {:.4}, std {:.4}, range [{:.4}, {:.4}]",
            summary.mean, summary.std, summary.min, summary.max
        );
        sizes.push(SizeSummary {
            n,
            runs: summary.runs,
            mean: summary.mean,
            std: summary.std,
            min: summary.min,
            max: summary.max,
        });
    }
    out.csv("runs.csv", "runs", "seed,n,final_fraction,rounds", run_rows)?;
    out.csv(
        "bins.csv",
        "bins",
        "n,bin_left,bin_right,mean_infected_fraction,fhat_value",
        bin_rows,
    )?;
    out.json(
        "summary.json",
        "simulation_summary",
        &SimulationReport {
            kernel_name: s.kernel.name(),
            sampler: &sim.sampler,
            base_seed: sim.base_seed,
            bins: sim.bins,
            fixed_point_integral: fhat.integral,
            sizes,
        },
    )
}

pub fn sandwich(cfg: &LoadedConfig, out: &OutputDir) -> Result<(), CliError> {
    let s = setup(cfg)?;
    let report = coupling_sandwich(
        &s.ctx,
        &cfg.config.sandwich.levels,
        &picard_options(cfg, false),
    )
    .map_err(lib)?;
    out.csv(
        "sandwich.csv",
        "sandwich",
        "level,lower_integral,upper_integral,width",
        report.levels.iter().map(|l| {
            format!(
                "{},{},{},{}",
                l.level,
                l.lower_integral,
                l.upper_integral,
                l.width()
            )
        }),
    )?;
    for l in &report.levels {
        eprintln!(
            "level {}: [{:.6}, {:.6}] width {:.2e}",
            l.level,
            l.lower_integral,
            l.upper_integral,
            l.width()
        );
    }
    out.json("sandwich.json", "sandwich", &report)
}

#[derive(Serialize)]
struct FiniteReport {
    source: &'static str,
    level: Option<usize>,
    side: Option<String>,
    type_count: usize,
    tau_hat: f64,
    z_hat: Vec<f64>,
    iterations: usize,
    derivative_margin: f64,
    condition_holds: bool,
}

pub fn finite(cfg: &LoadedConfig, out: &OutputDir) -> Result<(), CliError> {
    let f = &cfg.config.finite;
    let (system, source, level, side) = match (&f.kernel, &f.masses) {
        (Some(k), Some(m)) => {
            let system = FiniteTypeSystem::new(k.iter().flatten().copied().collect(), m.clone())
                .map_err(lib)?;
            (system, "explicit", None, None)
        }
        _ => {
            let grid = cfg.grid()?;
            let kernel = cfg.kernel()?;
            let measure = cfg.measure(&grid)?;
            let (upper, lower) = make_step_kernels(&kernel, &grid, f.level).map_err(lib)?;
            let step = if f.side == "upper" { upper } else { lower };
            let system = FiniteTypeSystem::from_step_kernel(&step, &grid, &measure).map_err(lib)?;
            (system, "step_kernel", Some(f.level), Some(f.side.clone()))
        }
    };
    let zero = system
        .first_joint_zero(f.tolerance, f.max_iterations)
        .map_err(lib)?;
    let margin = system
        .derivative_margin(&zero.z_hat, &system.uniform_direction())
        .map_err(lib)?;
    eprintln!(
        "tau_hat {:.6}, derivative margin {:.4}",
        zero.tau_hat, margin
    );
    out.json(
        "finite.json",
        "finite",
        &FiniteReport {
            source,
            level,
            side,
            type_count: system.type_count(),
            tau_hat: zero.tau_hat,
            z_hat: zero.z_hat,
            iterations: zero.iterations,
            derivative_margin: margin,
            condition_holds: margin < 0.0,
        },
    )
}

#[derive(Serialize)]
struct ResilienceReport<'a> {
    spectral_radius: f64,
    verdict: Verdict,
    margin: f64,
    witness: PointwiseWitness,
    grid_size: usize,
    kernel_name: &'a str,
    band: f64,
    power_steps: usize,
}

pub fn resilience(cfg: &LoadedConfig, out: &OutputDir) -> Result<(), CliError> {
    let s = setup(cfg)?;
    let r = &cfg.config.resilience;
    let map = derivative_at_zero(&s.ctx).map_err(lib)?;
    let v = classify(&map, r.band, r.power_steps).map_err(lib)?;
    let mids = s.grid.midpoints();
    out.csv(
        "eigen_direction.csv",
        "eigen_direction",
        "midpoint,value",
        (0..mids.len()).map(|i| format!("{},{}", mids[i], v.eigen_direction[i])),
    )?;
    eprintln!("spectral radius {:.6}: {:?}", v.spectral_radius, v.verdict);
    out.json(
        "resilience.json",
        "resilience",
        &ResilienceReport {
            spectral_radius: v.spectral_radius,
            verdict: v.verdict,
            margin: v.margin,
            witness: v.witness,
            grid_size: s.grid.cell_count(),
            kernel_name: s.kernel.name(),
            band: r.band,
            power_steps: r.power_steps,
        },
    )
}

#[derive(Serialize)]
struct OracleReport<'a> {
    kernel_name: &'a str,
    factor_coefficients: Vec<f64>,
    threshold_masses: Vec<f64>,
    oracle_integral: f64,
    oracle_scale: f64,
    /// Spectral radius of the derivative at zero; only for unseeded
    /// populations.
    oracle_spectral_radius: Option<f64>,
    grid_size: usize,
    grid_integral: f64,
    difference: f64,
}

/// Polynomial factor `phi` of a rank-one kernel selector.
fn rank_one_factor(spec: &str) -> Option<Vec<f64>> {
    let (kind, arg) = spec.split_once(':')?;
    let values: Result<Vec<f64>, _> = arg.split(',').map(|v| v.trim().parse::<f64>()).collect();
    let values = values.ok()?;
    match kind.trim() {
        "constant" if values.len() == 1 && values[0] >= 0.0 => Some(vec![values[0].sqrt()]),
        "product" => Some(values),
        _ => None,
    }
}

pub fn oracle(cfg: &LoadedConfig, out: &OutputDir) -> Result<(), CliError> {
    let spec = &cfg.config.kernel.spec;
    let coeffs = rank_one_factor(spec).ok_or_else(|| {
        CliError::Config(format!(
            "oracle needs a constant or product kernel, got '{spec}'"
        ))
    })?;
    let masses = cfg
        .constant_masses()
        .ok_or_else(|| CliError::Config("oracle needs type-independent thresholds".into()))?;
    let solution = rank_one_fixed_point(&coeffs, &masses, 1e-15, 10_000_000).map_err(lib)?;
    let s = setup(cfg)?;
    let grid = solve_picard(&s.ctx, &picard_options(cfg, false)).map_err(lib)?;
    let radius = (masses[0] == 0.0)
        .then(|| rank_one_eigenvalue(&coeffs, masses.get(1).copied().unwrap_or(0.0)));
    eprintln!(
        "oracle integral {:.10}, grid integral {:.10}",
        solution.integral, grid.integral
    );
    out.json(
        "oracle.json",
        "oracle",
        &OracleReport {
            kernel_name: s.kernel.name(),
            factor_coefficients: coeffs,
            threshold_masses: masses,
            oracle_integral: solution.integral,
            oracle_scale: solution.scale,
            oracle_spectral_radius: radius,
            grid_size: s.grid.cell_count(),
            grid_integral: grid.integral,
            difference: (solution.integral - grid.integral).abs(),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_factors() {
        assert_eq!(rank_one_factor("constant:4"), Some(vec![2.0]));
        assert_eq!(rank_one_factor("product:0,2"), Some(vec![0.0, 2.0]));
        assert_eq!(rank_one_factor("case_study"), None);
        assert_eq!(rank_one_factor("table:k.csv"), None);
        assert_eq!(rank_one_factor("constant:-1"), None);
    }
}
