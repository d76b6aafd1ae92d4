//! Fixed-point approximation by a small feed-forward network.
//!
//! The network `f(x; theta)` (tanh hidden layers, logistic output) is
//! trained to minimize
//!
//! ```text
//! J(theta) = mean_i |f(x_i) - Psi[f](x_i)| + gamma ∫ f dmu
//! ```
//!
//! where `Psi[f]` uses the midpoint-rule integral over the grid. The
//! penalty pushes the optimizer towards the minimal fixed point. Gradients
//! are propagated by hand through the quadrature, the Poisson tails and the
//! network.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fixed_point::{
    derivative_condition, FixedPointResult, TraceRow, CONDITION_BAND, CONDITION_POWER_STEPS,
};
use crate::model::GridFunction;
use crate::operators::OperatorContext;

/// Dense network mapping a type in `[0, 1]` to `(0, 1)`.
#[derive(Debug, Clone)]
pub struct NeuralApproximator {
    /// Layer widths including the scalar input and output.
    sizes: Vec<usize>,
    /// Per layer: weights (`out x in`, row-major) followed by biases.
    params: Vec<f64>,
    penalty_gamma: f64,
}

impl NeuralApproximator {
    /// Glorot-uniform initialization from `seed`.
    pub fn new(hidden: &[usize], penalty_gamma: f64, seed: u64) -> Result<Self> {
        if hidden.contains(&0) {
            return Err(Error::invalid("hidden layer widths must be positive"));
        }
        if !(penalty_gamma > 0.0 && penalty_gamma < 1.0) {
            return Err(Error::invalid("penalty gamma must lie in (0, 1)"));
        }
        let mut sizes = vec![1];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Ok(NeuralApproximator {
            sizes,
            params,
            penalty_gamma,
        })
    }

    /// Default architecture: two hidden layers of 20 units, gamma = 1e-3.
    pub fn default_with_seed(seed: u64) -> Self {
        Self::new(&[20, 20], 1e-3, seed).expect("valid default architecture")
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn penalty_gamma(&self) -> f64 {
        self.penalty_gamma
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        self.forward(&[x]).output()[0]
    }

    pub fn evaluate_batch(&self, xs: &[f64]) -> Vec<f64> {
        self.forward(xs).output().to_vec()
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut offset = 0;
        self.sizes.windows(2).map(move |w| {
            let start = offset;
            offset += w[0] * w[1] + w[1];
            (start, w[0], w[1])
        })
    }

    /// Batched forward pass keeping every layer's activations
    /// (point-major: `acts[l][p * width + u]`).
    fn forward(&self, xs: &[f64]) -> Activations {
        let n_layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(xs.to_vec());
        for (l, (offset, n_in, n_out)) in self.layers().enumerate() {
            let (w, b) = self.params[offset..offset + n_in * n_out + n_out].split_at(n_in * n_out);
            let input = &acts[l];
            let last = l + 1 == n_layers;
            let mut out = vec![0.0; xs.len() * n_out];
            for (a_in, a_out) in input.chunks_exact(n_in).zip(out.chunks_exact_mut(n_out)) {
                for (u, o) in a_out.iter_mut().enumerate() {
                    let row = &w[u * n_in..(u + 1) * n_in];
                    let z = b[u] + row.iter().zip(a_in).map(|(p, q)| p * q).sum::<f64>();
                    *o = if last { logistic(z) } else { z.tanh() };
                }
            }
            acts.push(out);
        }
        Activations(acts)
    }

    /// Gradient of `Σ_p seeds[p] f(x_p)` with respect to the parameters.
    fn backward(&self, acts: &Activations, seeds: &[f64]) -> Vec<f64> {
        let layers: Vec<_> = self.layers().collect();
        let n_layers = layers.len();
        let mut grad = vec![0.0; self.params.len()];
        // delta = d(objective)/d(pre-activation) of the current layer.
        let y = acts.output();
        let mut delta: Vec<f64> = seeds
            .iter()
            .zip(y)
            .map(|(s, v)| s * v * (1.0 - v))
            .collect();
        for l in (0..n_layers).rev() {
            let (offset, n_in, n_out) = layers[l];
            let input = &acts.0[l];
            {
                let (gw, gb) =
                    grad[offset..offset + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                for (d, a_in) in delta.chunks_exact(n_out).zip(input.chunks_exact(n_in)) {
                    for u in 0..n_out {
                        let du = d[u];
                        if du == 0.0 {
                            continue;
                        }
                        gb[u] += du;
                        for (g, a) in gw[u * n_in..(u + 1) * n_in].iter_mut().zip(a_in) {
                            *g += du * a;
                        }
                    }
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[offset..offset + n_in * n_out];
            let mut prev = vec![0.0; input.len()];
            for ((d, a_in), p) in delta
                .chunks_exact(n_out)
                .zip(input.chunks_exact(n_in))
                .zip(prev.chunks_exact_mut(n_in))
            {
                for (u, du) in d.iter().enumerate() {
                    if *du == 0.0 {
                        continue;
                    }
                    for (pi, wi) in p.iter_mut().zip(&w[u * n_in..(u + 1) * n_in]) {
                        *pi += du * wi;
                    }
                }
                // Inputs of layers l >= 1 are tanh activations.
                for (pi, a) in p.iter_mut().zip(a_in) {
                    *pi *= 1.0 - a * a;
                }
            }
            delta = prev;
        }
        grad
    }
}

struct Activations(Vec<Vec<f64>>);

impl Activations {
    fn output(&self) -> &[f64] {
        self.0.last().expect("at least one layer")
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Step size held at `initial` for `hold_steps`, then decayed
/// geometrically by `decay` every `decay_every` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRateSchedule {
    pub initial: f64,
    pub hold_steps: usize,
    pub decay: f64,
    pub decay_every: usize,
}

impl LearningRateSchedule {
    pub fn rate(&self, step: usize) -> f64 {
        let past = step.saturating_sub(self.hold_steps) as f64;
        self.initial * self.decay.powf(past / self.decay_every.max(1) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    GradientDescent,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NnOptions {
    pub schedule: LearningRateSchedule,
    pub optimizer: Optimizer,
    /// Training stops once `J < stop_epsilon`.
    pub stop_epsilon: f64,
    pub max_steps: usize,
    /// Number of grid cells drawn (without replacement) as training points;
    /// values at or above the cell count use every cell.
    pub sample_count: usize,
    pub seed: u64,
}

impl NnOptions {
    /// Plain gradient descent with a held-then-decaying rate.
    pub fn gradient_descent(gamma: f64) -> Self {
        NnOptions {
            schedule: LearningRateSchedule {
                initial: 0.5,
                hold_steps: 2_000,
                decay: 0.5,
                decay_every: 2_000,
            },
            optimizer: Optimizer::GradientDescent,
            stop_epsilon: default_stop_epsilon(gamma),
            max_steps: 20_000,
            sample_count: usize::MAX,
            seed: 0,
        }
    }

    /// Adam with the rate held for 2000 steps, then halved every 3000.
    pub fn adam(gamma: f64) -> Self {
        NnOptions {
            schedule: LearningRateSchedule {
                initial: 1e-2,
                hold_steps: 2_000,
                decay: 0.5,
                decay_every: 3_000,
            },
            optimizer: Optimizer::adam(),
            max_steps: 40_000,
            ..Self::gradient_descent(gamma)
        }
    }
}

pub fn default_stop_epsilon(gamma: f64) -> f64 {
    1e-3 * (1.0 + gamma)
}

/// Trains `net` towards the minimal fixed point of the context's operator
/// and returns its values on the grid.
pub fn solve_nn(
    ctx: &OperatorContext,
    net: &mut NeuralApproximator,
    options: &NnOptions,
) -> Result<FixedPointResult> {
    if options.sample_count < 2 {
        return Err(Error::invalid(
            "the network needs at least two training points",
        ));
    }
    if !(options.stop_epsilon > 0.0) {
        return Err(Error::invalid("stop epsilon must be positive"));
    }
    let grid = ctx.grid();
    let m = ctx.cell_count();
    let weights = grid.weights();
    let mids = grid.midpoints();
    let kernel = ctx.kernel_matrix();
    let gamma = net.penalty_gamma;

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut cells: Vec<usize> = if options.sample_count >= m {
        (0..m).collect()
    } else {
        sample(&mut rng, m, options.sample_count).into_vec()
    };
    cells.sort_unstable();
    let n = cells.len() as f64;

    let mut moment1 = vec![0.0; net.params.len()];
    let mut moment2 = vec![0.0; net.params.len()];
    let mut trace = Vec::new();

    for step in 0..options.max_steps {
        let acts = net.forward(mids);
        let f = acts.output();
        let lambda = ctx.lambda_values(f);
        let psi = ctx.psi_from_lambda(&lambda);
        let v = ctx.v_from_lambda(&lambda);

        // Objective and d(objective)/d f(s_m) on the grid.
        let integral = grid.integrate(f);
        let mut mae = 0.0;
        let mut seeds: Vec<f64> = weights.iter().map(|w| gamma * w).collect();
        let mut back = vec![0.0; m];
        for &c in &cells {
            let r = f[c] - psi[c];
            mae += r.abs();
            let s = if r > 0.0 {
                1.0
            } else if r < 0.0 {
                -1.0
            } else {
                0.0
            } / n;
            seeds[c] += s;
            back[c] += s * v[c];
        }
        mae /= n;
        let objective = mae + gamma * integral;
        trace.push(TraceRow {
            iteration: step,
            residual: objective,
            integral,
        });
        if objective < options.stop_epsilon {
            let f_hat = GridFunction::new(f.to_vec());
            return finish(ctx, f_hat, step, trace);
        }

        // Chain rule through Psi: dPsi(c)/df(s_m) = V(c) kernel(s_m, c) w_m.
        for (mi, seed) in seeds.iter_mut().enumerate() {
            let row = &kernel[mi * m..(mi + 1) * m];
            let dot: f64 = row.iter().zip(&back).map(|(k, b)| k * b).sum();
            *seed -= weights[mi] * dot;
        }
        let grad = net.backward(&acts, &seeds);
        let lr = options.schedule.rate(step);
        match options.optimizer {
            Optimizer::GradientDescent => {
                for (p, g) in net.params.iter_mut().zip(&grad) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let t = (step + 1) as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for i in 0..grad.len() {
                    moment1[i] = beta1 * moment1[i] + (1.0 - beta1) * grad[i];
                    moment2[i] = beta2 * moment2[i] + (1.0 - beta2) * grad[i] * grad[i];
                    let mh = moment1[i] / c1;
                    let vh = moment2[i] / c2;
                    net.params[i] -= lr * mh / (vh.sqrt() + eps);
                }
            }
        }
    }
    Err(Error::Convergence {
        what: "neural fixed-point training",
        iterations: options.max_steps,
        residual: trace.last().map_or(f64::INFINITY, |r| r.residual),
        last: Some(GridFunction::new(net.evaluate_batch(mids))),
        trace: trace.iter().map(|r| r.residual).collect(),
    })
}

fn finish(
    ctx: &OperatorContext,
    f_hat: GridFunction,
    steps: usize,
    trace: Vec<TraceRow>,
) -> Result<FixedPointResult> {
    let psi = GridFunction::new(ctx.psi_values(f_hat.values()));
    let residual = psi.sup_distance(&f_hat);
    let condition = derivative_condition(ctx, &f_hat, CONDITION_POWER_STEPS, CONDITION_BAND)?;
    Ok(FixedPointResult {
        integral: f_hat.integral(ctx.grid()),
        f_hat,
        iterations: steps,
        residual,
        derivative_condition: Some(condition),
        trace,
    })
}
