mod common;

use bootperc::finite_type::FiniteTypeSystem;
use bootperc::fixed_point::{solve_picard, PicardOptions};
use bootperc::model::{GridFunction, KernelModel, ThresholdMeasure, TypeGrid};
use bootperc::operators::OperatorContext;
use bootperc::simulator::{percolate, sample_graph, EdgeSampler, SimulationModel};
use common::*;
use proptest::prelude::*;

const CELLS: usize = 24;

fn unit_function() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=1.0f64, CELLS)
}

fn masses() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, 4).prop_filter_map("needs mass", |v| {
        let s: f64 = v.iter().sum();
        (s > 1e-3).then(|| v.iter().map(|x| x / s).collect())
    })
}

fn context(c: f64, masses: &[f64]) -> OperatorContext {
    let grid = TypeGrid::uniform(CELLS).unwrap();
    let entries: Vec<(usize, f64)> = masses.iter().copied().enumerate().collect();
    let measure = ThresholdMeasure::constant(&grid, &entries, 8).unwrap();
    let kernel = KernelModel::new("affine", c * 1.5, move |x, y| c * (0.5 + x * y)).unwrap();
    OperatorContext::new(grid, &kernel, measure).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psi_is_monotone_and_bounded(
        c in 0.0..8.0f64,
        m in masses(),
        a in unit_function(),
        b in unit_function(),
    ) {
        let ctx = context(c, &m);
        let lo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect();
        let hi: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect();
        let plo = ctx.psi_op(&GridFunction::new(lo)).unwrap();
        let phi = ctx.psi_op(&GridFunction::new(hi)).unwrap();
        prop_assert!(plo.le(&phi, 1e-14));
        for v in plo.values().iter().chain(phi.values()) {
            prop_assert!(*v >= m[0] - 1e-14 && *v <= 1.0 + 1e-14);
        }
    }

    #[test]
    fn psi_is_monotone_in_the_kernel(
        c in 0.0..6.0f64,
        extra in 0.0..3.0f64,
        m in masses(),
        f in unit_function(),
    ) {
        let f = GridFunction::new(f);
        let low = context(c, &m).psi_op(&f).unwrap();
        let high = context(c + extra, &m).psi_op(&f).unwrap();
        prop_assert!(low.le(&high, 1e-14));
    }

    #[test]
    fn frechet_derivative_is_linear(
        m in masses(),
        f in unit_function(),
        g in prop::collection::vec(-1.0..1.0f64, CELLS),
        h in prop::collection::vec(-1.0..1.0f64, CELLS),
        a in -2.0..2.0f64,
        b in -2.0..2.0f64,
    ) {
        let ctx = context(3.0, &m);
        let f = GridFunction::new(f);
        let (g, h) = (GridFunction::new(g), GridFunction::new(h));
        let joint = ctx.frechet_derivative(&f, &g.combine(a, &h, b)).unwrap();
        let split = ctx
            .frechet_derivative(&f, &g)
            .unwrap()
            .combine(a, &ctx.frechet_derivative(&f, &h).unwrap(), b);
        prop_assert!(joint.sup_distance(&split) < 1e-12);
    }

    #[test]
    fn finite_type_nu_conserves_mass(
        k in prop::collection::vec(0.0..5.0f64, 9),
        raw in prop::collection::vec(prop::collection::vec(0.0..1.0f64, 3), 3),
        z in prop::collection::vec(0.0..=1.0f64, 3),
    ) {
        let total: f64 = raw.iter().flatten().sum();
        prop_assume!(total > 1e-3);
        let masses: Vec<Vec<f64>> = raw
            .iter()
            .map(|r| r.iter().map(|v| v / total).collect())
            .collect();
        let system = FiniteTypeSystem::new(k, masses.clone()).unwrap();
        let nu = system.nu_functions(&z).unwrap();
        // Thinning only moves mass between thresholds, and nu_0 is offset
        // by the explored mass: Σ_k nu_k(z) + z = Σ_k nu_k(0).
        for ((row, m), zl) in nu.rows().iter().zip(&masses).zip(&z) {
            let a: f64 = row.iter().sum::<f64>() + zl;
            let b: f64 = m.iter().sum();
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert!(nu.rows().iter().flat_map(|r| &r[1..]).all(|v| *v >= -1e-15));
    }
}

#[test]
fn picard_limit_is_below_perturbed_fixed_points() {
    // Starting at f_hat + noise and iterating gives some fixed point at or
    // above f_hat; starting below stays below. Either way f_hat is minimal.
    let ctx = case_study_ctx(60);
    let opts = PicardOptions::default();
    let base = solve_picard(&ctx, &opts).unwrap().f_hat;
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1);
    for _ in 0..100 {
        let noise: Vec<f64> = (0..60)
            .map(|_| rand::Rng::random_range(&mut rng, 0.0..0.1))
            .collect();
        let mut f: Vec<f64> = base
            .values()
            .iter()
            .zip(&noise)
            .map(|(b, e)| (b + e).min(1.0))
            .collect();
        for _ in 0..2_000 {
            f = ctx.psi_op(&GridFunction::new(f)).unwrap().into_values();
        }
        let limit = GridFunction::new(f);
        assert!(base.le(&limit, 1e-9));
        assert!(ctx.psi_op(&limit).unwrap().sup_distance(&limit) < 1e-9);
    }
}

#[test]
fn event_driven_cascade_matches_brute_force() {
    // 500 graphs: kernel c (0.5 + xy) with five random threshold laws,
    // both samplers.
    let grid = TypeGrid::uniform(20).unwrap();
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(99);
    let mut checked = 0;
    for case in 0..500u64 {
        let c = rand::Rng::random_range(&mut rng, 0.5..12.0);
        let mut w: Vec<f64> = (0..5)
            .map(|_| rand::Rng::random_range(&mut rng, 0.0..1.0))
            .collect();
        w[0] += 0.05;
        let entries: Vec<(usize, f64)> = w.into_iter().enumerate().collect();
        let measure = ThresholdMeasure::constant(&grid, &entries, 8).unwrap();
        let kernel = KernelModel::new("affine", 1.5 * c, move |x, y| c * (0.5 + x * y)).unwrap();
        let sampler = if case % 2 == 0 {
            EdgeSampler::Dense
        } else {
            EdgeSampler::Thinned
        };
        let model = SimulationModel::new(kernel, grid.clone(), &measure)
            .unwrap()
            .with_sampler(sampler);
        let n = rand::Rng::random_range(&mut rng, 2..120);
        let g = sample_graph(&model, n, case).unwrap();
        assert_eq!(
            percolate(&g).infected,
            brute_force_infected(&g),
            "case {case}"
        );
        checked += 1;
    }
    assert_eq!(checked, 500);
}
