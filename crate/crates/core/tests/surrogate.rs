mod support {
    pub mod gp_oracle;
}

use invopt_core::gp::{auto_search_grid, fit, log_marginal_likelihood, KernelChoice, KernelConfig, Nu};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::gp_oracle::Oracle;

const NUS: [(Nu, f64); 3] = [(Nu::Half, 0.5), (Nu::ThreeHalves, 1.5), (Nu::FiveHalves, 2.5)];

fn fixed(nu: Nu, l: f64, sf2: f64, noise: f64) -> KernelChoice {
    KernelChoice::Fixed(KernelConfig { nu, length_scale: l, signal_variance: sf2, noise_variance: noise })
}

#[test]
fn agrees_with_dense_solve_on_random_problems() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..20 {
        let n = rng.random_range(1..=10);
        let d = rng.random_range(1..=3);
        let (nu, nu_val) = NUS[case % 3];
        let l = rng.random_range(0.1..1.0);
        let sf2 = rng.random_range(0.5..2.0);
        let noise = 10f64.powf(rng.random_range(-6.0..-1.0));
        let points: Vec<(Vec<f64>, f64)> = (0..n)
            .map(|_| ((0..d).map(|_| rng.random_range(-5.0..5.0)).collect(), rng.random_range(-2.0..2.0)))
            .collect();
        let model = fit(&points, fixed(nu, l, sf2, noise)).unwrap();
        assert_eq!(model.jitter, 0.0);
        let oracle = Oracle::new(&points, nu_val, l, sf2, noise);
        for _ in 0..10 {
            let q: Vec<f64> = (0..d).map(|_| rng.random_range(-6.0..6.0)).collect();
            let (mean, _, var_std) = model.predict_raw(&q);
            let var = var_std * model.output_scale().powi(2);
            let (om, ov) = oracle.predict(&q);
            assert!((mean - om).abs() < 1e-6, "case {case}: mean {mean} vs {om}");
            assert!((var - ov).abs() < 1e-6, "case {case}: var {var} vs {ov}");
        }
    }
}

#[test]
fn interpolates_sine_with_tiny_noise() {
    let points: Vec<(Vec<f64>, f64)> = (0..5)
        .map(|i| {
            let x = 2.0 * std::f64::consts::PI * f64::from(i) / 4.0;
            (vec![x], x.sin())
        })
        .collect();
    let model = fit(&points, fixed(Nu::FiveHalves, 0.3, 1.0, 1e-8)).unwrap();
    let oracle = Oracle::new(&points, 2.5, 0.3, 1.0, 1e-8);
    for (x, y) in &points {
        let (m, _) = model.predict(x);
        assert!((m - y).abs() < 1e-6, "{m} vs {y}");
        assert!((oracle.predict(x).0 - y).abs() < 1e-6);
    }
}

#[test]
fn symmetric_pair_midpoint_is_zero() {
    let points = vec![(vec![0.0], -1.0), (vec![2.0], 1.0)];
    let model = fit(&points, fixed(Nu::FiveHalves, 0.4, 1.0, 1e-6)).unwrap();
    let (m, _) = model.predict(&[1.0]);
    assert!(m.abs() < 1e-6);
    assert!((Oracle::new(&points, 2.5, 0.4, 1.0, 1e-6).predict(&[1.0]).0 - m).abs() < 1e-9);
}

#[test]
fn auto_hyperparameters_dominate_search_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..5 {
        let points: Vec<(Vec<f64>, f64)> = (0..8)
            .map(|i| {
                let x = f64::from(i) * 100.0 + rng.random_range(0.0..50.0);
                (vec![x], (x / 200.0).sin() * 1000.0 + rng.random_range(-50.0..50.0))
            })
            .collect();
        let nu = NUS[case % 3].0;
        let model = fit(&points, KernelChoice::Auto(nu)).unwrap();
        let chosen = log_marginal_likelihood(&points, &model.kernel).unwrap();
        assert!((chosen - model.log_marginal_likelihood()).abs() < 1e-9);
        for (l, noise) in auto_search_grid() {
            let cfg = KernelConfig { nu, length_scale: l, signal_variance: 1.0, noise_variance: noise };
            if let Ok(lml) = log_marginal_likelihood(&points, &cfg) {
                assert!(chosen >= lml - 1e-9, "case {case}: grid ({l}, {noise}) beats selection");
            }
        }
    }
}

type Problem = (Vec<(Vec<f64>, f64)>, usize, f64, f64, Vec<f64>);

fn problem() -> impl Strategy<Value = Problem> {
    (1usize..=10, 0usize..3, 0.05..2.0f64, -8.0..0.0f64).prop_flat_map(|(n, nu, l, log_noise)| {
        (
            prop::collection::vec((prop::collection::vec(-100.0..100.0f64, 1), -1e4..1e4f64), n),
            Just(nu),
            Just(l),
            Just(10f64.powf(log_noise)),
            prop::collection::vec(-150.0..150.0f64, 1),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn posterior_invariants((points, nu, l, noise, q) in problem(), alpha in -3.0..3.0f64) {
        let distinct = points.iter().enumerate().all(|(i, a)| {
            points[..i].iter().all(|b| (a.0[0] - b.0[0]).abs() > 1e-6)
        });
        prop_assume!(distinct);
        let model = fit(&points, fixed(NUS[nu].0, l, 1.0, noise)).unwrap();
        prop_assert!(model.factorization_residual() < 1e-6);

        let (m1, s1, var) = model.predict_raw(&q);
        prop_assert!(var > -1e-8);
        prop_assert!(s1 >= 0.0);

        let prior = model.prior_mean_original();
        let flat = model.clone().with_conditioning_scale(0.0);
        prop_assert_eq!(flat.predict(&q).0, prior);

        let scaled = model.clone().with_conditioning_scale(alpha);
        let lhs = scaled.predict(&q).0 - prior;
        let rhs = alpha * (m1 - prior);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()), "{} vs {}", lhs, rhs);
    }
}
