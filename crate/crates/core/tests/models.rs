use nalgebra::DMatrix;
use nonsmooth_mcmc::models::*;
use nonsmooth_mcmc::quadrature::integrate;
use nonsmooth_mcmc::target::validate_factors;
use nonsmooth_mcmc::{Error, TargetModel};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn central_difference(model: &dyn TargetModel, x: &[f64], i: usize, h: f64) -> f64 {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[i] += h;
    xm[i] -= h;
    (model.potential(&xp) - model.potential(&xm)) / (2.0 * h)
}

/// Compares declared gradients with central differences at random points
/// away from the kinks.
fn check_gradient(model: &dyn TargetModel, seed: u64, tol: f64) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut g = vec![0.0; model.dim()];
    let mut checked = 0;
    while checked < 100 {
        let x = model.random_point(&mut rng);
        if (0..model.dim()).any(|i| model.is_kink(i, &x)) {
            continue;
        }
        model.gradient(&x, &mut g);
        for (i, gi) in g.iter().enumerate() {
            let fd = central_difference(model, &x, i, 1e-6);
            let scale = 1.0f64.max(gi.abs());
            assert!((fd - gi).abs() <= tol * scale, "coordinate {i}: {fd} vs {gi}");
        }
        checked += 1;
    }
}

#[test]
fn laplace_gradient_and_kinks() {
    let m = build_laplace((1..=10).map(f64::from).collect()).unwrap();
    check_gradient(&m, 1, 1e-5);
    let mut x = vec![0.5; 10];
    x[3] = 0.0;
    assert!(m.is_kink(3, &x));
    assert_eq!(m.partial(3, &x), 0.0);
    assert_eq!(m.partial(4, &x), 5.0);
}

#[test]
fn laplace_absolute_mean_by_quadrature() {
    let m = build_laplace(vec![1.0]).unwrap();
    let density = |x: f64| 0.5 * (-x.abs()).exp();
    let mass = integrate(density, f64::NEG_INFINITY, f64::INFINITY, 1e-12).unwrap();
    let abs_mean = integrate(|x| x.abs() * density(x), f64::NEG_INFINITY, f64::INFINITY, 1e-12)
        .unwrap();
    assert!((mass - 1.0).abs() < 1e-9);
    assert!((abs_mean - 1.0).abs() < 1e-9);
    assert!((m.marginal_cdf(0, 0.0) - 0.5).abs() < 1e-15);
}

#[test]
fn laplace_rejects_nonpositive_rates() {
    assert!(matches!(build_laplace(vec![1.0, 0.0]), Err(Error::InvalidArgument(_))));
    assert!(build_laplace(vec![-2.0]).is_err());
    assert!(build_laplace(vec![]).is_err());
}

#[test]
fn gaussian_gradient_and_defaults() {
    let v = default_variances(10);
    assert_eq!(v[0], 1.0);
    assert!((v[9] - 0.01).abs() < 1e-15);
    let m = build_gaussian(v).unwrap();
    check_gradient(&m, 2, 1e-5);
    assert!(build_gaussian(vec![1.0, f64::NAN]).is_err());
}

#[test]
fn factorised_models_validate() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let lap = build_laplace(vec![1.0, 2.0, 3.0]).unwrap();
    let gauss = build_gaussian(default_variances(4)).unwrap();
    for m in [&lap as &dyn TargetModel, &gauss] {
        let r = validate_factors(m, 100, 1e-8, &mut rng).unwrap();
        assert_eq!(r.n_factors, m.dim());
    }
    let scene = test_scene(8, 8);
    let y = blur_and_noise(&scene, 8, 8, 0.47, &mut rng);
    let tv = build_tv_deblur(y, (8, 8), 0.47, 0.03).unwrap();
    let r = validate_factors(&tv, 100, 1e-8, &mut rng).unwrap();
    assert_eq!(r.n_factors, 64 + 2 * 8 * 7);
}

#[test]
fn nonsmooth_models_match_finite_differences() {
    let y = checkerboard(4, 4, 1.0);
    check_gradient(&build_nuclear(&y, 0.5, 1.5).unwrap(), 4, 1e-5);

    let data = synthetic_logistic(6, 20, 2, 2.0, 5).unwrap();
    let bk = build_besselk_logistic(data.design, data.labels, DEFAULT_BESSEL_P, DEFAULT_BESSEL_EPS).unwrap();
    check_gradient(&bk, 5, 1e-5);

    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let scene = test_scene(8, 8);
    let tv = build_tv_deblur(blur_and_noise(&scene, 8, 8, 0.47, &mut rng), (8, 8), 0.47, 0.03)
        .unwrap();
    check_gradient(&tv, 7, 1e-5);
}

#[test]
fn blur_preserves_constants() {
    let h = uniform_blur(9, 9, BLUR_WIDTH);
    let out = h.apply(&vec![4.0; 81]);
    assert!(out.iter().all(|v| (v - 4.0).abs() < 1e-12));
    let tv = build_tv_deblur(vec![1.0; 81], (9, 9), 1.0, 1.0).unwrap();
    let split = tv.split().unwrap();
    assert_eq!(split.nonsmooth().value(&vec![7.0; 81]), 0.0);
    assert!(build_tv_deblur(vec![0.0; 49], (7, 7), 1.0, 1.0).is_err());
}

#[test]
fn bessel_recurrence_over_the_working_range() {
    for nu in [0.3, 1.2, 2.5] {
        for k in 0..=40 {
            let z = 0.05 * (1000.0f64).powf(k as f64 / 40.0);
            let km = ln_bessel_k(nu - 1.0, z).unwrap().exp();
            let k0 = ln_bessel_k(nu, z).unwrap().exp();
            let kp = ln_bessel_k(nu + 1.0, z).unwrap().exp();
            let rhs = km + 2.0 * nu / z * k0;
            assert!((kp - rhs).abs() <= 1e-8 * kp, "nu {nu} z {z}");
        }
    }
}

#[test]
fn wrapped_components_integrate_to_one() {
    for (mu, lambda, kappa) in [(0.3, 2.0, 1.0), (4.0, 0.7, 0.4), (6.0, 3.0, 2.5)] {
        let f = |y: f64| wrapped_laplace_density(y, mu, lambda, kappa);
        let two_pi = std::f64::consts::TAU;
        let mass = integrate(f, 0.0, mu, 1e-12).unwrap() + integrate(f, mu, two_pi, 1e-12).unwrap();
        assert!((mass - 1.0).abs() < 1e-8, "{mass}");
    }
}

#[test]
fn matrix_and_scene_shapes() {
    let c = checkerboard(3, 5, 2.0);
    assert_eq!(c.shape(), (3, 5));
    assert_eq!(c.rank(1e-12), 1);
    assert_eq!(test_scene(32, 32).len(), 1024);
    let m = build_nuclear(&DMatrix::zeros(2, 3), 1.0, 1.0).unwrap();
    assert_eq!(m.dim(), 6);
}

proptest! {
    #[test]
    fn laplace_potential_is_weighted_l1(x in prop::collection::vec(-50.0..50.0f64, 4)) {
        let beta = [0.5, 1.0, 2.0, 4.0];
        let m = build_laplace(beta.to_vec()).unwrap();
        let expected: f64 = x.iter().zip(beta).map(|(x, b)| b * x.abs()).sum();
        prop_assert!((m.potential(&x) - expected).abs() <= 1e-12 * (1.0 + expected));
    }

    #[test]
    fn wrapped_shift_lands_in_the_period(y in -20.0..20.0f64, mu in -20.0..20.0f64) {
        let s = wrapped_shift(y, mu);
        prop_assert!(s > 0.0 && s <= std::f64::consts::TAU + 1e-12);
        let k = (y - mu - s) / std::f64::consts::TAU;
        prop_assert!((k - k.round()).abs() < 1e-9);
    }

    #[test]
    fn gaussian_potential_is_even(x in prop::collection::vec(-5.0..5.0f64, 3)) {
        let m = build_gaussian(default_variances(3)).unwrap();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert_eq!(m.potential(&x), m.potential(&neg));
    }
}
