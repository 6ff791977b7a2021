mod common;

use common::*;
use mwle::expfam::{
    check_minimality, covariance, grad_log_weighted_likelihood, inverse_mean_map, log_pdf,
    log_weighted_likelihood, mean_map, minimality_from_covariance, FamilyModel, Minimality,
    SolveMethod, SolveStrategy, SolverOptions, WeightedDataset,
};
use mwle::families::{
    gaussian_known_variance_model, multinomial_fixture, weibull_model, weibull_moment, NumericOnly,
    WeibullSpec,
};
use mwle::means::{holder_mean, lehmer_mean, MeanOrder, Sample};
use mwle::mwle::{fit, fit_weighted, subclass_form, FitOptions, WeightPolicy};
use mwle::Error;
use rand::Rng;

type Model = Box<dyn FamilyModel>;

const SHAPES: [f64; 4] = [0.5, 1.0, 2.0, 3.7];
const SCALES: [f64; 3] = [0.3, 1.0, 5.0];

fn weibull(k: f64) -> mwle::families::Weibull {
    weibull_model(&WeibullSpec::new(vec![k])).unwrap()
}

fn eta_of(model: &dyn FamilyModel, theta: &[f64]) -> Vec<f64> {
    model.nat_param(theta).unwrap()
}

#[test]
fn weibull_density_matches_the_textbook_form() {
    for k in SHAPES {
        for lambda in SCALES {
            let m = weibull(k);
            let eta = eta_of(&m, &[lambda]);
            for x in [1e-3, 0.2, 1.0, 3.3, 12.0] {
                let ours = log_pdf(&m, &[x], &eta).unwrap();
                let textbook = weibull_pdf(x, lambda, k);
                if textbook < 1e-300 {
                    // far tail: the direct form underflows
                    assert!(ours < -690.0);
                    continue;
                }
                assert!(
                    rel_err(ours, textbook.ln()) < 1e-12,
                    "k={k} λ={lambda} x={x}"
                );
            }
        }
    }
    // Exp(1) at x = 1
    let m = weibull(1.0);
    assert!((log_pdf(&m, &[1.0], &[-1.0]).unwrap() + 1.0).abs() < 1e-15);
    assert!(log_pdf(&m, &[-1.0], &[-1.0]).is_err());
    assert!(log_pdf(&m, &[1.0], &[0.5]).is_err());
}

#[test]
fn weibull_density_integrates_to_one() {
    for k in SHAPES {
        for lambda in SCALES {
            let m = weibull(k);
            let eta = eta_of(&m, &[lambda]);
            let upper = lambda * 60f64.powf(1.0 / k);
            let pdf = |x: f64| {
                if x <= 0.0 {
                    0.0
                } else {
                    log_pdf(&m, &[x], &eta).unwrap().exp()
                }
            };
            let mass = integrate_from_zero(&pdf, upper, 1e-11);
            assert!((mass - 1.0).abs() < 1e-8, "k={k} λ={lambda}: mass {mass}");
            let moment = integrate_from_zero(&|x| x.powf(k) * pdf(x), upper, 1e-11);
            let r = mean_map(&m, &eta).unwrap().0[0];
            assert!(
                rel(r, moment) < 1e-7,
                "k={k} λ={lambda}: E[T] {moment} vs r(η) {r}"
            );
        }
    }
}

#[test]
fn weibull_moments_match_quadrature() {
    for (lambda, k, t) in [
        (1.0, 2.0, 1.0),
        (0.3, 0.5, 2.0),
        (5.0, 3.7, 1.5),
        (2.0, 1.0, 0.0),
    ] {
        let upper = lambda * 60f64.powf(1.0 / k);
        let q = integrate_from_zero(&|x| x.powf(t) * weibull_pdf(x, lambda, k), upper, 1e-12);
        let closed = weibull_moment(lambda, k, t).unwrap();
        assert!(rel(closed, q) < 1e-8, "λ={lambda} k={k} t={t}");
        assert!(rel(closed, lambda.powf(t) * gamma(1.0 + t / k)) < 1e-13);
    }
    assert!(weibull_moment(-1.0, 1.0, 1.0).is_err());
}

#[test]
fn gaussian_density_integrates_to_one() {
    for sigma in [0.2, 1.0, 4.0] {
        let m = gaussian_known_variance_model(&[sigma]).unwrap();
        for mu in [-3.0, 0.0, 2.5] {
            let eta = eta_of(&m, &[mu]);
            let pdf = |x: f64| log_pdf(&m, &[x], &eta).unwrap().exp();
            let (a, b) = (mu - 12.0 * sigma, mu + 12.0 * sigma);
            assert!((integrate(&pdf, a, b, 1e-12) - 1.0).abs() < 1e-9);
            assert!((integrate(&|x| x * pdf(x), a, b, 1e-12) - mu).abs() < 1e-8);
        }
    }
}

#[test]
fn multinomial_probabilities_sum_to_one() {
    let fx = multinomial_fixture(4, &[0.1, 0.2, 0.3, 0.4]).unwrap();
    let (full, reduced) = (fx.full_model(), fx.reduced_model().unwrap());
    let mut total_full = 0.0;
    let mut total_reduced = 0.0;
    for a in 0..=4u32 {
        for b in 0..=(4 - a) {
            for c in 0..=(4 - a - b) {
                let x = [a as f64, b as f64, c as f64, (4 - a - b - c) as f64];
                total_full += log_pdf(&full, &x, &fx.full_eta()).unwrap().exp();
                total_reduced += log_pdf(&reduced, &x, &fx.reduced_eta()).unwrap().exp();
            }
        }
    }
    assert!((total_full - 1.0).abs() < 1e-13);
    assert!((total_reduced - 1.0).abs() < 1e-13);
}

fn models() -> Vec<(Box<dyn FamilyModel>, Vec<f64>)> {
    let fx = multinomial_fixture(15, &[0.1, 0.2, 0.3, 0.4]).unwrap();
    vec![
        (
            Box::new(weibull_model(&WeibullSpec::new(vec![0.5, 2.0, 3.7])).unwrap()),
            vec![-0.7, -2.0, -0.2],
        ),
        (
            Box::new(gaussian_known_variance_model(&[0.5, 2.0]).unwrap()),
            vec![1.3, -0.4],
        ),
        (Box::new(fx.reduced_model().unwrap()), vec![0.3, -0.8, 1.1]),
        (Box::new(fx.full_model()), fx.full_eta()),
    ]
}

#[test]
fn mean_map_and_covariance_match_finite_differences() {
    for (m, eta) in models() {
        let h = |e: &[f64]| m.log_normalizer(e);
        let r = mean_map(m.as_ref(), &eta).unwrap().0;
        let fd = fd_gradient(&h, &eta, 1e-3 * norm(&eta).max(1.0) / 10.0);
        for (a, b) in r.iter().zip(&fd) {
            assert!(rel_err(*a, *b) < 1e-8, "{}: r {a} vs fd {b}", m.name());
        }
        let cov = covariance(m.as_ref(), &eta).unwrap();
        for j in 0..eta.len() {
            let rj = |e: &[f64]| mean_map(m.as_ref(), e).unwrap().0[j];
            let col = fd_gradient(&rj, &eta, 1e-4);
            for (i, c) in col.iter().enumerate() {
                assert!(
                    rel_err(cov[(i, j)], *c) < 1e-7,
                    "{}: cov[{i},{j}]",
                    m.name()
                );
            }
        }
    }
}

#[test]
fn numeric_paths_agree_with_closed_forms() {
    let fx = multinomial_fixture(15, &[0.1, 0.2, 0.3, 0.4]).unwrap();
    let cases: Vec<(Model, Model, Vec<f64>)> = vec![
        (
            Box::new(weibull_model(&WeibullSpec::new(vec![0.5, 2.0])).unwrap()),
            Box::new(NumericOnly::new(
                weibull_model(&WeibullSpec::new(vec![0.5, 2.0])).unwrap(),
            )),
            vec![-0.7, -2.0],
        ),
        (
            Box::new(gaussian_known_variance_model(&[0.5, 2.0]).unwrap()),
            Box::new(NumericOnly::new(
                gaussian_known_variance_model(&[0.5, 2.0]).unwrap(),
            )),
            vec![1.3, -0.4],
        ),
        (
            Box::new(fx.reduced_model().unwrap()),
            Box::new(NumericOnly::new(fx.reduced_model().unwrap())),
            vec![0.3, -0.8, 1.1],
        ),
    ];
    for (closed, numeric, eta) in cases {
        let (a, b) = (
            mean_map(closed.as_ref(), &eta).unwrap().0,
            mean_map(numeric.as_ref(), &eta).unwrap().0,
        );
        for (x, y) in a.iter().zip(&b) {
            assert!(rel_err(*x, *y) < 1e-8, "{}", numeric.name());
        }
        let (ca, cb) = (
            covariance(closed.as_ref(), &eta).unwrap(),
            covariance(numeric.as_ref(), &eta).unwrap(),
        );
        assert!((&ca - &cb).amax() / ca.amax() < 1e-6, "{}", numeric.name());
        let target = a.clone();
        let sol =
            inverse_mean_map(numeric.as_ref(), &target, None, &SolverOptions::default()).unwrap();
        assert_ne!(sol.method, SolveMethod::ClosedForm);
        for (x, y) in sol.eta.iter().zip(&eta) {
            assert!(rel_err(*x, *y) < 1e-7, "{}: η {x} vs {y}", numeric.name());
        }
        let err = inverse_mean_map(
            numeric.as_ref(),
            &target,
            None,
            &SolverOptions::with_strategy(SolveStrategy::ClosedForm),
        );
        assert!(matches!(err, Err(Error::Config(_))));
    }
}

#[test]
fn inverse_mean_map_examples() {
    let exp = weibull(1.0);
    let sol = inverse_mean_map(&exp, &[2.0], None, &SolverOptions::default()).unwrap();
    assert!((sol.eta[0] + 0.5).abs() < 1e-15);
    for strategy in [SolveStrategy::Newton, SolveStrategy::Bisection] {
        let sol =
            inverse_mean_map(&exp, &[2.0], None, &SolverOptions::with_strategy(strategy)).unwrap();
        assert!((sol.eta[0] + 0.5).abs() < 1e-9, "{strategy:?}");
    }
    let w2 = weibull(2.0);
    let sol = inverse_mean_map(&w2, &[4.0], None, &SolverOptions::default()).unwrap();
    assert!((w2.nat_param_inverse(&sol.eta).unwrap()[0] - 2.0).abs() < 1e-14);
    for bad in [0.0, -1.0] {
        assert!(matches!(
            inverse_mean_map(&exp, &[bad], None, &SolverOptions::default()),
            Err(Error::NoSolution { .. })
        ));
    }
    assert!(matches!(
        inverse_mean_map(&exp, &[f64::NAN], None, &SolverOptions::default()),
        Err(Error::Numeric(_))
    ));
    assert!(matches!(
        inverse_mean_map(&exp, &[1.0, 2.0], None, &SolverOptions::default()),
        Err(Error::Domain(_))
    ));
}

#[test]
fn newton_recovers_from_a_far_start_on_the_reduced_multinomial() {
    let fx = multinomial_fixture(15, &[0.1, 0.2, 0.3, 0.4]).unwrap();
    let m = fx.reduced_model().unwrap();
    let target = [1.5, 3.0, 4.5];
    let opts = SolverOptions::with_strategy(SolveStrategy::Newton);
    let sol = inverse_mean_map(&m, &target, Some(&[-1.4, 3.18, -3.97]), &opts).unwrap();
    // target / N = (0.1, 0.2, 0.3), so η = ln(p_j / 0.4)
    for (e, p) in sol.eta.iter().zip([0.1f64, 0.2, 0.3]) {
        assert!((e - (p / 0.4).ln()).abs() < 1e-9, "{:?}", sol.eta);
    }
    let mut r = rng(31);
    for _ in 0..200 {
        let init: Vec<f64> = (0..3).map(|_| r.random_range(-8.0..8.0)).collect();
        let sol = inverse_mean_map(&m, &target, Some(&init), &opts).unwrap();
        assert!(sol.residual < 1e-8, "from {init:?}");
    }
}

#[test]
fn newton_matches_closed_forms_on_random_targets() {
    let mut r = rng(32);
    let fx = multinomial_fixture(15, &[0.1, 0.2, 0.3, 0.4]).unwrap();
    let reduced = fx.reduced_model().unwrap();
    let w = weibull_model(&WeibullSpec::new(vec![0.7, 1.0, 2.5])).unwrap();
    let newton = SolverOptions::with_strategy(SolveStrategy::Newton);
    let closed = SolverOptions::with_strategy(SolveStrategy::ClosedForm);
    for _ in 0..100 {
        let t = unit_scale(&mut r, 3);
        let (a, b) = (
            inverse_mean_map(&w, &t, None, &newton).unwrap(),
            inverse_mean_map(&w, &t, None, &closed).unwrap(),
        );
        for (x, y) in a.eta.iter().zip(&b.eta) {
            assert!(rel(*x, *y) < 1e-9);
        }
        let p: Vec<f64> = (0..4).map(|_| r.random_range(0.05..1.0)).collect();
        let s: f64 = p.iter().sum();
        let t: Vec<f64> = p[..3].iter().map(|v| 15.0 * v / s).collect();
        let (a, b) = (
            inverse_mean_map(&reduced, &t, None, &newton).unwrap(),
            inverse_mean_map(&reduced, &t, None, &closed).unwrap(),
        );
        for (x, y) in a.eta.iter().zip(&b.eta) {
            assert!(rel_err(*x, *y) < 1e-9);
        }
    }
}

#[test]
fn minimality_of_the_multinomial_fixtures() {
    let fx = multinomial_fixture(15, &[0.1, 0.2, 0.3, 0.4]).unwrap();
    let full = fx.full_model();
    let verdict = minimality_from_covariance(&covariance(&full, &fx.full_eta()).unwrap(), 1e-8);
    let Minimality::Degenerate { direction } = verdict else {
        panic!("full multinomial reported minimal");
    };
    assert!(angle(&direction, &[1.0; 4]) < 1e-6);
    assert!((norm(&direction) - 1.0).abs() < 1e-12);
    let reduced = fx.reduced_model().unwrap();
    assert!(
        minimality_from_covariance(&covariance(&reduced, &fx.reduced_eta()).unwrap(), 1e-8)
            .is_minimal()
    );
    assert!(!check_minimality(&full, &fx.full_eta(), 2000, 7, 1e-8)
        .unwrap()
        .is_minimal());
    assert!(check_minimality(&reduced, &fx.reduced_eta(), 2000, 7, 1e-8)
        .unwrap()
        .is_minimal());
    let w = weibull_model(&WeibullSpec::new(vec![0.5, 3.7])).unwrap();
    assert!(check_minimality(&w, &[-0.7, -2.0], 2000, 7, 1e-8)
        .unwrap()
        .is_minimal());
}

#[test]
fn non_identifiable_models_are_refused() {
    let fx = multinomial_fixture(15, &[0.1, 0.2, 0.3, 0.4]).unwrap();
    let mut r = rng(33);
    let draws = fx.draws(20, &mut r);
    let err = fit(
        &fx.full_model(),
        &draws,
        &WeightPolicy::holder(),
        &FitOptions::default(),
    );
    assert!(matches!(err, Err(Error::Config(_))));
    let ok = fit(
        &fx.reduced_model().unwrap(),
        &draws,
        &WeightPolicy::holder(),
        &FitOptions::default(),
    )
    .unwrap();
    assert!(ok.diagnostics.minimality.is_minimal());
}

#[test]
fn the_estimate_maximizes_the_weighted_likelihood() {
    let mut r = rng(34);
    let fx = multinomial_fixture(15, &[0.1, 0.2, 0.3, 0.4]).unwrap();
    let cases: Vec<(Model, Vec<Vec<f64>>)> = vec![
        (
            Box::new(weibull_model(&WeibullSpec::new(vec![0.5, 2.0])).unwrap()),
            (0..30).map(|_| unit_scale(&mut r, 2)).collect(),
        ),
        (
            Box::new(gaussian_known_variance_model(&[0.5, 2.0]).unwrap()),
            (0..30)
                .map(|_| vec![r.random_range(-3.0..3.0), r.random_range(-3.0..3.0)])
                .collect(),
        ),
        (Box::new(fx.reduced_model().unwrap()), fx.draws(30, &mut r)),
    ];
    for (m, obs) in cases {
        let data = WeightedDataset::new(obs.clone(), weights(&mut r, obs.len())).unwrap();
        let est = fit_weighted(m.as_ref(), &data, &FitOptions::default()).unwrap();
        let best = log_weighted_likelihood(m.as_ref(), &data, &est.eta_hat).unwrap();
        let g = grad_log_weighted_likelihood(m.as_ref(), &data, &est.eta_hat).unwrap();
        assert!(
            norm(&g) < 1e-7 * data.total_weight(),
            "{}: gradient {g:?}",
            m.name()
        );
        let mut tried = 0;
        while tried < 100 {
            let size = 10f64.powf(r.random_range(-4.0..-1.0));
            let eta: Vec<f64> = est
                .eta_hat
                .iter()
                .map(|e| e + size * r.random_range(-1.0..1.0) * e.abs().max(1.0))
                .collect();
            if !m.in_natural_domain(&eta) {
                continue;
            }
            tried += 1;
            let other = log_weighted_likelihood(m.as_ref(), &data, &eta).unwrap();
            assert!(
                other <= best + 1e-9 * best.abs().max(1.0),
                "{}: {other} > {best}",
                m.name()
            );
        }
    }
}

#[test]
fn estimates_ignore_the_scale_of_the_weights() {
    let mut r = rng(35);
    let m = weibull_model(&WeibullSpec::new(vec![0.5, 2.0, 3.7])).unwrap();
    for _ in 0..20 {
        let obs: Vec<Vec<f64>> = (0..15).map(|_| unit_scale(&mut r, 3)).collect();
        let u = weights(&mut r, obs.len());
        let base = fit_weighted(
            &m,
            &WeightedDataset::new(obs.clone(), u.clone()).unwrap(),
            &FitOptions::default(),
        )
        .unwrap();
        for c in [1e-6, 0.37, 1e6] {
            let scaled = u.iter().map(|v| c * v).collect();
            let other = fit_weighted(
                &m,
                &WeightedDataset::new(obs.clone(), scaled).unwrap(),
                &FitOptions::default(),
            )
            .unwrap();
            for (a, b) in other.theta_hat.iter().zip(&base.theta_hat) {
                assert!(rel(*a, *b) < 1e-13);
            }
        }
    }
}

#[test]
fn independent_components_fit_separately() {
    let mut r = rng(36);
    let shapes = vec![0.5, 2.0, 3.7];
    let joint = weibull_model(&WeibullSpec::new(shapes.clone())).unwrap();
    let obs: Vec<Vec<f64>> = (0..25).map(|_| unit_scale(&mut r, 3)).collect();
    let base = |x: &[f64]| 1.0 + x[0];
    let policy = WeightPolicy::holder().with_base_weight(base);
    let all = fit(&joint, &obs, &policy, &FitOptions::default()).unwrap();
    let w: Vec<f64> = obs.iter().map(|x| base(x)).collect();
    for (j, k) in shapes.iter().enumerate() {
        let xs: Vec<f64> = obs.iter().map(|row| row[j]).collect();
        let expected = holder_mean(
            MeanOrder::new(*k).unwrap(),
            &Sample::new(xs, w.clone()).unwrap(),
        )
        .unwrap();
        assert!(rel(all.theta_hat[j], expected) < 1e-12, "column {j}");
    }
    let lehmer = fit(
        &weibull_model(&WeibullSpec::uniform(1.0, 3)).unwrap(),
        &obs,
        &WeightPolicy::lehmer(vec![-1.0, 0.5, 2.5]),
        &FitOptions::default(),
    )
    .unwrap();
    for (j, b) in [-1.0, 0.5, 2.5].iter().enumerate() {
        let xs: Vec<f64> = obs.iter().map(|row| row[j]).collect();
        let expected = lehmer_mean(
            MeanOrder::new(*b).unwrap(),
            &Sample::unweighted(xs).unwrap(),
        )
        .unwrap();
        assert!(rel(lehmer.theta_hat[j], expected) < 1e-12, "column {j}");
    }
}

#[test]
fn lehmer_policies_need_independent_components() {
    let fx = multinomial_fixture(15, &[0.1, 0.2, 0.3, 0.4]).unwrap();
    let mut r = rng(37);
    let obs = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
    let g = gaussian_known_variance_model(&[1.0, 1.0]).unwrap();
    assert!(fit(
        &g,
        &obs,
        &WeightPolicy::lehmer(vec![2.0]),
        &FitOptions::default()
    )
    .is_ok());
    let err = fit(
        &fx.reduced_model().unwrap(),
        &fx.draws(5, &mut r),
        &WeightPolicy::lehmer(vec![2.0]),
        &FitOptions::default(),
    );
    assert!(matches!(err, Err(Error::Config(_))));
}

#[test]
fn subclass_form_examples() {
    let w = weibull_model(&WeibullSpec::new(vec![2.0, 0.5])).unwrap();
    let h = subclass_form(&w, &WeightPolicy::holder());
    assert!(h.is_holder_mean && !h.is_lehmer_mean, "{}", h.reason);
    let exp = weibull_model(&WeibullSpec::uniform(1.0, 2)).unwrap();
    let l = subclass_form(&exp, &WeightPolicy::lehmer(vec![3.0]));
    assert!(l.is_lehmer_mean, "{}", l.reason);
    let not_identity = subclass_form(&w, &WeightPolicy::lehmer(vec![3.0]));
    assert!(!not_identity.is_lehmer_mean);
    let g = subclass_form(
        &gaussian_known_variance_model(&[1.0]).unwrap(),
        &WeightPolicy::holder(),
    );
    assert!(!g.is_holder_mean && !g.is_lehmer_mean);
    assert!(g.reason.contains("negative"));
    let c = subclass_form(&exp, &WeightPolicy::custom(|x| 1.0 + x[0]));
    assert!(!c.is_holder_mean && !c.is_lehmer_mean);
}

#[test]
fn library_sampler_has_the_right_moments() {
    let mut r = rng(38);
    for k in SHAPES {
        for lambda in SCALES {
            let m = weibull(k);
            let eta = eta_of(&m, &[lambda]);
            let n = 40_000;
            let t: Vec<f64> = (0..n)
                .map(|_| m.sample(&eta, &mut r).unwrap()[0].powf(k))
                .collect();
            let mean = t.iter().sum::<f64>() / n as f64;
            // T = X^k is exponential with mean λ^k, so its SE is λ^k / √n
            let expected = lambda.powf(k);
            let z = (mean - expected) / (expected / (n as f64).sqrt());
            assert!(z.abs() < 4.5, "k={k} λ={lambda}: z = {z}");
        }
    }
}
