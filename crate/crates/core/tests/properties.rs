use identikit::estimation::{fit, linear_least_squares, FitOptions};
use identikit::fim::{classify_local_identifiability, fim_for_design, Classification, DEFAULT_RANK_TOLERANCE};
use identikit::model::{
    evaluate, generate_data, lookup, Dataset, Design, IdentifiabilityLabel, LinearModel, Model, ModelConstants,
};
use identikit::profile::{profile_parameter, GridSpec, ProfileOptions};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn get(name: &str) -> Box<dyn Model<f64>> {
    lookup(name, &ModelConstants::default()).unwrap()
}

fn times() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::btree_set(0u32..600, 1..12).prop_map(|s| s.into_iter().map(|k| k as f64 / 100.0).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn evaluation_is_pure(t in times(), a in 0.01f64..10.0, b in 0.01f64..10.0) {
        let m = get("biexponential");
        let d = Design::new(t, 0.1).unwrap();
        let first = evaluate(m.as_ref(), &d, &[a, b]).unwrap();
        let second = evaluate(m.as_ref(), &d, &[a, b]).unwrap();
        prop_assert_eq!(first, second);
    }

    #[test]
    fn biexponential_swap_preserves_outputs(t in times(), a in 0.01f64..10.0, b in 0.01f64..10.0) {
        let m = get("biexponential");
        let d = Design::new(t, 0.1).unwrap();
        prop_assert_eq!(evaluate(m.as_ref(), &d, &[a, b]).unwrap(), evaluate(m.as_ref(), &d, &[b, a]).unwrap());
    }

    #[test]
    fn redundant_exponential_scale_shift_preserves_outputs(
        t in times(),
        a in 0.1f64..10.0,
        b in -2.0f64..2.0,
        c in -2.0f64..2.0,
        shift in -1.0f64..1.0,
    ) {
        let m = get("redundant-exponential");
        let d = Design::new(t, 0.1).unwrap();
        let y = evaluate(m.as_ref(), &d, &[a, b, c]).unwrap();
        let z = evaluate(m.as_ref(), &d, &[a * shift.exp(), b, c - shift]).unwrap();
        for (u, v) in y.iter().zip(&z) {
            prop_assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
        }
    }

    #[test]
    fn noise_scales_with_sigma(theta in 0.1f64..100.0, sigma in 0.01f64..2.0, seed in any::<u64>()) {
        let m = get("reciprocal");
        let d = Design::linspace(0.0, 1.0, 8, sigma).unwrap();
        let f = evaluate(m.as_ref(), &d, &[theta]).unwrap();
        let y1 = generate_data(m.as_ref(), &d, &[theta], seed).unwrap();
        let y2 = generate_data(m.as_ref(), &d.with_sigma(2.0 * sigma).unwrap(), &[theta], seed).unwrap();
        for ((a, b), fi) in y1.observations().iter().zip(y2.observations()).zip(&f) {
            prop_assert!(((b - fi) - 2.0 * (a - fi)).abs() <= 1e-12 * (1.0 + fi.abs()));
        }
    }

    #[test]
    fn duplicated_design_scales_determinant(t in times(), a in 0.2f64..3.0, b in 4.0f64..9.0) {
        prop_assume!(t.len() >= 2);
        let m = get("biexponential");
        let single = Design::new(t, 0.1).unwrap();
        let doubled = single.replicated(2).unwrap();
        let d1 = fim_for_design(m.as_ref(), &single, &[a, b], DEFAULT_RANK_TOLERANCE).unwrap().fim.determinant();
        let d2 = fim_for_design(m.as_ref(), &doubled, &[a, b], DEFAULT_RANK_TOLERANCE).unwrap().fim.determinant();
        prop_assert!((d2 - 4.0 * d1).abs() <= 1e-8 * d2.abs().max(f64::MIN_POSITIVE));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lm_objective_never_increases(theta in 0.2f64..5.0, seed in any::<u64>()) {
        let m = get("reciprocal");
        let d = Design::linspace(0.0, 1.0, 10, 0.05).unwrap();
        let data = generate_data(m.as_ref(), &d, &[theta], seed).unwrap();
        let est = fit(m.as_ref(), &data, &[50.0], None, &FitOptions::default()).unwrap();
        prop_assert!(est.converged);
        prop_assert!(est.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn lm_matches_closed_form_on_linear_models(entries in proptest::collection::vec(-2.0f64..2.0, 24), seed in any::<u64>()) {
        let x = DMatrix::from_row_slice(8, 3, &entries);
        prop_assume!(x.clone().svd(false, false).singular_values.min() > 0.1);
        let m = LinearModel::from_matrix(x.clone());
        let d = Design::linspace(0.0, 7.0, 8, 0.3).unwrap();
        let data = generate_data(&m, &d, &[0.5, -1.0, 2.0], seed).unwrap();
        let exact = linear_least_squares(&x, data.observations()).unwrap();
        let est = fit(&m, &data, &[0.0, 0.0, 0.0], None, &FitOptions::default()).unwrap();
        for (a, b) in est.theta.iter().zip(&exact.theta) {
            prop_assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn profile_never_exceeds_maximum(entries in proptest::collection::vec(-2.0f64..2.0, 24), seed in any::<u64>(), i in 0usize..3) {
        let x = DMatrix::from_row_slice(8, 3, &entries);
        prop_assume!(x.clone().svd(false, false).singular_values.min() > 0.1);
        let m = LinearModel::from_matrix(x);
        let d = Design::linspace(0.0, 7.0, 8, 0.3).unwrap();
        let data = generate_data(&m, &d, &[0.5, -1.0, 2.0], seed).unwrap();
        let est = fit(&m, &data, &[0.0, 0.0, 0.0], None, &FitOptions::default()).unwrap();
        let grid = GridSpec::Default { points: 11, width_sd: 4.0 };
        let curve = profile_parameter(&m, &data, &est, i, &grid, &ProfileOptions::default()).unwrap();
        for pt in &curve.points {
            prop_assert!(pt.loglik <= curve.loglik_hat + 1e-9 * curve.loglik_hat.abs().max(1.0));
        }
    }
}

#[test]
fn local_classification_matches_builtin_labels() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let design = Design::linspace(0.0, 6.0, 13, 0.1).unwrap();
    for m in identikit::model::builtin_registry::<f64>() {
        for _ in 0..20 {
            let theta: Vec<f64> = match m.name() {
                // Keeps the logistic curve away from its flat regimes and
                // the biexponential rates apart.
                "logistic" => vec![rng.random_range(0.3..2.0), rng.random_range(1.0..20.0), rng.random_range(0.05..1.0)],
                "biexponential" => {
                    let a: f64 = rng.random_range(0.05..2.5);
                    vec![a, a * rng.random_range(1.5..4.0)]
                }
                _ => {
                    let space = m.space();
                    (0..space.dim())
                        .map(|j| {
                            let (lo, hi) = space.bounds(j);
                            let pad = 0.02 * (hi - lo);
                            rng.random_range(lo + pad..hi - pad)
                        })
                        .collect()
                }
            };
            let report = fim_for_design(m.as_ref(), &design, &theta, DEFAULT_RANK_TOLERANCE).unwrap();
            let local = classify_local_identifiability(&report, DEFAULT_RANK_TOLERANCE);
            let expected = match m.label().unwrap() {
                IdentifiabilityLabel::StructurallyUnidentifiable => Classification::RankDeficient,
                _ => Classification::Identifiable,
            };
            assert_eq!(local.classification, expected, "{} at {theta:?}", m.name());
        }
    }
}

#[test]
fn residual_variance_estimate_is_unbiased() {
    let m = get("reciprocal");
    let sigma = 0.1;
    let d = Design::linspace(0.0, 1.0, 10, sigma).unwrap();
    let total: f64 = (0..1000u64)
        .map(|seed| {
            let data = generate_data(m.as_ref(), &d, &[2.0], seed).unwrap();
            let est = fit(m.as_ref(), &data, &[2.0], None, &FitOptions::default()).unwrap();
            est.sigma2_hat.unwrap()
        })
        .sum();
    let mean = total / 1000.0;
    assert!((mean / (sigma * sigma) - 1.0).abs() < 0.05, "mean sigma2_hat {mean}");
}

#[test]
fn replicate_mean_approaches_model_output() {
    let m = get("biexponential");
    let sigma = 0.3;
    let n = 100_000;
    let d = Design::with_replicates(vec![0.7], sigma, n).unwrap();
    let data: Dataset<f64> = generate_data(m.as_ref(), &d, &[0.4, 2.5], 99).unwrap();
    let f = evaluate(m.as_ref(), &d, &[0.4, 2.5]).unwrap()[0];
    let mean = data.observations().iter().sum::<f64>() / n as f64;
    assert!((mean - f).abs() <= 4.0 * sigma / (n as f64).sqrt(), "mean {mean} vs {f}");
}
