use proptest::prelude::*;
use rand_distr::{Distribution, Normal};
use rlct_core::rlct::{estimate_rlct_from_slope, fit_log_n_slope};
use rlct_core::rng::{stream, StreamTag};

const SIZES: [usize; 8] = [50, 100, 200, 400, 800, 1600, 3200, 6400];

#[test]
fn mean_slope_is_consistent_under_gaussian_noise() {
    let (a, b) = (1.7, -0.8);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let slopes: Vec<f64> = (0..50)
        .map(|rep| {
            let mut rng = stream(rep, StreamTag::Oracle, 0);
            let pts: Vec<(usize, f64)> =
                SIZES.iter().map(|&n| (n, a + b * (n as f64).ln() + noise.sample(&mut rng))).collect();
            fit_log_n_slope(&pts).unwrap().slope
        })
        .collect();
    let mean = slopes.iter().sum::<f64>() / 50.0;
    let var = slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / 49.0;
    let stderr = (var / 50.0).sqrt();
    assert!((mean - b).abs() < 2.0 * stderr, "mean {mean} stderr {stderr}");
}

#[test]
fn residuals_are_orthogonal_to_the_regressors() {
    let mut rng = stream(4, StreamTag::Oracle, 1);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let pts: Vec<(usize, f64)> = SIZES.iter().map(|&n| (n, noise.sample(&mut rng))).collect();
    let fit = fit_log_n_slope(&pts).unwrap();
    let resid: Vec<(f64, f64)> =
        pts.iter().map(|&(n, v)| ((n as f64).ln(), v - fit.intercept - fit.slope * (n as f64).ln())).collect();
    assert!(resid.iter().map(|r| r.1).sum::<f64>().abs() < 1e-10);
    assert!(resid.iter().map(|r| r.0 * r.1).sum::<f64>().abs() < 1e-10);
}

proptest! {
    #[test]
    fn slope_scales_and_ignores_shifts(
        values in prop::collection::vec(-100.0f64..100.0, 8),
        scale in -10.0f64..10.0,
        shift in -1e3f64..1e3,
    ) {
        let pts: Vec<(usize, f64)> = SIZES.iter().copied().zip(values.iter().copied()).collect();
        let base = fit_log_n_slope(&pts).unwrap();
        let scaled: Vec<_> = pts.iter().map(|&(n, v)| (n, scale * v)).collect();
        let shifted: Vec<_> = pts.iter().map(|&(n, v)| (n, v + shift)).collect();
        let s = fit_log_n_slope(&scaled).unwrap();
        let t = fit_log_n_slope(&shifted).unwrap();
        let tol = 1e-9 * (1.0 + base.slope.abs() + base.intercept.abs());
        prop_assert!((s.slope - scale * base.slope).abs() < tol * (1.0 + scale.abs()));
        prop_assert!((s.intercept - scale * base.intercept).abs() < tol * (1.0 + scale.abs()));
        prop_assert!((t.slope - base.slope).abs() < tol);
        prop_assert!((t.intercept - base.intercept - shift).abs() < tol + 1e-9 * shift.abs());
    }

    #[test]
    fn estimator_inverts_an_exact_centered_curve(lambda in 0.0f64..10.0, c in -50.0f64..50.0) {
        let pts: Vec<(usize, f64)> = SIZES.iter().map(|&n| (n, c - lambda * (n as f64).ln())).collect();
        prop_assert!((estimate_rlct_from_slope(&pts).unwrap() - lambda).abs() < 1e-9);
    }
}
