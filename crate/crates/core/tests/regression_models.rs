use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rlct_core::evidence::{
    exact_log_evidence, exact_log_evidence_from_stats, full_laplace_log_evidence, mle_fit_term, posterior,
    GaussianLinearProblem,
};
use rlct_core::linalg::{standard_normal_matrix, standard_normal_vector};
use rlct_core::linear_models::{population_gram, sample_dataset, DataGenConfig, RankRegressionSpec};
use rlct_core::rng::{stream, StreamTag};

fn gram_error(spec: &RankRegressionSpec, n: usize, seed: u64) -> f64 {
    let data = sample_dataset(spec, n, &DataGenConfig::with_seed(seed)).unwrap();
    let pop = population_gram(spec);
    let emp = data.a.transpose() * &data.a / n as f64;
    (emp - &pop).norm() / pop.norm()
}

#[test]
fn empirical_gram_converges_to_population_gram() {
    let spec = RankRegressionSpec::generate(6, 6, 3, 1.0, 1.0, 11).unwrap();
    assert!(gram_error(&spec, 100_000, 0) < 0.05);
}

#[test]
fn gram_error_median_decreases_with_n() {
    let spec = RankRegressionSpec::generate(6, 6, 3, 1.0, 1.0, 5).unwrap();
    let medians: Vec<f64> = [100, 1_000, 10_000, 100_000]
        .iter()
        .map(|&n| {
            let mut errs: Vec<f64> = (0..10).map(|s| gram_error(&spec, n, s)).collect();
            errs.sort_by(f64::total_cmp);
            0.5 * (errs[4] + errs[5])
        })
        .collect();
    assert!(medians.windows(2).all(|w| w[1] < w[0]), "{medians:?}");
}

// The fit term of a rank-deficient design, recomputed from an orthonormal
// basis of col(A) obtained by QR of A restricted to r independent columns
// (normal equations on the column space), not from the SVD.
#[test]
fn rank_deficient_fit_term_matches_projector_residual() {
    for seed in 0..10 {
        let spec = RankRegressionSpec::generate(6, 6, 3, 1.0, 1.0, seed).unwrap();
        let data = sample_dataset(&spec, 100, &DataGenConfig::with_seed(seed)).unwrap();
        let prob = GaussianLinearProblem::new(data.a.clone(), data.y.clone(), 1.0, 1.0).unwrap();
        let fit = mle_fit_term(&prob);
        assert_eq!(fit.rank, 3);

        // col(A) = col(X U) where B = U Vᵀ; any r columns of X·B* generically
        // span it, so solve the normal equations on three of them.
        let basis = data.a.columns(0, 3).into_owned();
        let gram = basis.transpose() * &basis;
        let coef = gram.cholesky().unwrap().solve(&(basis.transpose() * &data.y));
        let rss = (&data.y - &basis * coef).norm_squared();
        let n = 100.0;
        let log_lik = -0.5 * n * (2.0 * std::f64::consts::PI).ln() - 0.5 * rss;
        assert!((fit.log_lik - log_lik).abs() < 1e-9, "seed {seed}: {} vs {log_lik}", fit.log_lik);
    }
}

#[test]
fn spec_examples_for_the_fit_term() {
    let prob = GaussianLinearProblem::new(DMatrix::from_column_slice(2, 1, &[1.0, 1.0]), DVector::from_vec(vec![1.0, 1.0]), 1.0, 1.0)
        .unwrap();
    let fit = mle_fit_term(&prob);
    assert!((fit.theta_hat[0] - 1.0).abs() < 1e-14);
    assert!((fit.log_lik + (2.0 * std::f64::consts::PI).ln()).abs() < 1e-12);
}

#[test]
fn posterior_mean_solves_its_defining_equation() {
    let mut rng = stream(3, StreamTag::Oracle, 0);
    let a = standard_normal_matrix(&mut rng, 30, 5);
    let y = standard_normal_vector(&mut rng, 30);
    let prob = GaussianLinearProblem::new(a.clone(), y.clone(), 0.7, 1.9).unwrap();
    let post = posterior(&prob).unwrap();
    let lhs = &post.precision * &post.mean;
    let rhs = a.transpose() * y / 0.7;
    assert!((lhs - rhs).amax() < 1e-10);
}

fn problem(seed: u64, n: usize, d: usize, sigma2: f64, tau2: f64) -> GaussianLinearProblem {
    let mut rng = stream(seed, StreamTag::Oracle, ((n as u64) << 8) | d as u64);
    let a = standard_normal_matrix(&mut rng, n, d);
    let y = standard_normal_vector(&mut rng, n) * 2.0;
    GaussianLinearProblem::new(a, y, sigma2, tau2).unwrap()
}

#[test]
fn evidence_depends_only_on_gram_statistics() {
    let prob = problem(1, 40, 4, 1.3, 0.6);
    // An orthogonal transform of (A, y) preserves AᵀA, Aᵀy and yᵀy.
    let mut rng = stream(2, StreamTag::Oracle, 99);
    let q = standard_normal_matrix(&mut rng, 40, 40).qr().q();
    let rotated = GaussianLinearProblem::new(&q * &prob.a, &q * &prob.y, 1.3, 0.6).unwrap();
    let z1 = exact_log_evidence(&prob).unwrap();
    let z2 = exact_log_evidence(&rotated).unwrap();
    assert!((z1 - z2).abs() < 1e-10 * z1.abs());
    assert_eq!(z1, exact_log_evidence_from_stats(&prob.stats(), 1.3, 0.6).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gaussian_laplace_is_exact(
        seed in any::<u64>(),
        n in 1usize..400,
        d in 1usize..=20,
        log_sigma2 in -2.0f64..2.0,
        log_tau2 in -2.0f64..2.0,
    ) {
        let prob = problem(seed, n, d, log_sigma2.exp(), log_tau2.exp());
        let exact = exact_log_evidence(&prob).unwrap();
        let laplace = full_laplace_log_evidence(&prob).unwrap();
        prop_assert!((laplace - exact).abs() <= 1e-8 * exact.abs(), "{laplace} vs {exact}");
    }

    #[test]
    fn fit_term_ignores_null_space_directions(seed in any::<u64>(), r in 1usize..=5, scale in 0.1f64..100.0) {
        let spec = RankRegressionSpec::generate(6, 6, r, 1.0, 1.0, seed % 1000).unwrap();
        let data = sample_dataset(&spec, 60, &DataGenConfig::with_seed(seed)).unwrap();
        let prob = GaussianLinearProblem::new(data.a.clone(), data.y.clone(), 1.0, 1.0).unwrap();
        let fit = mle_fit_term(&prob);
        // Null space of A = null space of B*; take the trailing right
        // singular vectors of B*.
        let svd = rlct_core::linalg::thin_svd(&spec.b_star);
        let mut rng = stream(seed, StreamTag::Oracle, 7);
        let mut shift = DVector::zeros(6);
        for k in r..6 {
            let c: f64 = rand::Rng::random_range(&mut rng, -1.0..1.0);
            shift.axpy(scale * c, &svd.v.column(k), 1.0);
        }
        let moved = prob.log_likelihood(&(&fit.theta_hat + shift));
        prop_assert!((moved - fit.log_lik).abs() < 1e-9 * fit.log_lik.abs().max(1.0));
    }
}
