//! Rank-r linear-Gaussian regression: `y_i = x_iᵀ B θ + ε_i`.
//!
//! A [`RankRegressionSpec`] freezes the ground truth (`B*`, `θ*`, noise and
//! prior scales). Datasets at different sample sizes are independent draws
//! keyed by `(seed, n)`, never prefixes of one another.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, standard_normal_matrix, standard_normal_vector};
use crate::rng::{stream, StreamTag};

/// Ground truth for one rank-r regression problem.
#[derive(Debug, Clone, PartialEq)]
pub struct RankRegressionSpec {
    pub p: usize,
    pub d: usize,
    pub r: usize,
    pub b_star: DMatrix<f64>,
    pub theta_star: DVector<f64>,
    pub sigma2: f64,
    pub tau2: f64,
}

impl RankRegressionSpec {
    /// Validates shapes, scales and the numerical rank of `b_star`.
    pub fn new(
        b_star: DMatrix<f64>,
        theta_star: DVector<f64>,
        r: usize,
        sigma2: f64,
        tau2: f64,
    ) -> Result<Self> {
        let (p, d) = b_star.shape();
        check_rank_dims(p, d, r)?;
        if theta_star.len() != d {
            return Err(Error::Dimension(format!(
                "theta_star has length {} but B* has {d} columns",
                theta_star.len()
            )));
        }
        check_scales(sigma2, tau2)?;
        let found = numerical_rank(&b_star);
        if found != r {
            return Err(Error::Domain(format!("B* has numerical rank {found}, expected {r}")));
        }
        Ok(Self { p, d, r, b_star, theta_star, sigma2, tau2 })
    }

    /// Draws `B*` with [`make_rank_r_factor`] and `θ* ~ N(0, τ² I_d)`, both
    /// keyed by `seed`.
    pub fn generate(p: usize, d: usize, r: usize, sigma2: f64, tau2: f64, seed: u64) -> Result<Self> {
        check_scales(sigma2, tau2)?;
        let b_star = make_rank_r_factor(p, d, r, seed)?;
        let mut rng = stream(seed, StreamTag::TrueParameter, d as u64);
        let theta_star = standard_normal_vector(&mut rng, d) * tau2.sqrt();
        Self::new(b_star, theta_star, r, sigma2, tau2)
    }
}

fn check_rank_dims(p: usize, d: usize, r: usize) -> Result<()> {
    if p == 0 || d == 0 {
        return Err(Error::Dimension(format!("p and d must be positive (p={p}, d={d})")));
    }
    if r == 0 || r > p.min(d) {
        return Err(Error::Dimension(format!("rank r={r} must satisfy 0 < r <= min(p={p}, d={d})")));
    }
    Ok(())
}

pub(crate) fn check_scales(sigma2: f64, tau2: f64) -> Result<()> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) || !(tau2 > 0.0 && tau2.is_finite()) {
        return Err(Error::Domain(format!(
            "variances must be positive and finite (sigma2={sigma2}, tau2={tau2})"
        )));
    }
    Ok(())
}

/// Covariate distribution. Only the identity covariance is used so far.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputCovariance {
    #[default]
    Identity,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DataGenConfig {
    pub input_covariance: InputCovariance,
    pub seed: u64,
}

impl DataGenConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { input_covariance: InputCovariance::Identity, seed }
    }
}

/// One realized sample: design `X`, effective design `A = X B*`, responses.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionDataset {
    pub n: usize,
    pub x: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub y: DVector<f64>,
}

/// Ground-truth factor `B* = U Vᵀ` with Gaussian `U` (p × r) and `V` (d × r).
///
/// The product is rank r with probability one; if rounding ever makes the
/// rank test disagree the draw is repeated on the next stream index.
pub fn make_rank_r_factor(p: usize, d: usize, r: usize, seed: u64) -> Result<DMatrix<f64>> {
    check_rank_dims(p, d, r)?;
    const MAX_ATTEMPTS: u64 = 64;
    for attempt in 0..MAX_ATTEMPTS {
        let u = standard_normal_matrix(&mut stream(seed, StreamTag::FactorLeft, attempt), p, r);
        let v = standard_normal_matrix(&mut stream(seed, StreamTag::FactorRight, attempt), d, r);
        let b = &u * v.transpose();
        if numerical_rank(&b) == r {
            return Ok(b);
        }
    }
    Err(Error::Degenerate(format!(
        "no rank-{r} factor of shape {p}x{d} after {MAX_ATTEMPTS} draws (seed {seed})"
    )))
}

/// Draws `x_i ~ N(0, I_p)` and `y = X B* θ* + ε`, `ε ~ N(0, σ² I_n)`.
pub fn sample_dataset(spec: &RankRegressionSpec, n: usize, cfg: &DataGenConfig) -> Result<RegressionDataset> {
    if n == 0 {
        return Err(Error::Dimension("sample size must be at least 1".into()));
    }
    let InputCovariance::Identity = cfg.input_covariance;
    let x = standard_normal_matrix(&mut stream(cfg.seed, StreamTag::Design, n as u64), n, spec.p);
    let a = &x * &spec.b_star;
    let noise = standard_normal_vector(&mut stream(cfg.seed, StreamTag::Noise, n as u64), n);
    let y = &a * &spec.theta_star + noise * spec.sigma2.sqrt();
    Ok(RegressionDataset { n, x, a, y })
}

/// Population limit of `S_n / n`: `B*ᵀ Σ_x B*` with `Σ_x = I_p`.
pub fn population_gram(spec: &RankRegressionSpec) -> DMatrix<f64> {
    spec.b_star.transpose() * &spec.b_star
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{psd_rank_from_eigenvalues, symmetric_eigen_desc};

    #[test]
    fn scalar_factor_is_nonzero() {
        for seed in 0..10 {
            let b = make_rank_r_factor(1, 1, 1, seed).unwrap();
            assert_eq!(b.shape(), (1, 1));
            assert!(b[(0, 0)] != 0.0);
        }
    }

    #[test]
    fn factor_has_requested_rank() {
        let b = make_rank_r_factor(6, 6, 3, 7).unwrap();
        let sv = crate::linalg::singular_values(&b);
        let tol = sv.max() * 6.0 * f64::EPSILON;
        assert_eq!(sv.iter().filter(|&&s| s > tol).count(), 3);
    }

    #[test]
    fn rank_above_min_dim_rejected() {
        assert!(matches!(make_rank_r_factor(2, 3, 3, 0), Err(Error::Dimension(_))));
        assert!(matches!(make_rank_r_factor(2, 3, 0, 0), Err(Error::Dimension(_))));
    }

    #[test]
    fn rank_holds_over_many_seeds() {
        for seed in 0..200 {
            for r in 1..=6 {
                let spec = RankRegressionSpec::generate(6, 6, r, 1.0, 1.0, seed).unwrap();
                assert_eq!(numerical_rank(&spec.b_star), r);
                let (eigs, _) = symmetric_eigen_desc(&population_gram(&spec));
                assert_eq!(psd_rank_from_eigenvalues(eigs.as_slice(), 6), r, "seed {seed} r {r}");
            }
        }
    }

    #[test]
    fn noiseless_limit() {
        let spec = RankRegressionSpec::generate(6, 6, 3, 1e-12, 1.0, 11).unwrap();
        let data = sample_dataset(&spec, 40, &DataGenConfig::with_seed(5)).unwrap();
        let resid = &data.y - &data.a * &spec.theta_star;
        assert!(resid.amax() < 1e-5);
    }

    #[test]
    fn sampling_is_bitwise_deterministic() {
        let spec = RankRegressionSpec::generate(6, 6, 3, 1.0, 1.0, 1).unwrap();
        let cfg = DataGenConfig::with_seed(3);
        let a = sample_dataset(&spec, 50, &cfg).unwrap();
        let b = sample_dataset(&spec, 50, &cfg).unwrap();
        assert_eq!(a, b);
        let bits = |v: &DMatrix<f64>| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.x), bits(&b.x));
    }

    #[test]
    fn effective_design_is_exact_product() {
        let spec = RankRegressionSpec::generate(5, 4, 2, 1.0, 1.0, 9).unwrap();
        let data = sample_dataset(&spec, 30, &DataGenConfig::with_seed(2)).unwrap();
        assert_eq!(data.a, &data.x * &spec.b_star);
        assert_eq!((data.x.nrows(), data.a.nrows(), data.y.len()), (30, 30, 30));
    }

    #[test]
    fn zero_factor_has_zero_gram() {
        let spec = RankRegressionSpec {
            p: 3,
            d: 2,
            r: 0,
            b_star: DMatrix::zeros(3, 2),
            theta_star: DVector::zeros(2),
            sigma2: 1.0,
            tau2: 1.0,
        };
        assert_eq!(population_gram(&spec), DMatrix::zeros(2, 2));
    }

    #[test]
    fn orthonormal_columns_give_projector_gram() {
        // B* with orthonormal rows in R^d gives BᵀB = projector onto its row space
        let b = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let spec = RankRegressionSpec::new(b, DVector::zeros(4), 2, 1.0, 1.0).unwrap();
        let (eigs, _) = symmetric_eigen_desc(&population_gram(&spec));
        assert_eq!(eigs.as_slice(), &[1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_scales_and_wrong_rank() {
        let b = make_rank_r_factor(3, 3, 2, 0).unwrap();
        assert!(RankRegressionSpec::new(b.clone(), DVector::zeros(3), 2, 0.0, 1.0).is_err());
        assert!(RankRegressionSpec::new(b.clone(), DVector::zeros(3), 3, 1.0, 1.0).is_err());
        assert!(RankRegressionSpec::new(b, DVector::zeros(2), 2, 1.0, 1.0).is_err());
    }
}
