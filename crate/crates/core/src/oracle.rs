//! Brute-force checks of the closed-form evidence.
//!
//! The integrand `log p(y | θ) + log π(θ)` is evaluated directly from
//! residuals; the posterior is only used to place the integration domain
//! (quadrature) or as the proposal (importance sampling).

use std::collections::BinaryHeap;
use std::cmp::Ordering;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::{posterior, GaussianLinearProblem};
use crate::linalg::{cholesky_log_det, spd_cholesky, standard_normal_vector};
use crate::rng::{stream, StreamTag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    pub rel_tol: f64,
    /// Interval budget per one-dimensional integral.
    pub max_subdivisions: usize,
    /// Half-width of the domain in posterior standard deviations.
    pub integration_radius: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self { rel_tol: 1e-9, max_subdivisions: 2000, integration_radius: 12.0 }
    }
}

impl QuadratureSettings {
    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::Domain(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        if !(self.integration_radius >= 8.0) {
            return Err(Error::Domain(format!(
                "integration radius must be at least 8 posterior sds, got {}",
                self.integration_radius
            )));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::Domain("max_subdivisions must be positive".into()));
        }
        Ok(())
    }
}

// 15-point Kronrod nodes/weights with the embedded 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive G7-K15 on `[a, b]`, starting from `initial` equal
/// panels and always bisecting the panel with the largest error estimate.
fn adaptive_integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<f64> {
    const INITIAL: usize = 8;
    let width = (b - a) / INITIAL as f64;
    let mut heap = BinaryHeap::new();
    for k in 0..INITIAL {
        let lo = a + k as f64 * width;
        let hi = if k + 1 == INITIAL { b } else { lo + width };
        let (value, error) = gauss_kronrod(&mut f, lo, hi);
        heap.push(Panel { a: lo, b: hi, value, error });
    }
    loop {
        let total: f64 = heap.iter().map(|p| p.value).sum();
        let err: f64 = heap.iter().map(|p| p.error).sum();
        if err <= rel_tol * total.abs() || err <= f64::MIN_POSITIVE {
            return Ok(total);
        }
        if heap.len() >= max_panels {
            return Err(Error::Oracle(format!(
                "no convergence after {} panels (estimate {total:e}, error {err:e})",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        for (lo, hi) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = gauss_kronrod(&mut f, lo, hi);
            heap.push(Panel { a: lo, b: hi, value, error });
        }
    }
}

/// `log ∫ p(y | θ) π(θ) dθ` by adaptive quadrature (tensor-product for
/// `d = 2`), with the integrand scaled by its value at the posterior mean.
pub fn quadrature_log_evidence(prob: &GaussianLinearProblem, settings: &QuadratureSettings) -> Result<f64> {
    settings.validate()?;
    let log_joint = |theta: &DVector<f64>| prob.log_likelihood(theta) + prob.log_prior(theta);
    match prob.d() {
        0 => Ok(log_joint(&DVector::zeros(0))),
        1 => {
            let post = posterior(prob)?;
            let mu = post.mean[0];
            let sd = 1.0 / post.precision[(0, 0)].sqrt();
            let peak = log_joint(&post.mean);
            let radius = settings.integration_radius * sd;
            let mut theta = DVector::zeros(1);
            let integral = adaptive_integrate(
                |t| {
                    theta[0] = t;
                    (log_joint(&theta) - peak).exp()
                },
                mu - radius,
                mu + radius,
                settings.rel_tol,
                settings.max_subdivisions,
            )?;
            Ok(peak + integral.ln())
        }
        2 => {
            let post = posterior(prob)?;
            let lam = &post.precision;
            let mu = &post.mean;
            let peak = log_joint(mu);
            // marginal sd of θ₁ and conditional law of θ₂ | θ₁
            let det = lam[(0, 0)] * lam[(1, 1)] - lam[(0, 1)] * lam[(1, 0)];
            let sd_outer = (lam[(1, 1)] / det).sqrt();
            let sd_inner = 1.0 / lam[(1, 1)].sqrt();
            let coupling = lam[(1, 0)] / lam[(1, 1)];
            let radius = settings.integration_radius;
            let inner_tol = settings.rel_tol * 0.1;
            let mut failure: Option<Error> = None;
            let outer = adaptive_integrate(
                |t1| {
                    if failure.is_some() {
                        return 0.0;
                    }
                    let center = mu[1] - coupling * (t1 - mu[0]);
                    let mut theta = DVector::from_vec(vec![t1, 0.0]);
                    let inner = adaptive_integrate(
                        |t2| {
                            theta[1] = t2;
                            (log_joint(&theta) - peak).exp()
                        },
                        center - radius * sd_inner,
                        center + radius * sd_inner,
                        inner_tol,
                        settings.max_subdivisions,
                    );
                    match inner {
                        Ok(v) => v,
                        Err(e) => {
                            failure = Some(e);
                            0.0
                        }
                    }
                },
                mu[0] - radius * sd_outer,
                mu[0] + radius * sd_outer,
                settings.rel_tol,
                settings.max_subdivisions,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            Ok(peak + outer?.ln())
        }
        d => Err(Error::Domain(format!("quadrature oracle supports d <= 2, got d = {d}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEstimate {
    pub estimate: f64,
    /// Delta-method standard error of `estimate`.
    pub stderr: f64,
    /// Sample variance of the log-weights.
    pub log_weight_variance: f64,
}

/// Importance sampling with the exact posterior as proposal. The weights
/// are then constant, so the estimate is exact up to rounding.
pub fn importance_log_evidence(prob: &GaussianLinearProblem, n_samples: usize, seed: u64) -> Result<ImportanceEstimate> {
    importance_log_evidence_scaled(prob, n_samples, seed, 1.0)
}

/// As [`importance_log_evidence`] with the proposal covariance inflated by
/// `scale²`.
pub fn importance_log_evidence_scaled(
    prob: &GaussianLinearProblem,
    n_samples: usize,
    seed: u64,
    scale: f64,
) -> Result<ImportanceEstimate> {
    let d = prob.d();
    if d > 5 {
        return Err(Error::Domain(format!("importance oracle supports d <= 5, got d = {d}")));
    }
    if n_samples < 1000 {
        return Err(Error::Domain(format!("need at least 1000 samples, got {n_samples}")));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Domain(format!("proposal scale must be positive, got {scale}")));
    }
    let post = posterior(prob)?;
    let ch = spd_cholesky(&post.precision, "posterior precision")?;
    let half_log_det = 0.5 * cholesky_log_det(&ch);
    let lt = ch.l().transpose();
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let mut rng = stream(seed, StreamTag::Oracle, n_samples as u64);
    let log_w: Vec<f64> = (0..n_samples)
        .map(|_| {
            let z = standard_normal_vector(&mut rng, d);
            // θ = μ + scale · L⁻ᵀ z has covariance scale² Λ⁻¹
            let step = lt.solve_upper_triangular(&z).expect("positive diagonal") * scale;
            let theta = &post.mean + step;
            let log_q = -0.5 * d as f64 * ln_2pi - d as f64 * scale.ln() + half_log_det - 0.5 * z.norm_squared();
            prob.log_likelihood(&theta) + prob.log_prior(&theta) - log_q
        })
        .collect();
    let k = n_samples as f64;
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = log_w.iter().map(|lw| (lw - max).exp()).collect();
    let mean = scaled.iter().sum::<f64>() / k;
    let var = scaled.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let lw_mean = log_w.iter().sum::<f64>() / k;
    let log_weight_variance = log_w.iter().map(|lw| (lw - lw_mean).powi(2)).sum::<f64>() / (k - 1.0);
    Ok(ImportanceEstimate {
        estimate: max + mean.ln(),
        stderr: (var / k).sqrt() / mean,
        log_weight_variance,
    })
}

/// Random well-posed problem of the given shape, keyed by `seed`: Gaussian
/// design with a random column scale, noise and prior variances
/// log-uniform in `[1/4, 4]`, responses drawn from the model itself.
pub fn random_problem(seed: u64, d: usize, n: usize) -> GaussianLinearProblem {
    use rand::Rng;
    let mut rng = stream(seed, StreamTag::ProblemGenerator, ((d as u64) << 32) | n as u64);
    let sigma2 = 4f64.powf(rng.random_range(-1.0..1.0));
    let tau2 = 4f64.powf(rng.random_range(-1.0..1.0));
    let scale = 2f64.powf(rng.random_range(-1.0..1.0));
    let a = crate::linalg::standard_normal_matrix(&mut rng, n, d) * scale;
    let theta = standard_normal_vector(&mut rng, d) * tau2.sqrt();
    let y = &a * theta + standard_normal_vector(&mut rng, n) * sigma2.sqrt();
    GaussianLinearProblem::new(a, y, sigma2, tau2).expect("generated problem is valid")
}

/// Largest discrepancies seen by [`run_verification`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub quadrature_problems: usize,
    /// max |closed form − quadrature| over problems with d ≤ 2, n ≤ 50.
    pub max_quadrature_abs: f64,
    pub laplace_problems: usize,
    /// max |full Laplace − closed form| / |closed form| over d ≤ 20, n ≤ 1000.
    pub max_laplace_rel: f64,
    pub importance_problems: usize,
    /// max |IS estimate − closed form| with the exact posterior proposal.
    pub max_importance_abs: f64,
    pub max_importance_stderr: f64,
    /// max |IS estimate − closed form| / stderr with a 2× widened proposal.
    pub max_widened_z: f64,
}

impl VerificationReport {
    pub const QUADRATURE_TOL: f64 = 1e-6;
    pub const LAPLACE_REL_TOL: f64 = 1e-8;
    pub const IMPORTANCE_ABS_TOL: f64 = 1e-9;
    pub const IMPORTANCE_STDERR_TOL: f64 = 1e-10;
    pub const WIDENED_Z_TOL: f64 = 3.0;

    pub fn passed(&self) -> bool {
        self.max_quadrature_abs < Self::QUADRATURE_TOL
            && self.max_laplace_rel < Self::LAPLACE_REL_TOL
            && self.max_importance_abs < Self::IMPORTANCE_ABS_TOL
            && self.max_importance_stderr < Self::IMPORTANCE_STDERR_TOL
            && self.max_widened_z < Self::WIDENED_Z_TOL
    }
}

/// Runs the closed form against every oracle on freshly drawn problems.
pub fn run_verification(
    seed: u64,
    quadrature_problems: usize,
    laplace_problems: usize,
    importance_problems: usize,
) -> Result<VerificationReport> {
    use crate::evidence::{exact_log_evidence, full_laplace_log_evidence};
    use rand::Rng;
    let mut shapes = stream(seed, StreamTag::ProblemGenerator, u64::MAX);
    let settings = QuadratureSettings::default();
    let mut max_quadrature_abs = 0.0_f64;
    for i in 0..quadrature_problems {
        let (d, n) = (shapes.random_range(1..=2), shapes.random_range(1..=50));
        let prob = random_problem(seed.wrapping_add(i as u64), d, n);
        let diff = (exact_log_evidence(&prob)? - quadrature_log_evidence(&prob, &settings)?).abs();
        max_quadrature_abs = max_quadrature_abs.max(diff);
    }
    let mut max_laplace_rel = 0.0_f64;
    for i in 0..laplace_problems {
        let (d, n) = (shapes.random_range(1..=20), shapes.random_range(1..=1000));
        let prob = random_problem(seed.wrapping_add(1_000_000 + i as u64), d, n);
        let exact = exact_log_evidence(&prob)?;
        let rel = (full_laplace_log_evidence(&prob)? - exact).abs() / exact.abs();
        max_laplace_rel = max_laplace_rel.max(rel);
    }
    let mut max_importance_abs = 0.0_f64;
    let mut max_importance_stderr = 0.0_f64;
    let mut max_widened_z = 0.0_f64;
    for i in 0..importance_problems {
        let (d, n) = (shapes.random_range(1..=5), shapes.random_range(1..=50));
        let prob = random_problem(seed.wrapping_add(2_000_000 + i as u64), d, n);
        let exact = exact_log_evidence(&prob)?;
        let est = importance_log_evidence(&prob, 1000, seed.wrapping_add(i as u64))?;
        max_importance_abs = max_importance_abs.max((est.estimate - exact).abs());
        max_importance_stderr = max_importance_stderr.max(est.stderr);
        let wide = importance_log_evidence_scaled(&prob, 20_000, seed.wrapping_add(i as u64), 2.0)?;
        max_widened_z = max_widened_z.max((wide.estimate - exact).abs() / wide.stderr);
    }
    Ok(VerificationReport {
        quadrature_problems,
        max_quadrature_abs,
        laplace_problems,
        max_laplace_rel,
        importance_problems,
        max_importance_abs,
        max_importance_stderr,
        max_widened_z,
    })
}
