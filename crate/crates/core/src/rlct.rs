//! Analytic RLCTs, OLS fits of scores against `log n`, and the evidence
//! slope estimator of λ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Learning coefficient λ and its multiplicity m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticRlct {
    pub lambda: f64,
    pub multiplicity: u32,
}

/// λ(r) = r/2 with m = 1 for rank-r linear-Gaussian regression. `r = d`
/// recovers the regular value d/2.
pub fn analytic_rlct(r: i64) -> Result<AnalyticRlct> {
    if r < 0 {
        return Err(Error::Domain(format!("rank must be nonnegative, got {r}")));
    }
    Ok(AnalyticRlct { lambda: r as f64 / 2.0, multiplicity: 1 })
}

/// Ordinary least squares of a score on `[1, log n]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Classical homoskedastic standard error; zero for a two-point fit.
    pub stderr_slope: f64,
    pub n_points: usize,
    pub r_squared: f64,
}

pub fn fit_log_n_slope(points: &[(usize, f64)]) -> Result<SlopeFit> {
    if let Some(&(n, _)) = points.iter().find(|(n, _)| *n < 2) {
        return Err(Error::Domain(format!("sample sizes must be >= 2, got {n}")));
    }
    let mut distinct: Vec<usize> = points.iter().map(|p| p.0).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Degenerate(format!(
            "slope fit needs at least 2 distinct sample sizes, got {}",
            distinct.len()
        )));
    }
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / k;
    let v_mean = points.iter().map(|p| p.1).sum::<f64>() / k;
    let mut sxx = 0.0;
    let mut sxv = 0.0;
    let mut svv = 0.0;
    for (x, &(_, v)) in xs.iter().zip(points) {
        let dx = x - x_mean;
        let dv = v - v_mean;
        sxx += dx * dx;
        sxv += dx * dv;
        svv += dv * dv;
    }
    let slope = sxv / sxx;
    let intercept = v_mean - slope * x_mean;
    let ssr: f64 = xs
        .iter()
        .zip(points)
        .map(|(x, &(_, v))| {
            let e = v - intercept - slope * x;
            e * e
        })
        .sum();
    let stderr_slope = if points.len() > 2 { (ssr / (k - 2.0) / sxx).sqrt() } else { 0.0 };
    let r_squared = if svv > 0.0 { (1.0 - ssr / svv).clamp(0.0, 1.0) } else { 1.0 };
    Ok(SlopeFit { slope, intercept, stderr_slope, n_points: points.len(), r_squared })
}

/// How a λ estimate is read off an evidence-vs-`log n` slope.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeEstimator {
    /// `λ̂ = −slope` of the centered evidence `log Z_n − log p(D_n | θ̂_n)`.
    #[default]
    Centered,
    /// `λ̂ = −slope / 2` applied to whatever sequence is supplied. Kept for
    /// comparison; it does not converge to λ on these models.
    HalfSlope,
}

/// λ̂ from `(n, log Z_n − log p(D_n | θ̂_n))` pairs.
pub fn estimate_rlct_from_slope(centered_points: &[(usize, f64)]) -> Result<f64> {
    estimate_rlct_with(centered_points, SlopeEstimator::Centered)
}

pub fn estimate_rlct_with(points: &[(usize, f64)], estimator: SlopeEstimator) -> Result<f64> {
    let fit = fit_log_n_slope(points)?;
    Ok(match estimator {
        SlopeEstimator::Centered => -fit.slope,
        SlopeEstimator::HalfSlope => -0.5 * fit.slope,
    })
}

/// Predicted `log n` slope of the BIC error, under both sign conventions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedSlopes {
    /// `+(d − r)/2`: exact evidence over the BIC-type Laplace.
    pub evidence_excess_slope: f64,
    /// `−(d − r)/2`: slope of `Δ_BIC = log Z_bic − log Z_exact`.
    pub bic_error_slope: f64,
}

pub fn predicted_bic_error_slope(d: usize, r: usize) -> Result<PredictedSlopes> {
    if r > d {
        return Err(Error::Domain(format!("rank {r} exceeds ambient dimension {d}")));
    }
    let gap = (d - r) as f64 / 2.0;
    Ok(PredictedSlopes { evidence_excess_slope: gap, bic_error_slope: -gap })
}
