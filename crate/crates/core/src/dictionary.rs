//! Linear subspace ("dictionary") model `y_i = D z_i + ε_i` with
//! `z_i ~ N(0, τ² I_d)` and `ε_i ~ N(0, σ² I_p)`. Integrating out the latents
//! gives `y_i ~ N(0, τ² D Dᵀ + σ² I_p)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::{bic_score, rlct_score};
use crate::linalg::{
    cholesky_log_det, numerical_rank, orthonormalize_columns, rank_tolerance, spd_cholesky,
    singular_values, standard_normal_matrix, symmetric_eigen_desc,
};
use crate::linear_models::check_scales;
use crate::rng::{stream, StreamTag};

#[derive(Debug, Clone, PartialEq)]
pub struct DictionarySpec {
    pub p: usize,
    pub d: usize,
    pub dict: DMatrix<f64>,
    pub tau2: f64,
    pub sigma2: f64,
    /// Dimension of the column span (numerical rank of `dict`).
    pub r: usize,
}

impl DictionarySpec {
    pub fn new(dict: DMatrix<f64>, tau2: f64, sigma2: f64) -> Result<Self> {
        check_scales(sigma2, tau2)?;
        let (p, d) = dict.shape();
        if p == 0 {
            return Err(Error::Dimension("dictionary needs at least one row".into()));
        }
        let r = numerical_rank(&dict);
        Ok(Self { p, d, dict, tau2, sigma2, r })
    }

    /// Same dictionary, different right factor: `D R`.
    pub fn reparametrized(&self, right: &DMatrix<f64>) -> Result<Self> {
        if right.nrows() != self.d {
            return Err(Error::Dimension(format!(
                "right factor has {} rows, dictionary has {} columns",
                right.nrows(),
                self.d
            )));
        }
        Self::new(&self.dict * right, self.tau2, self.sigma2)
    }
}

/// Observations as rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryDataset {
    pub n: usize,
    pub y: DMatrix<f64>,
}

/// `Σ_y(D) = τ² D Dᵀ + σ² I_p`.
pub fn marginal_covariance(spec: &DictionarySpec) -> DMatrix<f64> {
    &spec.dict * spec.dict.transpose() * spec.tau2 + DMatrix::identity(spec.p, spec.p) * spec.sigma2
}

/// `log p(Y | D) = −(n/2) log det(2π Σ_y) − ½ Σ_i y_iᵀ Σ_y⁻¹ y_i`.
pub fn dict_log_likelihood(spec: &DictionarySpec, data: &DictionaryDataset) -> Result<f64> {
    if data.y.ncols() != spec.p || data.y.nrows() != data.n {
        return Err(Error::Dimension(format!(
            "data is {}x{}, expected {}x{}",
            data.y.nrows(),
            data.y.ncols(),
            data.n,
            spec.p
        )));
    }
    let ch = spd_cholesky(&marginal_covariance(spec), "dictionary marginal covariance")?;
    let log_det = cholesky_log_det(&ch) + spec.p as f64 * (2.0 * PI).ln();
    let quad = whitened_norm_squared(&ch, &data.y);
    Ok(-0.5 * data.n as f64 * log_det - 0.5 * quad)
}

// Σ_i ‖L⁻¹ y_i‖², one triangular solve for all observations.
fn whitened_norm_squared(ch: &nalgebra::Cholesky<f64, nalgebra::Dyn>, y: &DMatrix<f64>) -> f64 {
    let l = ch.l();
    let white = l
        .solve_lower_triangular(&y.transpose())
        .expect("Cholesky factor has a positive diagonal");
    white.norm_squared()
}

/// Draws `n` observations keyed by `seed`.
pub fn sample_dictionary_data(spec: &DictionarySpec, n: usize, seed: u64) -> Result<DictionaryDataset> {
    if n == 0 {
        return Err(Error::Dimension("sample size must be at least 1".into()));
    }
    let z = standard_normal_matrix(&mut stream(seed, StreamTag::DictionaryLatent, n as u64), n, spec.d);
    let e = standard_normal_matrix(&mut stream(seed, StreamTag::DictionaryNoise, n as u64), n, spec.p);
    let y = z * spec.dict.transpose() * spec.tau2.sqrt() + e * spec.sigma2.sqrt();
    Ok(DictionaryDataset { n, y })
}

/// How the overcomplete dictionary `D' = D M` mixes the minimal columns.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mixing {
    /// `M` has orthonormal rows (`M Mᵀ = I_r`), so `D' D'ᵀ = D Dᵀ` and both
    /// dictionaries induce the same distribution on `y`.
    #[default]
    RowOrthonormal,
    /// Raw i.i.d. Gaussian `M`. Same span, but `D' D'ᵀ ≠ D Dᵀ`, so the
    /// ground-truth likelihoods drift apart linearly in n.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairOptions {
    pub tau2: f64,
    pub sigma2: f64,
    pub mixing: Mixing,
}

impl Default for PairOptions {
    fn default() -> Self {
        Self { tau2: 1.0, sigma2: 1.0, mixing: Mixing::RowOrthonormal }
    }
}

/// Minimal and overcomplete dictionaries sharing one `r`-dimensional span.
#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryPair {
    pub minimal: DictionarySpec,
    pub overcomplete: DictionarySpec,
    /// The `r × d_over` factor with `overcomplete = minimal · mixing`.
    pub mixing: DMatrix<f64>,
}

pub fn make_dictionary_pair(p: usize, r: usize, d_over: usize, seed: u64) -> Result<DictionaryPair> {
    make_dictionary_pair_with(p, r, d_over, seed, PairOptions::default())
}

pub fn make_dictionary_pair_with(
    p: usize,
    r: usize,
    d_over: usize,
    seed: u64,
    opts: PairOptions,
) -> Result<DictionaryPair> {
    if r == 0 || r > p {
        return Err(Error::Domain(format!("span dimension r={r} must satisfy 0 < r <= p={p}")));
    }
    if d_over <= r {
        return Err(Error::Domain(format!(
            "overcomplete dictionary needs more than r={r} columns, got {d_over}"
        )));
    }
    const MAX_ATTEMPTS: u64 = 64;
    for attempt in 0..MAX_ATTEMPTS {
        let basis = standard_normal_matrix(&mut stream(seed, StreamTag::DictionaryBasis, attempt), p, r);
        if numerical_rank(&basis) != r {
            continue;
        }
        let g = standard_normal_matrix(&mut stream(seed, StreamTag::DictionaryMixing, attempt), r, d_over);
        if numerical_rank(&g) != r {
            continue;
        }
        let mixing = match opts.mixing {
            Mixing::RowOrthonormal => orthonormalize_columns(&g.transpose()).transpose(),
            Mixing::Gaussian => g,
        };
        let minimal = DictionarySpec::new(orthonormalize_columns(&basis), opts.tau2, opts.sigma2)?;
        let overcomplete = minimal.reparametrized(&mixing)?;
        if minimal.r != r || overcomplete.r != r {
            continue;
        }
        return Ok(DictionaryPair { minimal, overcomplete, mixing });
    }
    Err(Error::Degenerate(format!(
        "could not build a rank-{r} dictionary pair after {MAX_ATTEMPTS} draws"
    )))
}

/// Eigenvalues of `DᵀD`, descending, length `d`.
///
/// Computed as squared singular values of `D` (zero-padded when `p < d`),
/// which keeps the redundant block at the rounding level of `D` rather than
/// of `DᵀD`.
pub fn gram_spectrum(spec: &DictionarySpec) -> DVector<f64> {
    let mut sv: Vec<f64> = if spec.dict.is_empty() {
        Vec::new()
    } else {
        singular_values(&spec.dict).iter().map(|s| s * s).collect()
    };
    sv.resize(spec.d, 0.0);
    sv.sort_by(|a, b| b.total_cmp(a));
    DVector::from_vec(sv)
}

/// Number of entries of a [`gram_spectrum`] that count as nonzero, using the
/// singular-value rank rule on their square roots.
pub fn spectrum_rank(spectrum: &DVector<f64>, p: usize) -> usize {
    let smax = spectrum.iter().fold(0.0_f64, |m, &e| m.max(e)).sqrt();
    if smax <= 0.0 {
        return 0;
    }
    let tol = rank_tolerance(smax, p, spectrum.len());
    spectrum.iter().filter(|&&e| e.max(0.0).sqrt() > tol).count()
}

/// Maximized log-likelihood over all `p × shape_d` dictionaries with the
/// noise variance held fixed.
///
/// With sample covariance `C = YᵀY / n` and eigenvalues `ℓ_1 ≥ … ≥ ℓ_p`, the
/// optimum puts `max(ℓ_j − σ², 0)` of signal on each of the top
/// `min(shape_d, p)` eigenvectors (the probabilistic-PCA solution with known
/// σ²). `tau2` only rescales `D̂` and does not change the value.
pub fn ml_fit_term(data: &DictionaryDataset, shape_d: usize, tau2: f64, sigma2: f64) -> Result<f64> {
    check_scales(sigma2, tau2)?;
    if data.n == 0 {
        return Err(Error::Domain("fit term needs at least one observation".into()));
    }
    let p = data.y.ncols();
    let cov = data.y.transpose() * &data.y / data.n as f64;
    let (ell, _) = symmetric_eigen_desc(&cov);
    let k = shape_d.min(p);
    let mut log_det = 0.0;
    let mut trace = 0.0;
    for (j, &l) in ell.iter().enumerate() {
        let l = l.max(0.0);
        let model = if j < k { l.max(sigma2) } else { sigma2 };
        log_det += model.ln();
        trace += l / model;
    }
    Ok(-0.5 * data.n as f64 * (p as f64 * (2.0 * PI).ln() + log_det + trace))
}

/// Exact likelihoods and approximate scores for both members of a pair on
/// one realized dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DictionaryComparison {
    pub n: usize,
    pub r: usize,
    pub d_minimal: usize,
    pub d_overcomplete: usize,
    pub exact_minimal: f64,
    pub exact_overcomplete: f64,
    pub fit_minimal: f64,
    pub fit_overcomplete: f64,
    pub bic_minimal: f64,
    pub bic_overcomplete: f64,
    pub rlct_minimal: f64,
    pub rlct_overcomplete: f64,
    /// Scores with the fit term replaced by the ground-truth likelihood.
    pub bic_truth_minimal: f64,
    pub bic_truth_overcomplete: f64,
    pub rlct_truth_minimal: f64,
    pub rlct_truth_overcomplete: f64,
}

impl DictionaryComparison {
    pub fn exact_gap(&self) -> f64 {
        self.exact_minimal - self.exact_overcomplete
    }

    pub fn bic_gap(&self) -> f64 {
        self.bic_minimal - self.bic_overcomplete
    }

    pub fn rlct_gap(&self) -> f64 {
        self.rlct_minimal - self.rlct_overcomplete
    }

    pub fn fit_gap(&self) -> f64 {
        self.fit_minimal - self.fit_overcomplete
    }

    /// BIC gap with both fit terms taken at the ground-truth dictionaries,
    /// which give the same covariance, so only the penalties differ.
    pub fn bic_truth_gap(&self) -> f64 {
        self.bic_truth_minimal - self.bic_truth_overcomplete
    }

    pub fn values(&self) -> [f64; 12] {
        [
            self.exact_minimal,
            self.exact_overcomplete,
            self.fit_minimal,
            self.fit_overcomplete,
            self.bic_minimal,
            self.bic_overcomplete,
            self.rlct_minimal,
            self.rlct_overcomplete,
            self.bic_truth_minimal,
            self.bic_truth_overcomplete,
            self.rlct_truth_minimal,
            self.rlct_truth_overcomplete,
        ]
    }
}

/// Samples `n` points from the minimal dictionary and scores both members.
pub fn dictionary_comparison(pair: &DictionaryPair, n: usize, seed: u64) -> Result<DictionaryComparison> {
    let data = sample_dictionary_data(&pair.minimal, n, seed)?;
    compare_on(pair, &data)
}

pub fn compare_on(pair: &DictionaryPair, data: &DictionaryDataset) -> Result<DictionaryComparison> {
    let (min, over) = (&pair.minimal, &pair.overcomplete);
    let n = data.n;
    let lambda = min.r as f64 / 2.0;
    let exact_minimal = dict_log_likelihood(min, data)?;
    let exact_overcomplete = dict_log_likelihood(over, data)?;
    let fit_minimal = ml_fit_term(data, min.d, min.tau2, min.sigma2)?;
    let fit_overcomplete = ml_fit_term(data, over.d, over.tau2, over.sigma2)?;
    Ok(DictionaryComparison {
        n,
        r: min.r,
        d_minimal: min.d,
        d_overcomplete: over.d,
        exact_minimal,
        exact_overcomplete,
        fit_minimal,
        fit_overcomplete,
        bic_minimal: bic_score(fit_minimal, min.d, n)?,
        bic_overcomplete: bic_score(fit_overcomplete, over.d, n)?,
        rlct_minimal: rlct_score(fit_minimal, lambda, n)?,
        rlct_overcomplete: rlct_score(fit_overcomplete, lambda, n)?,
        bic_truth_minimal: bic_score(exact_minimal, min.d, n)?,
        bic_truth_overcomplete: bic_score(exact_overcomplete, over.d, n)?,
        rlct_truth_minimal: rlct_score(exact_minimal, lambda, n)?,
        rlct_truth_overcomplete: rlct_score(exact_overcomplete, lambda, n)?,
    })
}
