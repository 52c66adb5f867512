//! Seed-ensemble studies over sample-size grids.
//!
//! A regression study runs in two phases: [`run_cells`] evaluates every
//! `(rank, seed, n)` cell independently (in parallel when the `parallel`
//! feature is on), then [`aggregate`] averages the errors across seeds at
//! each `n` and fits slopes against `log n`. Keeping the phases apart lets
//! callers persist raw records before any aggregation happens and re-run
//! the aggregation offline from those records.

mod config;
pub mod persist;
mod summary;

use std::collections::BTreeMap;
#[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

pub use config::{default_n_grid, ExperimentConfig, Study, LIST_FIELDS};
pub use summary::{summarize, FailedCell, Summary};

use crate::dictionary::{
    compare_on, gram_spectrum, make_dictionary_pair_with, sample_dictionary_data, spectrum_rank,
    DictionaryComparison, PairOptions,
};
use crate::error::{Error, Result};
use crate::evidence::{evidence_record, EvidenceRecord, GaussianLinearProblem};
use crate::linear_models::{sample_dataset, DataGenConfig, RankRegressionSpec};
use crate::rlct::{
    analytic_rlct, estimate_rlct_from_slope, estimate_rlct_with, fit_log_n_slope, predicted_bic_error_slope,
    PredictedSlopes, SlopeEstimator, SlopeFit,
};

/// One evaluated `(rank, seed, n)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub study: Study,
    pub rank: usize,
    pub d: usize,
    pub p: usize,
    pub seed: u64,
    pub record: EvidenceRecord,
}

impl CellRecord {
    pub fn lambda(&self) -> f64 {
        self.rank as f64 / 2.0
    }
}

/// A cell that could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub rank: usize,
    pub seed: u64,
    pub n: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawCells {
    pub cells: Vec<CellRecord>,
    pub failures: Vec<CellFailure>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: usize,
    pub delta_bic: f64,
    pub delta_rlct: f64,
    /// Seed-mean of `log Z_n − log p(D_n | θ̂_n)`.
    pub centered_evidence: f64,
    pub log_z_exact: f64,
    pub n_seeds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedSlopes {
    pub seed: u64,
    pub slope_bic: f64,
    pub slope_rlct: f64,
    pub lambda_hat: f64,
}

/// Aggregated slopes for one rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub rank: usize,
    pub slope_bic: SlopeFit,
    pub slope_rlct: SlopeFit,
    /// Negated slope of the seed-mean centered evidence.
    pub lambda_hat: f64,
    /// `−½ ×` slope of the seed-mean uncentered `log Z_n`, for comparison.
    pub lambda_hat_half_slope: f64,
    pub lambda_analytic: f64,
    pub predicted: PredictedSlopes,
    pub n_seeds: usize,
    pub n_points: usize,
    pub curve: Vec<CurvePoint>,
    pub per_seed: Vec<SeedSlopes>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DictCell {
    pub seed: u64,
    pub comparison: DictionaryComparison,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub n: usize,
    pub exact_gap: f64,
    pub bic_gap: f64,
    pub rlct_gap: f64,
    pub fit_gap: f64,
    pub bic_truth_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryStudy {
    pub r: usize,
    pub d_minimal: usize,
    pub d_overcomplete: usize,
    /// Single-dataset comparison at `table_n` for the first seed.
    pub table: DictionaryComparison,
    pub spectrum_minimal: Vec<f64>,
    pub spectrum_overcomplete: Vec<f64>,
    pub spectrum_rank_minimal: usize,
    pub spectrum_rank_overcomplete: usize,
    pub cells: Vec<DictCell>,
    pub gaps: Vec<GapPoint>,
    pub exact_gap_slope: SlopeFit,
    pub bic_gap_slope: SlopeFit,
    pub rlct_gap_slope: SlopeFit,
    /// Slope of the BIC gap under equal (ground-truth) fit terms.
    pub bic_truth_gap_slope: SlopeFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config_hash: String,
    pub code_version: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub config: ExperimentConfig,
    pub cells: Vec<CellRecord>,
    pub failures: Vec<CellFailure>,
    pub ranks: Vec<RankSummary>,
    pub dictionary: Option<DictionaryStudy>,
    pub metadata: RunMetadata,
}

impl StudyResult {
    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty() && self.dictionary.is_none()
    }
}

#[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

// No clock on bare wasm; timestamps are metadata only.
#[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
fn now_ms() -> u128 {
    0
}

fn metadata(cfg: &ExperimentConfig, started: u128) -> RunMetadata {
    RunMetadata {
        config_hash: cfg.hash(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
    }
}

#[cfg(feature = "parallel")]
fn map_ordered<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_ordered<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    items.iter().map(f).collect()
}

fn evaluate_cell(cfg: &ExperimentConfig, spec: &RankRegressionSpec, seed: u64, n: usize) -> Result<CellRecord> {
    let data = sample_dataset(spec, n, &DataGenConfig::with_seed(seed))?;
    let prob = GaussianLinearProblem::new(data.a, data.y, cfg.sigma2, cfg.tau2)?;
    let lambda = analytic_rlct(spec.r as i64)?.lambda;
    let record = evidence_record(&prob, lambda)?;
    Ok(CellRecord { study: cfg.study, rank: spec.r, d: cfg.d, p: cfg.p, seed, record })
}

/// Evaluates every `(rank, seed, n)` cell of a regression study. Failures
/// are collected per cell; the run continues.
pub fn run_cells(cfg: &ExperimentConfig) -> Result<RawCells> {
    cfg.validate()?;
    if cfg.study == Study::DictCompare {
        return Err(Error::Config("dict_compare has no regression cells".into()));
    }
    let jobs: Vec<(usize, u64)> =
        cfg.ranks.iter().flat_map(|&r| cfg.seeds.iter().map(move |&s| (r, s))).collect();
    let outcomes = map_ordered(&jobs, |&(r, seed)| {
        match RankRegressionSpec::generate(cfg.p, cfg.d, r, cfg.sigma2, cfg.tau2, seed) {
            Ok(spec) => cfg
                .n_grid
                .iter()
                .map(|&n| {
                    evaluate_cell(cfg, &spec, seed, n).map_err(|e| CellFailure {
                        rank: r,
                        seed,
                        n,
                        message: e.to_string(),
                    })
                })
                .collect::<Vec<_>>(),
            Err(e) => cfg
                .n_grid
                .iter()
                .map(|&n| Err(CellFailure { rank: r, seed, n, message: e.to_string() }))
                .collect(),
        }
    });
    let mut raw = RawCells::default();
    for outcome in outcomes.into_iter().flatten() {
        match outcome {
            Ok(cell) if cell.record.is_finite() => raw.cells.push(cell),
            Ok(cell) => raw.failures.push(CellFailure {
                rank: cell.rank,
                seed: cell.seed,
                n: cell.record.n,
                message: "non-finite evidence record".into(),
            }),
            Err(f) => raw.failures.push(f),
        }
    }
    Ok(raw)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn summarize_rank(rank: usize, d: usize, cells: &[&CellRecord]) -> Result<RankSummary> {
    let mut by_n: BTreeMap<usize, Vec<&CellRecord>> = BTreeMap::new();
    let mut by_seed: BTreeMap<u64, Vec<&CellRecord>> = BTreeMap::new();
    for c in cells.iter().copied().filter(|c| c.record.is_finite()) {
        by_n.entry(c.record.n).or_default().push(c);
        by_seed.entry(c.seed).or_default().push(c);
    }
    let curve: Vec<CurvePoint> = by_n
        .iter()
        .map(|(&n, group)| {
            let col = |f: fn(&EvidenceRecord) -> f64| mean(&group.iter().map(|c| f(&c.record)).collect::<Vec<_>>());
            CurvePoint {
                n,
                delta_bic: col(|r| r.delta_bic),
                delta_rlct: col(|r| r.delta_rlct),
                centered_evidence: col(|r| r.log_z_exact - r.log_lik_mle),
                log_z_exact: col(|r| r.log_z_exact),
                n_seeds: group.len(),
            }
        })
        .collect();
    let pts = |f: fn(&CurvePoint) -> f64| curve.iter().map(|c| (c.n, f(c))).collect::<Vec<_>>();
    let slope_bic = fit_log_n_slope(&pts(|c| c.delta_bic))?;
    let slope_rlct = fit_log_n_slope(&pts(|c| c.delta_rlct))?;
    let lambda_hat = estimate_rlct_from_slope(&pts(|c| c.centered_evidence))?;
    let lambda_hat_half_slope = estimate_rlct_with(&pts(|c| c.log_z_exact), SlopeEstimator::HalfSlope)?;
    let per_seed = by_seed
        .iter()
        .filter_map(|(&seed, group)| {
            let series = |f: fn(&EvidenceRecord) -> f64| group.iter().map(|c| (c.record.n, f(&c.record))).collect::<Vec<_>>();
            Some(SeedSlopes {
                seed,
                slope_bic: fit_log_n_slope(&series(|r| r.delta_bic)).ok()?.slope,
                slope_rlct: fit_log_n_slope(&series(|r| r.delta_rlct)).ok()?.slope,
                lambda_hat: estimate_rlct_from_slope(&series(|r| r.log_z_exact - r.log_lik_mle)).ok()?,
            })
        })
        .collect();
    Ok(RankSummary {
        rank,
        slope_bic,
        slope_rlct,
        lambda_hat,
        lambda_hat_half_slope,
        lambda_analytic: analytic_rlct(rank as i64)?.lambda,
        predicted: predicted_bic_error_slope(d, rank)?,
        n_seeds: by_seed.len(),
        n_points: curve.len(),
        curve,
        per_seed,
    })
}

/// Seed-averages errors at each `n` and fits slopes per rank. Ranks that
/// cannot be fitted are reported as failures; if none can, the study is
/// aborted with the first error.
pub fn aggregate(cfg: &ExperimentConfig, raw: RawCells, started_unix_ms: u128) -> Result<StudyResult> {
    let mut failures = raw.failures;
    let mut ranks = Vec::new();
    let mut first_error = None;
    for &rank in &cfg.ranks {
        let cells: Vec<&CellRecord> = raw.cells.iter().filter(|c| c.rank == rank).collect();
        match summarize_rank(rank, cfg.d, &cells) {
            Ok(s) => ranks.push(s),
            Err(e) => {
                failures.push(CellFailure { rank, seed: 0, n: 0, message: format!("aggregation: {e}") });
                first_error.get_or_insert(e);
            }
        }
    }
    if ranks.is_empty() {
        return Err(first_error.unwrap_or_else(|| Error::Degenerate("no ranks to aggregate".into())));
    }
    Ok(StudyResult {
        config: cfg.clone(),
        cells: raw.cells,
        failures,
        ranks,
        dictionary: None,
        metadata: metadata(cfg, started_unix_ms),
    })
}

fn require(cfg: &ExperimentConfig, allowed: &[Study]) -> Result<()> {
    if !allowed.contains(&cfg.study) {
        return Err(Error::Config(format!("config is for study {}, not {:?}", cfg.study, allowed)));
    }
    Ok(())
}

fn run_regression(cfg: &ExperimentConfig) -> Result<StudyResult> {
    let started = now_ms();
    let raw = run_cells(cfg)?;
    aggregate(cfg, raw, started)
}

/// Δ_BIC and Δ_RLCT slopes for every configured rank.
pub fn run_rank_sweep(cfg: &ExperimentConfig) -> Result<StudyResult> {
    require(cfg, &[Study::RankSweep])?;
    run_regression(cfg)
}

/// Same pipeline as the rank sweep, for the RLCT estimates.
pub fn run_estimate_rlct(cfg: &ExperimentConfig) -> Result<StudyResult> {
    require(cfg, &[Study::EstimateRlct, Study::RankSweep])?;
    run_regression(cfg)
}

/// One regular (`r = d`) and one singular rank side by side.
pub fn run_regular_vs_singular(cfg: &ExperimentConfig) -> Result<StudyResult> {
    require(cfg, &[Study::RegularVsSingular])?;
    run_regression(cfg)
}

/// Minimal vs overcomplete dictionaries: single-dataset table, Gram
/// spectra, and gap slopes over the grid.
pub fn run_dict_compare(cfg: &ExperimentConfig) -> Result<StudyResult> {
    require(cfg, &[Study::DictCompare])?;
    cfg.validate()?;
    let started = now_ms();
    let r = cfg.ranks[0];
    let opts = PairOptions { tau2: cfg.tau2, sigma2: cfg.sigma2, mixing: cfg.dictionary_mixing };
    let jobs: Vec<(u64, usize)> =
        cfg.seeds.iter().flat_map(|&s| cfg.n_grid.iter().map(move |&n| (s, n))).collect();
    let outcomes = map_ordered(&jobs, |&(seed, n)| {
        let run = || -> Result<DictCell> {
            let pair = make_dictionary_pair_with(cfg.p, r, cfg.d, seed, opts)?;
            let data = sample_dictionary_data(&pair.minimal, n, seed)?;
            Ok(DictCell { seed, comparison: compare_on(&pair, &data)? })
        };
        run().map_err(|e| CellFailure { rank: r, seed, n, message: e.to_string() })
    });
    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(c) if c.comparison.values().iter().all(|v| v.is_finite()) => cells.push(c),
            Ok(c) => failures.push(CellFailure {
                rank: r,
                seed: c.seed,
                n: c.comparison.n,
                message: "non-finite comparison".into(),
            }),
            Err(f) => failures.push(f),
        }
    }
    let dictionary = dictionary_study(cfg, r, opts, &cells)?;
    Ok(StudyResult {
        config: cfg.clone(),
        cells: Vec::new(),
        failures,
        ranks: Vec::new(),
        dictionary: Some(dictionary),
        metadata: metadata(cfg, started),
    })
}

/// Seed-mean gaps at each `n` and their slopes, from per-seed cells.
pub fn gap_curve(cells: &[DictCell]) -> Vec<GapPoint> {
    let mut by_n: BTreeMap<usize, Vec<&DictionaryComparison>> = BTreeMap::new();
    for c in cells {
        by_n.entry(c.comparison.n).or_default().push(&c.comparison);
    }
    by_n.into_iter()
        .map(|(n, group)| {
            let avg = |f: fn(&DictionaryComparison) -> f64| mean(&group.iter().map(|c| f(c)).collect::<Vec<_>>());
            GapPoint {
                n,
                exact_gap: avg(|c| c.exact_gap()),
                bic_gap: avg(|c| c.bic_gap()),
                rlct_gap: avg(|c| c.rlct_gap()),
                fit_gap: avg(|c| c.fit_gap()),
                bic_truth_gap: avg(|c| c.bic_truth_gap()),
            }
        })
        .collect()
}

fn dictionary_study(cfg: &ExperimentConfig, r: usize, opts: PairOptions, cells: &[DictCell]) -> Result<DictionaryStudy> {
    let seed = cfg.seeds[0];
    let pair = make_dictionary_pair_with(cfg.p, r, cfg.d, seed, opts)?;
    let table_data = sample_dictionary_data(&pair.minimal, cfg.table_n, seed)?;
    let table = compare_on(&pair, &table_data)?;
    let spec_min = gram_spectrum(&pair.minimal);
    let spec_over = gram_spectrum(&pair.overcomplete);
    let gaps = gap_curve(cells);
    let series = |f: fn(&GapPoint) -> f64| gaps.iter().map(|g| (g.n, f(g))).collect::<Vec<_>>();
    Ok(DictionaryStudy {
        r,
        d_minimal: pair.minimal.d,
        d_overcomplete: pair.overcomplete.d,
        table,
        spectrum_rank_minimal: spectrum_rank(&spec_min, cfg.p),
        spectrum_rank_overcomplete: spectrum_rank(&spec_over, cfg.p),
        spectrum_minimal: spec_min.iter().copied().collect(),
        spectrum_overcomplete: spec_over.iter().copied().collect(),
        cells: cells.to_vec(),
        exact_gap_slope: fit_log_n_slope(&series(|g| g.exact_gap))?,
        bic_gap_slope: fit_log_n_slope(&series(|g| g.bic_gap))?,
        rlct_gap_slope: fit_log_n_slope(&series(|g| g.rlct_gap))?,
        bic_truth_gap_slope: fit_log_n_slope(&series(|g| g.bic_truth_gap))?,
        gaps,
    })
}

/// Dispatches on `cfg.study`.
pub fn run_study(cfg: &ExperimentConfig) -> Result<StudyResult> {
    match cfg.study {
        Study::RankSweep => run_rank_sweep(cfg),
        Study::EstimateRlct => run_estimate_rlct(cfg),
        Study::RegularVsSingular => run_regular_vs_singular(cfg),
        Study::DictCompare => run_dict_compare(cfg),
    }
}
