use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::persist::{dict_compare_csv, dict_compare_rows, slopes_csv};
use super::StudyResult;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FailedCell {
    pub rank: usize,
    pub seed: u64,
    pub n: usize,
    pub reason: String,
}

/// Human-readable report plus the matching CSV (`slopes.csv` for the
/// regression studies, `dict_compare.csv` for the dictionary study).
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub text: String,
    pub csv: String,
    pub failed: Vec<FailedCell>,
    pub rows: usize,
}

/// Failed cells are the recorded failures plus any stored record with a
/// non-finite value; both are listed with their coordinates.
pub fn summarize(result: &StudyResult) -> Result<Summary> {
    let mut failed: Vec<FailedCell> = result
        .failures
        .iter()
        .map(|f| FailedCell { rank: f.rank, seed: f.seed, n: f.n, reason: f.message.clone() })
        .collect();
    failed.extend(result.cells.iter().filter(|c| !c.record.is_finite()).map(|c| FailedCell {
        rank: c.rank,
        seed: c.seed,
        n: c.record.n,
        reason: "non-finite evidence record".into(),
    }));
    failed.sort();

    let cfg = &result.config;
    let mut text = String::new();
    writeln!(text, "study {} (config {})", cfg.study, &result.metadata.config_hash[..12]).unwrap();
    let (csv, rows) = if let Some(dict) = &result.dictionary {
        writeln!(
            text,
            "dictionaries: r={} minimal d={} overcomplete d'={} (table at n={})",
            dict.r, dict.d_minimal, dict.d_overcomplete, dict.table.n
        )
        .unwrap();
        for (name, v) in dict_compare_rows(&dict.table) {
            writeln!(text, "  {name:<20} {v:>12.2}").unwrap();
        }
        writeln!(
            text,
            "spectrum ranks: minimal {} / overcomplete {}",
            dict.spectrum_rank_minimal, dict.spectrum_rank_overcomplete
        )
        .unwrap();
        let predicted = (dict.d_overcomplete - dict.d_minimal) as f64 / 2.0;
        writeln!(
            text,
            "gap slopes vs log n: exact {:+.3} (±{:.3}, predicted 0)  bic at truth {:+.3} (predicted {predicted:+.3})",
            dict.exact_gap_slope.slope,
            dict.exact_gap_slope.stderr_slope,
            dict.bic_truth_gap_slope.slope,
        )
        .unwrap();
        writeln!(
            text,
            "  with ML fit terms: bic {:+.3} (±{:.3})  rlct {:+.3} (±{:.3})",
            dict.bic_gap_slope.slope,
            dict.bic_gap_slope.stderr_slope,
            dict.rlct_gap_slope.slope,
            dict.rlct_gap_slope.stderr_slope
        )
        .unwrap();
        (dict_compare_csv(&dict.table)?, 6)
    } else {
        writeln!(
            text,
            "{:>4}  {:>16}  {:>9}  {:>16}  {:>8}  {:>6}  {:>5}",
            "rank", "slope d_bic", "predicted", "slope d_rlct", "lam_hat", "r/2", "seeds"
        )
        .unwrap();
        let mut ranks: Vec<_> = result.ranks.iter().collect();
        ranks.sort_by_key(|s| s.rank);
        for s in &ranks {
            writeln!(
                text,
                "{:>4}  {:>+8.3} ± {:<5.3}  {:>+9.3}  {:>+8.3} ± {:<5.3}  {:>8.3}  {:>6.2}  {:>5}",
                s.rank,
                s.slope_bic.slope,
                s.slope_bic.stderr_slope,
                s.predicted.bic_error_slope,
                s.slope_rlct.slope,
                s.slope_rlct.stderr_slope,
                s.lambda_hat,
                s.lambda_analytic,
                s.n_seeds
            )
            .unwrap();
        }
        let owned: Vec<_> = ranks.into_iter().cloned().collect();
        (slopes_csv(&owned)?, owned.len())
    };
    if !failed.is_empty() {
        writeln!(text, "failed cells: {}", failed.len()).unwrap();
        for f in &failed {
            writeln!(text, "  rank={} seed={} n={}: {}", f.rank, f.seed, f.n, f.reason).unwrap();
        }
    }
    Ok(Summary { text, csv, failed, rows })
}
