//! WebAssembly entry points for the browser demo. Every export returns a
//! JSON string; errors come back as a plain message.

use rlct_core::dictionary::{gram_spectrum, make_dictionary_pair, spectrum_rank};
use rlct_core::experiments::{run_study, ExperimentConfig, Study, StudyResult};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

// Browser runs are single-threaded; keep them under a second or so.
const MAX_D: usize = 12;
const MAX_SEEDS: u32 = 20;
const MAX_DOUBLINGS: u32 = 10;

fn check(cond: bool, msg: &str) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.to_string())
    }
}

fn regression(d: usize, ranks: Vec<usize>, seeds: u32, doublings: u32) -> Result<StudyResult, String> {
    check((1..=MAX_D).contains(&d), "d must be between 1 and 12")?;
    check((1..=MAX_SEEDS).contains(&seeds), "seeds must be between 1 and 20")?;
    check((1..=MAX_DOUBLINGS).contains(&doublings), "doublings must be between 1 and 10")?;
    let mut cfg = ExperimentConfig::defaults_for(Study::RankSweep);
    cfg.d = d;
    cfg.p = d;
    cfg.ranks = ranks;
    cfg.seeds = (0..u64::from(seeds)).collect();
    cfg.n_grid = (0..=doublings).map(|k| 50usize << k).collect();
    run_study(&cfg).map_err(|e| e.to_string())
}

/// Slopes of Δ_BIC and Δ_RLCT against `log n` and λ̂ for every rank `1..=d`.
#[wasm_bindgen]
pub fn rank_sweep(d: usize, seeds: u32, doublings: u32) -> Result<String, String> {
    let result = regression(d, (1..=d).collect(), seeds, doublings)?;
    let mut ranks = result.ranks;
    ranks.sort_by_key(|s| s.rank);
    let rows: Vec<Value> = ranks
        .iter()
        .map(|s| {
            json!({
                "rank": s.rank,
                "slope_bic": s.slope_bic.slope,
                "stderr_bic": s.slope_bic.stderr_slope,
                "slope_rlct": s.slope_rlct.slope,
                "stderr_rlct": s.slope_rlct.stderr_slope,
                "predicted_bic": -((d - s.rank) as f64) / 2.0,
                "lambda_hat": s.lambda_hat,
                "lambda_analytic": s.lambda_analytic,
            })
        })
        .collect();
    Ok(json!({ "d": d, "ranks": rows }).to_string())
}

/// Seed-mean Δ curves for a single rank.
#[wasm_bindgen]
pub fn delta_curves(d: usize, r: usize, seeds: u32, doublings: u32) -> Result<String, String> {
    check(r >= 1 && r <= d, "rank must be between 1 and d")?;
    let result = regression(d, vec![r], seeds, doublings)?;
    let summary = result.ranks.first().ok_or("no summary produced")?;
    let points: Vec<Value> = summary
        .curve
        .iter()
        .map(|c| {
            json!({
                "n": c.n,
                "log_n": (c.n as f64).ln(),
                "delta_bic": c.delta_bic,
                "delta_rlct": c.delta_rlct,
            })
        })
        .collect();
    Ok(json!({
        "d": d,
        "rank": r,
        "slope_bic": summary.slope_bic.slope,
        "slope_rlct": summary.slope_rlct.slope,
        "points": points,
    })
    .to_string())
}

/// Gram-matrix eigenvalues of a minimal (p × r) and an overcomplete
/// (p × d') dictionary spanning the same subspace.
#[wasm_bindgen]
pub fn dictionary_spectra(p: usize, r: usize, d_over: usize, seed: u32) -> Result<String, String> {
    check((1..=MAX_D).contains(&p), "p must be between 1 and 12")?;
    check((1..=2 * MAX_D).contains(&d_over), "d' must be between 1 and 24")?;
    let pair = make_dictionary_pair(p, r, d_over, u64::from(seed)).map_err(|e| e.to_string())?;
    let minimal = gram_spectrum(&pair.minimal);
    let over = gram_spectrum(&pair.overcomplete);
    Ok(json!({
        "p": p,
        "r": r,
        "d_over": d_over,
        "minimal": minimal.as_slice(),
        "overcomplete": over.as_slice(),
        "rank_minimal": spectrum_rank(&minimal, p),
        "rank_overcomplete": spectrum_rank(&over, p),
    })
    .to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: Result<String, String>) -> Value {
        serde_json::from_str(&s.unwrap()).unwrap()
    }

    #[test]
    fn sweep_has_one_row_per_rank_and_rlct_slopes_near_zero() {
        let v = parse(rank_sweep(4, 6, 7));
        let rows = v["ranks"].as_array().unwrap();
        assert_eq!(rows.len(), 4);
        for row in rows {
            assert!(row["slope_rlct"].as_f64().unwrap().abs() < 0.3, "{row}");
            let bic = row["slope_bic"].as_f64().unwrap();
            assert!((bic - row["predicted_bic"].as_f64().unwrap()).abs() < 0.3, "{row}");
        }
    }

    #[test]
    fn curves_cover_the_grid() {
        let v = parse(delta_curves(5, 2, 3, 4));
        let pts = v["points"].as_array().unwrap();
        assert_eq!(pts.iter().map(|p| p["n"].as_u64().unwrap()).collect::<Vec<_>>(), [50, 100, 200, 400, 800]);
        assert!(v["slope_bic"].as_f64().unwrap() < v["slope_rlct"].as_f64().unwrap());
    }

    #[test]
    fn spectra_share_rank() {
        let v = parse(dictionary_spectra(8, 3, 6, 1));
        assert_eq!(v["minimal"].as_array().unwrap().len(), 3);
        assert_eq!(v["overcomplete"].as_array().unwrap().len(), 6);
        assert_eq!((v["rank_minimal"].as_u64(), v["rank_overcomplete"].as_u64()), (Some(3), Some(3)));
    }

    #[test]
    fn bad_inputs_are_reported() {
        assert!(rank_sweep(0, 1, 3).is_err());
        assert!(rank_sweep(4, 100, 3).is_err());
        assert!(delta_curves(4, 5, 2, 3).is_err());
        assert!(dictionary_spectra(4, 5, 6, 0).is_err());
    }
}
