//! Figure data as TSV, plus optional SVG renderings of the same series.
//!
//! | file | columns |
//! |------|---------|
//! | `fig1_rank_sweep.tsv` | rank, slope_bic, slope_rlct, stderr_bic, stderr_rlct |
//! | `fig2_delta_regular.tsv` | rank, n, log_n, delta_bic, delta_rlct |
//! | `fig3_delta_singular.tsv` | rank, n, log_n, delta_bic, delta_rlct |
//! | `fig4_lambda_hat.tsv` | rank, lambda_hat, lambda_analytic, lambda_hat_sd |
//! | `fig5_eigenspectra.tsv` | index, eig_minimal, eig_overcomplete |
//! | `dict_gaps.tsv` | n, log_n, exact_gap, bic_gap, rlct_gap, fit_gap, bic_truth_gap |
//!
//! Delta curves are seed means. `eig_minimal` is empty past the minimal
//! dictionary's column count.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use rlct_core::experiments::persist::{fmt_f64, write_all_atomic};
use rlct_core::experiments::{RankSummary, StudyResult};
use rlct_core::{Error, Result};

use crate::svg::{Chart, Series, Style};

fn tsv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join("\t");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out
}

fn delta_rows(ranks: &[&RankSummary]) -> Vec<Vec<String>> {
    ranks
        .iter()
        .flat_map(|s| {
            s.curve.iter().map(move |p| {
                vec![
                    s.rank.to_string(),
                    p.n.to_string(),
                    fmt_f64((p.n as f64).ln()),
                    fmt_f64(p.delta_bic),
                    fmt_f64(p.delta_rlct),
                ]
            })
        })
        .collect()
}

fn delta_chart(title: &str, ranks: &[&RankSummary]) -> Chart {
    let mut chart = Chart::new(title, "log n", "approximate minus exact log evidence");
    for s in ranks {
        let pts = |f: fn(&rlct_core::experiments::CurvePoint) -> f64| {
            s.curve.iter().map(|p| ((p.n as f64).ln(), f(p))).collect::<Vec<_>>()
        };
        chart = chart
            .with(Series::new(format!("Δ_BIC r={}", s.rank), pts(|p| p.delta_bic), Style::LineMarkers))
            .with(Series::new(format!("Δ_RLCT r={}", s.rank), pts(|p| p.delta_rlct), Style::LineMarkers));
    }
    chart
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Builds `(file name, contents)` for every figure the result supports.
pub fn plot_files(result: &StudyResult, svg: bool) -> Result<Vec<(String, String)>> {
    if result.is_empty() {
        return Err(Error::Degenerate("study result is empty; nothing to plot".into()));
    }
    let mut files = Vec::new();
    let mut ranks: Vec<&RankSummary> = result.ranks.iter().collect();
    ranks.sort_by_key(|s| s.rank);

    if !ranks.is_empty() {
        let d = result.config.d;
        files.push((
            "fig1_rank_sweep.tsv".to_string(),
            tsv(
                &["rank", "slope_bic", "slope_rlct", "stderr_bic", "stderr_rlct"],
                ranks.iter().map(|s| {
                    vec![
                        s.rank.to_string(),
                        fmt_f64(s.slope_bic.slope),
                        fmt_f64(s.slope_rlct.slope),
                        fmt_f64(s.slope_bic.stderr_slope),
                        fmt_f64(s.slope_rlct.stderr_slope),
                    ]
                }),
            ),
        ));
        let (regular, singular): (Vec<&RankSummary>, Vec<&RankSummary>) = ranks.iter().partition(|s| s.rank == d);
        let header = ["rank", "n", "log_n", "delta_bic", "delta_rlct"];
        if !regular.is_empty() {
            files.push(("fig2_delta_regular.tsv".into(), tsv(&header, delta_rows(&regular))));
        }
        if !singular.is_empty() {
            files.push(("fig3_delta_singular.tsv".into(), tsv(&header, delta_rows(&singular))));
        }
        files.push((
            "fig4_lambda_hat.tsv".into(),
            tsv(
                &["rank", "lambda_hat", "lambda_analytic", "lambda_hat_sd"],
                ranks.iter().map(|s| {
                    let per_seed: Vec<f64> = s.per_seed.iter().map(|p| p.lambda_hat).collect();
                    vec![s.rank.to_string(), fmt_f64(s.lambda_hat), fmt_f64(s.lambda_analytic), fmt_f64(std_dev(&per_seed))]
                }),
            ),
        ));

        if svg {
            let slope = |f: fn(&RankSummary) -> f64| ranks.iter().map(|s| (s.rank as f64, f(s))).collect::<Vec<_>>();
            let fig1 = Chart::new("Rank sweep in linear regression", "rank r", "slope versus log n")
                .with(Series::new("Δ_BIC", slope(|s| s.slope_bic.slope), Style::LineMarkers))
                .with(Series::new("Δ_RLCT", slope(|s| s.slope_rlct.slope), Style::LineMarkers))
                .with(Series::new("−(d−r)/2", slope(|s| s.predicted.bic_error_slope), Style::Line));
            files.push(("fig1_rank_sweep.svg".into(), fig1.render()));
            if !regular.is_empty() {
                let c = delta_chart("Regular model: Δ_BIC(n) and Δ_RLCT(n) versus log n", &regular);
                files.push(("fig2_delta_regular.svg".into(), c.render()));
            }
            if !singular.is_empty() {
                let c = delta_chart("Singular model: Δ_BIC(n) and Δ_RLCT(n) versus log n", &singular);
                files.push(("fig3_delta_singular.svg".into(), c.render()));
            }
            let fig4 = Chart::new("Evidence-slope estimate of the learning coefficient", "rank r", "λ")
                .with(Series::new("λ̂", slope(|s| s.lambda_hat), Style::Markers))
                .with(Series::new("r/2", slope(|s| s.lambda_analytic), Style::Line));
            files.push(("fig4_lambda_hat.svg".into(), fig4.render()));
        }
    }

    if let Some(dict) = &result.dictionary {
        let len = dict.spectrum_minimal.len().max(dict.spectrum_overcomplete.len());
        let cell = |v: &[f64], i: usize| v.get(i).map(|&x| fmt_f64(x)).unwrap_or_default();
        files.push((
            "fig5_eigenspectra.tsv".into(),
            tsv(
                &["index", "eig_minimal", "eig_overcomplete"],
                (0..len).map(|i| {
                    vec![(i + 1).to_string(), cell(&dict.spectrum_minimal, i), cell(&dict.spectrum_overcomplete, i)]
                }),
            ),
        ));
        files.push((
            "dict_gaps.tsv".into(),
            tsv(
                &["n", "log_n", "exact_gap", "bic_gap", "rlct_gap", "fit_gap", "bic_truth_gap"],
                dict.gaps.iter().map(|g| {
                    vec![
                        g.n.to_string(),
                        fmt_f64((g.n as f64).ln()),
                        fmt_f64(g.exact_gap),
                        fmt_f64(g.bic_gap),
                        fmt_f64(g.rlct_gap),
                        fmt_f64(g.fit_gap),
                        fmt_f64(g.bic_truth_gap),
                    ]
                }),
            ),
        ));
        if svg {
            // Exact zeros have no logarithm; floor them at machine precision.
            let log_eigs = |v: &[f64]| {
                v.iter().enumerate().map(|(i, &e)| ((i + 1) as f64, e.max(1e-16).log10())).collect::<Vec<_>>()
            };
            let fig5 = Chart::new("Eigenvalue spectra of DᵀD and D′ᵀD′", "eigenvalue index", "log10 eigenvalue")
                .with(Series::new(format!("minimal (d={})", dict.d_minimal), log_eigs(&dict.spectrum_minimal), Style::LineMarkers))
                .with(Series::new(
                    format!("overcomplete (d′={})", dict.d_overcomplete),
                    log_eigs(&dict.spectrum_overcomplete),
                    Style::LineMarkers,
                ));
            files.push(("fig5_eigenspectra.svg".into(), fig5.render()));
            let gap = |f: fn(&rlct_core::experiments::GapPoint) -> f64| {
                dict.gaps.iter().map(|g| ((g.n as f64).ln(), f(g))).collect::<Vec<_>>()
            };
            let gaps = Chart::new("Minimal minus overcomplete log evidence", "log n", "gap")
                .with(Series::new("exact", gap(|g| g.exact_gap), Style::LineMarkers))
                .with(Series::new("BIC (ML fit)", gap(|g| g.bic_gap), Style::LineMarkers))
                .with(Series::new("BIC (truth fit)", gap(|g| g.bic_truth_gap), Style::LineMarkers))
                .with(Series::new("RLCT (ML fit)", gap(|g| g.rlct_gap), Style::LineMarkers));
            files.push(("dict_gaps.svg".into(), gaps.render()));
        }
    }
    Ok(files)
}

/// Writes every figure file into `dir`. All files appear together or none do.
pub fn emit_plot_data(result: &StudyResult, dir: &Path, svg: bool) -> Result<Vec<PathBuf>> {
    let files = plot_files(result, svg)?;
    write_all_atomic(dir, &files)
}

/// Table-style λ̂ report for `estimate-rlct`.
pub fn lambda_table(ranks: &[RankSummary], half_slope: bool) -> String {
    let mut out = String::new();
    let label = if half_slope { "lambda_hat(half-slope)" } else { "lambda_hat" };
    writeln!(out, "{:>4}  {label:>22}  {:>8}  {:>8}", "rank", "r/2", "error").unwrap();
    let mut sorted: Vec<&RankSummary> = ranks.iter().collect();
    sorted.sort_by_key(|s| s.rank);
    for s in sorted {
        let est = if half_slope { s.lambda_hat_half_slope } else { s.lambda_hat };
        writeln!(out, "{:>4}  {est:>22.4}  {:>8.2}  {:>+8.4}", s.rank, s.lambda_analytic, est - s.lambda_analytic).unwrap();
    }
    out
}
