//! On-disk formats.
//!
//! Floats are written in Rust's shortest round-trip form, so reading a
//! file back yields bit-identical values. Every file goes through
//! [`write_atomic`]: a temporary sibling is written in full and then renamed
//! over the destination.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{CellRecord, DictCell, RankSummary, RunMetadata, Study};
use crate::dictionary::DictionaryComparison;
use crate::error::{Error, Result};
use crate::evidence::EvidenceRecord;

pub const EVIDENCE_RECORDS_CSV: &str = "evidence_records.csv";
pub const SLOPES_CSV: &str = "slopes.csv";
pub const DICT_COMPARE_CSV: &str = "dict_compare.csv";
pub const DICT_RECORDS_CSV: &str = "dict_records.csv";
pub const EFFECTIVE_CONFIG_JSON: &str = "effective_config.json";
pub const RUN_METADATA_JSON: &str = "run_metadata.json";

pub const EVIDENCE_COLUMNS: [&str; 12] = [
    "study",
    "rank",
    "d",
    "p",
    "seed",
    "n",
    "log_z_exact",
    "log_lik_mle",
    "log_z_bic",
    "log_z_rlct",
    "delta_bic",
    "delta_rlct",
];

pub const SLOPES_COLUMNS: [&str; 9] = [
    "rank",
    "slope_delta_bic",
    "stderr_bic",
    "slope_delta_rlct",
    "stderr_rlct",
    "lambda_hat",
    "lambda_analytic",
    "n_seeds",
    "n_points",
];

pub const DICT_RECORD_COLUMNS: [&str; 18] = [
    "seed",
    "n",
    "r",
    "d_minimal",
    "d_overcomplete",
    "exact_minimal",
    "exact_overcomplete",
    "fit_minimal",
    "fit_overcomplete",
    "bic_minimal",
    "bic_overcomplete",
    "rlct_minimal",
    "rlct_overcomplete",
    "bic_truth_minimal",
    "bic_truth_overcomplete",
    "rlct_truth_minimal",
    "rlct_truth_overcomplete",
    "exact_gap",
];

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn to_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

pub fn evidence_records_csv(cells: &[CellRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(EVIDENCE_COLUMNS)?;
    for c in cells {
        let r = &c.record;
        w.write_record([
            c.study.as_str().to_string(),
            c.rank.to_string(),
            c.d.to_string(),
            c.p.to_string(),
            c.seed.to_string(),
            r.n.to_string(),
            fmt_f64(r.log_z_exact),
            fmt_f64(r.log_lik_mle),
            fmt_f64(r.log_z_bic),
            fmt_f64(r.log_z_rlct),
            fmt_f64(r.delta_bic),
            fmt_f64(r.delta_rlct),
        ])?;
    }
    to_string(w)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, line: usize) -> Result<T> {
    let raw = rec.get(idx).unwrap_or("");
    raw.parse().map_err(|_| {
        Error::Config(format!("line {line}: cannot parse column `{}` from `{raw}`", EVIDENCE_COLUMNS[idx]))
    })
}

pub fn parse_evidence_records_csv(text: &str) -> Result<Vec<CellRecord>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(EVIDENCE_COLUMNS.iter().copied()) {
        return Err(Error::Config(format!("unexpected evidence record header: {headers:?}")));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let study_name = rec.get(0).unwrap_or("");
        let study = Study::parse(study_name)
            .ok_or_else(|| Error::Config(format!("line {line}: unknown study `{study_name}`")))?;
        out.push(CellRecord {
            study,
            rank: field(&rec, 1, line)?,
            d: field(&rec, 2, line)?,
            p: field(&rec, 3, line)?,
            seed: field(&rec, 4, line)?,
            record: EvidenceRecord {
                n: field(&rec, 5, line)?,
                log_z_exact: field(&rec, 6, line)?,
                log_lik_mle: field(&rec, 7, line)?,
                log_z_bic: field(&rec, 8, line)?,
                log_z_rlct: field(&rec, 9, line)?,
                delta_bic: field(&rec, 10, line)?,
                delta_rlct: field(&rec, 11, line)?,
            },
        });
    }
    Ok(out)
}

pub fn slopes_csv(ranks: &[RankSummary]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SLOPES_COLUMNS)?;
    for s in ranks {
        w.write_record([
            s.rank.to_string(),
            fmt_f64(s.slope_bic.slope),
            fmt_f64(s.slope_bic.stderr_slope),
            fmt_f64(s.slope_rlct.slope),
            fmt_f64(s.slope_rlct.stderr_slope),
            fmt_f64(s.lambda_hat),
            fmt_f64(s.lambda_analytic),
            s.n_seeds.to_string(),
            s.n_points.to_string(),
        ])?;
    }
    to_string(w)
}

/// The six table rows, in table order.
pub fn dict_compare_rows(table: &DictionaryComparison) -> [(&'static str, f64); 6] {
    [
        ("exact_minimal", table.exact_minimal),
        ("exact_overcomplete", table.exact_overcomplete),
        ("bic_minimal", table.bic_minimal),
        ("bic_overcomplete", table.bic_overcomplete),
        ("rlct_minimal", table.rlct_minimal),
        ("rlct_overcomplete", table.rlct_overcomplete),
    ]
}

pub fn dict_compare_csv(table: &DictionaryComparison) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["quantity", "value"])?;
    for (name, v) in dict_compare_rows(table) {
        w.write_record([name.to_string(), fmt_f64(v)])?;
    }
    to_string(w)
}

pub fn dict_records_csv(cells: &[DictCell]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(DICT_RECORD_COLUMNS)?;
    for c in cells {
        let m = &c.comparison;
        let mut row = vec![
            c.seed.to_string(),
            m.n.to_string(),
            m.r.to_string(),
            m.d_minimal.to_string(),
            m.d_overcomplete.to_string(),
        ];
        row.extend(m.values().iter().map(|&v| fmt_f64(v)));
        row.push(fmt_f64(m.exact_gap()));
        w.write_record(&row)?;
    }
    to_string(w)
}

pub fn metadata_json(meta: &RunMetadata) -> String {
    serde_json::to_string_pretty(meta).expect("metadata serializes")
}

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.tmp-{}", std::process::id()))
}

/// Writes `contents` to a temporary sibling, syncs it, then renames it over
/// `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = temp_sibling(path);
    let result = (|| -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

/// Writes a batch of files so that either all of them appear or none do
/// (up to a crash between renames): everything is staged first and only
/// renamed once every temporary file is complete.
pub fn write_all_atomic(dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut staged = Vec::with_capacity(files.len());
    for (name, body) in files {
        let dest = dir.join(name);
        let tmp = temp_sibling(&dest);
        let written = (|| -> std::io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(body.as_bytes())?;
            f.sync_all()
        })();
        if let Err(e) = written {
            let _ = fs::remove_file(&tmp);
            for (t, _) in &staged {
                let _ = fs::remove_file(t);
            }
            return Err(e.into());
        }
        staged.push((tmp, dest));
    }
    let mut out = Vec::with_capacity(staged.len());
    for (tmp, dest) in staged {
        fs::rename(&tmp, &dest)?;
        out.push(dest);
    }
    Ok(out)
}
