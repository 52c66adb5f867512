use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "seeds=0..4,n_grid=50..800x2";

fn rlct(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rlct")).args(args).env_remove("RLCT_OUTPUT_DIR").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn rank_sweep_writes_records_and_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let out = rlct(&["rank-sweep", "--overrides", SMALL, "--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let records = read(dir.path(), "evidence_records.csv");
    let mut lines = records.lines();
    assert_eq!(
        lines.next().unwrap(),
        "study,rank,d,p,seed,n,log_z_exact,log_lik_mle,log_z_bic,log_z_rlct,delta_bic,delta_rlct"
    );
    assert_eq!(lines.count(), 6 * 5 * 5);
    let slopes = read(dir.path(), "slopes.csv");
    assert!(slopes.starts_with(
        "rank,slope_delta_bic,stderr_bic,slope_delta_rlct,stderr_rlct,lambda_hat,lambda_analytic,n_seeds,n_points\n"
    ));
    assert_eq!(slopes.lines().count(), 7);
    assert!(read(dir.path(), "fig1_rank_sweep.tsv").starts_with("rank\tslope_bic\tslope_rlct\tstderr_bic\tstderr_rlct\n"));
    let config: serde_json::Value = serde_json::from_str(&read(dir.path(), "effective_config.json")).unwrap();
    assert_eq!(config["seeds"], serde_json::json!([0, 1, 2, 3, 4]));
    assert_eq!(config["n_grid"], serde_json::json!([50, 100, 200, 400, 800]));
    assert!(read(dir.path(), "run_metadata.json").contains("config_hash"));
    assert!(!dir.path().join("fig1_rank_sweep.svg").exists());
    assert!(stdout(&out).contains("study rank_sweep"));
}

#[test]
fn effective_config_reproduces_the_run() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let out = rlct(&[
        "regular-vs-singular",
        "--overrides",
        "seeds=3,7,n_grid=50..400x2,sigma2=0.5",
        "--output-dir",
        first.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let cfg = first.path().join("effective_config.json");
    let out = rlct(&["regular-vs-singular", "--config", cfg.to_str().unwrap(), "--output-dir", second.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(read(first.path(), "evidence_records.csv"), read(second.path(), "evidence_records.csv"));
    assert_eq!(read(first.path(), "slopes.csv"), read(second.path(), "slopes.csv"));
}

#[test]
fn overrides_beat_config_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"study": "estimate_rlct", "seeds": [0, 1], "n_grid": [50, 100, 200], "ranks": [2, 4]}"#).unwrap();
    let out_dir = dir.path().join("out");
    let out = rlct(&[
        "estimate-rlct",
        "--config",
        cfg.to_str().unwrap(),
        "--overrides",
        "seeds=0..2",
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let effective: serde_json::Value = serde_json::from_str(&read(&out_dir, "effective_config.json")).unwrap();
    assert_eq!(effective["seeds"], serde_json::json!([0, 1, 2]));
    assert_eq!(effective["ranks"], serde_json::json!([2, 4]));
    // λ̂ table lists each rank next to r/2
    let text = stdout(&out);
    assert!(text.contains("lambda_hat"));
    assert!(text.lines().any(|l| l.trim_start().starts_with("2 ") && l.contains("1.00")));
    assert!(text.lines().any(|l| l.trim_start().starts_with("4 ") && l.contains("2.00")));
}

#[test]
fn half_slope_flag_switches_the_estimator() {
    let dir = tempfile::tempdir().unwrap();
    let out = rlct(&[
        "estimate-rlct",
        "--half-slope",
        "--overrides",
        "seeds=0,ranks=3,n_grid=50..200x2",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("lambda_hat(half-slope)"));
}

#[test]
fn dict_compare_with_plots() {
    let dir = tempfile::tempdir().unwrap();
    let out = rlct(&["dict-compare", "--overrides", SMALL, "--output-dir", dir.path().to_str().unwrap(), "--plot"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let table = read(dir.path(), "dict_compare.csv");
    let names: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(
        names,
        ["exact_minimal", "exact_overcomplete", "bic_minimal", "bic_overcomplete", "rlct_minimal", "rlct_overcomplete"]
    );
    assert!(table.starts_with("quantity,value\n"));
    assert!(read(dir.path(), "fig5_eigenspectra.tsv").starts_with("index\teig_minimal\teig_overcomplete\n"));
    let svg = read(dir.path(), "fig5_eigenspectra.svg");
    assert!(svg.starts_with("<svg") && svg.contains("Eigenvalue spectra"));
    assert!(read(dir.path(), "dict_records.csv").lines().count() > 1);
}

#[test]
fn evidence_subcommand_writes_only_raw_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = rlct(&["evidence", "--overrides", "seeds=0,ranks=2,n_grid=50,100", "--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(read(dir.path(), "evidence_records.csv").lines().count(), 3);
    assert!(!dir.path().join("slopes.csv").exists());
}

#[test]
fn output_dir_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rlct"))
        .args(["evidence", "--overrides", "seeds=0,ranks=1,n_grid=50,100"])
        .env("RLCT_OUTPUT_DIR", dir.path())
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(dir.path().join("evidence_records.csv").exists());
    assert!(!dir.path().join("results").exists());
}

#[test]
fn verify_passes_and_reports_discrepancies() {
    let out = rlct(&["verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("quadrature"));
    assert!(text.contains("Laplace"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn usage_and_config_errors_exit_with_one() {
    for args in [
        vec!["rank-sweep", "--bogus"],
        vec!["no-such-command"],
        vec![],
        vec!["rank-sweep", "--overrides", "unknown_key=1"],
        vec!["rank-sweep", "--overrides", "n_grid=800..50"],
        vec!["rank-sweep", "--config", "/nonexistent/cfg.json"],
        vec!["regular-vs-singular", "--overrides", "ranks=2,3"],
    ] {
        let out = rlct(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", stderr(&out));
        assert!(!stderr(&out).is_empty());
    }
}

#[test]
fn study_mismatch_in_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"study": "dict_compare"}"#).unwrap();
    let out = rlct(&["rank-sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unwritable_output_dir_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = rlct(&["evidence", "--overrides", "seeds=0,ranks=1,n_grid=50,100", "--output-dir", blocker.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn aborted_study_exits_with_two_after_writing_raw_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = rlct(&[
        "rank-sweep",
        "--overrides",
        "sigma2=1e-300,tau2=1e300,seeds=0,n_grid=50,100",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(dir.path().join("evidence_records.csv").exists());
    assert!(!dir.path().join("slopes.csv").exists());
}
