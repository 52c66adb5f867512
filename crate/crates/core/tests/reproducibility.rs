use rlct_core::experiments::persist::{
    dict_records_csv, evidence_records_csv, parse_evidence_records_csv, write_all_atomic, EVIDENCE_RECORDS_CSV,
};
use rlct_core::experiments::{aggregate, run_cells, run_study, ExperimentConfig, RawCells, Study};

fn small(study: Study) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults_for(study);
    cfg.seeds = (0..4).collect();
    cfg.n_grid = vec![50, 100, 200, 400, 800];
    cfg
}

#[test]
fn slopes_recomputed_from_persisted_records_match() {
    let cfg = small(Study::RankSweep);
    let in_memory = run_study(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let csv = evidence_records_csv(&in_memory.cells).unwrap();
    write_all_atomic(dir.path(), &[(EVIDENCE_RECORDS_CSV.to_string(), csv)]).unwrap();

    let text = std::fs::read_to_string(dir.path().join(EVIDENCE_RECORDS_CSV)).unwrap();
    let cells = parse_evidence_records_csv(&text).unwrap();
    assert_eq!(cells, in_memory.cells);
    let offline = aggregate(&cfg, RawCells { cells, failures: Vec::new() }, 0).unwrap();
    for (a, b) in in_memory.ranks.iter().zip(&offline.ranks) {
        assert_eq!(a.rank, b.rank);
        assert!((a.slope_bic.slope - b.slope_bic.slope).abs() < 1e-10);
        assert!((a.slope_rlct.slope - b.slope_rlct.slope).abs() < 1e-10);
        assert!((a.lambda_hat - b.lambda_hat).abs() < 1e-10);
    }
}

#[test]
fn raw_outputs_are_byte_identical_across_runs() {
    for study in [Study::RankSweep, Study::RegularVsSingular, Study::EstimateRlct] {
        let cfg = small(study);
        let a = evidence_records_csv(&run_cells(&cfg).unwrap().cells).unwrap();
        let b = evidence_records_csv(&run_cells(&cfg).unwrap().cells).unwrap();
        assert_eq!(a, b, "{study}");
    }
    let cfg = small(Study::DictCompare);
    let a = run_study(&cfg).unwrap().dictionary.unwrap();
    let b = run_study(&cfg).unwrap().dictionary.unwrap();
    assert_eq!(dict_records_csv(&a.cells).unwrap(), dict_records_csv(&b.cells).unwrap());
}

#[test]
fn effective_config_round_trip_reproduces_the_run() {
    let cfg = small(Study::RegularVsSingular).with_overrides(vec![("sigma2".into(), serde_json::json!(0.5))]).unwrap();
    let reloaded = ExperimentConfig::from_json_str(Study::RegularVsSingular, &cfg.to_json_pretty()).unwrap();
    assert_eq!(reloaded, cfg);
    assert_eq!(reloaded.hash(), cfg.hash());
    let a = evidence_records_csv(&run_cells(&cfg).unwrap().cells).unwrap();
    let b = evidence_records_csv(&run_cells(&reloaded).unwrap().cells).unwrap();
    assert_eq!(a, b);
}

#[test]
fn every_persisted_record_satisfies_the_penalty_identity() {
    let cfg = small(Study::RankSweep);
    let cells = parse_evidence_records_csv(&evidence_records_csv(&run_cells(&cfg).unwrap().cells).unwrap()).unwrap();
    for c in &cells {
        let lhs = c.record.delta_bic - c.record.delta_rlct;
        let rhs = (c.lambda() - c.d as f64 / 2.0) * (c.record.n as f64).ln();
        assert!((lhs - rhs).abs() < 1e-12, "{c:?}");
    }
}
