mod overrides;
mod plot;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rlct_core::experiments::persist::{
    dict_compare_csv, dict_records_csv, evidence_records_csv, metadata_json, slopes_csv, write_all_atomic,
    DICT_COMPARE_CSV, DICT_RECORDS_CSV, EFFECTIVE_CONFIG_JSON, EVIDENCE_RECORDS_CSV, RUN_METADATA_JSON, SLOPES_CSV,
};
use rlct_core::experiments::{aggregate, run_cells, run_dict_compare, summarize, ExperimentConfig, Study, StudyResult};
use rlct_core::oracle::{run_verification, VerificationReport};
use rlct_core::Error;

/// Output directory used when `--output-dir` is absent.
const OUTPUT_DIR_ENV: &str = "RLCT_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "rlct", version, about = "Exact evidence vs BIC and RLCT-corrected scores for rank and dictionary models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Δ_BIC and Δ_RLCT slopes for every rank.
    RankSweep(StudyArgs),
    /// One regular (r = d) and one singular rank side by side.
    RegularVsSingular(StudyArgs),
    /// Minimal vs overcomplete dictionaries with the same span.
    DictCompare(StudyArgs),
    /// Learning-coefficient estimates from evidence slopes.
    EstimateRlct {
        #[command(flatten)]
        args: StudyArgs,
        /// Report −½·slope of the centered evidence instead of −slope.
        #[arg(long)]
        half_slope: bool,
    },
    /// Raw evidence records only, no aggregation.
    Evidence(StudyArgs),
    /// Closed-form evidence against quadrature, Laplace and importance sampling.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct StudyArgs {
    /// JSON config; keys mirror the experiment config fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated key=value pairs, e.g. `seeds=0..4,n_grid=50..800x2`.
    #[arg(long)]
    overrides: Option<String>,
    /// Output directory (falls back to $RLCT_OUTPUT_DIR, then the config).
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Also render SVG charts next to the figure TSVs.
    #[arg(long)]
    plot: bool,
}

#[derive(Debug)]
enum Failure {
    /// Bad flags, config, overrides or unwritable outputs.
    Usage(String),
    /// A numerical failure that aborted the study.
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => Failure::Usage(e.to_string()),
            other => Failure::Numerical(other.to_string()),
        }
    }
}

fn load_config(study: Study, args: &StudyArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
            ExperimentConfig::from_json_str(study, &text)?
        }
        None => ExperimentConfig::defaults_for(study),
    };
    if let Some(spec) = &args.overrides {
        let pairs = overrides::parse_overrides(spec).map_err(|e| Failure::Usage(format!("--overrides: {e}")))?;
        cfg = cfg.with_overrides(pairs)?;
    }
    let env_dir = std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    if let Some(dir) = args.output_dir.clone().or(env_dir) {
        cfg.output_dir = dir;
    }
    Ok(cfg)
}

fn write(dir: &Path, files: Vec<(String, String)>) -> Result<(), Failure> {
    write_all_atomic(dir, &files).map_err(|e| Failure::Usage(format!("writing to {}: {e}", dir.display())))?;
    Ok(())
}

/// Raw records first, then the aggregate. Returns the aggregated result.
fn run_regression(cfg: &ExperimentConfig, aggregate_too: bool) -> Result<Option<StudyResult>, Failure> {
    let dir = cfg.output_dir.clone();
    let started = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    let raw = run_cells(cfg)?;
    write(
        &dir,
        vec![
            (EFFECTIVE_CONFIG_JSON.into(), cfg.to_json_pretty()),
            (EVIDENCE_RECORDS_CSV.into(), evidence_records_csv(&raw.cells)?),
        ],
    )?;
    for f in &raw.failures {
        eprintln!("cell rank={} seed={} n={} failed: {}", f.rank, f.seed, f.n, f.message);
    }
    if !aggregate_too {
        println!("{} records written to {}", raw.cells.len(), dir.join(EVIDENCE_RECORDS_CSV).display());
        return Ok(None);
    }
    let result = aggregate(cfg, raw, started)?;
    write(
        &dir,
        vec![
            (SLOPES_CSV.into(), slopes_csv(&result.ranks)?),
            (RUN_METADATA_JSON.into(), metadata_json(&result.metadata)),
        ],
    )?;
    Ok(Some(result))
}

fn run_dictionary(cfg: &ExperimentConfig) -> Result<StudyResult, Failure> {
    let result = run_dict_compare(cfg)?;
    let dict = result.dictionary.as_ref().expect("dictionary study carries a dictionary section");
    write(
        &cfg.output_dir,
        vec![
            (EFFECTIVE_CONFIG_JSON.into(), cfg.to_json_pretty()),
            (DICT_RECORDS_CSV.into(), dict_records_csv(&dict.cells)?),
        ],
    )?;
    write(
        &cfg.output_dir,
        vec![
            (DICT_COMPARE_CSV.into(), dict_compare_csv(&dict.table)?),
            (RUN_METADATA_JSON.into(), metadata_json(&result.metadata)),
        ],
    )?;
    Ok(result)
}

fn finish(result: &StudyResult, plot: bool) -> Result<(), Failure> {
    let dir = &result.config.output_dir;
    plot::emit_plot_data(result, dir, plot).map_err(|e| match e {
        Error::Io(_) => Failure::Usage(format!("writing figures to {}: {e}", dir.display())),
        other => Failure::from(other),
    })?;
    let summary = summarize(result)?;
    print!("{}", summary.text);
    println!("outputs in {}", dir.display());
    Ok(())
}

fn verify(seed: u64) -> Result<(), Failure> {
    let t = std::time::Instant::now();
    let r = run_verification(seed, 100, 200, 20)?;
    type R = VerificationReport;
    let line = |name: &str, problems: usize, value: f64, tol: f64| {
        let verdict = if value < tol { "ok" } else { "FAIL" };
        println!("{name:<34} {problems:>4} problems  max {value:.3e}  (tol {tol:.0e})  {verdict}");
    };
    line("quadrature |Δ log Z|", r.quadrature_problems, r.max_quadrature_abs, R::QUADRATURE_TOL);
    line("full Laplace relative error", r.laplace_problems, r.max_laplace_rel, R::LAPLACE_REL_TOL);
    line("importance (posterior) |Δ log Z|", r.importance_problems, r.max_importance_abs, R::IMPORTANCE_ABS_TOL);
    line("importance (posterior) stderr", r.importance_problems, r.max_importance_stderr, R::IMPORTANCE_STDERR_TOL);
    line("importance (widened) |z|", r.importance_problems, r.max_widened_z, R::WIDENED_Z_TOL);
    println!("elapsed {:.2}s", t.elapsed().as_secs_f64());
    if r.passed() {
        Ok(())
    } else {
        Err(Failure::Numerical("closed form disagrees with an oracle".into()))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::RankSweep(args) => {
            let cfg = load_config(Study::RankSweep, &args)?;
            let result = run_regression(&cfg, true)?.expect("aggregated");
            finish(&result, args.plot)
        }
        Command::RegularVsSingular(args) => {
            let cfg = load_config(Study::RegularVsSingular, &args)?;
            let result = run_regression(&cfg, true)?.expect("aggregated");
            finish(&result, args.plot)
        }
        Command::EstimateRlct { args, half_slope } => {
            let cfg = load_config(Study::EstimateRlct, &args)?;
            let result = run_regression(&cfg, true)?.expect("aggregated");
            finish(&result, args.plot)?;
            print!("{}", plot::lambda_table(&result.ranks, half_slope));
            Ok(())
        }
        Command::DictCompare(args) => {
            let cfg = load_config(Study::DictCompare, &args)?;
            let result = run_dictionary(&cfg)?;
            finish(&result, args.plot)
        }
        Command::Evidence(args) => {
            let cfg = load_config(Study::RankSweep, &args)?;
            run_regression(&cfg, false).map(|_| ())
        }
        Command::Verify { seed } => verify(seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let informational = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if informational { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(msg) | Failure::Numerical(msg)) = &f;
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}
