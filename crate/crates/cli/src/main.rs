use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cci_cli::{run_classify, run_geo, run_pipeline, run_score, run_sweep, run_validate, RunConfig, RunSummary};
use cci_core::aggregate::DEFAULT_HOUSEHOLD_KW;
use cci_core::analysis::parse_grid;

/// Environment variable holding the log filter (`error` … `trace`).
const LOG_ENV: &str = "CCI_LOG";

#[derive(Parser)]
#[command(name = "cci", version, about = "Circular City Index batch runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: ingest, geometry, scores, index, classes, statistics, sweeps.
    Run(PipelineArgs),
    /// Scores, index and classes only.
    Score(PipelineArgs),
    /// Mobility KPIs from features and boundaries.
    Geo(GeoArgs),
    /// Area-weight sensitivity sweeps.
    Sweep(PipelineArgs),
    /// Natural-breaks classes for one column of a CSV.
    Classify(ClassifyArgs),
    /// Check configuration and inputs without scoring.
    Validate(PipelineArgs),
}

#[derive(Args)]
struct PipelineArgs {
    /// CSV mapping KPI codes to value tables (`kpi,path`).
    #[arg(long)]
    manifest: PathBuf,
    /// Municipality roster CSV.
    #[arg(long)]
    roster: PathBuf,
    /// Registry and weights TOML; defaults to the bundled configuration.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// GeoJSON of mobility features (needs --boundaries).
    #[arg(long)]
    features: Option<PathBuf>,
    /// GeoJSON of municipality boundaries.
    #[arg(long)]
    boundaries: Option<PathBuf>,
    /// Sweep weights: `0.1,0.2,0.3` or `start:stop:count`.
    #[arg(long)]
    sweep_grid: Option<String>,
    #[arg(long, default_value_t = 5)]
    likert_k: usize,
    /// Household capacity demand in kW.
    #[arg(long, default_value_t = DEFAULT_HOUSEHOLD_KW)]
    household_kw: f64,
}

#[derive(Args)]
struct GeoArgs {
    #[arg(long)]
    roster: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    boundaries: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    /// CSV with a numeric column, typically a `scores.csv`.
    #[arg(long)]
    scores: PathBuf,
    #[arg(long, default_value = "cci")]
    column: String,
    #[arg(long, default_value_t = 5)]
    likert_k: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl PipelineArgs {
    fn config(self) -> Result<RunConfig, String> {
        let sweep_grid = match &self.sweep_grid {
            Some(s) => Some(parse_grid(s).map_err(|e| format!("config: {e}"))?),
            None => None,
        };
        Ok(RunConfig {
            features: self.features,
            boundaries: self.boundaries,
            weights: self.weights,
            sweep_grid,
            likert_k: self.likert_k,
            household_kw: self.household_kw,
            ..RunConfig::new(self.manifest, self.roster, self.out)
        })
    }
}

fn dispatch(command: Command) -> Result<RunSummary, String> {
    let run = |f: fn(&RunConfig) -> Result<RunSummary, cci_cli::PipelineError>, args: PipelineArgs| {
        f(&args.config()?).map_err(|e| e.to_string())
    };
    match command {
        Command::Run(a) => run(run_pipeline, a),
        Command::Score(a) => run(run_score, a),
        Command::Sweep(a) => run(run_sweep, a),
        Command::Validate(a) => run(run_validate, a),
        Command::Geo(a) => {
            let cfg = RunConfig {
                features: Some(a.features),
                boundaries: Some(a.boundaries),
                ..RunConfig::new(PathBuf::new(), a.roster, a.out)
            };
            run_geo(&cfg).map_err(|e| e.to_string())
        }
        Command::Classify(a) => run_classify(&a.scores, &a.column, a.likert_k, &a.out).map_err(|e| e.to_string()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(summary) => {
            print!("{}", summary.render());
            for e in summary.report.errors() {
                eprintln!("{}\t{}", e.scope, e.message);
            }
            ExitCode::from(summary.exit_code() as u8)
        }
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
