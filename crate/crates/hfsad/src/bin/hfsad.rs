//! Command-line entry point for the hierarchical federated smoothing ADMM
//! benchmark.
//!
//! Exit codes: 0 success, 1 invalid configuration/arguments, 2 runtime
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hfsad::harness::{self, aggregate, emit, Config, ScenarioName};
use hfsad::Error;

#[derive(Parser)]
#[command(
    name = "hfsad",
    version,
    about = "Hierarchical federated smoothing ADMM simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark scenario and write metrics files.
    Run {
        /// TOML config; omitted or empty means all defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scenario override: vs_baseline | vary_km | vary_pc | custom.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (created if missing).
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Write an annotated default config.
    Template {
        #[arg(long)]
        output: PathBuf,
    },
    /// Run the built-in self checks.
    Verify,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_) | Error::InvalidPenalty(_) | Error::InvalidSchedule(_) => 1,
        _ => 2,
    }
}

fn run_command(
    config: Option<PathBuf>,
    scenario: Option<String>,
    trials: Option<usize>,
    seed: Option<u64>,
    output: PathBuf,
    format: OutputFormat,
    workers: Option<usize>,
) -> Result<(), Error> {
    let mut cfg = match config {
        Some(path) => harness::load_config(&path)?,
        None => Config::default(),
    };
    if let Some(name) = scenario {
        cfg.scenario.name = name.parse::<ScenarioName>()?;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;

    std::fs::create_dir_all(&output)?;

    let run_it = || harness::run_trials(&cfg);
    let records = match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
            pool.install(run_it)?
        }
        None => run_it()?,
    };

    match format {
        OutputFormat::Csv => emit::write_csv_file(&records, &output.join("metrics.csv"))?,
        OutputFormat::Json => emit::write_json_file(&records, &output.join("metrics.json"))?,
    }
    emit::write_summary_csv(&aggregate(&records), &output.join("summary.csv"))?;

    let meta = serde_json::json!({
        "config": cfg,
        "rows": records.len(),
    });
    std::fs::write(
        output.join("run_meta.json"),
        serde_json::to_string_pretty(&meta).map_err(|e| Error::Serialization(e.to_string()))?,
    )?;

    eprintln!(
        "wrote {} rows for scenario {} ({} trials) to {}",
        records.len(),
        cfg.scenario.name,
        cfg.trials,
        output.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<(), Error> = match cli.command {
        Command::Run {
            config,
            scenario,
            trials,
            seed,
            output,
            format,
            workers,
        } => run_command(config, scenario, trials, seed, output, format, workers),
        Command::Template { output } => {
            std::fs::write(&output, harness::TEMPLATE).map_err(Error::from)
        }
        Command::Verify => {
            if hfsad::harness::verify::verify() {
                Ok(())
            } else {
                eprintln!("self checks failed");
                return ExitCode::from(2);
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
