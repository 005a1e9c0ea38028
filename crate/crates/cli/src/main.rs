//! `geoflow`: run configured experiments and emit plot data.
//!
//! Exit codes: 0 when every verdict passes, 2 when a verdict fails (or
//! drifts under `--strict`), 1 on any error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use geoflow::experiment::{
    bundled, catalog, emit_plotdata, run_experiment, write_run, ExperimentConfig, ExperimentError, RunReport, Status,
    REPORT_FILE,
};

#[derive(Parser)]
#[command(name = "geoflow", version, about = "Li-Yau and Harnack estimate laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config file or a bundled experiment by name.
    Run {
        /// Path to a TOML config, or the name of a bundled experiment.
        config: String,
        /// Output root; the run is written to `<out>/<name>/`. Falls back
        /// to the config's `output`, then `runs`.
        #[arg(long, env = "GEOFLOW_OUT")]
        out: Option<PathBuf>,
        /// Seed for randomized checks, overriding the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Treat drift beyond calibrated thresholds as failure.
        #[arg(long)]
        strict: bool,
    },
    /// List bundled experiments.
    List,
    /// Re-emit the CSV plot data of a report.
    Plotdata {
        /// A report.json or the directory holding it.
        report: PathBuf,
        /// Directory for the CSV files; defaults to the report's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(arg: &str) -> Result<ExperimentConfig, ExperimentError> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        ExperimentConfig::from_toml(&text)
    } else {
        bundled(arg)
    }
}

fn run(config: &str, out: Option<&Path>, seed: Option<u64>, strict: bool) -> Result<bool, ExperimentError> {
    let config = load_config(config)?;
    let root = out
        .map(Path::to_path_buf)
        .or_else(|| config.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"));
    let dir = root.join(&config.name);
    let outcome = run_experiment(&config, seed)?;
    write_run(&outcome, &dir)?;
    let report = &outcome.report;
    for v in &report.verdicts {
        let status = match v.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Drift => "DRIFT",
        };
        println!("{status:5} {:24} {}", v.name, v.detail);
    }
    println!(
        "{} checks: {} pass, {} fail, {} drift; {} steps in {:.1} s",
        report.verdicts.len(),
        report.count(Status::Pass),
        report.count(Status::Fail),
        report.count(Status::Drift),
        report.steps,
        outcome.timing.total_seconds
    );
    println!(
        "report {} (sha256 {})",
        dir.join(REPORT_FILE).display(),
        report.digest()
    );
    Ok(report.passed(strict))
}

fn plotdata(report: &Path, out: Option<&Path>) -> Result<(), ExperimentError> {
    let file = if report.is_dir() {
        report.join(REPORT_FILE)
    } else {
        report.to_path_buf()
    };
    let text = std::fs::read_to_string(&file).map_err(|e| ExperimentError::Io {
        path: file.clone(),
        message: e.to_string(),
    })?;
    let parsed = RunReport::from_json(&text)?;
    let dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| file.parent().unwrap_or(Path::new(".")).to_path_buf());
    for name in emit_plotdata(&parsed, &dir)? {
        println!("{}", dir.join(name).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            seed,
            strict,
        } => run(&config, out.as_deref(), seed, strict).map(|pass| if pass { 0 } else { 2 }),
        Command::List => {
            for entry in catalog() {
                println!("{:24} {}", entry.name, entry.description);
            }
            Ok(0)
        }
        Command::Plotdata { report, out } => plotdata(&report, out.as_deref()).map(|()| 0),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
