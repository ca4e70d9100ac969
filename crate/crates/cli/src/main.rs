//! `horserace`: ingest a panel, run the pseudo-out-of-sample race, evaluate the store.

mod eval;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use horserace_core::data::ingest_fredmd;
use horserace_core::harness::{manifest_path, run_experiment_with_jobs, Dataset, ExperimentConfig, ForecastStore, RunManifest};
use horserace_core::Error;

#[derive(Parser)]
#[command(name = "horserace", version, about = "Macro forecasting horse race")]
struct Cli {
    /// More log output on stderr (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a FRED-MD style CSV and write the normalized panel.
    Ingest {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Produce forecasts for every missing key in the store.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
        /// Also export the whole store as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Evaluation outputs as CSV files under --out.
    Eval(eval::EvalArgs),
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation { .. } | Error::Parse { .. } | Error::Schema(_) | Error::UnknownModel { .. } => 2,
        _ => 1,
    }
}

fn ingest(data: PathBuf, out: PathBuf) -> horserace_core::Result<()> {
    let panel = ingest_fredmd(&data)?;
    panel.validate()?;
    panel.write_csv(&out)?;
    let dates = &panel.dates;
    println!("{} series, {}..{}", panel.n_series(), dates[0], dates[dates.len() - 1]);
    Ok(())
}

fn run(config: PathBuf, store_path: PathBuf, jobs: usize, csv: Option<PathBuf>) -> horserace_core::Result<()> {
    let cfg = ExperimentConfig::load(&config)?;
    let raw = ingest_fredmd(cfg.data_path())?;
    raw.validate()?;
    let data = Dataset::build(&raw, &cfg)?;
    let mut store = ForecastStore::load_or_new(&store_path)?;
    let report = run_experiment_with_jobs(&cfg, &data, &store, jobs)?;
    for (model, c) in &report.counts {
        if c.failed > 0 {
            log::warn!("{model}: {} of {} fits failed", c.failed, c.attempted);
        }
    }
    let new = report.store.len();
    store.merge(report.store.clone());
    if new > 0 || !store_path.exists() {
        store.save(&store_path)?;
    }
    RunManifest::new(&cfg, &report, store.len())?.save(manifest_path(&store_path))?;
    if let Some(path) = csv {
        store.save_csv(path)?;
    }
    println!(
        "{new} new records, {} skipped, {} total, {:.1}s",
        report.skipped_existing,
        store.len(),
        report.elapsed_secs
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Ingest { data, out } => ingest(data, out),
        Command::Run { config, store, jobs, csv } => run(config, store, jobs, csv),
        Command::Eval(args) => eval::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
