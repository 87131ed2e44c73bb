use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wptlab::cli::{self, RunOptions};

#[derive(Parser)]
#[command(name = "wptlab", version, about = "Wireless power transfer and SWIPT design studies")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// Override the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for CSV outputs and manifest.json.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for parallel Monte Carlo.
    #[arg(long, global = true, env = "WPTLAB_JOBS", value_parser = clap::value_parser!(usize))]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the study described by a JSON config.
    Run { config: PathBuf },
    /// Check a config and report every problem found.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match args.command {
        Command::Validate { config } => match cli::validate_path(&config) {
            Ok(_) => {
                println!("ok");
                ExitCode::SUCCESS
            }
            Err(errs) => {
                for e in errs {
                    eprintln!("{}:{}:{}: {}", config.display(), e.line, e.column, e.message);
                }
                ExitCode::from(2)
            }
        },
        Command::Run { config } => {
            let opts = RunOptions { seed: args.seed, out_dir: args.out_dir, jobs: args.jobs.filter(|&j| j > 0) };
            match cli::run_path(&config, &opts) {
                Ok(summary) => {
                    for o in &summary.outputs {
                        println!("{}", summary.out_dir.join(o).display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("wptlab: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
