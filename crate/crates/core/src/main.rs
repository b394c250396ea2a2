use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wavedirect::config::RunConfig;
use wavedirect::pipeline;

#[derive(Parser)]
#[command(name = "wavedirect", version, about = "Compressed wavelet Galerkin matrices with a sparse direct solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble, order, factorize and run the configured driver.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Print the effective configuration and exit.
        #[arg(long)]
        print_config: bool,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Overrides `driver.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Size, nonzeros and predicted factor fill of a Matrix Market file.
    Stats {
        matrix: PathBuf,
        #[arg(long)]
        perm: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            print_config,
            threads,
            seed,
        } => run(config, print_config, threads, seed),
        Command::Stats { matrix, perm } => pipeline::stats(&matrix, perm.as_deref()).map(|r| print!("{r}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(config: Option<PathBuf>, print_config: bool, threads: usize, seed: Option<u64>) -> wavedirect::Result<()> {
    let mut cfg = match &config {
        Some(p) => RunConfig::load(p)?,
        None if print_config => RunConfig::default(),
        None => {
            return Err(wavedirect::Error::Invalid("`run` needs --config <path>".into()));
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if print_config {
        print!("{}", cfg.to_text());
        return Ok(());
    }
    if threads == 0 {
        return Err(wavedirect::Error::Invalid("--threads must be at least 1".into()));
    }
    let summary = pipeline::run(&cfg, threads)?;
    print!("{}", summary.timing_table());
    for f in &summary.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
