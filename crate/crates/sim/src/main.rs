use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use otfs_sim::error::Error;
use otfs_sim::metrics::efficiency;
use otfs_sim::sweep::{run_sweep, write_csv};
use otfs_sim::trial::trial_bcrb;
use otfs_sim::validate::run_validation;
use otfs_sim::ExperimentConfig;

/// Monte Carlo link simulator for superimposed-pilot OTFS channel estimation.
#[derive(Parser)]
#[command(name = "otfs-sim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured SNR sweep and write the results CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker thread count (default: one per logical CPU).
        #[arg(long)]
        threads: Option<usize>,
        /// Override the master seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the Bayesian Cramer-Rao bound per configured SNR point.
    Bcrb {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the frame efficiency against the embedded-pilot baselines.
    Efficiency {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the structural invariant suite at the configured sizes.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(Error::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Error::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
        Err(Error::Io(e)) => {
            eprintln!("io error: {e}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: Cli) -> otfs_sim::Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            out,
            threads,
            seed,
        } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let table = run_sweep(&cfg, threads)?;
            write_csv(&table, &out)?;
            if table.failed_trials > 0 {
                eprintln!(
                    "warning: {} trial(s) failed and were skipped",
                    table.failed_trials
                );
            }
            println!("wrote {} rows to {}", table.rows.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Bcrb { config } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            println!("snr_db,bcrb");
            for snr_index in 0..cfg.snr_db.len() {
                let mut acc = 0.0;
                for trial in 0..cfg.trials {
                    acc += trial_bcrb(&cfg, snr_index, trial)?;
                }
                println!("{},{:.8e}", cfg.snr_db[snr_index], acc / cfg.trials as f64);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Efficiency { config } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let eff = efficiency(&cfg);
            println!("S_e_AP_SIP = {:.4}", eff.ap_sip);
            println!("S_e_EP_SISO = {:.4}", eff.ep_siso);
            println!("S_e_EP_MIMO = {:.4}", eff.ep_mimo);
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            if run_validation(&cfg)? {
                println!("all checks passed");
                Ok(ExitCode::SUCCESS)
            } else {
                Err(Error::numerical("validation checks failed"))
            }
        }
    }
}
