use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uaskf::config::ExperimentConfig;
use uaskf::report::{to_json_17, write_propagation, write_reports};
use uaskf::{load_config, run_filter_benchmark, run_propagation_experiment, RunError};
use uaskf_core::systems::NAMES;

#[derive(Parser)]
#[command(name = "uaskf", version, about = "Uncertainty-aware salted Kalman filter experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample clouds through the first event under four uncertainty cases.
    Propagate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Filter benchmark over many trials.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the built-in systems with their default configs.
    Systems,
}

fn run(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Propagate { config, out, seed } => {
            let cfg = load_config(&config, seed)?;
            let report = run_propagation_experiment(&cfg)?;
            for c in &report.cases {
                let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
                println!(
                    "{:<11} KL saltation-only {:>12}  uncertainty-aware {:>12}  reversed {:>12} {:>12}  {}",
                    c.case.label(),
                    fmt(c.kl_saltation_only),
                    fmt(c.kl_uncertainty_aware),
                    fmt(c.kl_saltation_only_reverse),
                    fmt(c.kl_uncertainty_aware_reverse),
                    c.status
                );
            }
            for p in write_propagation(&report, &out)? {
                eprintln!("wrote {}", p.display());
            }
        }
        Command::Bench { config, out, seed } => {
            let cfg = load_config(&config, seed)?;
            let result = run_filter_benchmark(&cfg)?;
            let s = &result.summary;
            let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
            println!("system {} trials {} failures {}", s.system, s.n_trials, s.failures.len());
            println!("median MSE improvement {} %", fmt(s.median_mse_improvement_pct));
            println!("peak avg-error improvement {} % at t = {}", fmt(s.peak_avg_error_improvement_pct), fmt(s.peak_time));
            println!("sign test p = {} ({} better / {} worse)", fmt(s.sign_test_p), s.n_candidate_better, s.n_baseline_better);
            for p in write_reports(&result, &out, cfg.write_errors, cfg.write_curves)? {
                eprintln!("wrote {}", p.display());
            }
        }
        Command::Systems => {
            for name in NAMES {
                let cfg = ExperimentConfig::default_for(name).expect("built-in system");
                println!("{name}");
                print!("{}", to_json_17(&cfg)?);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
