use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use nsmc_cli::compare::{compare, Metric};
use nsmc_cli::plotdata::emit_plotdata;
use nsmc_cli::run::run_experiment;
use nsmc_cli::{output_root, CliResult, ExperimentConfig};

/// Samplers for non-differentiable posteriors, run from config files.
///
/// Outputs go under $NSMC_OUTPUT_ROOT (default ./runs).
#[derive(Parser)]
#[command(name = "nsmc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run { config: PathBuf },
    /// Run several samplers on one model with equal wall-clock budgets.
    Compare {
        #[arg(required = true, num_args = 1..)]
        configs: Vec<PathBuf>,
        #[arg(long, value_parser = parse_metric)]
        metric: Metric,
        /// Seconds per sampler.
        #[arg(long, default_value_t = 10.0)]
        budget: f64,
    },
    /// Write trace, autocorrelation and histogram files for a finished run.
    EmitPlotdata {
        dir: PathBuf,
        /// Coordinates to export; the first 16 by default.
        #[arg(long, value_delimiter = ',')]
        coords: Option<Vec<usize>>,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        #[arg(long, default_value_t = 50)]
        max_lag: usize,
    },
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse().map_err(|e: nsmc_cli::CliError| e.to_string())
}

fn execute(cli: Cli) -> CliResult<()> {
    let root = output_root();
    match cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = run_experiment(&cfg, &cfg.output_dir(&root), None)?;
            println!(
                "{} samples from {} on {} in {:.2} s -> {}",
                out.chain.len(),
                out.report.sampler,
                out.report.model,
                out.report.wall_time,
                out.dir.display()
            );
        }
        Command::Compare { configs, metric, budget } => {
            if !(budget > 0.0 && budget.is_finite()) {
                return Err(nsmc_cli::CliError::Config("budget must be positive".into()));
            }
            let loaded = configs
                .iter()
                .map(|p| Ok((p.display().to_string(), ExperimentConfig::load(p)?)))
                .collect::<CliResult<Vec<_>>>()?;
            let table = compare(&loaded, metric, Duration::from_secs_f64(budget), &root)?;
            print!("{table}");
        }
        Command::EmitPlotdata { dir, coords, bins, max_lag } => {
            let n = emit_plotdata(&dir, coords.as_deref(), bins, max_lag)?;
            println!("plot data for {n} coordinates written to {}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nsmc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
