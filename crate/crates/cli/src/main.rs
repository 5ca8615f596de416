use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nlfb_cli::commands::{self, CliError};
use nlfb_cli::config::Scenario;
use nlfb_cli::output::write_json;
use nlfb_cli::verify;

#[derive(Parser)]
#[command(name = "nlfb", version, about = "Nonlocal free-boundary spreading simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario JSON file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Free-boundary simulation: fronts.csv, snapshots.csv, summary.json.
    SimulateFb(RunArgs),
    /// Whole-line simulation with level-set tracking.
    SimulateCauchy(RunArgs),
    /// Semi-wave speeds c0 over the mu sweep, plus the C* estimate.
    Speeds(RunArgs),
    /// Fit growth laws to a fronts.csv or levels.csv.
    Fit {
        #[arg(long)]
        input: PathBuf,
        /// Fitting window `t_lo,t_hi`; defaults to the second half of the run.
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a verification suite.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Run a list of scenarios in parallel.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected t_lo,t_hi")?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    if !(lo < hi) {
        return Err("need t_lo < t_hi".into());
    }
    Ok((lo, hi))
}

fn load(args: &RunArgs) -> Result<Scenario, CliError> {
    let mut s = Scenario::load(&args.config)?;
    if args.seed.is_some() {
        s.seed = args.seed;
    }
    Ok(s)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let summary = match cli.command {
        Command::SimulateFb(a) => commands::simulate_fb(&load(&a)?, &a.out)?,
        Command::SimulateCauchy(a) => commands::simulate_cauchy(&load(&a)?, &a.out)?,
        Command::Speeds(a) => commands::speeds(&load(&a)?, &a.out)?,
        Command::Fit { input, window, out } => commands::fit(&input, window, &out)?,
        Command::Sweep { config, out, jobs } => commands::sweep(&config, jobs.max(1), &out)?,
        Command::Verify { suite, out, seed } => {
            let ids = verify::suite_criteria(&suite).ok_or_else(|| {
                let names: Vec<_> = verify::SUITES.iter().map(|(n, _)| *n).collect();
                CliError::Run(format!("unknown suite '{suite}' (one of {})", names.join(", ")))
            })?;
            let mut results = Vec::new();
            for &id in ids {
                let r = verify::run_criterion(id, seed);
                println!("{}", r.line());
                results.push(r);
            }
            if let Some(out) = out {
                std::fs::create_dir_all(&out)?;
                write_json(&out.join("verify.json"), &results)?;
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            if failed > 0 {
                return Err(CliError::Run(format!("{failed} of {} criteria failed", results.len())));
            }
            return Ok(());
        }
    };
    println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
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
