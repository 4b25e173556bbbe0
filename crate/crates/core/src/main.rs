//! Scenario-runner CLI.
//!
//! Exit codes: 0 all verdicts pass; 1 statistical failure; 2 invalid
//! parameter or config value; 3 unknown scenario; 4 effective-sample-size
//! collapse; 5 I/O error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use onesided_tanaka::harness::config::CliOverrides;
use onesided_tanaka::harness::report::write_csv;
use onesided_tanaka::harness::scenarios::{default_config, list_scenarios, run_scenario, HarnessError};

/// Simulation harness for the one-sided Tanaka equation with drift.
#[derive(Parser)]
#[command(name = "tanaka-sim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the available scenarios.
    #[command(name = "list-scenarios")]
    ListScenarios,
    /// Run one scenario and print its report.
    Run {
        /// Scenario name (see `list-scenarios`).
        scenario: String,
        /// Config file (key = value, with one section per scenario).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Base seed; path k uses stream index k.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of Monte Carlo paths.
        #[arg(long)]
        paths: Option<usize>,
        /// Time step.
        #[arg(long)]
        dt: Option<f64>,
        /// Simulation horizon.
        #[arg(long)]
        horizon: Option<f64>,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the per-path summary table here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    // Default thread count comes from the environment; absence means "all
    // available".
    if let Ok(threads) = std::env::var("TANAKA_SIM_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("TANAKA_SIM_THREADS must be a positive integer");
                return ExitCode::from(2);
            }
        }
    }

    match Cli::parse().command {
        Command::ListScenarios => {
            for info in list_scenarios() {
                println!("{:<18} [{}] {}", info.name, info.theorem, info.description);
            }
            ExitCode::SUCCESS
        }
        Command::Run {
            scenario,
            config,
            seed,
            paths,
            dt,
            horizon,
            out,
            csv,
        } => run_command(scenario, config, CliOverrides { seed, n_paths: paths, dt, horizon }, out, csv),
    }
}

fn run_command(
    scenario: String,
    config: Option<PathBuf>,
    cli: CliOverrides,
    out: Option<PathBuf>,
    csv: Option<PathBuf>,
) -> ExitCode {
    let mut cfg = match default_config(&scenario) {
        Ok(cfg) => cfg,
        Err(e) => return fail(e),
    };
    if let Some(path) = config {
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("cannot read config {}: {e}", path.display());
                return ExitCode::from(5);
            }
        };
        if let Err(e) = cfg.apply_file(&text) {
            return fail(e);
        }
    }
    cfg.apply_cli(&cli);

    let output = match run_scenario(&cfg) {
        Ok(o) => o,
        Err(e) => return fail(e),
    };
    print!("{}", output.report.render_text());

    if let Some(path) = out {
        if let Err(e) = fs::write(&path, output.report.to_json()) {
            eprintln!("cannot write report {}: {e}", path.display());
            return ExitCode::from(5);
        }
    }
    if let Some(path) = csv {
        let write = fs::File::create(&path)
            .and_then(|f| write_csv(std::io::BufWriter::new(f), &output.path_records));
        if let Err(e) = write {
            eprintln!("cannot write csv {}: {e}", path.display());
            return ExitCode::from(5);
        }
    }

    if output.report.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn fail(e: HarnessError) -> ExitCode {
    eprintln!("error: {e}");
    let code = match e {
        HarnessError::UnknownScenario(_) => 3,
        HarnessError::EssCollapse { .. } => 4,
        HarnessError::InvalidParameter(_) | HarnessError::Sim(_) => 2,
        HarnessError::Config(_) => 2,
    };
    ExitCode::from(code)
}
