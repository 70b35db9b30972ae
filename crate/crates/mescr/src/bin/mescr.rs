//! Thin command-line front end: parses arguments, loads the configuration
//! and dispatches to the library's study drivers.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mescr::commands;
use mescr::config::RunConfig;

#[derive(Parser)]
#[command(name = "mescr", version, about = "Modeling and magnet-placement optimization for magnetically actuated soft continuum robots")]
struct Cli {
    /// Output directory for tables and summaries.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Seed for randomized checks and restarts.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Print the CSV column contracts and exit.
    #[arg(long, global = true)]
    schema: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the model-invariant suite (derivative, rank and bound checks).
    Validate { config: PathBuf },
    /// Solve one equilibrium; write the centerline and a summary.
    Simulate { config: PathBuf },
    /// Sweep the field magnitude; write normalized tip deflections.
    Sweep { config: PathBuf },
    /// Report manipulator/actuation Jacobians, ranks and controllable DoF.
    Jacobian { config: PathBuf },
    /// Sweep in-plane fields; write distal points and the covered area.
    Workspace { config: PathBuf },
    /// Joint-count self-convergence study against a fine reference.
    Convergence { config: PathBuf },
    /// Optimize magnet placement over all sign patterns; write reports.
    Optimize { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.schema {
        println!("{}", commands::schema_text());
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required (try --help)");
        return ExitCode::from(3);
    };
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not size the worker pool: {e}");
        }
    }
    let config_path = match &command {
        Command::Validate { config }
        | Command::Simulate { config }
        | Command::Sweep { config }
        | Command::Jacobian { config }
        | Command::Workspace { config }
        | Command::Convergence { config }
        | Command::Optimize { config } => config.clone(),
    };
    let mut cfg = match RunConfig::from_path(&config_path) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(3);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.optimize.seed = seed;
    }
    if let Err(e) = std::fs::create_dir_all(&cli.out_dir) {
        eprintln!("cannot create output directory: {e}");
        return ExitCode::from(2);
    }
    let result = match &command {
        Command::Validate { .. } => commands::cmd_validate(&cfg, &cli.out_dir),
        Command::Simulate { .. } => commands::cmd_simulate(&cfg, &cli.out_dir),
        Command::Sweep { .. } => commands::cmd_sweep(&cfg, &cli.out_dir),
        Command::Jacobian { .. } => commands::cmd_jacobian(&cfg, &cli.out_dir),
        Command::Workspace { .. } => commands::cmd_workspace(&cfg, &cli.out_dir),
        Command::Convergence { .. } => commands::cmd_convergence(&cfg, &cli.out_dir),
        Command::Optimize { .. } => commands::cmd_optimize(&cfg, &cli.out_dir),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
