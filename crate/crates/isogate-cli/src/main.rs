use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use isogate_cli::fixtures::{emit_fixture, FIXTURE_NAMES};
use isogate_cli::run_scenario_file;

/// Two-ion mixed-isotope entangling-gate scenario runner.
#[derive(Parser)]
#[command(name = "isogate", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config and write its CSV, summary, and report.
    Run {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Override the config's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for scan points (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Override the config's output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Write bundled reference scenario configs ("all" for every one).
    Fixtures {
        /// One of the canonical names, or "all".
        name: String,
        /// Destination directory.
        dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, seed, jobs, out_dir } => {
            if let Some(n) = jobs {
                if let Err(e) =
                    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()
                {
                    eprintln!("error: cannot configure {n} worker threads: {e}");
                    return ExitCode::from(2);
                }
            }
            match run_scenario_file(&scenario, seed, out_dir.as_deref()) {
                Ok(written) => {
                    println!("wrote {}", written.csv.display());
                    println!("wrote {}", written.summary.display());
                    println!("wrote {}", written.report.display());
                    if written.warnings.is_empty() {
                        ExitCode::SUCCESS
                    } else {
                        for w in &written.warnings {
                            eprintln!("warning: {w}");
                        }
                        ExitCode::from(3)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Fixtures { name, dir } => match emit_fixture(&name, &dir) {
            Ok(paths) => {
                for p in paths {
                    println!("wrote {}", p.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                eprintln!("available fixtures: {}", FIXTURE_NAMES.join(", "));
                ExitCode::from(2)
            }
        },
    }
}
