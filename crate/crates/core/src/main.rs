use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use photon_entropy::scenario::{load_config, run_scenario, RunOptions, Scenario};

/// Runs one emission scenario and writes its data files and a manifest.
#[derive(Debug, Parser)]
#[command(name = "photon-entropy", version, about)]
struct Cli {
    /// Scenario to run.
    #[arg(value_enum)]
    scenario: Scenario,
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `params.box_length=5000`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (default: out/<scenario>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long)]
    jobs: Option<usize>,
    /// Print nothing on success.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = load_config(cli.config.as_deref(), &cli.set).and_then(|cfg| {
        run_scenario(
            cli.scenario,
            &cfg,
            &RunOptions {
                output_dir: cli.out.clone(),
                jobs: cli.jobs,
            },
        )
    });
    match result {
        Ok(summary) => {
            if !cli.quiet {
                println!(
                    "{} -> {}",
                    summary.scenario.name(),
                    summary.output_dir.display()
                );
                for (k, v) in &summary.headline {
                    println!("  {k} = {v}");
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
