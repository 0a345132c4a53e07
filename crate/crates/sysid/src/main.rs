use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sysid::bench::cmd_benchmark;
use sysid::commands::{cmd_fit, cmd_simulate, cmd_validate};
use sysid::config::FitConfig;
use sysid::report::Report;

#[derive(Parser)]
#[command(name = "sysid", version, about = "Identify incrementally stable implicit polynomial models from data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the `seed` key.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for models, trajectories and reports.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model and write it with a fit report.
    Fit(Common),
    /// Simulate a model over a data file and write the trajectory.
    Simulate(Common),
    /// Check a model's contraction certificate and run the stability probe.
    Validate(Common),
    /// Run a benchmark suite (`suite` key).
    Benchmark(Common),
}

fn run(cli: Cli) -> sysid::Result<i32> {
    let (Command::Fit(c) | Command::Simulate(c) | Command::Validate(c) | Command::Benchmark(c)) = &cli.command;
    let mut cfg = FitConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    let (text, code) = match &cli.command {
        Command::Fit(_) => {
            let r = cmd_fit(&cfg, &c.out)?;
            (r.render_text(), r.exit_code())
        }
        Command::Simulate(_) => (cmd_simulate(&cfg, &c.out)?.render_text(), 0),
        Command::Validate(_) => {
            let r = cmd_validate(&cfg, &c.out)?;
            (r.render_text(), r.exit_code())
        }
        Command::Benchmark(_) => {
            let r = cmd_benchmark(&cfg, &c.out)?;
            (r.render_text(), r.exit_code())
        }
    };
    print!("{text}");
    Ok(code)
}

fn main() -> ExitCode {
    // Usage errors are config errors here; clap's own code 2 means FAIL.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("sysid: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
