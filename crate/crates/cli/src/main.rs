//! `wulffflow <simulate|inequality|norm-check|variation-check> --config <path>`

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use wulffflow::cli::{execute, Command, CHECK_FAILED_EXIT};
use wulffflow::config::load_config;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    /// Run the flow and write the time series, limit report and snapshots.
    Simulate,
    /// Evaluate the mixed-volume inequality on the initial surface.
    Inequality,
    /// Check ellipticity and the duality identities of the norm.
    NormCheck,
    /// Compare finite-difference and exact first variations.
    VariationCheck,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Simulate => Command::Simulate,
            Cmd::Inequality => Command::Inequality,
            Cmd::NormCheck => Command::NormCheck,
            Cmd::VariationCheck => Command::VariationCheck,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "wulffflow", version, about = "Inverse anisotropic mean curvature flow of star-shaped hypersurfaces")]
struct Args {
    #[arg(value_enum)]
    command: Cmd,
    /// Configuration file.
    #[arg(long, short)]
    config: PathBuf,
    /// Replace a configuration value, e.g. `--override flow.t_max=2`.
    #[arg(long = "override", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    /// Print only errors.
    #[arg(long, short)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let run = || -> wulffflow::Result<_> {
        let config = load_config(&args.config, &args.overrides)?;
        execute(args.command.into(), &config)
    };
    match run() {
        Ok(out) => {
            if !args.quiet {
                print!("{}", out.summary);
                for f in &out.files {
                    println!("wrote {}", f.display());
                }
            }
            if out.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("wulffflow: {} check failed", Command::from(args.command).name());
                ExitCode::from(CHECK_FAILED_EXIT as u8)
            }
        }
        Err(e) => {
            eprintln!("wulffflow: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
