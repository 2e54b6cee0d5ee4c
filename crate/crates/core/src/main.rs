use std::path::PathBuf;
use std::process::ExitCode;

use annuity_bounds::cli;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "annuity-bounds",
    version,
    about = "Mortality-robust bounds for variable annuity guarantees"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration and write its CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's `output`; stdout if neither is set.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a configuration without computing anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = cli::init_threads().and_then(|()| match &args.command {
        Command::Run { config, out } => cli::run(config, out.as_deref()).map(|path| {
            if let Some(p) = path {
                eprintln!("wrote {}", p.display());
            }
        }),
        Command::Validate { config } => cli::validate(config).map(|s| println!("{s}")),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
