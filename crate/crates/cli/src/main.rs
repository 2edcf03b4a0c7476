use std::process::ExitCode;

use clap::Parser;
use nll_cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match nll_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nll: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
