use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = nloskit_cli::args::Cli::parse();
    match nloskit_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
