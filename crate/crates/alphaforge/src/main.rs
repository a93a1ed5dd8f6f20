use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;

use alphaforge::cli::{run_cli, Cli};
use clap::Parser;

fn main() -> ExitCode {
    // clap exits with 2 on usage errors and 0 for --help
    let cli = Cli::parse();
    match catch_unwind(AssertUnwindSafe(|| run_cli(&cli))) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(3),
    }
}
