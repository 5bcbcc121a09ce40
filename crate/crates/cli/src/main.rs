use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use dsnprint_cli::{dispatch, RunManifest};

fn main() -> ExitCode {
    let manifest = RunManifest::parse();
    match dispatch(&manifest) {
        Ok(outcome) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(outcome.stdout.as_bytes()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
