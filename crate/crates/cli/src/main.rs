use std::process::ExitCode;

use clap::Parser;
use nsmild_runner::app::{init_threads, run, Args};

fn main() -> ExitCode {
    let args = Args::parse();
    match init_threads().and_then(|_| run(args)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
