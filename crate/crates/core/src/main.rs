use std::process::ExitCode;

use clap::Parser;
use etclosure::cli::{init_threads, run, Cli};

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    let outcome = run(&cli.command);
    if outcome.code == 0 || outcome.code == 1 {
        print!("{}", outcome.output);
    } else {
        eprintln!("{}", outcome.output);
    }
    ExitCode::from(outcome.code as u8)
}
