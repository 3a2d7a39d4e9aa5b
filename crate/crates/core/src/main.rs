use std::process::ExitCode;

use clap::Parser;
use twoscale::cli::{run_cli, Cli, THREADS_ENV};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = std::env::var(THREADS_ENV).ok();
    match run_cli(&cli, threads.as_deref()) {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("{w}");
            }
            for c in &report.checks {
                println!("{}", c.line());
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            for line in e.lines() {
                eprintln!("{line}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
