use std::process::ExitCode;

use clap::Parser;
use mvsde_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("mvsde: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
