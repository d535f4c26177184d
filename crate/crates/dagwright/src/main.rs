use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = dagwright::cli::Cli::parse();
    let mut stdout = std::io::stdout().lock();
    let mut stderr = std::io::stderr().lock();
    ExitCode::from(dagwright::cli::run(cli, &mut stdout, &mut stderr) as u8)
}
