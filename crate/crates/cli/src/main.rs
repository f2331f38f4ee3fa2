//! `gaitspeed` command-line interface.

mod commands;

use std::process::ExitCode;

use clap::Parser;

use commands::{Cli, CliError};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = commands::configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let json = cli.json;
    let (code, msg) = match commands::run(cli) {
        Ok(()) => return ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => (2, msg),
        Err(CliError::Runtime(msg)) => (1, msg),
    };
    if json {
        eprintln!("{}", serde_json::json!({ "error": msg, "code": code }));
    } else {
        eprintln!("error: {}", msg.replace('\n', " "));
    }
    ExitCode::from(code)
}
