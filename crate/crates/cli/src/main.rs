use std::process::ExitCode;

use clap::Parser;
use exrank_cli::{dispatch, exit_code, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = dispatch(cli.command);
    if let Err(e) = &result {
        eprintln!("exrank: {e}");
    }
    ExitCode::from(exit_code(&result) as u8)
}
