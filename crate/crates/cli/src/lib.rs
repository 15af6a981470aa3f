//! The `exrank` command line: runs the whole pipeline or any single stage
//! over line-delimited JSON files.

pub mod args;
pub mod commands;

pub use args::{Cli, Command, RunConfig};
pub use commands::{
    cmd_eval, cmd_group, cmd_rank, cmd_run, cmd_synth, cmd_tune, files, RunStatus, RunSummary,
};

use exrank_core::metrics::render_table;
use exrank_core::{ErrorClass, PassAtKReport, Result};

/// Process exit code for a command's result.
pub fn exit_code<T>(result: &Result<T>) -> i32 {
    match result {
        Ok(_) => 0,
        Err(e) => match e.class() {
            ErrorClass::Usage => 1,
            ErrorClass::Data => 2,
            ErrorClass::Runner => 3,
        },
    }
}

/// Runs a parsed command, printing any report table or tuning result to
/// stdout.
pub fn dispatch(command: Command) -> Result<()> {
    let print_reports = |reports: &[PassAtKReport]| {
        if !reports.is_empty() {
            print!("{}", render_table(reports));
        }
    };
    match command {
        Command::Run(cfg) => cmd_run(&cfg.resolve()?).map(|s| print_reports(&s.reports)),
        Command::Group(a) => cmd_group(&a),
        Command::Rank(a) => cmd_rank(&a),
        Command::Eval(a) => cmd_eval(&a).map(|r| print_reports(&r)),
        Command::Tune(a) => cmd_tune(&a).map(|r| {
            println!(
                "{}",
                serde_json::to_string_pretty(&r).expect("tune result serializes")
            )
        }),
        Command::Synth(a) => cmd_synth(&a),
    }
}
