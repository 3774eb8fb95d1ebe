//! Command-line front end of the `dissent-core` toolkit.
//!
//! [`execute`] runs one parsed invocation and renders its report; the binary
//! adds thread-pool setup, file output and exit codes.

pub mod args;
pub mod commands;
pub mod error;
pub mod output;

use args::Cli;
use error::CliResult;
use output::{Format, Report};

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "DISSENT_SIM_THREADS";

/// Provenance string for the report header: program name and arguments.
pub fn command_line(argv: &[String]) -> String {
    std::iter::once(output::PROGRAM.to_string()).chain(argv.iter().skip(1).cloned()).collect::<Vec<_>>().join(" ")
}

/// Applies `--config`, runs the command and returns the report with its format.
pub fn execute(mut cli: Cli, argv: &[String]) -> CliResult<(Report, Format)> {
    let opts = cli.command.opts_mut();
    if let Some(path) = opts.config.clone() {
        opts.load_config(&path)?;
    }
    let format = cli.command.opts().format.unwrap_or(Format::Csv);
    let report = commands::run(&cli.command, command_line(argv))?;
    Ok((report, format))
}

/// Parses the thread cap; `None` when unset.
pub fn thread_cap(value: Option<&str>) -> CliResult<Option<usize>> {
    match value {
        None => Ok(None),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(error::CliError::domain(format!("{THREADS_ENV} must be a positive integer (got '{v}')"))),
        },
    }
}
