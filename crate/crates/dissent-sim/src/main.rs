use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use dissent_sim::args::Cli;
use dissent_sim::error::CliResult;
use dissent_sim::{execute, thread_cap, THREADS_ENV};

fn run() -> CliResult<()> {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse_from(&argv);
    if let Some(n) = thread_cap(std::env::var(THREADS_ENV).ok().as_deref())? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| dissent_sim::error::CliError::domain(format!("cannot size the worker pool: {e}")))?;
    }
    let out_path = cli.command.opts().out.clone();
    let (report, format) = execute(cli, &argv)?;
    let text = report.render(format);
    match out_path {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
