mod args;
mod commands;
mod config;
mod output;
mod report;

use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;

use args::{Cli, Command};
use config::{usage, UsageError};
use output::Outcome;

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_VIOLATED: u8 = 3;

fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Simulate(a) => commands::simulate_cmd(a),
        Command::Bounds(a) => commands::bounds_cmd(a),
        Command::Verify(a) => commands::verify_cmd(a),
        Command::Rademacher(a) => commands::rademacher_cmd(a),
        Command::Qn(a) => commands::qn_cmd(a),
        Command::Certify(a) => commands::certify_cmd(a),
        Command::Coverage(a) => commands::coverage_cmd(a),
        Command::Report(a) => report::report_cmd(a),
    }
}

fn execute(cli: &Cli) -> Result<bool> {
    let common = cli.command.common();
    if let Some(k) = common.threads {
        if k == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global()?;
    }
    if matches!(cli.command, Command::Report(_)) && common.output.is_none() {
        return Err(usage("report needs an output directory (-o DIR)"));
    }
    let outcome = run(cli)?;
    match (&cli.command, &common.output) {
        (Command::Report(_), Some(dir)) => output::emit_bundle(&outcome, dir)?,
        (_, out) => output::emit(&outcome, out.as_deref())?,
    }
    Ok(outcome.violated)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(EXIT_VIOLATED),
        Err(e) => {
            eprintln!("error: {e:#}");
            let is_usage = e.chain().any(|c| c.is::<UsageError>() || c.is::<tsrisk_core::Error>());
            ExitCode::from(if is_usage { EXIT_USAGE } else { EXIT_FAILURE })
        }
    }
}
