use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use pttd_cli::config::{Cli, RunConfig};
use pttd_cli::io::render;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = RunConfig::resolve(&cli.common, &cli.command).and_then(|cfg| {
        let outcome = pttd_cli::run(&cli.command, &cfg)?;
        let text = render(&outcome, cfg.format)?;
        if let Err(e) = writeln!(std::io::stdout().lock(), "{text}") {
            if e.kind() != std::io::ErrorKind::BrokenPipe {
                return Err(e.into());
            }
        }
        Ok(outcome)
    });
    match result {
        Ok(outcome) if outcome.succeeded() => ExitCode::SUCCESS,
        Ok(outcome) => {
            eprintln!("{} of {} inputs failed", outcome.failures.len(), outcome.failures.len() + outcome.processed);
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
