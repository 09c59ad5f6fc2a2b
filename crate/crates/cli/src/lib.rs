//! Library side of the `pttd` command-line tool.

pub mod batch;
pub mod commands;
pub mod config;
pub mod io;

use anyhow::Result;

use batch::Outcome;
use config::{Command, RunConfig};

/// Runs one subcommand with an already resolved configuration.
pub fn run(command: &Command, cfg: &RunConfig) -> Result<Outcome> {
    match command {
        Command::Synth(_) => commands::cmd_synth(cfg),
        Command::Prompt => commands::cmd_prompt(cfg),
        Command::Dehaze => commands::cmd_dehaze(cfg),
        Command::FlnApply => commands::cmd_fln_apply(cfg),
        Command::Motivate => commands::cmd_motivate(cfg),
        Command::Sweep(_) => commands::cmd_sweep(cfg),
        Command::Eval(_) => commands::cmd_eval(cfg),
    }
}
