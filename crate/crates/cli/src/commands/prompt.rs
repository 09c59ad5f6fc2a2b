use anyhow::Result;
use pttd_core::{generate_prompt, GatingReport};
use serde::Serialize;

use crate::batch::{run_files, Outcome};
use crate::config::RunConfig;
use crate::io::{list_images, read_image, stem, write_image, write_report};

#[derive(Debug, Clone, Serialize)]
struct PromptRow {
    input: String,
    prompt: String,
    gating: GatingReport,
}

/// Writes `<name>_prompt.png` and a gating report per hazy input.
pub fn cmd_prompt(cfg: &RunConfig) -> Result<Outcome> {
    let out = cfg.require_out()?;
    let source = read_image(cfg.require_prompt_source()?)?;
    let inputs = list_images(cfg.require_input()?)?;
    let (ok, failures) = run_files(&inputs, cfg.workers, |path| {
        let hazy = read_image(path)?;
        let (prompt, gating) = generate_prompt(&source, &hazy, &cfg.pttd.pgm)?;
        let name = stem(path);
        let prompt_path = out.join(format!("{name}_prompt.png"));
        write_image(&prompt_path, &prompt)?;
        let row = PromptRow {
            input: path.display().to_string(),
            prompt: prompt_path.display().to_string(),
            gating,
        };
        write_report(&out.join(format!("{name}_prompt.{}", cfg.format.extension())), &row, cfg.format)?;
        Ok(row)
    });
    let rows: Vec<PromptRow> = ok.into_iter().map(|(_, r)| r).collect();
    Outcome::new("prompt", rows.len(), failures, &rows)
}
