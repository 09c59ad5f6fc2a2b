use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pttd_core::ftx::{decode_records, encode_records, FtxRecord};
use pttd_core::{fln_per_level, AdaptationTrace, FeatureMap};
use serde::Serialize;

use crate::batch::Outcome;
use crate::config::RunConfig;
use crate::io::write_report;

fn read_ftx(path: &Path) -> Result<Vec<FeatureMap>> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let records = decode_records(&bytes).with_context(|| format!("parsing {}", path.display()))?;
    records
        .iter()
        .enumerate()
        .map(|(i, r)| r.to_feature_map().with_context(|| format!("{} record {i}", path.display())))
        .collect()
}

#[derive(Debug, Serialize)]
struct FlnReport<'a> {
    input: String,
    prompt: String,
    output: String,
    alpha: f64,
    levels: &'a [AdaptationTrace],
}

pub fn trace_path(out: &Path) -> PathBuf {
    out.with_extension("trace.json")
}

/// Applies feature-level normalization record by record (one record per
/// encoder level) and writes the adapted records to `--out`.
pub fn cmd_fln_apply(cfg: &RunConfig) -> Result<Outcome> {
    let input = cfg.require_input()?;
    let prompt = cfg.require_prompt_source()?;
    let out = cfg.require_out()?;
    let xs = read_ftx(input)?;
    let ps = read_ftx(prompt)?;
    if xs.len() != ps.len() {
        bail!("record count mismatch: input has {}, prompt has {}", xs.len(), ps.len());
    }
    let (adapted, traces) = fln_per_level(&xs, &ps, &cfg.pttd.fln)?;
    let records: Vec<FtxRecord> = adapted.iter().map(FtxRecord::from_feature_map).collect();
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(out, encode_records(&records)).with_context(|| format!("writing {}", out.display()))?;
    let report = FlnReport {
        input: input.display().to_string(),
        prompt: prompt.display().to_string(),
        output: out.display().to_string(),
        alpha: cfg.pttd.fln.alpha,
        levels: &traces,
    };
    write_report(&trace_path(out), &report, crate::io::ReportFormat::Json)?;
    Outcome::new("fln-apply", records.len(), vec![], &report)
}
