use std::path::Path;

use anyhow::{Context, Result};
use pttd_core::{band_rms, decode, encode, perturb_stats, Image};
use serde::Serialize;

use crate::batch::{run_files, Outcome};
use crate::config::RunConfig;
use crate::io::{list_images, read_image, stem, write_image};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MotivateRow {
    pub image: String,
    pub level: usize,
    pub delta: f64,
    /// RMS of the level's contribution to the decoded image after shifting its std by `delta`.
    pub band_rms: Option<f64>,
    /// Change of the decoded image mean after shifting the level's mean by `delta`.
    pub mean_shift: Option<f64>,
    pub status: String,
}

#[derive(Debug, Serialize)]
struct LevelSummary {
    image: String,
    level: usize,
    monotone: Option<bool>,
    max_mean_shift_error: Option<f64>,
}

fn image_mean(img: &Image) -> f64 {
    let d = img.features().data();
    d.iter().sum::<f64>() / d.len() as f64
}

fn sweep_image(cfg: &RunConfig, out: &Path, path: &Path) -> Result<(Vec<MotivateRow>, Vec<LevelSummary>)> {
    let img = read_image(path)?;
    let name = stem(path);
    let pyr = encode(&img, &cfg.pttd.backbone)?;
    let baseline_mean = image_mean(&decode(&pyr)?);
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for level in 0..pyr.bands.len() {
        let mut level_rows = Vec::new();
        for &delta in &cfg.motivate_deltas {
            let (rms, status) = match perturb_stats(&pyr, level, 0.0, delta) {
                Ok(p) => {
                    let decoded = decode(&p)?;
                    write_image(&out.join(&name).join(format!("level{level}_sigma{delta:+.3}.png")), &decoded)?;
                    (Some(band_rms(&p, level)?), "ok".to_owned())
                }
                Err(e) => (None, format!("degenerate: {e}")),
            };
            let shifted = decode(&perturb_stats(&pyr, level, delta, 0.0)?)?;
            level_rows.push(MotivateRow {
                image: name.clone(),
                level,
                delta,
                band_rms: rms,
                mean_shift: Some(image_mean(&shifted) - baseline_mean),
                status,
            });
        }
        let rms: Option<Vec<f64>> = level_rows.iter().map(|r| r.band_rms).collect();
        summaries.push(LevelSummary {
            image: name.clone(),
            level,
            monotone: rms.map(|v| v.windows(2).all(|w| w[0] < w[1])),
            max_mean_shift_error: level_rows
                .iter()
                .filter_map(|r| r.mean_shift.map(|m| (m - r.delta).abs()))
                .reduce(f64::max),
        });
        rows.extend(level_rows);
    }
    Ok((rows, summaries))
}

/// Shifts each band level's std (and, separately, its mean) over the delta
/// grid. Writes one decoded image per (level, delta), `curve.csv` and a
/// per-level monotonicity summary.
pub fn cmd_motivate(cfg: &RunConfig) -> Result<Outcome> {
    let out = cfg.require_out()?;
    let mut deltas = cfg.motivate_deltas.clone();
    deltas.sort_by(f64::total_cmp);
    let cfg = &RunConfig { motivate_deltas: deltas, ..cfg.clone() };
    let inputs = list_images(cfg.require_input()?)?;
    let (ok, failures) = run_files(&inputs, cfg.workers, |p| sweep_image(cfg, out, p));
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for (_, (r, s)) in ok {
        rows.extend(r);
        summaries.extend(s);
    }
    std::fs::create_dir_all(out)?;
    let csv_path = out.join("curve.csv");
    let mut w = csv::Writer::from_path(&csv_path).with_context(|| format!("writing {}", csv_path.display()))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    crate::io::write_report(&out.join(format!("motivate.{}", cfg.format.extension())), &summaries, cfg.format)?;
    Outcome::new("motivate", rows.len(), failures, &summaries)
}
