use std::path::Path;

use anyhow::{Context, Result};
use pttd_core::{dehaze, haze_density, psnr, ssim, AdaptationTrace, GatingReport, Image, MetricReport};
use serde::Serialize;

use crate::batch::{mean, run_files, Outcome};
use crate::config::RunConfig;
use crate::io::{list_images, match_by_stem, quantized, read_image, stem, write_image, write_report};

#[derive(Debug, Clone, Serialize)]
pub struct DehazeRow {
    pub input: String,
    pub output: String,
    pub gating: GatingReport,
    /// Metrics of the restored image against ground truth.
    pub metrics: Option<MetricReport>,
    /// PSNR / SSIM of the untouched hazy input against ground truth.
    pub input_psnr: Option<f64>,
    pub input_ssim: Option<f64>,
}

#[derive(Debug, Serialize)]
struct DehazeSummary {
    mean_psnr_in: Option<f64>,
    mean_psnr_out: Option<f64>,
    mean_ssim_in: Option<f64>,
    mean_ssim_out: Option<f64>,
    mean_haze_density_in: Option<f64>,
    mean_haze_density_out: Option<f64>,
    psnr_improved: usize,
    density_reduced: usize,
    scored: usize,
}

#[derive(Debug, Serialize)]
struct DehazeReport<'a> {
    density_threshold: f64,
    dark_window: usize,
    summary: DehazeSummary,
    images: &'a [DehazeRow],
}

#[derive(Serialize)]
struct TraceFile<'a> {
    gating: &'a GatingReport,
    levels: &'a [AdaptationTrace],
}

pub fn size_guidance(img: &Image, levels: usize) -> Option<String> {
    let min = 1usize << levels.min(63);
    (img.width().min(img.height()) < min).then(|| {
        format!(
            "image is {}x{} but {levels} backbone levels need both sides >= {min}; lower --levels or upscale the image",
            img.width(),
            img.height()
        )
    })
}

fn process(cfg: &RunConfig, source: &Image, out: &Path, path: &Path) -> Result<DehazeRow> {
    let hazy = read_image(path)?;
    if let Some(msg) = size_guidance(&hazy, cfg.pttd.backbone.num_levels) {
        anyhow::bail!(msg);
    }
    let result = dehaze(&hazy, source, &cfg.pttd)?;
    let name = stem(path);
    let out_path = out.join(format!("{name}.png"));
    write_image(&out_path, &result.image)?;
    let trace = TraceFile { gating: &result.gating, levels: &result.traces };
    write_report(&out.join(format!("{name}.trace.json")), &trace, crate::io::ReportFormat::Json)?;

    let mut row = DehazeRow {
        input: path.display().to_string(),
        output: out_path.display().to_string(),
        gating: result.gating,
        metrics: None,
        input_psnr: None,
        input_ssim: None,
    };
    if let Some(gt_dir) = &cfg.gt {
        let gt_path = match_by_stem(gt_dir, &name).with_context(|| format!("no ground truth for {name} in {}", gt_dir.display()))?;
        let gt = read_image(&gt_path)?;
        // Score what was written to disk.
        let restored = quantized(&result.image);
        let dc = &cfg.pttd.pgm.dark;
        row.metrics = Some(MetricReport {
            psnr: psnr(&restored, &gt)?,
            ssim: ssim(&restored, &gt)?,
            haze_density_in: haze_density(&hazy, dc)?,
            haze_density_out: haze_density(&restored, dc)?,
        });
        row.input_psnr = Some(psnr(&hazy, &gt)?);
        row.input_ssim = Some(ssim(&hazy, &gt)?);
    }
    Ok(row)
}

/// Restores every input with the prompt built from `--prompt-source`. Writes
/// `<name>.png`, `<name>.trace.json` and a summary report.
pub fn cmd_dehaze(cfg: &RunConfig) -> Result<Outcome> {
    let out = cfg.require_out()?;
    let source = read_image(cfg.require_prompt_source()?)?;
    let inputs = list_images(cfg.require_input()?)?;
    if inputs.is_empty() {
        anyhow::bail!("no input images found");
    }
    let (ok, failures) = run_files(&inputs, cfg.workers, |p| process(cfg, &source, out, p));
    let rows: Vec<DehazeRow> = ok.into_iter().map(|(_, r)| r).collect();
    let scored: Vec<(&DehazeRow, &MetricReport)> = rows.iter().filter_map(|r| r.metrics.as_ref().map(|m| (r, m))).collect();
    let summary = DehazeSummary {
        mean_psnr_in: mean(scored.iter().filter_map(|(r, _)| r.input_psnr)),
        mean_psnr_out: mean(scored.iter().map(|(_, m)| m.psnr)),
        mean_ssim_in: mean(scored.iter().filter_map(|(r, _)| r.input_ssim)),
        mean_ssim_out: mean(scored.iter().map(|(_, m)| m.ssim)),
        mean_haze_density_in: mean(scored.iter().map(|(_, m)| m.haze_density_in)),
        mean_haze_density_out: mean(scored.iter().map(|(_, m)| m.haze_density_out)),
        psnr_improved: scored.iter().filter(|(r, m)| r.input_psnr.is_some_and(|p| m.psnr > p)).count(),
        density_reduced: scored.iter().filter(|(_, m)| m.haze_density_out < m.haze_density_in).count(),
        scored: scored.len(),
    };
    let report = DehazeReport {
        density_threshold: cfg.pttd.pgm.dark.density_threshold,
        dark_window: cfg.pttd.pgm.dark.window,
        summary,
        images: &rows,
    };
    write_report(&out.join(format!("report.{}", cfg.format.extension())), &report, cfg.format)?;
    Outcome::new("dehaze", rows.len(), failures, &report)
}
