use anyhow::{Context, Result};
use pttd_core::{haze_density, psnr, ssim};
use serde::Serialize;

use crate::batch::{mean, run_files, Outcome};
use crate::config::RunConfig;
use crate::io::{list_images, match_by_stem, read_image, stem, write_report};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub image: String,
    pub psnr: f64,
    pub ssim: f64,
    /// Density of the matching `--hazy` image, when given.
    pub haze_density_in: Option<f64>,
    pub haze_density_out: f64,
}

#[derive(Debug, Serialize)]
struct EvalReport<'a> {
    mean_psnr: Option<f64>,
    mean_ssim: Option<f64>,
    mean_haze_density_out: Option<f64>,
    images: &'a [EvalRow],
}

/// Scores `--input` images against `--gt` by file stem.
pub fn cmd_eval(cfg: &RunConfig) -> Result<Outcome> {
    let gt_dir = cfg.gt.as_deref().context("--gt is required")?;
    let inputs = list_images(cfg.require_input()?)?;
    let dc = &cfg.pttd.pgm.dark;
    let (ok, failures) = run_files(&inputs, cfg.workers, |p| {
        let name = stem(p);
        let img = read_image(p)?;
        let gt = read_image(&match_by_stem(gt_dir, &name).with_context(|| format!("no ground truth for {name}"))?)?;
        let haze_density_in = match &cfg.hazy {
            Some(dir) => {
                let h = match_by_stem(dir, &name).with_context(|| format!("no hazy original for {name}"))?;
                Some(haze_density(&read_image(&h)?, dc)?)
            }
            None => None,
        };
        Ok(EvalRow {
            image: p.display().to_string(),
            psnr: psnr(&img, &gt)?,
            ssim: ssim(&img, &gt)?,
            haze_density_in,
            haze_density_out: haze_density(&img, dc)?,
        })
    });
    let rows: Vec<EvalRow> = ok.into_iter().map(|(_, r)| r).collect();
    let report = EvalReport {
        mean_psnr: mean(rows.iter().map(|r| r.psnr)),
        mean_ssim: mean(rows.iter().map(|r| r.ssim)),
        mean_haze_density_out: mean(rows.iter().map(|r| r.haze_density_out)),
        images: &rows,
    };
    if let Some(out) = &cfg.out {
        write_report(&out.join(format!("eval.{}", cfg.format.extension())), &report, cfg.format)?;
    }
    Outcome::new("eval", rows.len(), failures, &report)
}
