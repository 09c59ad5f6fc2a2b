
use anyhow::{bail, Context, Result};
use pttd_core::{dehaze, psnr, ssim, Image};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::batch::{mean, par_map, Failure, Outcome};
use crate::config::RunConfig;
use crate::io::{list_images, match_by_stem, quantized, read_image, stem, write_report};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub rank: usize,
    pub candidate: String,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    pub images: usize,
}

#[derive(Debug, Serialize)]
struct SweepReport<'a> {
    best: &'a str,
    /// Mean over all candidates: the expected score of a randomly picked prompt.
    mean_over_candidates_psnr: f64,
    mean_over_candidates_ssim: f64,
    hazy_input_psnr: f64,
    hazy_input_ssim: f64,
    table: &'a [SweepRow],
}

/// Scores every candidate prompt source on the labeled set `--input` /
/// `--gt` and ranks them by mean PSNR (ties broken by SSIM, then path).
pub fn cmd_sweep(cfg: &RunConfig) -> Result<Outcome> {
    let out = cfg.require_out()?;
    let cand_dir = cfg.candidates.as_deref().context("--candidates is required")?;
    let gt_dir = cfg.gt.as_deref().context("--gt is required")?;
    let mut candidates = list_images(cand_dir)?;
    if candidates.is_empty() {
        bail!("no candidate images in {}", cand_dir.display());
    }
    let inputs = list_images(cfg.require_input()?)?;
    if inputs.is_empty() {
        bail!("no labeled inputs found");
    }
    let mut pairs: Vec<(String, Image, Image)> = Vec::new();
    for p in &inputs {
        let name = stem(p);
        let gt = match_by_stem(gt_dir, &name).with_context(|| format!("no ground truth for {name}"))?;
        pairs.push((name, read_image(p)?, read_image(&gt)?));
    }
    // Evaluation order is shuffled by seed; the ranking itself is order independent.
    candidates.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));

    let jobs: Vec<(usize, usize)> = (0..candidates.len()).flat_map(|c| (0..pairs.len()).map(move |i| (c, i))).collect();
    let sources: Vec<Result<Image>> = candidates.iter().map(|c| read_image(c)).collect();
    let scores = par_map(&jobs, cfg.workers, |&(c, i)| -> Result<(f64, f64)> {
        let source = sources[c].as_ref().map_err(|e| anyhow::anyhow!("{e:#}"))?;
        let (_, hazy, gt) = &pairs[i];
        let restored = quantized(&dehaze(hazy, source, &cfg.pttd)?.image);
        Ok((psnr(&restored, gt)?, ssim(&restored, gt)?))
    });

    let mut failures = Vec::new();
    let mut table = Vec::new();
    for (c, cand) in candidates.iter().enumerate() {
        let mine: Vec<&Result<(f64, f64)>> = jobs.iter().zip(&scores).filter(|((jc, _), _)| *jc == c).map(|(_, s)| s).collect();
        if let Some(Err(e)) = mine.iter().find(|s| s.is_err()) {
            failures.push(Failure { path: cand.display().to_string(), error: format!("{e:#}") });
            continue;
        }
        let vals: Vec<(f64, f64)> = mine.into_iter().map(|s| *s.as_ref().expect("checked")).collect();
        table.push(SweepRow {
            rank: 0,
            candidate: cand.display().to_string(),
            mean_psnr: mean(vals.iter().map(|v| v.0)).expect("non-empty"),
            mean_ssim: mean(vals.iter().map(|v| v.1)).expect("non-empty"),
            images: vals.len(),
        });
    }
    if table.is_empty() {
        bail!("every candidate failed");
    }
    table.sort_by(|a, b| {
        b.mean_psnr
            .total_cmp(&a.mean_psnr)
            .then(b.mean_ssim.total_cmp(&a.mean_ssim))
            .then(a.candidate.cmp(&b.candidate))
    });
    for (i, row) in table.iter_mut().enumerate() {
        row.rank = i + 1;
    }

    let hazy_scores: Vec<(f64, f64)> =
        pairs.iter().map(|(_, h, g)| Ok((psnr(h, g)?, ssim(h, g)?))).collect::<Result<_>>()?;
    let report = SweepReport {
        best: &table[0].candidate,
        mean_over_candidates_psnr: mean(table.iter().map(|r| r.mean_psnr)).expect("non-empty"),
        mean_over_candidates_ssim: mean(table.iter().map(|r| r.mean_ssim)).expect("non-empty"),
        hazy_input_psnr: mean(hazy_scores.iter().map(|v| v.0)).expect("non-empty"),
        hazy_input_ssim: mean(hazy_scores.iter().map(|v| v.1)).expect("non-empty"),
        table: &table,
    };
    std::fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("sweep.csv"))?;
    for row in &table {
        w.serialize(row)?;
    }
    w.flush()?;
    write_report(&out.join(format!("sweep.{}", cfg.format.extension())), &report, cfg.format)?;
    Outcome::new("sweep", table.len(), failures, &report)
}

