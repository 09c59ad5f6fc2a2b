use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use pttd_core::color::hue_rgb;
use pttd_core::haze::{synthesize_haze, AsmParams, Transmission};
use pttd_core::prompt::partition;
use pttd_core::scene::{scene, SceneKind};
use pttd_core::Image;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::batch::{run_files, Outcome};
use crate::config::{RunConfig, TransmissionMode};
use crate::io::{list_images, quantized, read_image, stem, write_image, write_report};

/// Transmission actually used for one image.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum TransmissionRecord {
    Scalar { t: f64 },
    /// Row-major per-patch values over the prompt grid.
    PerPatch { side: usize, cols: usize, rows: usize, values: Vec<f64> },
    /// `t = t_min + (t_max - t_min) * (0.5 + 0.5 * sin(fy * y + phase) * cos(fx * x))`.
    Smooth { t_min: f64, t_max: f64, fy: f64, fx: f64, phase: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthEntry {
    pub name: String,
    pub clean: String,
    pub hazy: String,
    pub airlight: [f64; 3],
    pub colored: bool,
    pub transmission: TransmissionRecord,
}

#[derive(Debug, Serialize)]
struct SynthReport<'a> {
    seed: u64,
    patch_divisor: usize,
    entries: &'a [SynthEntry],
}

fn image_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64))
}

fn airlight(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> ([f64; 3], bool) {
    if let Some(a) = cfg.synth.airlight {
        return (a, !(a[0] == a[1] && a[1] == a[2]));
    }
    let level = rng.gen_range(0.75..0.95);
    if rng.gen_bool(cfg.synth.colored_fraction) {
        // Tint toward a random fully saturated hue; the strongest channel stays at `level`.
        let (hue, strength) = (rng.gen_range(0.0..1.0), rng.gen_range(0.15..0.3));
        let tint = hue_rgb(hue);
        (tint.map(|c| level * (1.0 - strength * (1.0 - c))), true)
    } else {
        ([level; 3], false)
    }
}


fn transmission(cfg: &RunConfig, img: &Image, rng: &mut ChaCha8Rng) -> Result<(Transmission, TransmissionRecord)> {
    let (w, h) = (img.width(), img.height());
    let s = &cfg.synth;
    Ok(match s.mode {
        TransmissionMode::Scalar => (Transmission::Scalar(s.t), TransmissionRecord::Scalar { t: s.t }),
        TransmissionMode::PerPatch => {
            let side = cfg.pttd.pgm.patch_side(w)?;
            let grid = partition(w, h, side)?;
            let per_region: Vec<f64> = grid.regions.iter().map(|_| rng.gen_range(s.t_min..=s.t_max)).collect();
            let mut values = vec![0.0; w * h];
            for (r, &t) in grid.regions.iter().zip(&per_region) {
                for y in r.y..r.y + r.height {
                    values[y * w + r.x..y * w + r.x + r.width].fill(t);
                }
            }
            (
                Transmission::Map { width: w, height: h, values },
                TransmissionRecord::PerPatch { side, cols: grid.cols, rows: grid.rows, values: per_region },
            )
        }
        TransmissionMode::Smooth => {
            let (fy, fx, phase) = (
                rng.gen_range(1.0..4.0) / h as f64,
                rng.gen_range(1.0..4.0) / w as f64,
                rng.gen_range(0.0..std::f64::consts::TAU),
            );
            let mut values = Vec::with_capacity(w * h);
            for y in 0..h {
                for x in 0..w {
                    let u = 0.5 + 0.5 * (fy * y as f64 + phase).sin() * (fx * x as f64).cos();
                    values.push(s.t_min + (s.t_max - s.t_min) * u);
                }
            }
            (
                Transmission::Map { width: w, height: h, values },
                TransmissionRecord::Smooth { t_min: s.t_min, t_max: s.t_max, fy, fx, phase },
            )
        }
    })
}

fn synth_one(cfg: &RunConfig, out: &Path, index: usize, name: &str, clean_path: &Path, clean: &Image) -> Result<SynthEntry> {
    let mut rng = image_rng(cfg.seed, index);
    let (a, colored) = airlight(cfg, &mut rng);
    let (t, record) = transmission(cfg, clean, &mut rng)?;
    let hazy = synthesize_haze(clean, &AsmParams { airlight: a, transmission: t })?;
    let hazy_path = out.join("hazy").join(format!("{name}.png"));
    write_image(&hazy_path, &hazy)?;
    Ok(SynthEntry {
        name: name.to_owned(),
        clean: clean_path.display().to_string(),
        hazy: hazy_path.display().to_string(),
        airlight: a,
        colored,
        transmission: record,
    })
}

/// Writes `hazy/<name>.png` for every clean image plus `manifest.json`.
/// With `generate` set, procedural scenes are first written to `clean/`.
pub fn cmd_synth(cfg: &RunConfig) -> Result<Outcome> {
    let out = cfg.require_out()?;
    let sources: Vec<PathBuf> = match cfg.synth.generate {
        Some(0) => bail!("--generate needs at least one scene"),
        Some(n) => {
            let size = cfg.synth.size;
            (0..n)
                .map(|i| {
                    let path = out.join("clean").join(format!("scene_{i:03}.png"));
                    let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
                    write_image(&path, &scene(SceneKind::Colorful, size, size, seed))?;
                    Ok(path)
                })
                .collect::<Result<_>>()?
        }
        None => list_images(cfg.require_input()?)?,
    };
    if sources.is_empty() {
        bail!("no clean images found");
    }
    let indexed: Vec<(usize, PathBuf)> = sources.into_iter().enumerate().collect();
    let paths: Vec<PathBuf> = indexed.iter().map(|(_, p)| p.clone()).collect();
    let (ok, failures) = run_files(&paths, cfg.workers, |p| {
        let index = indexed.iter().position(|(_, q)| q == p).expect("path from list");
        let clean = quantized(&read_image(p)?);
        synth_one(cfg, out, index, &stem(p), p, &clean)
    });
    let entries: Vec<SynthEntry> = ok.into_iter().map(|(_, e)| e).collect();
    let report = SynthReport { seed: cfg.seed, patch_divisor: cfg.pttd.pgm.patch_divisor, entries: &entries };
    write_report(&out.join("manifest.json"), &report, crate::io::ReportFormat::Json)?;
    Outcome::new("synth", entries.len(), failures, &report)
}
