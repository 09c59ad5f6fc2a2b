//! Visual prompt generation.
//!
//! A clean source image is cut into the same non-overlapping patch grid as the
//! real hazy input and every source patch is re-statisticized toward the
//! matching hazy patch. When the hazy input shows a dominant color cast (low
//! hue spread inside its hazy region) the per-patch targets are averaged over
//! R, G, B so the prompt carries the haze but not the cast.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::color::rgb_to_hue;
use crate::error::{invalid, Result};
use crate::haze::{hazy_region_mask, DarkChannelConfig};
use crate::resample::resize_bilinear;
use crate::stats::{affine_normalize, channel_stats, ChannelStats};
use crate::tensor::{Image, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PgmConfig {
    /// Patch side is `width / patch_divisor`.
    pub patch_divisor: usize,
    /// Hue-spread threshold separating the two prompt branches.
    pub tau: f64,
    pub dark: DarkChannelConfig,
    /// Pixels less saturated than this carry no usable hue.
    pub saturation_floor: f64,
}

impl Default for PgmConfig {
    fn default() -> Self {
        Self {
            patch_divisor: 10,
            tau: 0.005,
            dark: DarkChannelConfig::default(),
            saturation_floor: 0.05,
        }
    }
}

impl PgmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_divisor == 0 {
            return invalid("patch divisor must be positive");
        }
        if self.tau.is_nan() || self.tau < 0.0 {
            return invalid(format!("tau must be non-negative, got {}", self.tau));
        }
        if !(0.0..=1.0).contains(&self.saturation_floor) {
            return invalid("saturation floor must lie in [0, 1]");
        }
        self.dark.validate()
    }

    /// Patch side for an image of the given width.
    pub fn patch_side(&self, width: usize) -> Result<usize> {
        self.validate()?;
        let side = width / self.patch_divisor;
        if side == 0 {
            return invalid(format!(
                "image width {width} is smaller than the patch divisor {}",
                self.patch_divisor
            ));
        }
        Ok(side)
    }
}

/// Non-overlapping tiling of an image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchGrid {
    pub side: usize,
    pub cols: usize,
    pub rows: usize,
    /// Row-major regions.
    pub regions: Vec<Rect>,
}

/// Tiles a `width x height` image into `side x side` squares. The last row
/// and column absorb any remainder, so no region is padded and regions never
/// overlap. A side larger than a dimension yields a single band along it.
pub fn partition(width: usize, height: usize, side: usize) -> Result<PatchGrid> {
    if side == 0 {
        return invalid("patch side must be at least 1");
    }
    if width == 0 || height == 0 {
        return invalid("cannot partition an empty image");
    }
    let cols = (width / side).max(1);
    let rows = (height / side).max(1);
    let extent = |i: usize, n: usize, total: usize| {
        if i + 1 == n {
            total - i * side
        } else {
            side
        }
    };
    let mut regions = Vec::with_capacity(cols * rows);
    for r in 0..rows {
        for c in 0..cols {
            regions.push(Rect {
                x: c * side,
                y: r * side,
                width: extent(c, cols, width),
                height: extent(r, rows, height),
            });
        }
    }
    Ok(PatchGrid {
        side,
        cols,
        rows,
        regions,
    })
}

/// Hue-spread measure: circular variance of hue over the hazy region's
/// sufficiently saturated pixels. 0 means a single hue, values near 1 mean
/// hues spread around the whole wheel. Returns 0 when no pixel qualifies.
pub fn mos(hazy: &Image, cfg: &PgmConfig) -> Result<f64> {
    let mask = hazy_region_mask(hazy, &cfg.dark)?;
    let hs = rgb_to_hue(hazy);
    let (mut re, mut im, mut n) = (0.0, 0.0, 0usize);
    for ((&keep, &hue), &sat) in mask.iter().zip(&hs.hue).zip(&hs.saturation) {
        if keep && sat >= cfg.saturation_floor {
            let angle = TAU * hue;
            re += angle.cos();
            im += angle.sin();
            n += 1;
        }
    }
    if n == 0 {
        return Ok(0.0);
    }
    let resultant = (re * re + im * im).sqrt() / n as f64;
    Ok((1.0 - resultant).max(0.0))
}

/// Image-level normalization: gives `source` the channel statistics of `target`.
pub fn iln(source: &Image, target: &Image) -> Result<Image> {
    affine_normalize(source, &channel_stats(source), &channel_stats(target))
}

/// Gray-world statistics: the channel-averaged mean and std broadcast to every channel.
pub fn gray_world_stats(stats: &ChannelStats) -> ChannelStats {
    let n = stats.channels() as f64;
    let mean = stats.mean.iter().sum::<f64>() / n;
    let std = stats.std.iter().sum::<f64>() / n;
    ChannelStats {
        mean: vec![mean; stats.channels()],
        std: vec![std; stats.channels()],
    }
}

/// Color-balanced normalization toward the gray-world version of `target_stats`.
pub fn cbiln_gray(source: &Image, target_stats: &ChannelStats) -> Result<Image> {
    affine_normalize(source, &channel_stats(source), &gray_world_stats(target_stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptBranch {
    /// Per-patch statistics copied channel by channel.
    Iln,
    /// Per-patch statistics averaged over channels.
    GrayWorld,
}

impl std::fmt::Display for PromptBranch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PromptBranch::Iln => "iln",
            PromptBranch::GrayWorld => "gray_world",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatingReport {
    pub mos: f64,
    pub tau: f64,
    pub branch: PromptBranch,
    pub patch_side: usize,
    pub patch_count: usize,
    pub density_threshold: f64,
    pub dark_window: usize,
}

/// Builds the visual prompt for `hazy` out of the clean image `source`.
pub fn generate_prompt(source: &Image, hazy: &Image, cfg: &PgmConfig) -> Result<(Image, GatingReport)> {
    let side = cfg.patch_side(hazy.width())?;
    let source = resize_bilinear(source, hazy.width(), hazy.height())?;
    let spread = mos(hazy, cfg)?;
    let branch = if spread >= cfg.tau {
        PromptBranch::Iln
    } else {
        PromptBranch::GrayWorld
    };
    let grid = partition(hazy.width(), hazy.height(), side)?;
    let mut prompt = source.clone();
    for &rect in &grid.regions {
        let src_patch = source.crop(rect)?;
        let target_stats = channel_stats(&hazy.crop(rect)?);
        let out = match branch {
            PromptBranch::Iln => affine_normalize(&src_patch, &channel_stats(&src_patch), &target_stats)?,
            PromptBranch::GrayWorld => cbiln_gray(&src_patch, &target_stats)?,
        };
        prompt.paste(rect, &out)?;
    }
    let report = GatingReport {
        mos: spread,
        tau: cfg.tau,
        branch,
        patch_side: side,
        patch_count: grid.regions.len(),
        density_threshold: cfg.dark.density_threshold,
        dark_window: cfg.dark.window,
    };
    Ok((prompt, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haze::{synthesize_haze, AsmParams};
    use crate::scene::{scene, SceneKind};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Image {
        Image::from_fn(h, w, |_, _| [rng.gen(), rng.gen(), rng.gen()]).unwrap()
    }

    #[test]
    fn partition_counts_and_coverage() {
        let g = partition(100, 100, 10).unwrap();
        assert_eq!(g.regions.len(), 100);
        assert!(g.regions.iter().all(|r| r.width == 10 && r.height == 10));

        let g = partition(105, 100, 10).unwrap();
        assert_eq!(g.regions.len(), 100);
        assert_eq!(g.regions.iter().map(Rect::area).sum::<usize>(), 10500);
        assert!(g.regions.iter().filter(|r| r.x == 90).all(|r| r.width == 15 && r.height == 10));
        // Every pixel is covered exactly once.
        for y in 0..100 {
            for x in 0..105 {
                assert_eq!(g.regions.iter().filter(|r| r.contains(x, y)).count(), 1);
            }
        }

        let g = partition(30, 20, 40).unwrap();
        assert_eq!(g.regions, vec![Rect { x: 0, y: 0, width: 30, height: 20 }]);
        assert!(partition(3, 3, 0).is_err());
    }

    #[test]
    fn mos_single_hue_and_gray() {
        let cfg = PgmConfig::default();
        let red = Image::filled(16, 16, [1.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(mos(&red, &cfg).unwrap(), 0.0, epsilon = 1e-12);
        let gray = Image::filled(16, 16, [0.7; 3]).unwrap();
        assert_eq!(mos(&gray, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn mos_hue_wheel_near_one() {
        // Fully saturated hue wheel: the phasor sum over n evenly spaced hues is zero.
        let n = 360;
        let img = Image::from_fn(1, n, |_, x| {
            let h = x as f64 / n as f64 * 6.0;
            let f = h.fract();
            match h as usize {
                0 => [1.0, f, 0.0],
                1 => [1.0 - f, 1.0, 0.0],
                2 => [0.0, 1.0, f],
                3 => [0.0, 1.0 - f, 1.0],
                4 => [f, 0.0, 1.0],
                _ => [1.0, 0.0, 1.0 - f],
            }
        })
        .unwrap();
        let hs = rgb_to_hue(&img);
        let (re, im) = hs.hue.iter().fold((0.0, 0.0), |(a, b), h| (a + (TAU * h).cos(), b + (TAU * h).sin()));
        let oracle = 1.0 - (re * re + im * im).sqrt() / n as f64;
        let got = mos(&img, &PgmConfig::default()).unwrap();
        assert_abs_diff_eq!(got, oracle, epsilon = 1e-12);
        assert!(got > 0.999, "{got}");
    }

    #[test]
    fn iln_self_is_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = random_image(&mut rng, 8, 8);
        assert_eq!(iln(&y, &y).unwrap(), y);
    }

    #[test]
    fn iln_matches_target_stats() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let y = random_image(&mut rng, 8, 8);
            let x = random_image(&mut rng, 8, 8).map(|v| 0.4 + 0.3 * v).unwrap();
            let out = iln(&y, &x).unwrap();
            assert!(channel_stats(&out).max_abs_diff(&channel_stats(&x)) < 1e-5);
        }
    }

    #[test]
    fn cbiln_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = random_image(&mut rng, 8, 8);
        let target = ChannelStats::new(vec![0.2, 0.5, 0.8], vec![0.1, 0.1, 0.4]).unwrap();
        let s = channel_stats(&cbiln_gray(&y, &target).unwrap());
        for c in 0..3 {
            assert_abs_diff_eq!(s.mean[c], 0.5, epsilon = 1e-9);
            assert_abs_diff_eq!(s.std[c], 0.2, epsilon = 1e-9);
        }
        let gray = ChannelStats::uniform(3, 0.4, 0.15).unwrap();
        let direct = affine_normalize(&y, &channel_stats(&y), &gray).unwrap();
        assert!(cbiln_gray(&y, &gray).unwrap().max_abs_diff(&direct).unwrap() < 1e-12);
    }

    #[test]
    fn self_transfer_keeps_patch_stats() {
        let x = scene(SceneKind::Colorful, 60, 80, 4);
        let cfg = PgmConfig::default();
        let (p, report) = generate_prompt(&x, &x, &cfg).unwrap();
        assert_eq!(report.branch, PromptBranch::Iln);
        assert_eq!(report.patch_side, 8);
        for r in partition(80, 60, 8).unwrap().regions {
            let d = channel_stats(&p.crop(r).unwrap()).max_abs_diff(&channel_stats(&x.crop(r).unwrap()));
            assert!(d < 1e-5);
        }
    }

    #[test]
    fn per_patch_haze_is_reproduced() {
        let clean = scene(SceneKind::Colorful, 64, 64, 9);
        let grid = partition(64, 64, 6).unwrap();
        let mut values = vec![0.0; 64 * 64];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for r in &grid.regions {
            let t: f64 = rng.gen_range(0.3..0.8);
            for y in r.y..r.y + r.height {
                for x in r.x..r.x + r.width {
                    values[y * 64 + x] = t;
                }
            }
        }
        let params = AsmParams {
            airlight: [0.85; 3],
            transmission: crate::haze::Transmission::Map { width: 64, height: 64, values },
        };
        let hazy = synthesize_haze(&clean, &params).unwrap();
        let (p, report) = generate_prompt(&clean, &hazy, &PgmConfig::default()).unwrap();
        assert_eq!(report.branch, PromptBranch::Iln);
        assert!(p.max_abs_diff(&hazy).unwrap() < 1e-5);
    }

    #[test]
    fn blue_cast_takes_gray_world_branch() {
        let base = scene(SceneKind::Grayscale, 50, 50, 2);
        let hazy = base.map(|v| v).unwrap();
        let hazy = Image::from_fn(50, 50, |y, x| {
            let v = hazy.pixel(y, x)[0];
            [0.5 * v + 0.2, 0.6 * v + 0.25, 0.7 * v + 0.3]
        })
        .unwrap();
        let src = scene(SceneKind::Colorful, 50, 50, 3);
        let (p, report) = generate_prompt(&src, &hazy, &PgmConfig::default()).unwrap();
        assert_eq!(report.branch, PromptBranch::GrayWorld);
        assert!(report.mos < report.tau);
        for r in partition(50, 50, 5).unwrap().regions {
            let s = channel_stats(&p.crop(r).unwrap());
            let spread = |v: &[f64]| v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min);
            assert!(spread(&s.mean) < 1e-5);
            assert!(spread(&s.std) < 1e-5);
        }
    }

    #[test]
    fn narrow_image_rejected() {
        let img = Image::filled(20, 9, [0.5; 3]).unwrap();
        assert!(generate_prompt(&img, &img, &PgmConfig::default()).is_err());
    }

    #[test]
    fn prompt_is_deterministic() {
        let x = scene(SceneKind::Colorful, 40, 40, 11);
        let y = scene(SceneKind::Colorful, 33, 47, 12);
        let cfg = PgmConfig::default();
        assert_eq!(generate_prompt(&y, &x, &cfg).unwrap(), generate_prompt(&y, &x, &cfg).unwrap());
    }

    proptest! {
        #[test]
        fn iln_reproduces_scalar_haze(
            vals in proptest::collection::vec(0.0f64..1.0, 3 * 8 * 8),
            t in 0.2f64..0.95,
            a in 0.3f64..1.0,
        ) {
            let j = Image::new(8, 8, vals).unwrap();
            prop_assume!(channel_stats(&j).std.iter().all(|&s| s > 1e-3));
            let hazy = synthesize_haze(&j, &AsmParams::scalar([a; 3], t)).unwrap();
            prop_assert!(iln(&j, &hazy).unwrap().max_abs_diff(&hazy).unwrap() < 1e-5);
        }
    }
}
