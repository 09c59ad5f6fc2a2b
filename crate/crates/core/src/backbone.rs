//! Exactly invertible band-pass pyramid used as the reference encoder/decoder.
//!
//! Level `l` holds `G_l - up(G_{l+1})` where `G_0` is the image and
//! `G_{l+1}` is `G_l` blurred with the binomial kernel `[1 4 6 4 1] / 16`
//! (edges replicated) and subsampled at even indices, so every level is
//! `ceil(previous / 2)` on each side. The final low-pass is kept as the base.
//! Decoding adds the levels back in reverse, which undoes encoding up to
//! floating-point rounding whatever the upsampler is.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::stats::{affine_normalize, channel_stats, ChannelStats, STD_FLOOR};
use crate::tensor::{FeatureMap, Image};

/// Binomial smoothing kernel; sums to 1.
pub const SMOOTHING_KERNEL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackboneConfig {
    /// Number of band-pass levels above the base.
    pub num_levels: usize,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        Self { num_levels: 3 }
    }
}

impl BackboneConfig {
    /// Smallest image side `encode` accepts.
    pub fn min_side(&self) -> usize {
        1usize << self.num_levels.min(usize::BITS as usize - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid {
    /// Band-pass levels, finest first.
    pub bands: Vec<FeatureMap>,
    /// Residual low-pass.
    pub base: FeatureMap,
    pub kernel: [f64; 5],
}

impl Pyramid {
    /// Every map the encoder produces, finest band first and the base last.
    pub fn feature_levels(&self) -> Vec<FeatureMap> {
        self.bands.iter().cloned().chain(std::iter::once(self.base.clone())).collect()
    }

    pub fn level_count(&self) -> usize {
        self.bands.len() + 1
    }

    pub fn level(&self, index: usize) -> Option<&FeatureMap> {
        if index < self.bands.len() {
            self.bands.get(index)
        } else if index == self.bands.len() {
            Some(&self.base)
        } else {
            None
        }
    }

    /// Inverse of [`Pyramid::feature_levels`].
    pub fn with_feature_levels(&self, mut levels: Vec<FeatureMap>) -> Result<Pyramid> {
        if levels.len() != self.level_count() {
            return invalid(format!(
                "pyramid has {} levels, got {}",
                self.level_count(),
                levels.len()
            ));
        }
        let base = levels.pop().expect("at least one level");
        let pyr = Pyramid {
            bands: levels,
            base,
            kernel: self.kernel,
        };
        pyr.validate()?;
        Ok(pyr)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bands.is_empty() {
            return invalid("pyramid needs at least one band level");
        }
        let channels = self.bands[0].channels();
        let mut prev: Option<&FeatureMap> = None;
        for (i, level) in self.bands.iter().chain(std::iter::once(&self.base)).enumerate() {
            if level.channels() != channels {
                return invalid(format!("level {i} has {} channels, expected {channels}", level.channels()));
            }
            if let Some(p) = prev {
                if level.height() != p.height().div_ceil(2) || level.width() != p.width().div_ceil(2) {
                    return invalid(format!(
                        "level {i} is {}x{}, expected half of {}x{}",
                        level.height(),
                        level.width(),
                        p.height(),
                        p.width()
                    ));
                }
            }
            prev = Some(level);
        }
        Ok(())
    }
}

fn smooth_and_subsample(g: &FeatureMap, k: &[f64; 5]) -> FeatureMap {
    let (c, h, w) = (g.channels(), g.height(), g.width());
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut rows = vec![0.0; c * h * ow];
    for ch in 0..c {
        let plane = g.plane(ch);
        for y in 0..h {
            for ox in 0..ow {
                let x = 2 * ox as isize;
                rows[(ch * h + y) * ow + ox] = (0..5)
                    .map(|t| k[t] * plane[y * w + clamp(x + t as isize - 2, w)])
                    .sum();
            }
        }
    }
    FeatureMap::from_fn(c, oh, ow, |ch, oy, ox| {
        let y = 2 * oy as isize;
        (0..5)
            .map(|t| k[t] * rows[(ch * h + clamp(y + t as isize - 2, h)) * ow + ox])
            .sum()
    })
    .expect("smoothing keeps values finite")
}

/// Interpolating upsampler: zero insertion followed by twice the smoothing
/// kernel, with clamped source indices. Constants map to the same constant.
fn upsample(g: &FeatureMap, th: usize, tw: usize, k: &[f64; 5]) -> FeatureMap {
    let (c, h, w) = (g.channels(), g.height(), g.width());
    let taps = |i: usize, n: usize| {
        (0..5).filter_map(move |t| {
            let j = i as isize + 2 - t as isize;
            (j % 2 == 0).then(|| (2.0 * k[t], (j / 2).clamp(0, n as isize - 1) as usize))
        })
    };
    let mut rows = vec![0.0; c * h * tw];
    for ch in 0..c {
        let plane = g.plane(ch);
        for y in 0..h {
            for x in 0..tw {
                rows[(ch * h + y) * tw + x] = taps(x, w).map(|(wt, j)| wt * plane[y * w + j]).sum();
            }
        }
    }
    FeatureMap::from_fn(c, th, tw, |ch, y, x| {
        taps(y, h).map(|(wt, j)| wt * rows[(ch * h + j) * tw + x]).sum()
    })
    .expect("upsampling keeps values finite")
}

fn sub(a: &FeatureMap, b: &FeatureMap) -> FeatureMap {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x - y).collect();
    FeatureMap::new(a.channels(), a.height(), a.width(), data).expect("same shape")
}

fn add(a: &FeatureMap, b: &FeatureMap) -> FeatureMap {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    FeatureMap::new(a.channels(), a.height(), a.width(), data).expect("same shape")
}

pub fn encode(img: &Image, cfg: &BackboneConfig) -> Result<Pyramid> {
    encode_features(img.features(), cfg)
}

pub fn encode_features(x: &FeatureMap, cfg: &BackboneConfig) -> Result<Pyramid> {
    if cfg.num_levels == 0 {
        return invalid("backbone needs at least one level");
    }
    let min_side = cfg.min_side();
    if x.height().min(x.width()) < min_side || cfg.num_levels >= usize::BITS as usize {
        return invalid(format!(
            "image {}x{} too small for {} levels: both sides must be at least {min_side}",
            x.width(),
            x.height(),
            cfg.num_levels
        ));
    }
    let kernel = SMOOTHING_KERNEL;
    let mut bands = Vec::with_capacity(cfg.num_levels);
    let mut current = x.clone();
    for _ in 0..cfg.num_levels {
        let low = smooth_and_subsample(&current, &kernel);
        let up = upsample(&low, current.height(), current.width(), &kernel);
        bands.push(sub(&current, &up));
        current = low;
    }
    Ok(Pyramid {
        bands,
        base: current,
        kernel,
    })
}

pub fn decode_features(pyr: &Pyramid) -> Result<FeatureMap> {
    pyr.validate()?;
    let mut current = pyr.base.clone();
    for band in pyr.bands.iter().rev() {
        current = add(band, &upsample(&current, band.height(), band.width(), &pyr.kernel));
    }
    Ok(current)
}

/// Collapses the pyramid back into an image. No clamping is applied.
pub fn decode(pyr: &Pyramid) -> Result<Image> {
    Image::try_from(decode_features(pyr)?)
}

/// Shifts the per-channel mean of one level by `delta_mu` and its std by
/// `delta_sigma` through an affine map. Index `bands.len()` addresses the base.
pub fn perturb_stats(pyr: &Pyramid, level: usize, delta_mu: f64, delta_sigma: f64) -> Result<Pyramid> {
    let Some(target) = pyr.level(level) else {
        return invalid(format!("level {level} out of range (pyramid has {})", pyr.level_count()));
    };
    let from = channel_stats(target);
    let mean = from.mean.iter().map(|m| m + delta_mu).collect();
    let std: Vec<f64> = from.std.iter().map(|s| s + delta_sigma).collect();
    if let Some(s) = std.iter().find(|&&s| s.is_nan() || s < STD_FLOOR) {
        return invalid(format!("perturbed std {s} falls below the floor {STD_FLOOR}"));
    }
    let perturbed = affine_normalize(target, &from, &ChannelStats::new(mean, std)?)?;
    let mut levels = pyr.feature_levels();
    levels[level] = perturbed;
    pyr.with_feature_levels(levels)
}

/// The part of the decoded image contributed by one level alone.
pub fn level_contribution(pyr: &Pyramid, level: usize) -> Result<FeatureMap> {
    let mut levels: Vec<FeatureMap> = pyr
        .feature_levels()
        .into_iter()
        .map(|l| l.map(|_| 0.0).expect("zeros are finite"))
        .collect();
    let Some(kept) = pyr.level(level) else {
        return invalid(format!("level {level} out of range (pyramid has {})", pyr.level_count()));
    };
    levels[level] = kept.clone();
    decode_features(&pyr.with_feature_levels(levels)?)
}

/// Root-mean-square of one level's contribution to the decoded image.
pub fn band_rms(pyr: &Pyramid, level: usize) -> Result<f64> {
    let contrib = level_contribution(pyr, level)?;
    let n = contrib.data().len() as f64;
    Ok((contrib.data().iter().map(|v| v * v).sum::<f64>() / n).sqrt())
}
