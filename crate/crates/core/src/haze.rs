//! Atmospheric scattering synthesis and dark-channel analysis.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::tensor::Image;

/// Transmission of the scattering model: one value for the whole image or
/// one value per pixel (row-major, same size as the image).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transmission {
    Scalar(f64),
    Map {
        width: usize,
        height: usize,
        values: Vec<f64>,
    },
}

/// Atmospheric light and transmission for `I = J t + A (1 - t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsmParams {
    pub airlight: [f64; 3],
    pub transmission: Transmission,
}

impl AsmParams {
    pub fn scalar(airlight: [f64; 3], t: f64) -> Self {
        Self {
            airlight,
            transmission: Transmission::Scalar(t),
        }
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        if self.airlight.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
            return invalid(format!("airlight components must lie in (0, 1], got {:?}", self.airlight));
        }
        let valid_t = |t: f64| t > 0.0 && t <= 1.0;
        match &self.transmission {
            Transmission::Scalar(t) if !valid_t(*t) => {
                invalid(format!("transmission must lie in (0, 1], got {t}"))
            }
            Transmission::Map {
                width: tw,
                height: th,
                values,
            } => {
                if *tw != width || *th != height || values.len() != width * height {
                    return invalid("transmission map does not match image size");
                }
                match values.iter().find(|&&t| !valid_t(t)) {
                    Some(t) => invalid(format!("transmission must lie in (0, 1], got {t}")),
                    None => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }

    fn t_at(&self, idx: usize) -> f64 {
        match &self.transmission {
            Transmission::Scalar(t) => *t,
            Transmission::Map { values, .. } => values[idx],
        }
    }
}

/// Applies the atmospheric scattering model to a clean image.
pub fn synthesize_haze(clean: &Image, params: &AsmParams) -> Result<Image> {
    let (h, w) = (clean.height(), clean.width());
    params.validate(w, h)?;
    Image::from_fn(h, w, |y, x| {
        let t = params.t_at(y * w + x);
        let j = clean.pixel(y, x);
        [0, 1, 2].map(|c| j[c] * t + params.airlight[c] * (1.0 - t))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DarkChannelConfig {
    /// Odd side length of the square minimum window.
    pub window: usize,
    /// Dark-channel level at or above which a pixel counts as hazy.
    pub density_threshold: f64,
}

impl Default for DarkChannelConfig {
    fn default() -> Self {
        Self {
            window: 15,
            density_threshold: 0.6,
        }
    }
}

impl DarkChannelConfig {
    pub fn validate(&self) -> Result<()> {
        check_window(self.window)?;
        if !(0.0..=1.0).contains(&self.density_threshold) {
            return invalid(format!(
                "density threshold must lie in [0, 1], got {}",
                self.density_threshold
            ));
        }
        Ok(())
    }
}

fn check_window(window: usize) -> Result<()> {
    if window == 0 || window.is_multiple_of(2) {
        return invalid(format!("dark channel window must be odd and positive, got {window}"));
    }
    Ok(())
}

/// Single-channel row-major map.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl ScalarMap {
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Minimum over R, G, B followed by a `window x window` minimum filter with
/// edge replication.
pub fn dark_channel(img: &Image, window: usize) -> Result<ScalarMap> {
    check_window(window)?;
    let (h, w) = (img.height(), img.width());
    let r = window / 2;
    let fm = img.features();
    let per_pixel: Vec<f64> = (0..h * w)
        .map(|i| fm.plane(0)[i].min(fm.plane(1)[i]).min(fm.plane(2)[i]))
        .collect();
    // Replicated borders never undercut an in-bounds minimum, so the window is
    // simply truncated at the edges. The square filter is separable.
    let mut rows = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(w - 1);
            rows[y * w + x] = per_pixel[y * w + lo..=y * w + hi]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
        }
    }
    let mut values = vec![0.0; h * w];
    for y in 0..h {
        let lo = y.saturating_sub(r);
        let hi = (y + r).min(h - 1);
        for x in 0..w {
            values[y * w + x] = (lo..=hi)
                .map(|yy| rows[yy * w + x])
                .fold(f64::INFINITY, f64::min);
        }
    }
    Ok(ScalarMap {
        width: w,
        height: h,
        values,
    })
}

/// Mean dark channel, clamped to `[0, 1]`.
pub fn haze_density(img: &Image, cfg: &DarkChannelConfig) -> Result<f64> {
    Ok(dark_channel(img, cfg.window)?.mean().clamp(0.0, 1.0))
}

/// Pixels whose dark channel reaches the density threshold. An empty
/// selection falls back to the whole image.
pub fn hazy_region_mask(img: &Image, cfg: &DarkChannelConfig) -> Result<Vec<bool>> {
    cfg.validate()?;
    let dc = dark_channel(img, cfg.window)?;
    let mask: Vec<bool> = dc
        .values
        .iter()
        .map(|&d| d >= cfg.density_threshold)
        .collect();
    if mask.iter().any(|&m| m) {
        Ok(mask)
    } else {
        Ok(vec![true; mask.len()])
    }
}
