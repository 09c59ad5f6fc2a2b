//! Reference quality metrics.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::tensor::Image;

/// PSNR reported for identical images.
pub const PSNR_IDENTICAL: f64 = 99.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
    pub haze_density_in: f64,
    pub haze_density_out: f64,
}

fn check_dims(a: &Image, b: &Image) -> Result<()> {
    if a.height() != b.height() || a.width() != b.width() {
        return invalid(format!(
            "image sizes differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        ));
    }
    Ok(())
}

/// PSNR in dB over all pixels and channels of the images clamped to `[0, 1]`.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    psnr_with(a, b, true)
}

/// PSNR of the raw values, without clamping.
pub fn psnr_unclamped(a: &Image, b: &Image) -> Result<f64> {
    psnr_with(a, b, false)
}

fn psnr_with(a: &Image, b: &Image, clamp: bool) -> Result<f64> {
    check_dims(a, b)?;
    let prep = |v: f64| if clamp { v.clamp(0.0, 1.0) } else { v };
    let da = a.features().data();
    let db = b.features().data();
    let sse: f64 = da.iter().zip(db).map(|(&x, &y)| (prep(x) - prep(y)).powi(2)).sum();
    if sse == 0.0 {
        return Ok(PSNR_IDENTICAL);
    }
    let mse = sse / da.len() as f64;
    Ok(-10.0 * mse.log10())
}

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let w: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-((i as f64 - r).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering: output is `(h - n + 1) x (w - n + 1)`.
fn filter_valid(plane: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..n).map(|t| k[t] * plane[y * w + x + t]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|t| k[t] * rows[(y + t) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM with an 11x11 Gaussian window (sigma 1.5), `K1 = 0.01`,
/// `K2 = 0.03` and dynamic range 1, computed per channel on clamped values
/// over fully covered windows and averaged over channels.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check_dims(a, b)?;
    let (h, w) = (a.height(), a.width());
    if h.min(w) < SSIM_WINDOW {
        return invalid(format!("SSIM needs both sides >= {SSIM_WINDOW}, got {w}x{h}"));
    }
    let k = gaussian_window();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mut total = 0.0;
    for c in 0..3 {
        let pa: Vec<f64> = a.features().plane(c).iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let pb: Vec<f64> = b.features().plane(c).iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let prod = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<f64>>();
        let mu_a = filter_valid(&pa, h, w, &k);
        let mu_b = filter_valid(&pb, h, w, &k);
        let aa = filter_valid(&prod(&pa, &pa), h, w, &k);
        let bb = filter_valid(&prod(&pb, &pb), h, w, &k);
        let ab = filter_valid(&prod(&pa, &pb), h, w, &k);
        let mut sum = 0.0;
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
        total += sum / mu_a.len() as f64;
    }
    Ok(total / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{scene, SceneKind};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn psnr_closed_forms() {
        let a = Image::filled(8, 8, [0.3; 3]).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_IDENTICAL);
        let b = Image::filled(8, 8, [0.4; 3]).unwrap();
        assert_abs_diff_eq!(psnr(&a, &b).unwrap(), 20.0, epsilon = 1e-9);
        let black = Image::filled(8, 8, [0.0; 3]).unwrap();
        let white = Image::filled(8, 8, [1.0; 3]).unwrap();
        assert_abs_diff_eq!(psnr(&black, &white).unwrap(), 0.0, epsilon = 1e-12);
        assert!(psnr(&a, &Image::filled(8, 9, [0.3; 3]).unwrap()).is_err());
    }

    #[test]
    fn psnr_clamps_unless_asked() {
        let a = Image::filled(4, 4, [1.0; 3]).unwrap();
        let b = Image::filled(4, 4, [1.5; 3]).unwrap();
        assert_eq!(psnr(&a, &b).unwrap(), PSNR_IDENTICAL);
        assert_abs_diff_eq!(psnr_unclamped(&a, &b).unwrap(), -10.0 * 0.25f64.log10(), epsilon = 1e-12);
    }

    #[test]
    fn psnr_decreases_with_noise() {
        let clean = scene(SceneKind::Colorful, 32, 32, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pattern: Vec<f64> = (0..3 * 32 * 32).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let values: Vec<f64> = [0.01, 0.02, 0.04, 0.08]
            .iter()
            .map(|amp| {
                let noisy = Image::new(
                    32,
                    32,
                    clean.features().data().iter().zip(&pattern).map(|(v, n)| v + amp * n).collect(),
                )
                .unwrap();
                psnr(&noisy, &clean).unwrap()
            })
            .collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
    }

    #[test]
    fn ssim_cases() {
        let a = scene(SceneKind::Colorful, 24, 24, 2);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        let neg = a.map(|v| 1.0 - v).unwrap();
        assert!(ssim(&a, &neg).unwrap() < 0.5);

        let x = Image::filled(16, 16, [0.2; 3]).unwrap();
        let y = Image::filled(16, 16, [0.7; 3]).unwrap();
        let c1 = SSIM_K1 * SSIM_K1;
        let expected = (2.0 * 0.2 * 0.7 + c1) / (0.04 + 0.49 + c1);
        assert_abs_diff_eq!(ssim(&x, &y).unwrap(), expected, epsilon = 1e-12);

        assert!(ssim(&Image::filled(10, 30, [0.0; 3]).unwrap(), &Image::filled(10, 30, [0.0; 3]).unwrap()).is_err());
    }

    #[test]
    fn window_is_normalized() {
        assert_abs_diff_eq!(gaussian_window().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }
}
