use crate::tensor::Image;

/// Per-pixel HSV hue in `[0, 1)` and saturation in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HueSaturation {
    pub width: usize,
    pub height: usize,
    pub hue: Vec<f64>,
    pub saturation: Vec<f64>,
}

/// HSV hue and saturation of a single RGB triple. Inputs are clamped to
/// `[0, 1]`; achromatic pixels report hue 0 and saturation 0.
pub fn hue_saturation(rgb: [f64; 3]) -> (f64, f64) {
    let [r, g, b] = rgb.map(|v| v.clamp(0.0, 1.0));
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let chroma = max - min;
    if chroma <= 0.0 {
        return (0.0, 0.0);
    }
    let sector = if max == r {
        ((g - b) / chroma).rem_euclid(6.0)
    } else if max == g {
        (b - r) / chroma + 2.0
    } else {
        (r - g) / chroma + 4.0
    };
    let hue = (sector / 6.0).rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs.
    let hue = if hue >= 1.0 { 0.0 } else { hue };
    (hue, chroma / max)
}

pub fn rgb_to_hue(img: &Image) -> HueSaturation {
    let (h, w) = (img.height(), img.width());
    let mut hue = Vec::with_capacity(h * w);
    let mut saturation = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let (hh, ss) = hue_saturation(img.pixel(y, x));
            hue.push(hh);
            saturation.push(ss);
        }
    }
    HueSaturation {
        width: w,
        height: h,
        hue,
        saturation,
    }
}

/// Fully saturated color of `hue` in turns, red at 0.
pub fn hue_rgb(h: f64) -> [f64; 3] {
    let f = |n: f64| {
        let k = (n + h * 6.0) % 6.0;
        1.0 - (k.min(4.0 - k).clamp(0.0, 1.0))
    };
    [f(5.0), f(3.0), f(1.0)]
}
