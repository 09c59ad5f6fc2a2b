//! Procedural clean scenes for desk-scale benchmarks and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::tensor::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    /// Multi-hue shapes over a colored gradient with fine texture.
    Colorful,
    /// The same layout rendered without chroma.
    Grayscale,
}

struct Blob {
    cy: f64,
    cx: f64,
    ry: f64,
    rx: f64,
    color: [f64; 3],
    rect: bool,
}

/// Renders a deterministic scene for `seed`. Values lie in `[0.02, 0.98]`.
pub fn scene(kind: SceneKind, height: usize, width: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corner: Vec<[f64; 3]> = (0..4).map(|_| random_color(&mut rng)).collect();
    let blobs: Vec<Blob> = (0..rng.gen_range(6..12))
        .map(|_| Blob {
            cy: rng.gen_range(0.0..1.0),
            cx: rng.gen_range(0.0..1.0),
            ry: rng.gen_range(0.08..0.3),
            rx: rng.gen_range(0.08..0.3),
            color: random_color(&mut rng),
            rect: rng.gen_bool(0.4),
        })
        .collect();
    let (fy, fx, phase) = (
        rng.gen_range(0.15..0.6),
        rng.gen_range(0.15..0.6),
        rng.gen_range(0.0..std::f64::consts::TAU),
    );
    let texture_amp = rng.gen_range(0.03..0.08);
    let noise: Vec<f64> = (0..height * width).map(|_| rng.gen_range(-1.0..1.0)).collect();

    Image::from_fn(height, width, |y, x| {
        let v = (y as f64 + 0.5) / height as f64;
        let u = (x as f64 + 0.5) / width as f64;
        let mut px = [0.0; 3];
        for (c, out) in px.iter_mut().enumerate() {
            let top = corner[0][c] * (1.0 - u) + corner[1][c] * u;
            let bottom = corner[2][c] * (1.0 - u) + corner[3][c] * u;
            *out = top * (1.0 - v) + bottom * v;
        }
        for b in &blobs {
            let dy = (v - b.cy) / b.ry;
            let dx = (u - b.cx) / b.rx;
            let inside = if b.rect {
                dy.abs() <= 1.0 && dx.abs() <= 1.0
            } else {
                dy * dy + dx * dx <= 1.0
            };
            if inside {
                px = b.color;
            }
        }
        let texture = texture_amp
            * (0.6 * ((y as f64 * fy + phase).sin() * (x as f64 * fx).cos())
                + 0.4 * noise[y * width + x]);
        for out in &mut px {
            *out += texture;
        }
        if kind == SceneKind::Grayscale {
            let l = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
            px = [l; 3];
        }
        px.map(|p| p.clamp(0.02, 0.98))
    })
    .expect("scene values are finite")
}

fn random_color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let a = scene(SceneKind::Colorful, 32, 40, 7);
        assert_eq!(a, scene(SceneKind::Colorful, 32, 40, 7));
        assert_ne!(a, scene(SceneKind::Colorful, 32, 40, 8));
        assert!(a.features().data().iter().all(|v| (0.02..=0.98).contains(v)));
        let g = scene(SceneKind::Grayscale, 8, 8, 7);
        let p = g.pixel(3, 3);
        assert!(p[0] == p[1] && p[1] == p[2]);
    }
}
