use crate::error::{invalid, Result};
use crate::tensor::Image;

/// Bilinear resize with pixel centers aligned: destination pixel `d` samples
/// source coordinate `(d + 0.5) * src / dst - 0.5`, clamped to the border.
pub fn resize_bilinear(img: &Image, new_w: usize, new_h: usize) -> Result<Image> {
    if new_w == 0 || new_h == 0 {
        return invalid(format!("resize target must be non-empty, got {new_w}x{new_h}"));
    }
    if new_w == img.width() && new_h == img.height() {
        return Ok(img.clone());
    }
    let xs = sample_positions(img.width(), new_w);
    let ys = sample_positions(img.height(), new_h);
    let src = img.features();
    Image::from_fn(new_h, new_w, |y, x| {
        let (y0, y1, fy) = ys[y];
        let (x0, x1, fx) = xs[x];
        let mut px = [0.0; 3];
        for (c, out) in px.iter_mut().enumerate() {
            let top = src.get(c, y0, x0) * (1.0 - fx) + src.get(c, y0, x1) * fx;
            let bottom = src.get(c, y1, x0) * (1.0 - fx) + src.get(c, y1, x1) * fx;
            *out = top * (1.0 - fy) + bottom * fy;
        }
        px
    })
}

fn sample_positions(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    let last = (src - 1) as f64;
    (0..dst)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_size_is_identity() {
        let img = Image::from_fn(3, 4, |y, x| [y as f64 / 3.0, x as f64 / 4.0, 0.5]).unwrap();
        assert_eq!(resize_bilinear(&img, 4, 3).unwrap(), img);
    }

    #[test]
    fn constant_stays_constant() {
        let img = Image::filled(5, 7, [0.2, 0.4, 0.9]).unwrap();
        let out = resize_bilinear(&img, 13, 2).unwrap();
        assert!(out.max_abs_diff(&Image::filled(2, 13, [0.2, 0.4, 0.9]).unwrap()).unwrap() < 1e-15);
    }

    #[test]
    fn upsampled_ramp() {
        let img = Image::from_fn(1, 2, |_, x| [x as f64; 3]).unwrap();
        let out = resize_bilinear(&img, 4, 1).unwrap();
        let row: Vec<f64> = (0..4).map(|x| out.pixel(0, x)[0]).collect();
        assert_eq!(row, vec![0.0, 0.25, 0.75, 1.0]);
        assert!(row.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn zero_target_rejected() {
        let img = Image::filled(2, 2, [0.0; 3]).unwrap();
        assert!(resize_bilinear(&img, 0, 2).is_err());
        assert!(resize_bilinear(&img, 2, 0).is_err());
    }
}
