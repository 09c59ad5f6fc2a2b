//! Image files, directory listings and report writers.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use image::{DynamicImage, ImageFormat, RgbImage};
use pttd_core::Image;
use serde::Serialize;

pub const IMAGE_EXTENSIONS: [&str; 3] = ["png", "ppm", "pnm"];

pub fn is_image_path(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

/// A single image file, or every image file in a directory sorted by name.
pub fn list_images(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    if !path.is_dir() {
        bail!("{} does not exist", path.display());
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("reading directory {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image_path(p))
        .collect();
    files.sort();
    Ok(files)
}

pub fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".to_owned())
}

/// Finds the image in `dir` (or `dir` itself when it is a file) whose stem
/// matches `name`.
pub fn match_by_stem(dir: &Path, name: &str) -> Option<PathBuf> {
    if dir.is_file() {
        return Some(dir.to_path_buf());
    }
    IMAGE_EXTENSIONS
        .iter()
        .map(|ext| dir.join(format!("{name}.{ext}")))
        .find(|p| p.is_file())
}

pub fn read_image(path: &Path) -> Result<Image> {
    let img = image::open(path).with_context(|| format!("reading image {}", path.display()))?;
    from_dynamic(&img).with_context(|| format!("converting {}", path.display()))
}

pub fn from_dynamic(img: &DynamicImage) -> Result<Image> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let eight_bit = matches!(
        img,
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) | DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_)
    );
    let px: Vec<[f64; 3]> = if eight_bit {
        img.to_rgb8().pixels().map(|p| p.0.map(|v| v as f64 / 255.0)).collect()
    } else {
        img.to_rgb32f().pixels().map(|p| p.0.map(|v| v as f64)).collect()
    };
    Ok(Image::from_fn(h, w, |y, x| px[y * w + x])?)
}

/// Clamps to `[0, 1]` and rounds half to even onto 8 bits.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round_ties_even() as u8
}

pub fn to_rgb8(img: &Image) -> RgbImage {
    let (w, h) = (img.width() as u32, img.height() as u32);
    RgbImage::from_fn(w, h, |x, y| image::Rgb(img.pixel(y as usize, x as usize).map(quantize)))
}

/// Writes an 8-bit image; the format follows the extension (PNG or PPM).
pub fn write_image(path: &Path, img: &Image) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let format = match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("ppm") | Some("pnm") => ImageFormat::Pnm,
        Some("png") => ImageFormat::Png,
        other => bail!("unsupported output extension {other:?} for {}", path.display()),
    };
    to_rgb8(img)
        .save_with_format(path, format)
        .with_context(|| format!("writing {}", path.display()))
}

/// Image after the 8-bit round trip used for every file written.
pub fn quantized(img: &Image) -> Image {
    img.map(|v| quantize(v) as f64 / 255.0).expect("quantized values are finite")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    /// Line-oriented `key=value` text.
    Kv,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Kv => "txt",
        }
    }
}

/// Renders a serializable value as pretty JSON or as flattened `key=value`
/// lines (nested keys joined with dots, array elements by index).
pub fn render<T: Serialize>(value: &T, format: ReportFormat) -> Result<String> {
    let json = serde_json::to_value(value)?;
    Ok(match format {
        ReportFormat::Json => serde_json::to_string_pretty(&json)? + "\n",
        ReportFormat::Kv => {
            let mut out = String::new();
            flatten("", &json, &mut out);
            out
        }
    })
}

fn flatten(prefix: &str, v: &serde_json::Value, out: &mut String) {
    use serde_json::Value;
    let key = |k: &str| if prefix.is_empty() { k.to_owned() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&key(k), v, out);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&key(&i.to_string()), v, out);
            }
        }
        Value::String(s) => out.push_str(&format!("{prefix}={s}\n")),
        Value::Null => out.push_str(&format!("{prefix}=\n")),
        other => out.push_str(&format!("{prefix}={other}\n")),
    }
}

pub fn write_report<T: Serialize>(path: &Path, value: &T, format: ReportFormat) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, render(value, format)?).with_context(|| format!("writing {}", path.display()))
}
