//! Planar real-valued rasters.
//!
//! Both [`FeatureMap`] and [`Image`] store their samples channel-major: all of
//! channel 0 in row-major order, then channel 1, and so on. An [`Image`] is a
//! [`FeatureMap`] with exactly three channels in R, G, B order.

use crate::error::{invalid, Result};

/// A `C x H x W` tensor of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return invalid(format!(
                "feature map dimensions must be non-zero, got {channels}x{height}x{width}"
            ));
        }
        let expected = channels * height * width;
        if data.len() != expected {
            return invalid(format!(
                "feature map data has {} values, expected {expected}",
                data.len()
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return invalid(format!("non-finite value at index {pos}"));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(channels, height, width, vec![value; channels * height * width])
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(channels, height, width, data)
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    /// Applies `f` to every sample. The result must stay finite.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        Self::new(
            self.channels,
            self.height,
            self.width,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn same_shape(&self, other: &FeatureMap) -> bool {
        self.channels == other.channels && self.height == other.height && self.width == other.width
    }

    /// Copies the rectangle `rect` out of every channel.
    pub fn crop(&self, rect: Rect) -> Result<Self> {
        self.check_rect(rect)?;
        Self::from_fn(self.channels, rect.height, rect.width, |c, y, x| {
            self.get(c, rect.y + y, rect.x + x)
        })
    }

    /// Writes `patch` into this map with its top-left corner at `rect`'s origin.
    pub fn paste(&mut self, rect: Rect, patch: &FeatureMap) -> Result<()> {
        self.check_rect(rect)?;
        if patch.channels != self.channels || patch.height != rect.height || patch.width != rect.width
        {
            return invalid("patch shape does not match destination rectangle");
        }
        for c in 0..self.channels {
            for y in 0..rect.height {
                for x in 0..rect.width {
                    self.set(c, rect.y + y, rect.x + x, patch.get(c, y, x));
                }
            }
        }
        Ok(())
    }

    fn check_rect(&self, rect: Rect) -> Result<()> {
        if rect.width == 0
            || rect.height == 0
            || rect.x + rect.width > self.width
            || rect.y + rect.height > self.height
        {
            return invalid(format!(
                "rectangle {rect:?} outside {}x{} map",
                self.height, self.width
            ));
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &FeatureMap) -> Option<f64> {
        if !self.same_shape(other) {
            return None;
        }
        Some(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    }
}

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.width && y >= self.y && y < self.y + self.height
    }
}

/// An RGB raster with nominal range `[0, 1]`.
///
/// Out-of-range values are allowed while processing; they are clamped only
/// when the image is quantized for output.
#[derive(Debug, Clone, PartialEq)]
pub struct Image(FeatureMap);

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        FeatureMap::new(3, height, width, data).map(Image)
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        let mut data = vec![0.0; 3 * height * width];
        let n = height * width;
        for y in 0..height {
            for x in 0..width {
                let px = f(y, x);
                for c in 0..3 {
                    data[c * n + y * width + x] = px[c];
                }
            }
        }
        Self::new(height, width, data)
    }

    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Result<Self> {
        Self::from_fn(height, width, |_, _| rgb)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.0.height()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.0.width()
    }

    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> [f64; 3] {
        [self.0.get(0, y, x), self.0.get(1, y, x), self.0.get(2, y, x)]
    }

    pub fn features(&self) -> &FeatureMap {
        &self.0
    }

    pub fn into_features(self) -> FeatureMap {
        self.0
    }

    pub fn crop(&self, rect: Rect) -> Result<Self> {
        self.0.crop(rect).map(Image)
    }

    pub fn paste(&mut self, rect: Rect, patch: &Image) -> Result<()> {
        self.0.paste(rect, &patch.0)
    }

    pub fn clamped(&self) -> Self {
        Image(
            self.0
                .map(|v| v.clamp(0.0, 1.0))
                .expect("clamping keeps values finite"),
        )
    }

    pub fn map(&self, f: impl FnMut(f64) -> f64) -> Result<Self> {
        self.0.map(f).map(Image)
    }

    pub fn max_abs_diff(&self, other: &Image) -> Option<f64> {
        self.0.max_abs_diff(&other.0)
    }
}

impl TryFrom<FeatureMap> for Image {
    type Error = crate::Error;

    fn try_from(fm: FeatureMap) -> Result<Self> {
        if fm.channels() != 3 {
            return invalid(format!("an image needs 3 channels, got {}", fm.channels()));
        }
        Ok(Image(fm))
    }
}

/// Anything stored as channel-major planes.
pub trait Planar: Sized {
    fn planes(&self) -> &FeatureMap;
    fn from_planes(planes: FeatureMap) -> Result<Self>;
}

impl Planar for FeatureMap {
    fn planes(&self) -> &FeatureMap {
        self
    }

    fn from_planes(planes: FeatureMap) -> Result<Self> {
        Ok(planes)
    }
}

impl Planar for Image {
    fn planes(&self) -> &FeatureMap {
        &self.0
    }

    fn from_planes(planes: FeatureMap) -> Result<Self> {
        Image::try_from(planes)
    }
}
