//! Multi-channel float rasters, box-filter pyramids and file I/O.

mod io;
mod pyramid;

pub use self::io::{load_image, save_image, ImageFormat};
pub use self::pyramid::{build_pyramid, downsample, pyramid_depth, ImagePyramid};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Maximum number of channels a raster may carry.
pub const MAX_CHANNELS: usize = 4;

/// Row-major, interleaved `f32` raster with 1 to 4 channels.
#[derive(Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl std::fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RasterImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .finish_non_exhaustive()
    }
}

impl RasterImage {
    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("empty {width}x{height} raster")));
        }
        if channels == 0 || channels > MAX_CHANNELS {
            return Err(Error::InvalidImage(format!(
                "{channels} channels (expected 1..={MAX_CHANNELS})"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidImage(format!(
                "{} samples for a {width}x{height}x{channels} raster",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Result<Self> {
        Self::from_vec(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds a raster by evaluating `f(x, y, channel)` at every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::from_vec(width, height, channels, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Pixel at `(x, y)` with coordinates clamped to the image edge.
    #[inline]
    pub fn pixel_clamped(&self, x: isize, y: isize) -> &[f32] {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.pixel(x, y)
    }

    /// Extracts channel `c` as a single-channel raster.
    pub fn channel(&self, c: usize) -> RasterImage {
        assert!(c < self.channels, "channel {c} out of range");
        let data = self.data.iter().skip(c).step_by(self.channels).copied().collect();
        RasterImage {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<RasterImage> {
        if x0 + width > self.width || y0 + height > self.height {
            return Err(Error::DimensionMismatch(format!(
                "crop {width}x{height}+{x0}+{y0} exceeds {}x{}",
                self.width, self.height
            )));
        }
        RasterImage::from_fn(width, height, self.channels, |x, y, c| {
            self.get(x0 + x, y0 + y, c)
        })
    }

    /// Copy with every sample clamped to `[0, 1]` (NaN maps to 0).
    pub fn normalized(&self) -> RasterImage {
        let data = self.data.iter().map(|&v| clamp_unit(v)).collect();
        self.with_data(data)
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> RasterImage {
        let data = self.data.iter().map(|&v| f(v)).collect();
        self.with_data(data)
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn same_dims(&self, other: &RasterImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// SHA-256 over dimensions and the exact sample bits.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        self.hash_into(&mut hasher);
        hasher.finalize().into()
    }

    pub(crate) fn hash_into(&self, hasher: &mut Sha256) {
        for v in [self.width, self.height, self.channels] {
            hasher.update((v as u64).to_le_bytes());
        }
        for v in &self.data {
            hasher.update(v.to_bits().to_le_bytes());
        }
    }

    fn with_data(&self, data: Vec<f32>) -> RasterImage {
        debug_assert_eq!(data.len(), self.data.len());
        RasterImage {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data,
        }
    }
}

#[inline]
pub(crate) fn clamp_unit(v: f32) -> f32 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Mean absolute sample difference between two same-shaped rasters.
pub fn mean_abs_diff(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    if a.dims() != b.dims() || a.channels() != b.channels() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&p, &q)| (p as f64 - q as f64).abs())
        .sum();
    Ok(sum / a.data().len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(RasterImage::from_vec(0, 2, 1, vec![]).is_err());
        assert!(RasterImage::from_vec(2, 2, 5, vec![0.0; 20]).is_err());
        assert!(RasterImage::from_vec(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(RasterImage::from_vec(2, 2, 3, vec![0.0; 12]).is_ok());
    }

    #[test]
    fn clamped_access_replicates_edges() {
        let img = RasterImage::from_fn(3, 2, 1, |x, y, _| (y * 3 + x) as f32).unwrap();
        assert_eq!(img.pixel_clamped(-5, 0), &[0.0]);
        assert_eq!(img.pixel_clamped(7, 9), &[5.0]);
        assert_eq!(img.pixel_clamped(1, -1), &[1.0]);
    }

    #[test]
    fn normalization_lands_in_unit_range() {
        let img = RasterImage::from_vec(2, 1, 2, vec![-0.5, 1.5, f32::NAN, 0.25]).unwrap();
        assert_eq!(img.normalized().data(), &[0.0, 1.0, 0.0, 0.25]);
    }

    #[test]
    fn channel_and_crop() {
        let img = RasterImage::from_fn(4, 4, 2, |x, y, c| (x + 10 * y + 100 * c) as f32).unwrap();
        let c1 = img.channel(1);
        assert_eq!(c1.get(3, 2, 0), 123.0);
        let crop = img.crop(1, 1, 2, 3).unwrap();
        assert_eq!(crop.dims(), (2, 3));
        assert_eq!(crop.get(0, 0, 0), 11.0);
        assert!(img.crop(3, 3, 2, 2).is_err());
    }

    #[test]
    fn hash_sees_single_bit_changes() {
        let a = RasterImage::filled(3, 3, 1, 0.5).unwrap();
        let mut b = a.clone();
        b.data_mut()[4] = f32::from_bits(0.5f32.to_bits() + 1);
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash(), a.clone().content_hash());
    }
}
