//! Image grids, patch regions and per-image normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major, channel-innermost grid of finite real intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid<T> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> ImageGrid<T> {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::ShapeMismatch("channel count must be at least 1".into()));
        }
        let expected = height
            .checked_mul(width)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Error::ShapeMismatch("dimensions overflow".into()))?;
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{height}x{width}x{channels} needs {expected} values, got {}",
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Builds a grid from `f(row, col, channel)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for r in 0..height {
            for c in 0..width {
                for ch in 0..channels {
                    data.push(f(r, c, ch));
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: T) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
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
    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(height, width, channels)`
    #[inline]
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index_of(&self, row: usize, col: usize, channel: usize) -> usize {
        debug_assert!(row < self.height && col < self.width && channel < self.channels);
        (row * self.width + col) * self.channels + channel
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> T {
        self.data[self.index_of(row, col, channel)]
    }

    /// Caller must keep values finite.
    #[inline]
    pub(crate) fn set(&mut self, row: usize, col: usize, channel: usize, value: T) {
        let i = self.index_of(row, col, channel);
        self.data[i] = value;
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.shape() == other.shape()
    }

    pub(crate) fn ensure_same_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape(),
                other.shape()
            )))
        }
    }

    /// Swaps rows and columns.
    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.width {
            for r in 0..self.height {
                for ch in 0..self.channels {
                    data.push(self.get(r, c, ch));
                }
            }
        }
        Self {
            height: self.width,
            width: self.height,
            channels: self.channels,
            data,
        }
    }

    /// Values of one channel in row-major order.
    pub fn channel_values(&self, channel: usize) -> impl Iterator<Item = T> + '_ {
        self.data
            .iter()
            .skip(channel)
            .step_by(self.channels)
            .copied()
    }

    pub fn min_max(&self) -> (T, T) {
        self.data.iter().fold(
            (T::infinity(), T::neg_infinity()),
            |(lo, hi), &v| (lo.min(v), hi.max(v)),
        )
    }

    pub fn cast<U: Scalar>(&self) -> Result<ImageGrid<U>> {
        let data = self
            .data
            .iter()
            .map(|v| U::from_f64_lossy(v.as_f64()))
            .collect();
        ImageGrid::new(self.height, self.width, self.channels, data)
    }
}

/// Axis-aligned patch of unknown pixels `h`.
///
/// The one-pixel ring around the patch (`∂h`) must also lie inside the
/// image, so `top >= 1`, `left >= 1`, `top + height <= image_height - 1` and
/// likewise for columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PatchRegion {
    top: usize,
    left: usize,
    height: usize,
    width: usize,
}

impl PatchRegion {
    pub fn new(
        top: usize,
        left: usize,
        height: usize,
        width: usize,
        image_height: usize,
        image_width: usize,
    ) -> Result<Self> {
        let region = Self {
            top,
            left,
            height,
            width,
        };
        region.check_fits(image_height, image_width)?;
        Ok(region)
    }

    pub fn check_fits(&self, image_height: usize, image_width: usize) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidRegion(format!(
                "empty patch {}x{}",
                self.height, self.width
            )));
        }
        let rows_ok = self.top >= 1 && self.top + self.height < image_height;
        let cols_ok = self.left >= 1 && self.left + self.width < image_width;
        if !(rows_ok && cols_ok) {
            return Err(Error::InvalidRegion(format!(
                "patch rows {}..{} cols {}..{} leaves no boundary ring inside {}x{}",
                self.top,
                self.top + self.height,
                self.left,
                self.left + self.width,
                image_height,
                image_width
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn top(&self) -> usize {
        self.top
    }

    #[inline]
    pub fn left(&self) -> usize {
        self.left
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    /// Exclusive.
    #[inline]
    pub fn bottom(&self) -> usize {
        self.top + self.height
    }

    /// Exclusive.
    #[inline]
    pub fn right(&self) -> usize {
        self.left + self.width
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.top..self.bottom()).contains(&row) && (self.left..self.right()).contains(&col)
    }

    /// Patch-local linear index of an image pixel inside the patch.
    #[inline]
    pub fn local_index(&self, row: usize, col: usize) -> Option<usize> {
        self.contains(row, col)
            .then(|| (row - self.top) * self.width + (col - self.left))
    }

    /// Image coordinates of every patch pixel in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> {
        let (top, left, w) = (self.top, self.left, self.width);
        (0..self.pixel_count()).map(move |i| (top + i / w, left + i % w))
    }

    pub fn transpose(&self) -> Self {
        Self {
            top: self.left,
            left: self.top,
            height: self.width,
            width: self.height,
        }
    }
}

/// Per-channel statistics removed by [`normalize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

impl<T: Scalar> NormalizationStats<T> {
    /// Inverse of [`normalize`]: `x * std + mean` per channel.
    pub fn denormalize(&self, image: &ImageGrid<T>) -> Result<ImageGrid<T>> {
        if self.mean.len() != image.channels() || self.std.len() != image.channels() {
            return Err(Error::ShapeMismatch(format!(
                "stats for {} channels, image has {}",
                self.mean.len(),
                image.channels()
            )));
        }
        let channels = image.channels();
        let data = image
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let ch = i % channels;
                v * self.std[ch] + self.mean[ch]
            })
            .collect();
        ImageGrid::new(image.height(), image.width(), channels, data)
    }
}

/// Scales every channel to zero mean and unit (population) standard deviation.
///
/// Statistics are accumulated with Welford's update.
pub fn normalize<T: Scalar>(image: &ImageGrid<T>) -> Result<(ImageGrid<T>, NormalizationStats<T>)> {
    let channels = image.channels();
    let mut mean = vec![T::zero(); channels];
    let mut std = vec![T::zero(); channels];
    for ch in 0..channels {
        let mut m = T::zero();
        let mut m2 = T::zero();
        let mut n = T::zero();
        for v in image.channel_values(ch) {
            n = n + T::one();
            let delta = v - m;
            m = m + delta / n;
            m2 = m2 + delta * (v - m);
        }
        let s = if n > T::zero() {
            (m2 / n).sqrt()
        } else {
            T::zero()
        };
        if !(s > T::zero()) {
            return Err(Error::ConstantChannel { channel: ch });
        }
        mean[ch] = m;
        std[ch] = s;
    }
    let data = image
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let ch = i % channels;
            (v - mean[ch]) / std[ch]
        })
        .collect();
    let out = ImageGrid::new(image.height(), image.width(), channels, data)?;
    Ok((out, NormalizationStats { mean, std }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(h: usize, w: usize, seed: u64) -> ImageGrid<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageGrid::from_fn(h, w, 1, |_, _, _| rng.gen_range(-3.0..5.0)).unwrap()
    }

    #[test]
    fn rejects_bad_length_and_nan() {
        assert!(matches!(
            ImageGrid::new(2, 2, 1, vec![0.0f64; 3]),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            ImageGrid::new(1, 2, 1, vec![0.0f64, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(matches!(
            ImageGrid::new(1, 1, 1, vec![f64::INFINITY]),
            Err(Error::NonFinite { index: 0 })
        ));
    }

    #[test]
    fn two_point_channel() {
        let img = ImageGrid::new(1, 2, 1, vec![0.0f64, 2.0]).unwrap();
        let (n, stats) = normalize(&img).unwrap();
        assert_eq!(n.data(), &[-1.0, 1.0]);
        assert_eq!(stats.mean, vec![1.0]);
        assert_eq!(stats.std, vec![1.0]);
    }

    #[test]
    fn normalize_is_idempotent() {
        let (once, _) = normalize(&random_grid(8, 8, 3)).unwrap();
        let (twice, stats) = normalize(&once).unwrap();
        for (a, b) in once.data().iter().zip(twice.data()) {
            assert!((a - b).abs() <= 1e-6);
        }
        assert!(stats.mean[0].abs() <= 1e-6);
        assert!((stats.std[0] - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn stats_match_two_pass_oracle() {
        let img = random_grid(8, 8, 11);
        let (_, stats) = normalize(&img).unwrap();
        let n = img.data().len() as f64;
        let mean = img.data().iter().sum::<f64>() / n;
        let var = img.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!((stats.mean[0] - mean).abs() <= 1e-9);
        assert!((stats.std[0] - var.sqrt()).abs() <= 1e-9);
    }

    #[test]
    fn output_has_unit_moments_per_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let img = ImageGrid::from_fn(12, 7, 3, |_, _, ch| {
            rng.gen_range(0.0..1.0) * (ch + 1) as f64 * 40.0 + 17.0
        })
        .unwrap();
        let (n, _) = normalize(&img).unwrap();
        for ch in 0..3 {
            let vals: Vec<f64> = n.channel_values(ch).collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let s = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
            assert!(m.abs() <= 1e-6);
            assert!((s - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn constant_channel_is_an_error() {
        let img = ImageGrid::from_fn(4, 4, 2, |r, _, ch| if ch == 0 { r as f64 } else { 7.0 }).unwrap();
        assert!(matches!(normalize(&img), Err(Error::ConstantChannel { channel: 1 })));
    }

    #[test]
    fn denormalize_inverts() {
        let img = random_grid(9, 5, 21);
        let (n, stats) = normalize(&img).unwrap();
        let back = stats.denormalize(&n).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn region_requires_boundary_ring() {
        assert!(PatchRegion::new(1, 1, 6, 6, 8, 8).is_ok());
        assert!(PatchRegion::new(0, 1, 3, 3, 8, 8).is_err());
        assert!(PatchRegion::new(1, 0, 3, 3, 8, 8).is_err());
        assert!(PatchRegion::new(1, 1, 7, 3, 8, 8).is_err());
        assert!(PatchRegion::new(1, 1, 3, 7, 8, 8).is_err());
        assert!(PatchRegion::new(2, 2, 0, 3, 8, 8).is_err());
    }

    #[test]
    fn transpose_round_trips() {
        let img = ImageGrid::from_fn(3, 5, 2, |r, c, ch| (r * 100 + c * 10 + ch) as f64).unwrap();
        let t = img.transpose();
        assert_eq!(t.shape(), (5, 3, 2));
        assert_eq!(t.get(4, 2, 1), img.get(2, 4, 1));
        assert_eq!(t.transpose(), img);
    }
}
