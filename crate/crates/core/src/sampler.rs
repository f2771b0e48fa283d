//! Seeded sampling of patch geometry, interpolation factors and image pairs.
//!
//! Every corpus sample owns an independent ChaCha20 stream keyed by
//! `(master_seed, sample_index)`, so output does not depend on the order in
//! which samples are produced.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::PatchRegion;

pub type SampleRng = ChaCha20Rng;

/// Recorded in corpus manifests.
pub const RNG_NAME: &str = "ChaCha20 (rand_chacha 0.3): seed_from_u64(master_seed), set_stream(sample_index)";

/// Smallest patch side; a 3-pixel side leaves at least one pixel whose
/// neighbours are all unknowns.
pub const MIN_PATCH_SIDE: usize = 3;
pub const MIN_IMAGE_SIDE: usize = 16;

pub fn sample_stream(master_seed: u64, sample_index: u64) -> SampleRng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(sample_index);
    rng
}

/// Closed interval of fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionRange {
    pub min: f64,
    pub max: f64,
}

impl FractionRange {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let ok = self.min.is_finite()
            && self.max.is_finite()
            && 0.0 <= self.min
            && self.min <= self.max
            && self.max <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "{name} [{}, {}] must satisfy 0 <= min <= max <= 1",
                self.min, self.max
            )))
        }
    }

    /// Uniform draw in `[min, max)` from the top 53 bits of one `u64`.
    pub fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        let unit = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        self.min + (self.max - self.min) * unit
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub size_fraction_range: FractionRange,
    pub center_fraction_range: FractionRange,
    pub alpha_range: FractionRange,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            size_fraction_range: FractionRange::new(0.1, 0.4),
            center_fraction_range: FractionRange::new(0.1, 0.9),
            alpha_range: FractionRange::new(0.05, 0.95),
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.size_fraction_range.validate("size_fraction_range")?;
        self.center_fraction_range.validate("center_fraction_range")?;
        self.alpha_range.validate("alpha_range")
    }
}

/// One augmentation: patch `h`, interpolation factor and the image pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub region: PatchRegion,
    pub alpha: f64,
    pub source_index: usize,
    pub dest_index: usize,
}

impl PatchSpec {
    pub fn new(region: PatchRegion, alpha: f64, dest_index: usize, source_index: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Domain(format!("alpha {alpha} outside [0, 1]")));
        }
        if dest_index == source_index {
            return Err(Error::InvalidConfig(format!(
                "source and destination index are both {dest_index}"
            )));
        }
        Ok(Self {
            region,
            alpha,
            source_index,
            dest_index,
        })
    }

    pub fn transpose(&self) -> Self {
        Self {
            region: self.region.transpose(),
            ..*self
        }
    }
}

/// Patch geometry and α before the image pair is attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchDraw {
    pub region: PatchRegion,
    pub alpha: f64,
}

impl PatchDraw {
    pub fn into_spec(self, dest_index: usize, source_index: usize) -> Result<PatchSpec> {
        PatchSpec::new(self.region, self.alpha, dest_index, source_index)
    }
}

/// Draws side fractions (rows, then columns), centre fractions (rows, then
/// columns) and α, in that order.
pub fn sample_patch<R: RngCore + ?Sized>(
    config: &SamplerConfig,
    image_height: usize,
    image_width: usize,
    rng: &mut R,
) -> Result<PatchDraw> {
    config.validate()?;
    if image_height < MIN_IMAGE_SIDE || image_width < MIN_IMAGE_SIDE {
        return Err(Error::ImageTooSmall(format!(
            "{image_height}x{image_width}, need at least {MIN_IMAGE_SIDE} per side"
        )));
    }
    let size_rows = config.size_fraction_range.draw(rng);
    let size_cols = config.size_fraction_range.draw(rng);
    let center_row = config.center_fraction_range.draw(rng);
    let center_col = config.center_fraction_range.draw(rng);
    let alpha = config.alpha_range.draw(rng);
    let region = region_from_fractions(
        [size_rows, size_cols],
        [center_row, center_col],
        image_height,
        image_width,
    )?;
    Ok(PatchDraw { region, alpha })
}

/// Turns continuous size/centre fractions into a valid region.
///
/// Side lengths are `round(fraction * axis_len)`, at least [`MIN_PATCH_SIDE`].
/// A region that would cross the one-pixel margin is translated inward.
pub fn region_from_fractions(
    size: [f64; 2],
    center: [f64; 2],
    image_height: usize,
    image_width: usize,
) -> Result<PatchRegion> {
    let axis = |frac_size: f64, frac_center: f64, len: usize| -> Result<(usize, usize)> {
        let side = ((frac_size * len as f64).round() as usize).max(MIN_PATCH_SIDE);
        if side + 2 > len {
            return Err(Error::ImageTooSmall(format!(
                "patch side {side} plus boundary ring does not fit in {len}"
            )));
        }
        let start = (frac_center * len as f64 - side as f64 / 2.0).floor();
        let max_start = (len - 1 - side) as f64;
        Ok((start.clamp(1.0, max_start) as usize, side))
    };
    let (top, height) = axis(size[0], center[0], image_height)?;
    let (left, width) = axis(size[1], center[1], image_width)?;
    PatchRegion::new(top, left, height, width, image_height, image_width)
}

/// Ordered pair `(dest_index, source_index)` of distinct indices, uniform
/// over all `n * (n - 1)` ordered pairs.
pub fn sample_pair<R: RngCore + ?Sized>(dataset_size: usize, rng: &mut R) -> Result<(usize, usize)> {
    if dataset_size < 2 {
        return Err(Error::DatasetTooSmall { size: dataset_size });
    }
    let n = dataset_size as u64;
    let dest = rng.gen_range(0..n);
    let mut source = rng.gen_range(0..n - 1);
    if source >= dest {
        source += 1;
    }
    Ok((dest as usize, source as usize))
}
