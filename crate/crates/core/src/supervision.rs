//! Pixel-wise labels and the interpolation-factor regression loss.

use crate::error::{Error, Result};
use crate::image::ImageGrid;
use crate::sampler::PatchSpec;
use crate::scalar::Scalar;

/// Single-channel target map with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap<T>(ImageGrid<T>);

impl<T: Scalar> LabelMap<T> {
    pub fn from_grid(grid: ImageGrid<T>) -> Result<Self> {
        if grid.channels() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "label map must have one channel, got {}",
                grid.channels()
            )));
        }
        if let Some((i, v)) = grid
            .data()
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= T::zero() && **v <= T::one()))
        {
            return Err(Error::Domain(format!("label {v} at index {i} outside [0, 1]")));
        }
        Ok(Self(grid))
    }

    pub fn grid(&self) -> &ImageGrid<T> {
        &self.0
    }

    pub fn into_grid(self) -> ImageGrid<T> {
        self.0
    }
}

/// Single-channel anomaly score map with values in the open interval `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap<T>(ImageGrid<T>);

impl<T: Scalar> ScoreMap<T> {
    pub fn from_grid(grid: ImageGrid<T>) -> Result<Self> {
        if grid.channels() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "score map must have one channel, got {}",
                grid.channels()
            )));
        }
        if let Some((i, v)) = grid
            .data()
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > T::zero() && **v < T::one()))
        {
            return Err(Error::Domain(format!("score {v} at index {i} outside (0, 1)")));
        }
        Ok(Self(grid))
    }

    pub fn grid(&self) -> &ImageGrid<T> {
        &self.0
    }

    pub fn into_grid(self) -> ImageGrid<T> {
        self.0
    }
}

/// α inside `spec.region`, exactly zero elsewhere.
pub fn make_label<T: Scalar>(spec: &PatchSpec, height: usize, width: usize) -> Result<LabelMap<T>> {
    spec.region
        .check_fits(height, width)
        .map_err(|e| Error::ShapeMismatch(format!("patch does not fit {height}x{width}: {e}")))?;
    let alpha = T::from_f64_lossy(spec.alpha);
    let grid = ImageGrid::from_fn(height, width, 1, |r, c, _| {
        if spec.region.contains(r, c) {
            alpha
        } else {
            T::zero()
        }
    })?;
    LabelMap::from_grid(grid)
}

#[inline]
fn clamp_score<T: Scalar>(a: T) -> T {
    a.max(T::EPSILON_LOG).min(T::one() - T::EPSILON_LOG)
}

/// `-y ln a - (1 - y) ln(1 - a)` with `a` clamped to `[1e-7, 1 - 1e-7]`.
#[inline]
pub fn bce_pointwise<T: Scalar>(label: T, score: T) -> T {
    let a = clamp_score(score);
    -(label * a.ln()) - (T::one() - label) * (T::one() - a).ln()
}

fn check_shapes<T: Scalar>(label: &LabelMap<T>, score: &ScoreMap<T>) -> Result<()> {
    label.grid().ensure_same_shape(score.grid())
}

/// Mean of the pointwise binary cross-entropy over all pixels.
pub fn bce_loss<T: Scalar>(label: &LabelMap<T>, score: &ScoreMap<T>) -> Result<T> {
    check_shapes(label, score)?;
    let n = T::from_usize(label.grid().data().len()).unwrap();
    let total: T = label
        .grid()
        .data()
        .iter()
        .zip(score.grid().data())
        .map(|(&y, &a)| bce_pointwise(y, a))
        .sum();
    Ok(total / n)
}

/// `∂L/∂a = (a - y) / (a (1 - a)) / pixel_count`, evaluated at the clamped score.
pub fn bce_loss_gradient<T: Scalar>(label: &LabelMap<T>, score: &ScoreMap<T>) -> Result<ImageGrid<T>> {
    check_shapes(label, score)?;
    let n = T::from_usize(label.grid().data().len()).unwrap();
    let data = label
        .grid()
        .data()
        .iter()
        .zip(score.grid().data())
        .map(|(&y, &a)| {
            let a = clamp_score(a);
            (a - y) / (a * (T::one() - a)) / n
        })
        .collect();
    ImageGrid::new(label.grid().height(), label.grid().width(), 1, data)
}
