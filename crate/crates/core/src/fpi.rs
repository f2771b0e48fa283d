//! Foreign patch interpolation: convex combination of two images inside `h`.

use crate::error::Result;
use crate::image::ImageGrid;
use crate::sampler::PatchSpec;
use crate::scalar::Scalar;

/// `(1 - alpha) * dest + alpha * source`, returning the endpoint operand
/// itself at `alpha` of exactly 0 or 1.
#[inline]
pub(crate) fn convex<T: Scalar>(dest: T, source: T, alpha: T) -> T {
    if alpha == T::zero() {
        dest
    } else if alpha == T::one() {
        source
    } else {
        (T::one() - alpha) * dest + alpha * source
    }
}

pub fn fpi_blend<T: Scalar>(
    dest: &ImageGrid<T>,
    source: &ImageGrid<T>,
    spec: &PatchSpec,
) -> Result<ImageGrid<T>> {
    dest.ensure_same_shape(source)?;
    spec.region.check_fits(dest.height(), dest.width())?;
    let alpha = T::from_f64_lossy(spec.alpha);
    let mut out = dest.clone();
    for (r, c) in spec.region.pixels() {
        for ch in 0..dest.channels() {
            out.set(r, c, ch, convex(dest.get(r, c, ch), source.get(r, c, ch), alpha));
        }
    }
    Ok(out)
}
