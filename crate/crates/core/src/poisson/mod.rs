//! Poisson image interpolation.
//!
//! The patch interior is re-solved so that its finite differences follow an
//! α-mixed guidance field while its one-pixel ring stays pinned to the
//! destination image.

mod guidance;
mod solver;
mod system;

pub use guidance::{build_guidance, select_gradient, GuidanceField, Neighbor};
pub use solver::{solve_patch, PoissonSolution, SolveMethod, SolveStats, SolverConfig, DENSE_LIMIT};
pub use system::{patch_residual, PatchSystem};

use crate::error::Result;
use crate::image::ImageGrid;
use crate::sampler::PatchSpec;
use crate::scalar::Scalar;

/// Blends `source` into `dest` inside `spec.region`. Pixels outside the
/// region are copied bit-exactly; solved values are not clipped.
pub fn pii_blend<T: Scalar>(
    dest: &ImageGrid<T>,
    source: &ImageGrid<T>,
    spec: &PatchSpec,
    config: &SolverConfig,
) -> Result<ImageGrid<T>> {
    pii_blend_with_stats(dest, source, spec, config).map(|(img, _)| img)
}

pub fn pii_blend_with_stats<T: Scalar>(
    dest: &ImageGrid<T>,
    source: &ImageGrid<T>,
    spec: &PatchSpec,
    config: &SolverConfig,
) -> Result<(ImageGrid<T>, SolveStats)> {
    let guidance = build_guidance(dest, source, spec)?;
    let solution = solve_patch(dest, &guidance, spec, config)?;
    Ok((composite(dest, &solution), solution.stats()))
}

/// Writes solved patch values over a copy of `dest`.
pub fn composite<T: Scalar>(dest: &ImageGrid<T>, solution: &PoissonSolution<T>) -> ImageGrid<T> {
    let region = solution.region;
    let mut out = dest.clone();
    for (k, (r, c)) in region.pixels().enumerate() {
        let (pr, pc) = (k / region.width(), k % region.width());
        for ch in 0..dest.channels() {
            out.set(r, c, ch, solution.values.get(pr, pc, ch));
        }
    }
    out
}
