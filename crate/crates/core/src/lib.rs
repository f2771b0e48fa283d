//! Synthetic anomaly generation by Poisson image interpolation.
//!
//! A random patch of one normal image is blended into another, either by a
//! plain convex combination ([`fpi_blend`]) or in the gradient domain
//! ([`pii_blend`]), and labelled with the interpolation factor. The crate
//! also provides the pixel-wise regression loss a detector is trained with
//! and average-precision evaluation of the resulting scores.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`). The
//! aliases at the crate root fix it to `f64`, which the CLI and corpus
//! generator use.

pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod fpi;
pub mod image;
pub mod io;
pub mod poisson;
pub mod sampler;
pub mod scalar;
pub mod supervision;

pub use error::{Error, Result};
pub use evaluation::{
    aggregate_score, average_precision, clip_score, score_histogram, Aggregation, ClipAggregation,
    PrCurve, ScoreHistogram, ScoredSample,
};
pub use fpi::fpi_blend;
pub use image::{normalize, ImageGrid, NormalizationStats, PatchRegion};
pub use io::{load_image, load_image_auto, save_image, ImageFormat};
pub use poisson::{
    build_guidance, pii_blend, pii_blend_with_stats, solve_patch, GuidanceField, PoissonSolution,
    SolveMethod, SolveStats, SolverConfig,
};
pub use sampler::{sample_pair, sample_patch, FractionRange, PatchSpec, SamplerConfig};
pub use scalar::Scalar;
pub use supervision::{bce_loss, bce_loss_gradient, make_label, LabelMap, ScoreMap};

/// Double-precision image grid.
pub type Image = ImageGrid<f64>;
/// Single-precision image grid.
pub type Image32 = ImageGrid<f32>;
pub type Guidance = GuidanceField<f64>;
pub type Solution = PoissonSolution<f64>;
pub type Labels = LabelMap<f64>;
pub type Scores = ScoreMap<f64>;
