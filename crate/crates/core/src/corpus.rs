//! Seeded corpus generation.
//!
//! Sample `i` draws its image pair, patch and α from its own stream
//! [`sample_stream`]`(seed, i)`, so the bytes written are independent of the
//! worker count and scheduling order.
//!
//! Output layout inside the output directory:
//!
//! * `NNNNNN_img.f32` blended image, raw container
//! * `NNNNNN_lbl.f32` label map, raw container
//! * `manifest.json`
//!
//! where `NNNNNN` is the zero-padded sample index. Failed samples are
//! recorded in the manifest and have no image or label file.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpi::fpi_blend;
use crate::image::{normalize, PatchRegion};
use crate::io::{load_image_auto, save_image, ImageFormat, RAW_EXTENSION};
use crate::poisson::{pii_blend_with_stats, SolveStats, SolverConfig};
use crate::sampler::{sample_pair, sample_patch, sample_stream, PatchSpec, SamplerConfig, RNG_NAME};
use crate::supervision::{make_label, LabelMap};
use crate::{Image, Scalar};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const TOOL_NAME: &str = "pii";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlendMode {
    Fpi,
    Pii,
}

impl FromStr for BlendMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fpi" => Ok(BlendMode::Fpi),
            "pii" => Ok(BlendMode::Pii),
            _ => Err(Error::InvalidConfig(format!("unknown blend mode {s:?} (fpi, pii)"))),
        }
    }
}

impl fmt::Display for BlendMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlendMode::Fpi => "fpi",
            BlendMode::Pii => "pii",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusConfig {
    pub mode: BlendMode,
    pub count: usize,
    pub sampler: SamplerConfig,
    pub solver: SolverConfig,
    /// Scale each input to zero mean and unit standard deviation per channel.
    pub normalize: bool,
    /// 0 lets rayon decide.
    pub workers: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            mode: BlendMode::Pii,
            count: 0,
            sampler: SamplerConfig::default(),
            solver: SolverConfig::default(),
            normalize: false,
            workers: 0,
        }
    }
}

/// Blended image with its label and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSample<T> {
    pub image: crate::ImageGrid<T>,
    pub label: LabelMap<T>,
    pub spec: PatchSpec,
    /// Present for PII samples.
    pub solver_stats: Option<SolveStats>,
    pub rng_stream_id: u64,
}

/// Pair, patch and α for sample `index`.
pub fn draw_spec(
    sampler: &SamplerConfig,
    dataset_size: usize,
    image_height: usize,
    image_width: usize,
    index: u64,
) -> Result<PatchSpec> {
    let mut rng = sample_stream(sampler.seed, index);
    let (dest, source) = sample_pair(dataset_size, &mut rng)?;
    sample_patch(sampler, image_height, image_width, &mut rng)?.into_spec(dest, source)
}

/// Applies one blend; the building block for on-the-fly generation.
pub fn augment<T: Scalar>(
    dest: &crate::ImageGrid<T>,
    source: &crate::ImageGrid<T>,
    spec: &PatchSpec,
    mode: BlendMode,
    solver: &SolverConfig,
) -> Result<(crate::ImageGrid<T>, Option<SolveStats>)> {
    match mode {
        BlendMode::Fpi => Ok((fpi_blend(dest, source, spec)?, None)),
        BlendMode::Pii => {
            let (img, stats) = pii_blend_with_stats(dest, source, spec, solver)?;
            Ok((img, Some(stats)))
        }
    }
}

/// In-memory counterpart of one corpus sample.
pub fn synthesize_sample<T: Scalar>(
    images: &[crate::ImageGrid<T>],
    index: u64,
    mode: BlendMode,
    sampler: &SamplerConfig,
    solver: &SolverConfig,
) -> Result<AugmentedSample<T>> {
    let first = images.first().ok_or(Error::InsufficientInputs { found: 0 })?;
    let spec = draw_spec(sampler, images.len(), first.height(), first.width(), index)?;
    let (dest, source) = (&images[spec.dest_index], &images[spec.source_index]);
    let (image, solver_stats) = augment(dest, source, &spec, mode, solver)?;
    let label = make_label(&spec, image.height(), image.width())?;
    Ok(AugmentedSample {
        image,
        label,
        spec,
        solver_stats,
        rng_stream_id: index,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    pub rng_stream_id: u64,
    pub status: SampleStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub dest_index: usize,
    pub dest_file: String,
    pub source_index: usize,
    pub source_file: String,
    pub region: PatchRegion,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolveStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_max: Option<f64>,
}

/// Intensity range of inputs versus blended outputs. Solved PII values are
/// not clipped and can leave the input range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OvershootStats {
    pub input_min: Option<f64>,
    pub input_max: Option<f64>,
    pub output_min: Option<f64>,
    pub output_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub tool: String,
    pub version: String,
    pub rng: String,
    pub master_seed: u64,
    pub mode: BlendMode,
    pub normalize: bool,
    pub sampler: SamplerConfig,
    pub solver: SolverConfig,
    pub inputs: Vec<String>,
    pub image_shape: Option<[usize; 3]>,
    pub count: usize,
    pub failed: usize,
    pub overshoot: OvershootStats,
    pub samples: Vec<SampleRecord>,
}

impl CorpusManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    /// Every file the run wrote, manifest included.
    pub fn output_files(&self) -> Vec<String> {
        let mut files: Vec<String> = self
            .samples
            .iter()
            .flat_map(|s| s.image_file.iter().chain(s.label_file.iter()).cloned())
            .collect();
        files.push(MANIFEST_NAME.to_string());
        files
    }
}

pub fn sample_file_names(index: usize) -> (String, String) {
    (
        format!("{index:06}_img.{RAW_EXTENSION}"),
        format!("{index:06}_lbl.{RAW_EXTENSION}"),
    )
}

/// `.png` and `.f32` files directly inside `dir`, sorted by file name.
pub fn list_inputs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        if path.is_file() && matches!(ext.as_deref(), Some("png") | Some(RAW_EXTENSION)) {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Loads every input, enforcing a single shape and optionally normalizing.
pub fn load_inputs(paths: &[PathBuf], normalize_each: bool) -> Result<Vec<Image>> {
    let mut images: Vec<Image> = Vec::with_capacity(paths.len());
    for path in paths {
        let mut img: Image = load_image_auto(path)?;
        if let Some(first) = images.first() {
            if !first.same_shape(&img) {
                return Err(Error::ShapeHeterogeneity {
                    path: path.clone(),
                    expected: first.shape(),
                    found: img.shape(),
                });
            }
        }
        if normalize_each {
            img = normalize(&img)?.0;
        }
        images.push(img);
    }
    Ok(images)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn fold_range(acc: (Option<f64>, Option<f64>), lo: Option<f64>, hi: Option<f64>) -> (Option<f64>, Option<f64>) {
    let pick = |a: Option<f64>, b: Option<f64>, f: fn(f64, f64) -> f64| match (a, b) {
        (Some(x), Some(y)) => Some(f(x, y)),
        (x, None) => x,
        (None, y) => y,
    };
    (pick(acc.0, lo, f64::min), pick(acc.1, hi, f64::max))
}

/// Generates `config.count` samples from the images in `input_dir` and
/// writes them plus `manifest.json` into `output_dir`.
///
/// Blend failures are recorded per sample and do not abort the run; check
/// [`CorpusManifest::failed`]. Any other error is fatal.
pub fn generate_corpus(input_dir: &Path, output_dir: &Path, config: &CorpusConfig) -> Result<CorpusManifest> {
    config.sampler.validate()?;
    config.solver.validate()?;
    let paths = list_inputs(input_dir)?;
    if config.count > 0 && paths.len() < 2 {
        return Err(Error::InsufficientInputs { found: paths.len() });
    }
    let images = load_inputs(&paths, config.normalize)?;
    let names: Vec<String> = paths.iter().map(|p| file_name(p)).collect();
    fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    let records: Vec<SampleRecord> = pool.install(|| {
        (0..config.count)
            .into_par_iter()
            .map(|index| write_sample(&images, &names, index, config, output_dir))
            .collect::<Result<Vec<_>>>()
    })?;

    let input_range = images
        .iter()
        .map(|img| img.min_max())
        .fold((None, None), |acc, (lo, hi)| fold_range(acc, Some(lo), Some(hi)));
    let output_range = records
        .iter()
        .fold((None, None), |acc, r| fold_range(acc, r.output_min, r.output_max));

    let manifest = CorpusManifest {
        tool: TOOL_NAME.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        rng: RNG_NAME.to_string(),
        master_seed: config.sampler.seed,
        mode: config.mode,
        normalize: config.normalize,
        sampler: config.sampler.clone(),
        solver: config.solver,
        inputs: names,
        image_shape: images.first().map(|i| {
            let (h, w, c) = i.shape();
            [h, w, c]
        }),
        count: config.count,
        failed: records
            .iter()
            .filter(|r| r.status == SampleStatus::Failed)
            .count(),
        overshoot: OvershootStats {
            input_min: input_range.0,
            input_max: input_range.1,
            output_min: output_range.0,
            output_max: output_range.1,
        },
        samples: records,
    };
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    let path = output_dir.join(MANIFEST_NAME);
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

fn write_sample(
    images: &[Image],
    names: &[String],
    index: usize,
    config: &CorpusConfig,
    output_dir: &Path,
) -> Result<SampleRecord> {
    let first = &images[0];
    let spec = draw_spec(&config.sampler, images.len(), first.height(), first.width(), index as u64)?;
    let mut record = SampleRecord {
        index,
        rng_stream_id: index as u64,
        status: SampleStatus::Ok,
        error: None,
        dest_index: spec.dest_index,
        dest_file: names[spec.dest_index].clone(),
        source_index: spec.source_index,
        source_file: names[spec.source_index].clone(),
        region: spec.region,
        alpha: spec.alpha,
        solver: None,
        image_file: None,
        label_file: None,
        output_min: None,
        output_max: None,
    };
    let blended = augment(
        &images[spec.dest_index],
        &images[spec.source_index],
        &spec,
        config.mode,
        &config.solver,
    );
    let (image, stats) = match blended {
        Ok(v) => v,
        Err(e @ Error::NonConvergence { .. }) => {
            record.status = SampleStatus::Failed;
            record.error = Some(e.to_string());
            return Ok(record);
        }
        Err(e) => return Err(e),
    };
    let label: LabelMap<f64> = make_label(&spec, image.height(), image.width())?;
    let (img_name, lbl_name) = sample_file_names(index);
    save_image(&image, &output_dir.join(&img_name), ImageFormat::RawF32)?;
    save_image(label.grid(), &output_dir.join(&lbl_name), ImageFormat::RawF32)?;
    let (lo, hi) = image.min_max();
    record.solver = stats;
    record.image_file = Some(img_name);
    record.label_file = Some(lbl_name);
    record.output_min = Some(lo);
    record.output_max = Some(hi);
    Ok(record)
}
