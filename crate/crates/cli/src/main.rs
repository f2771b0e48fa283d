//! `pii` command-line tool.
//!
//! Exit status: 0 success, 1 usage error, 2 partial failure (some corpus
//! samples failed to solve), 3 fatal error.

mod evaluate;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use pii::corpus::{generate_corpus, BlendMode, CorpusConfig};
use pii::evaluation::{Aggregation, ClipAggregation};
use pii::{
    fpi_blend, load_image_auto, make_label, pii_blend_with_stats, save_image, FractionRange, Image,
    ImageFormat, LabelMap, PatchRegion, PatchSpec, SamplerConfig, SolveMethod, SolverConfig,
};

const EXIT_USAGE: u8 = 1;
const EXIT_PARTIAL: u8 = 2;
const EXIT_FATAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "pii", version, about = "Poisson image interpolation: synthetic anomaly corpora and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a seeded corpus of blended images and labels.
    ///
    /// Inputs are every .png and .f32 file directly inside --input, sorted by
    /// name; all must share one shape. Outputs are NNNNNN_img.f32 (blended
    /// image), NNNNNN_lbl.f32 (label map) and manifest.json, where NNNNNN is
    /// the zero-padded sample index. Exit status 2 means some samples failed
    /// to solve; they are listed in the manifest.
    Generate(GenerateArgs),
    /// Blend one patch of --source into --dest and write image and label.
    Blend(BlendArgs),
    /// Compute average precision of score maps against ground truth.
    ///
    /// Every .f32 score map in --scores is reduced to one score and matched
    /// by file stem against the `id` column of --labels, a CSV with header
    /// `id,anomalous` and an optional third column `clip`. `anomalous` is
    /// 0/1 or true/false. Writes to --output: pr_curve.csv
    /// (threshold,recall,precision), histogram.csv
    /// (bin_low,bin_high,normal,anomalous), scores.csv (id,score,anomalous)
    /// and ap.txt.
    Evaluate(evaluate::EvaluateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Fpi,
    Pii,
}

impl From<Mode> for BlendMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Fpi => BlendMode::Fpi,
            Mode::Pii => BlendMode::Pii,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Cg,
    Dense,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutputFormat {
    RawF32,
    Png8,
    Png16,
}

impl From<OutputFormat> for ImageFormat {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::RawF32 => ImageFormat::RawF32,
            OutputFormat::Png8 => ImageFormat::Png8,
            OutputFormat::Png16 => ImageFormat::Png16,
        }
    }
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Relative residual ‖Af − b‖/‖b‖ at which the solve stops.
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
    /// Iteration cap per channel [default: 10 × patch pixels].
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long, value_enum, default_value_t = Method::Cg)]
    solver: Method,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            rel_tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            method: match self.solver {
                Method::Cg => SolveMethod::ConjugateGradient,
                Method::Dense => SolveMethod::DirectDense,
            },
        }
    }
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Pii)]
    mode: Mode,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Patch side as a fraction of each axis.
    #[arg(long, default_value_t = 0.1)]
    size_min: f64,
    #[arg(long, default_value_t = 0.4)]
    size_max: f64,
    /// Patch centre as a fraction of each axis.
    #[arg(long, default_value_t = 0.1)]
    center_min: f64,
    #[arg(long, default_value_t = 0.9)]
    center_max: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha_min: f64,
    #[arg(long, default_value_t = 0.95)]
    alpha_max: f64,
    /// Scale each input to zero mean and unit standard deviation first.
    #[arg(long)]
    normalize: bool,
    /// Worker threads; 0 uses all cores.
    #[arg(long, env = "PII_WORKERS", default_value_t = 0)]
    workers: usize,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Args)]
struct BlendArgs {
    /// Destination image (.png or .f32).
    #[arg(long)]
    dest: PathBuf,
    /// Source image (.png or .f32).
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    top: usize,
    #[arg(long)]
    left: usize,
    #[arg(long)]
    height: usize,
    #[arg(long)]
    width: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = Mode::Pii)]
    mode: Mode,
    #[arg(long)]
    output_image: PathBuf,
    #[arg(long)]
    output_label: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::RawF32)]
    output_format: OutputFormat,
    #[command(flatten)]
    solver: SolverArgs,
}

/// Failure split by exit status.
enum Failure {
    Usage(anyhow::Error),
    Fatal(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let usage = matches!(
            e.downcast_ref::<pii::Error>(),
            Some(pii::Error::InvalidConfig(_)) | Some(pii::Error::InvalidRegion(_))
        );
        if usage {
            Failure::Usage(e)
        } else {
            Failure::Fatal(e)
        }
    }
}

impl From<pii::Error> for Failure {
    fn from(e: pii::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Generate(args) => generate(args),
        Command::Blend(args) => blend(args).map(|_| ExitCode::SUCCESS),
        Command::Evaluate(args) => evaluate::run(args).map(|_| ExitCode::SUCCESS),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Fatal(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FATAL)
        }
    }
}

fn generate(args: GenerateArgs) -> Result<ExitCode, Failure> {
    let config = CorpusConfig {
        mode: args.mode.into(),
        count: args.count,
        sampler: SamplerConfig {
            size_fraction_range: FractionRange::new(args.size_min, args.size_max),
            center_fraction_range: FractionRange::new(args.center_min, args.center_max),
            alpha_range: FractionRange::new(args.alpha_min, args.alpha_max),
            seed: args.seed,
        },
        solver: args.solver.config(),
        normalize: args.normalize,
        workers: args.workers,
    };
    let manifest = generate_corpus(&args.input, &args.output, &config)
        .with_context(|| format!("generating corpus from {}", args.input.display()))?;
    println!(
        "wrote {} of {} samples to {}",
        manifest.count - manifest.failed,
        manifest.count,
        args.output.display()
    );
    if manifest.failed > 0 {
        eprintln!("{} samples failed; see manifest", manifest.failed);
        return Ok(ExitCode::from(EXIT_PARTIAL));
    }
    Ok(ExitCode::SUCCESS)
}

fn load(path: &Path) -> anyhow::Result<Image> {
    load_image_auto(path).with_context(|| format!("loading {}", path.display()))
}

fn blend(args: BlendArgs) -> Result<(), Failure> {
    let dest = load(&args.dest)?;
    let source = load(&args.source)?;
    let region = PatchRegion::new(args.top, args.left, args.height, args.width, dest.height(), dest.width())?;
    let spec = PatchSpec::new(region, args.alpha, 0, 1)?;
    let image = match args.mode {
        Mode::Fpi => fpi_blend(&dest, &source, &spec)?,
        Mode::Pii => {
            let (image, stats) = pii_blend_with_stats(&dest, &source, &spec, &args.solver.config())?;
            println!(
                "residual_norm {:e} iterations {}",
                stats.residual_norm, stats.iterations
            );
            image
        }
    };
    let label: LabelMap<f64> = make_label(&spec, dest.height(), dest.width())?;
    let format = args.output_format.into();
    save_image(&image, &args.output_image, format)
        .with_context(|| format!("writing {}", args.output_image.display()))?;
    let label_format = match format {
        // labels are fractional
        ImageFormat::Png8 | ImageFormat::Png16 => ImageFormat::RawF32,
        f => f,
    };
    save_image(label.grid(), &args.output_label, label_format)
        .with_context(|| format!("writing {}", args.output_label.display()))?;
    Ok(())
}

pub(crate) fn parse_aggregation(s: &str) -> Result<Aggregation, String> {
    s.parse().map_err(|e: pii::Error| e.to_string())
}

pub(crate) fn parse_clip_aggregation(s: &str) -> Result<ClipAggregation, String> {
    s.parse().map_err(|e: pii::Error| e.to_string())
}
