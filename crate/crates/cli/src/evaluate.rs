use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use pii::evaluation::{write_histogram_csv, write_pr_csv};
use pii::io::{decode_raw_f32, RAW_EXTENSION};
use pii::{aggregate_score, average_precision, clip_score, score_histogram, Aggregation, ClipAggregation, ScoredSample};

use crate::Failure;

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory of .f32 score maps, one per test image.
    #[arg(long)]
    scores: PathBuf,
    /// CSV with header `id,anomalous[,clip]`.
    #[arg(long)]
    labels: PathBuf,
    /// Directory for the report files.
    #[arg(long)]
    output: PathBuf,
    /// Pixel-to-image reduction: mean, max or topk:K.
    #[arg(long, default_value = "mean", value_parser = crate::parse_aggregation)]
    aggregation: Aggregation,
    /// Score clips instead of frames (mean or max); needs the `clip` column.
    #[arg(long, value_parser = crate::parse_clip_aggregation)]
    clip_aggregation: Option<ClipAggregation>,
    #[arg(long, default_value_t = 20)]
    bins: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no ground-truth entry for score map `{0}`")]
    MissingLabel(String),
    #[error("malformed score map {path}: {reason}")]
    MalformedScoreMap { path: PathBuf, reason: String },
    #[error("labels file line {line}: {reason}")]
    BadLabels { line: usize, reason: String },
    #[error("clip `{0}` mixes anomalous and normal frames")]
    InconsistentClip(String),
}

#[derive(Debug, Clone)]
pub struct LabelEntry {
    pub anomalous: bool,
    pub clip: Option<String>,
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}

pub fn parse_labels(text: &str) -> Result<HashMap<String, LabelEntry>, EvalError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let header_ok = lines.next().map_or(false, |(_, h)| {
        let cols: Vec<_> = h.split(',').map(str::trim).collect();
        cols == ["id", "anomalous"] || cols == ["id", "anomalous", "clip"]
    });
    if !header_ok {
        return Err(EvalError::BadLabels {
            line: 1,
            reason: "expected header `id,anomalous` or `id,anomalous,clip`".into(),
        });
    }
    let mut out = HashMap::new();
    for (i, line) in lines {
        let bad = |reason: &str| EvalError::BadLabels { line: i + 1, reason: reason.into() };
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if !(2..=3).contains(&cols.len()) || cols[0].is_empty() {
            return Err(bad("expected id,anomalous[,clip]"));
        }
        let anomalous = parse_bool(cols[1]).ok_or_else(|| bad("anomalous must be 0, 1, true or false"))?;
        let clip = cols.get(2).filter(|c| !c.is_empty()).map(|c| c.to_string());
        if out.insert(cols[0].to_string(), LabelEntry { anomalous, clip }).is_some() {
            return Err(bad("duplicate id"));
        }
    }
    Ok(out)
}

fn load_score(path: &Path, aggregation: Aggregation) -> anyhow::Result<f64> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let malformed = |reason: String| EvalError::MalformedScoreMap { path: path.to_path_buf(), reason };
    let grid = decode_raw_f32::<f64>(&bytes).map_err(|e| malformed(e.to_string()))?;
    if grid.channels() != 1 {
        return Err(malformed(format!("expected one channel, found {}", grid.channels())).into());
    }
    Ok(aggregate_score(grid.data(), aggregation).map_err(|e| malformed(e.to_string()))?)
}

/// Score every map in `dir` and pair it with its label, sorted by id.
pub fn score_directory(
    dir: &Path,
    labels: &HashMap<String, LabelEntry>,
    aggregation: Aggregation,
) -> anyhow::Result<Vec<(String, f64, LabelEntry)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.is_file() && p.extension().and_then(|e| e.to_str()) == Some(RAW_EXTENSION));
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for path in paths {
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let entry = labels.get(&id).ok_or_else(|| EvalError::MissingLabel(id.clone()))?.clone();
        let score = load_score(&path, aggregation)?;
        out.push((id, score, entry));
    }
    Ok(out)
}

fn group_clips(
    frames: Vec<(String, f64, LabelEntry)>,
    method: ClipAggregation,
) -> anyhow::Result<Vec<ScoredSample>> {
    let mut clips: BTreeMap<String, (Vec<f64>, bool)> = BTreeMap::new();
    for (id, score, entry) in frames {
        let clip = entry.clip.ok_or_else(|| EvalError::BadLabels {
            line: 0,
            reason: format!("frame `{id}` has no clip while --clip-aggregation is set"),
        })?;
        let slot = clips.entry(clip.clone()).or_insert_with(|| (Vec::new(), entry.anomalous));
        if slot.1 != entry.anomalous {
            return Err(EvalError::InconsistentClip(clip).into());
        }
        slot.0.push(score);
    }
    clips
        .into_iter()
        .map(|(clip, (scores, anomalous))| Ok(ScoredSample::new(clip, clip_score(&scores, method)?, anomalous)?))
        .collect()
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

pub fn run(args: EvaluateArgs) -> Result<(), Failure> {
    if args.bins == 0 {
        return Err(Failure::Usage(anyhow::anyhow!("--bins must be at least 1")));
    }
    let text = fs::read_to_string(&args.labels).with_context(|| format!("reading {}", args.labels.display()))?;
    let labels = parse_labels(&text).map_err(anyhow::Error::from)?;
    let frames = score_directory(&args.scores, &labels, args.aggregation)?;
    if frames.is_empty() {
        return Err(anyhow::Error::from(pii::Error::EmptyInput)
            .context(format!("no .{RAW_EXTENSION} score maps in {}", args.scores.display()))
            .into());
    }
    let samples = match args.clip_aggregation {
        Some(method) => group_clips(frames, method)?,
        None => frames
            .into_iter()
            .map(|(id, score, entry)| ScoredSample::new(id, score, entry.anomalous))
            .collect::<pii::Result<_>>()?,
    };
    let curve = average_precision(&samples)?;
    let hist = score_histogram(&samples, args.bins)?;

    fs::create_dir_all(&args.output).with_context(|| format!("creating {}", args.output.display()))?;
    let write = || -> anyhow::Result<()> {
        let mut pr = create(&args.output.join("pr_curve.csv"))?;
        write_pr_csv(&curve, &mut pr)?;
        pr.flush()?;
        let mut h = create(&args.output.join("histogram.csv"))?;
        write_histogram_csv(&hist, &mut h)?;
        h.flush()?;
        let mut s = create(&args.output.join("scores.csv"))?;
        writeln!(s, "id,score,anomalous")?;
        for sample in &samples {
            writeln!(s, "{},{},{}", sample.id, sample.score, u8::from(sample.is_anomalous))?;
        }
        s.flush()?;
        fs::write(args.output.join("ap.txt"), format!("{}\n", curve.average_precision))?;
        Ok(())
    };
    write()?;
    println!("AP = {:.6}", curve.average_precision);
    Ok(())
}
