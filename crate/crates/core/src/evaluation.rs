//! Image-level score aggregation, average precision and score histograms.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Pixel-to-image reduction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Mean,
    Max,
    /// Mean of the `k` largest values.
    TopKMean(usize),
}

impl FromStr for Aggregation {
    type Err = Error;

    /// `mean`, `max` or `topk:<k>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Aggregation::Mean),
            "max" => Ok(Aggregation::Max),
            _ => s
                .strip_prefix("topk:")
                .and_then(|k| k.parse().ok())
                .map(Aggregation::TopKMean)
                .ok_or_else(|| {
                    Error::InvalidConfig(format!("unknown aggregation {s:?} (mean, max, topk:<k>)"))
                }),
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Aggregation::Mean => f.write_str("mean"),
            Aggregation::Max => f.write_str("max"),
            Aggregation::TopKMean(k) => write!(f, "topk:{k}"),
        }
    }
}

/// Frame-to-clip reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipAggregation {
    Mean,
    Max,
}

impl FromStr for ClipAggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(ClipAggregation::Mean),
            "max" => Ok(ClipAggregation::Max),
            _ => Err(Error::InvalidConfig(format!("unknown clip aggregation {s:?} (mean, max)"))),
        }
    }
}

pub fn aggregate_score<T: Scalar>(values: &[T], method: Aggregation) -> Result<T> {
    if values.is_empty() {
        return Err(Error::EmptyMap);
    }
    let n = values.len();
    Ok(match method {
        Aggregation::Mean => values.iter().copied().sum::<T>() / T::from_usize(n).unwrap(),
        Aggregation::Max => values.iter().copied().fold(T::neg_infinity(), T::max),
        Aggregation::TopKMean(k) => {
            if k == 0 || k > n {
                return Err(Error::BadK { k, len: n });
            }
            let mut sorted = values.to_vec();
            sorted.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
            sorted[..k].iter().copied().sum::<T>() / T::from_usize(k).unwrap()
        }
    })
}

pub fn clip_score(frames: &[f64], method: ClipAggregation) -> Result<f64> {
    if frames.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(match method {
        ClipAggregation::Mean => frames.iter().sum::<f64>() / frames.len() as f64,
        ClipAggregation::Max => frames.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub id: String,
    pub score: f64,
    pub is_anomalous: bool,
}

impl ScoredSample {
    pub fn new(id: impl Into<String>, score: f64, is_anomalous: bool) -> Result<Self> {
        if !score.is_finite() {
            return Err(Error::Domain(format!("score {score} is not finite")));
        }
        Ok(Self {
            id: id.into(),
            score,
            is_anomalous,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    /// Samples scoring at least this are predicted anomalous.
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    /// One point per distinct score, in descending score order.
    pub points: Vec<PrPoint>,
    pub average_precision: f64,
}

/// Step-wise average precision `Σ (R_n - R_{n-1}) P_n` over descending
/// thresholds. Samples with equal scores enter together as one threshold.
pub fn average_precision(samples: &[ScoredSample]) -> Result<PrCurve> {
    if let Some(i) = samples.iter().position(|s| !s.score.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    let positives = samples.iter().filter(|s| s.is_anomalous).count();
    if positives == 0 {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<&ScoredSample> = samples.iter().collect();
    order.sort_by(|a, b| b.score.total_cmp(&a.score));

    let total = positives as f64;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut points = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let threshold = order[i].score;
        while i < order.len() && order[i].score == threshold {
            if order[i].is_anomalous {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let recall = tp as f64 / total;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        points.push(PrPoint {
            threshold,
            recall,
            precision,
        });
    }
    Ok(PrCurve {
        points,
        average_precision: ap.clamp(0.0, 1.0),
    })
}

/// Per-class counts over shared, equal-width bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreHistogram {
    /// `bins + 1` edges. All equal when every score is identical.
    pub edges: Vec<f64>,
    pub normal: Vec<usize>,
    pub anomalous: Vec<usize>,
}

/// Bins span the combined score range; the top edge is inclusive. With a
/// zero-width range every sample lands in the first bin.
pub fn score_histogram(samples: &[ScoredSample], bins: usize) -> Result<ScoreHistogram> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    if bins == 0 {
        return Err(Error::InvalidConfig("histogram needs at least one bin".into()));
    }
    let lo = samples.iter().map(|s| s.score).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.score).fold(f64::NEG_INFINITY, f64::max);
    let width = hi - lo;
    let edges = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 / bins as f64 })
        .collect();
    let mut normal = vec![0; bins];
    let mut anomalous = vec![0; bins];
    for s in samples {
        let bin = if width > 0.0 {
            (((s.score - lo) / width * bins as f64) as usize).min(bins - 1)
        } else {
            0
        };
        if s.is_anomalous {
            anomalous[bin] += 1;
        } else {
            normal[bin] += 1;
        }
    }
    Ok(ScoreHistogram {
        edges,
        normal,
        anomalous,
    })
}

/// Columns: `threshold,recall,precision`.
pub fn write_pr_csv<W: Write>(curve: &PrCurve, mut out: W) -> std::io::Result<()> {
    writeln!(out, "threshold,recall,precision")?;
    for p in &curve.points {
        writeln!(out, "{},{},{}", p.threshold, p.recall, p.precision)?;
    }
    Ok(())
}

/// Columns: `bin_low,bin_high,normal,anomalous`.
pub fn write_histogram_csv<W: Write>(hist: &ScoreHistogram, mut out: W) -> std::io::Result<()> {
    writeln!(out, "bin_low,bin_high,normal,anomalous")?;
    for (i, (n, a)) in hist.normal.iter().zip(&hist.anomalous).enumerate() {
        writeln!(out, "{},{},{},{}", hist.edges[i], hist.edges[i + 1], n, a)?;
    }
    Ok(())
}
