//! Metrics, the window-level 70/15/15 split and leave-one-participant-out
//! cross-validation.

mod lopo;
pub mod metrics;
mod split;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use lopo::{leave_one_participant_out, Aggregation, FoldReport, LopoConfig, LopoReport, Regressor};
pub use metrics::{mae, mape, r2, r2_about_predictions};
pub use split::{split_70_15_15, split_indices, SplitIndices, SplitSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub truth: f64,
    pub predicted: f64,
}

/// Metrics for all windows sharing one true speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedBucket {
    pub speed_mph: f64,
    pub count: usize,
    pub mean_predicted: f64,
    pub mae: f64,
    pub mape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mae: f64,
    /// Percent.
    pub mape: f64,
    /// `None` when the true speeds have no spread (single-speed subsets).
    pub r2: Option<f64>,
    /// Denominator about the mean prediction instead of the mean truth.
    pub r2_about_predictions: Option<f64>,
    pub per_speed: Vec<SpeedBucket>,
    pub pairs: Vec<Pair>,
}

impl EvalReport {
    pub fn from_predictions(truth: &[f64], pred: &[f64]) -> Result<Self> {
        let mae = metrics::mae(truth, pred)?;
        let mape = metrics::mape(truth, pred)?;
        let r2 = optional(metrics::r2(truth, pred))?;
        let r2_about_predictions = optional(metrics::r2_about_predictions(truth, pred))?;

        let mut speeds: Vec<f64> = truth.to_vec();
        speeds.sort_by(f64::total_cmp);
        speeds.dedup();
        let per_speed = speeds
            .into_iter()
            .map(|s| {
                let (t, p): (Vec<f64>, Vec<f64>) = truth
                    .iter()
                    .zip(pred)
                    .filter(|(t, _)| **t == s)
                    .map(|(t, p)| (*t, *p))
                    .unzip();
                Ok(SpeedBucket {
                    speed_mph: s,
                    count: t.len(),
                    mean_predicted: p.iter().sum::<f64>() / p.len() as f64,
                    mae: metrics::mae(&t, &p)?,
                    mape: metrics::mape(&t, &p)?,
                })
            })
            .collect::<Result<_>>()?;

        Ok(Self {
            mae,
            mape,
            r2,
            r2_about_predictions,
            per_speed,
            pairs: truth
                .iter()
                .zip(pred)
                .map(|(&truth, &predicted)| Pair { truth, predicted })
                .collect(),
        })
    }

    pub fn truths(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.truth).collect()
    }

    pub fn predictions(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.predicted).collect()
    }
}

fn optional(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::DegenerateTruth) | Err(Error::InvalidArgument(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Writes `true,predicted` rows with a header line.
pub fn scatter_export(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    if report.pairs.is_empty() {
        return Err(Error::Empty);
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "true,predicted")?;
    for p in &report.pairs {
        writeln!(out, "{},{}", p.truth, p.predicted)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a file written by [`scatter_export`].
pub fn scatter_import(path: impl AsRef<Path>) -> Result<Vec<Pair>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut pairs = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<f64> {
            row.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::MalformedRow {
                    line,
                    reason: "expected two numbers".into(),
                })
        };
        pairs.push(Pair {
            truth: field(0)?,
            predicted: field(1)?,
        });
    }
    Ok(pairs)
}
