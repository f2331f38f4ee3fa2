//! Leave-one-participant-out cross-validation.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EvalReport;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded_rng};
use crate::speednet::SpeedNetParams;
use crate::window::WindowedDataset;

/// Anything that maps a window to a speed.
pub trait Regressor {
    fn predict_window(&self, window: &[f64]) -> Result<f64>;
}

impl Regressor for SpeedNetParams {
    fn predict_window(&self, window: &[f64]) -> Result<f64> {
        self.predict(window)
    }
}

impl<F: Fn(&[f64]) -> f64> Regressor for F {
    fn predict_window(&self, window: &[f64]) -> Result<f64> {
        Ok(self(window))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Mean of the per-fold metrics.
    #[default]
    PerFold,
    /// Metrics over all held-out predictions at once.
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LopoConfig {
    pub seed: u64,
    /// Share of the remaining participants' windows held back for early
    /// stopping.
    pub validation_fraction: f64,
    pub aggregation: Aggregation,
}

impl Default for LopoConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            validation_fraction: 0.15,
            aggregation: Aggregation::PerFold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub participant: String,
    pub seed: u64,
    pub train_windows: usize,
    pub validation_windows: usize,
    pub report: EvalReport,
    /// Dataset indices used for fitting (training plus validation).
    #[serde(skip)]
    pub fit_indices: Vec<usize>,
    #[serde(skip)]
    pub held_out_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub mae: f64,
    pub mape: f64,
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LopoReport {
    pub aggregation: Aggregation,
    pub aggregate: AggregateMetrics,
    pub folds: Vec<FoldReport>,
}

/// One fold per participant. `trainer` receives the fold's training and
/// validation sets and a fold seed derived from `config.seed`; folds run in
/// parallel.
pub fn leave_one_participant_out<M, F>(
    dataset: &WindowedDataset,
    trainer: F,
    config: &LopoConfig,
) -> Result<LopoReport>
where
    M: Regressor,
    F: Fn(&WindowedDataset, &WindowedDataset, u64) -> Result<M> + Sync,
{
    if !(config.validation_fraction > 0.0 && config.validation_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "validation fraction {} must lie in (0, 1)",
            config.validation_fraction
        )));
    }
    let participants = dataset.distinct_participants();
    if participants.len() < 2 {
        return Err(Error::TooFewParticipants(participants.len()));
    }

    let folds = participants
        .par_iter()
        .enumerate()
        .map(|(fold, &pid)| {
            let seed = derive_seed(config.seed, fold as u64);
            let (held_out, mut fit): (Vec<usize>, Vec<usize>) =
                (0..dataset.len()).partition(|&i| dataset.origins[i].participant == pid);
            fit.shuffle(&mut seeded_rng(seed));
            let n_val = ((config.validation_fraction * fit.len() as f64).floor() as usize).max(1);
            if n_val >= fit.len() {
                return Err(Error::InvalidArgument(format!(
                    "fold {fold} has too few training windows ({})",
                    fit.len()
                )));
            }
            let val_idx = fit[fit.len() - n_val..].to_vec();
            let train_idx = fit[..fit.len() - n_val].to_vec();
            let model = trainer(&dataset.subset(&train_idx), &dataset.subset(&val_idx), seed)?;

            let truth: Vec<f64> = held_out.iter().map(|&i| dataset.labels[i]).collect();
            let pred = held_out
                .iter()
                .map(|&i| model.predict_window(dataset.window(i)))
                .collect::<Result<Vec<_>>>()?;
            Ok(FoldReport {
                participant: dataset.participants[pid as usize].clone(),
                seed,
                train_windows: train_idx.len(),
                validation_windows: val_idx.len(),
                report: EvalReport::from_predictions(&truth, &pred)?,
                fit_indices: fit,
                held_out_indices: held_out,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let aggregate = match config.aggregation {
        Aggregation::PerFold => {
            let n = folds.len() as f64;
            let r2s: Vec<f64> = folds.iter().filter_map(|f| f.report.r2).collect();
            AggregateMetrics {
                mae: folds.iter().map(|f| f.report.mae).sum::<f64>() / n,
                mape: folds.iter().map(|f| f.report.mape).sum::<f64>() / n,
                r2: (!r2s.is_empty()).then(|| r2s.iter().sum::<f64>() / r2s.len() as f64),
            }
        }
        Aggregation::Pooled => {
            let truth: Vec<f64> = folds.iter().flat_map(|f| f.report.truths()).collect();
            let pred: Vec<f64> = folds.iter().flat_map(|f| f.report.predictions()).collect();
            let r = EvalReport::from_predictions(&truth, &pred)?;
            AggregateMetrics {
                mae: r.mae,
                mape: r.mape,
                r2: r.r2,
            }
        }
    };

    Ok(LopoReport {
        aggregation: config.aggregation,
        aggregate,
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_dataset(participants: usize, per: usize) -> WindowedDataset {
        let mut ds = WindowedDataset::empty(1);
        for p in 0..participants {
            for k in 0..per {
                let speed = 3.0 + k as f64 * 0.5;
                ds.push(&[speed; 6], speed, &format!("p{p}"), (p * per + k) as u32)
                    .unwrap();
            }
        }
        ds
    }

    #[test]
    fn folds_are_disjoint_and_cover_participants() {
        let ds = toy_dataset(3, 8);
        let report = leave_one_participant_out(
            &ds,
            |train, val, _| {
                assert!(!train.is_empty() && !val.is_empty());
                Ok(|w: &[f64]| w[0])
            },
            &LopoConfig::default(),
        )
        .unwrap();
        assert_eq!(report.folds.len(), 3);
        for f in &report.folds {
            assert_eq!(f.held_out_indices.len(), 8);
            assert_eq!(f.fit_indices.len(), 16);
            assert!(f.fit_indices.iter().all(|i| !f.held_out_indices.contains(i)));
            assert_eq!(f.report.mae, 0.0);
        }
        assert_eq!(report.aggregate.mape, 0.0);
    }

    #[test]
    fn single_participant_is_rejected() {
        let ds = toy_dataset(1, 5);
        let r = leave_one_participant_out(&ds, |_, _, _| Ok(|_: &[f64]| 1.0), &LopoConfig::default());
        assert!(matches!(r, Err(Error::TooFewParticipants(1))));
    }

    #[test]
    fn per_fold_vs_pooled() {
        let ds = toy_dataset(2, 4);
        // constant predictor: 4.0 mph everywhere
        let run = |aggregation| {
            leave_one_participant_out(
                &ds,
                |_, _, _| Ok(|_: &[f64]| 4.0),
                &LopoConfig {
                    aggregation,
                    ..Default::default()
                },
            )
            .unwrap()
        };
        let per_fold = run(Aggregation::PerFold);
        let pooled = run(Aggregation::Pooled);
        let mean_mape = per_fold.folds.iter().map(|f| f.report.mape).sum::<f64>() / 2.0;
        assert_eq!(per_fold.aggregate.mape, mean_mape);
        // identical folds, so pooling changes nothing here
        assert!((pooled.aggregate.mape - mean_mape).abs() < 1e-12);
    }
}
