//! Mini-batch RMSprop on MAE with early stopping.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::SpeedNetParams;
use crate::error::{Error, Result};
use crate::nn::loss::sign;
use crate::nn::{EarlyStopMonitor, RmsProp, RmsPropState, StopDecision};
use crate::rng::{derive_seed_path, seeded_rng};
use crate::window::WindowedDataset;

const SHUFFLE_TAG: u64 = 0x5348;
const DROPOUT_TAG: u64 = 0x4450;

/// Which loss the early-stopping monitor watches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Monitor {
    #[default]
    Validation,
    Training,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub optimizer: RmsProp,
    pub dropout: f64,
    pub monitor: Monitor,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 1000,
            patience: 10,
            batch_size: 32,
            optimizer: RmsProp::default(),
            dropout: 0.2,
            monitor: Monitor::Validation,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Reduced budget used for each random-search candidate.
    pub fn search_budget(&self) -> Self {
        Self {
            max_epochs: 100,
            patience: 5,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patience < 1 || self.max_epochs < self.patience {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= patience ({}) <= max_epochs ({})",
                self.patience, self.max_epochs
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        crate::nn::dropout::check_rate(self.dropout)
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mae: f64,
    pub val_mae: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the best monitored epoch.
    pub params: SpeedNetParams,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_loss: f64,
}

/// Inference-mode MAE of `params` on a dataset.
pub fn dataset_mae(params: &SpeedNetParams, data: &WindowedDataset) -> Result<f64> {
    let preds = predict_dataset(params, data)?;
    Ok(preds
        .iter()
        .zip(&data.labels)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / data.len() as f64)
}

/// Inference-mode predictions for every window.
pub fn predict_dataset(params: &SpeedNetParams, data: &WindowedDataset) -> Result<Vec<f64>> {
    (0..data.len())
        .into_par_iter()
        .map(|i| params.predict(data.window(i)))
        .collect()
}

fn check_dataset(params: &SpeedNetParams, data: &WindowedDataset, what: &str) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidArgument(format!("{what} set is empty")));
    }
    if data.frame_size != params.arch.input_frames {
        return Err(Error::ShapeMismatch {
            expected: format!("[{}, 6] windows", params.arch.input_frames),
            got: format!("[{}, 6] windows in {what} set", data.frame_size),
        });
    }
    Ok(())
}

pub fn train(
    params: SpeedNetParams,
    train_set: &WindowedDataset,
    validation_set: &WindowedDataset,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    train_observed(params, train_set, validation_set, config, |_| {})
}

/// As [`train`], calling `observer` after every epoch.
pub fn train_observed(
    mut params: SpeedNetParams,
    train_set: &WindowedDataset,
    validation_set: &WindowedDataset,
    config: &TrainConfig,
    mut observer: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    check_dataset(&params, train_set, "training")?;
    check_dataset(&params, validation_set, "validation")?;
    params.arch.dropout = config.dropout;

    let mut state = RmsPropState::new(params.tensors());
    let mut monitor = EarlyStopMonitor::new(config.patience, config.max_epochs);
    let mut best = params.clone();
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    loop {
        let epoch = monitor.epoch + 1;
        order.sort_unstable();
        order.shuffle(&mut seeded_rng(derive_seed_path(
            config.seed,
            &[SHUFFLE_TAG, epoch as u64],
        )));

        let mut abs_err_sum = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let n = batch.len() as f64;
            let model = &params;
            // per-sample gradients may be computed in any order; the sum
            // below always runs in batch order
            let per_sample: Vec<(f64, SpeedNetParams)> = batch
                .par_iter()
                .enumerate()
                .map(|(j, &i)| {
                    let mut rng = seeded_rng(derive_seed_path(
                        config.seed,
                        &[DROPOUT_TAG, epoch as u64, b as u64, j as u64],
                    ));
                    let trace = model.trace(train_set.window(i), Some(&mut rng));
                    let d = trace.output - train_set.labels[i];
                    let mut g = model.zeros_like();
                    model.backward(&trace, sign(d) / n, &mut g);
                    (d.abs(), g)
                })
                .collect();
            let mut grads = params.zeros_like();
            for (err, g) in &per_sample {
                abs_err_sum += err;
                grads.add_assign(g);
            }
            for ((p, g), v) in params
                .tensors_mut()
                .into_iter()
                .zip(grads.tensors())
                .zip(state.accumulators.iter_mut())
            {
                config.optimizer.step(p, g, v)?;
            }
        }

        let train_mae = abs_err_sum / train_set.len() as f64;
        let val_mae = dataset_mae(&params, validation_set)?;
        if !train_mae.is_finite() || !val_mae.is_finite() || !params.all_finite() {
            return Err(Error::NonFiniteLoss(epoch));
        }
        let record = EpochRecord {
            epoch,
            train_mae,
            val_mae,
        };
        observer(&record);
        history.push(record);

        let monitored = match config.monitor {
            Monitor::Validation => val_mae,
            Monitor::Training => train_mae,
        };
        let decision = monitor.update(monitored);
        if monitor.improved_last() {
            best.clone_from(&params);
        }
        if decision == StopDecision::Stop {
            break;
        }
    }

    Ok(TrainOutcome {
        params: best,
        history,
        best_epoch: monitor.best_epoch,
        best_loss: monitor.best_loss,
    })
}
