//! End-to-end runs shared by the command line and the test suites:
//! ingest, clean, segment, split or cross-validate, train, report.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::{leave_one_participant_out, split_70_15_15, EvalReport, LopoConfig, LopoReport, SplitSpec};
use crate::imu::{load_manifest_sessions, prepare_sessions, CalibrationParams, Session};
use crate::speednet::{
    build_model, predict_dataset, train_observed, ArchSpec, EpochRecord, SpeedNetParams, TrainConfig,
};
use crate::window::{segment_dataset, SegmentMode, WindowedDataset, DEFAULT_FRAME_SIZE, DEFAULT_OVERLAP};

/// How sessions become windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowingConfig {
    pub frame_size: usize,
    pub overlap: f64,
    pub mode: SegmentMode,
    /// Skip calibration and trimming (input already cleaned).
    pub raw: bool,
}

impl Default for WindowingConfig {
    fn default() -> Self {
        Self {
            frame_size: DEFAULT_FRAME_SIZE,
            overlap: DEFAULT_OVERLAP,
            mode: SegmentMode::PerSession,
            raw: false,
        }
    }
}

/// Calibrates (identity), trims and segments sessions.
pub fn windows_from_sessions(sessions: &[Session], config: &WindowingConfig) -> Result<WindowedDataset> {
    if config.raw {
        return segment_dataset(sessions, config.frame_size, config.overlap, config.mode);
    }
    let cleaned = prepare_sessions(sessions, &CalibrationParams::identity())?;
    segment_dataset(&cleaned, config.frame_size, config.overlap, config.mode)
}

pub fn windows_from_manifest(manifest: impl AsRef<Path>, config: &WindowingConfig) -> Result<WindowedDataset> {
    windows_from_sessions(&load_manifest_sessions(manifest)?, config)
}

/// Inference-mode report of a model on a dataset.
pub fn evaluate(params: &SpeedNetParams, data: &WindowedDataset) -> Result<EvalReport> {
    let preds = predict_dataset(params, data)?;
    EvalReport::from_predictions(&data.labels, &preds)
}

#[derive(Debug, Clone)]
pub struct SplitRun {
    pub params: SpeedNetParams,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub train_windows: usize,
    pub test_windows: usize,
    /// Report on the held-back evaluation subset.
    pub report: EvalReport,
}

/// Builds a fresh model, trains on the train subset with early stopping on
/// the test subset, and reports on the evaluation subset.
pub fn train_split(
    data: &WindowedDataset,
    arch: &ArchSpec,
    split: &SplitSpec,
    config: &TrainConfig,
    observer: impl FnMut(&EpochRecord),
) -> Result<SplitRun> {
    let (train, test, evaluation) = split_70_15_15(data, split)?;
    let arch = ArchSpec {
        input_frames: data.frame_size,
        dropout: config.dropout,
        ..arch.clone()
    };
    let params = build_model(&arch, config.seed)?;
    let outcome = train_observed(params, &train, &test, config, observer)?;
    let report = evaluate(&outcome.params, &evaluation)?;
    Ok(SplitRun {
        params: outcome.params,
        history: outcome.history,
        best_epoch: outcome.best_epoch,
        train_windows: train.len(),
        test_windows: test.len(),
        report,
    })
}

/// Leave-one-participant-out run where every fold trains a fresh model
/// seeded from the fold seed.
pub fn train_lopo(
    data: &WindowedDataset,
    arch: &ArchSpec,
    config: &TrainConfig,
    lopo: &LopoConfig,
) -> Result<LopoReport> {
    let arch = ArchSpec {
        input_frames: data.frame_size,
        dropout: config.dropout,
        ..arch.clone()
    };
    leave_one_participant_out(
        data,
        |train, val, seed| {
            let params = build_model(&arch, seed)?;
            let config = TrainConfig {
                seed,
                ..config.clone()
            };
            Ok(train_observed(params, train, val, &config, |_| {})?.params)
        },
        lopo,
    )
}
