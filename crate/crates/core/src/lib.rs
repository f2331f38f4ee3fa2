//! Walking and running speed estimation from wrist-worn accelerometer and
//! gyroscope signals.
//!
//! The pipeline runs: [`imu`] ingestion, calibration and trimming;
//! [`window`] segmentation into 3 s frames; the dual-branch convolutional
//! regressor in [`speednet`] built on the small layer toolkit in [`nn`];
//! and [`eval`] metrics and cross-validation. [`spectral`] estimates step
//! frequency by FFT and [`synth`] produces labeled synthetic cohorts.

pub mod error;
pub mod eval;
pub mod imu;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod spectral;
pub mod speednet;
pub mod synth;
pub mod window;

pub use error::{Error, Result};
pub use eval::{EvalReport, LopoConfig, LopoReport, SplitSpec};
pub use imu::{CalibrationParams, ImuSample, Session};
pub use spectral::{CadenceConfig, CadenceEstimate, Spectrum};
pub use speednet::{ArchSpec, SearchSpace, SpeedNetParams, TrainConfig};
pub use synth::{GaitModelParams, ParticipantProfile, SynthConfig};
pub use window::{SegmentMode, WindowedDataset};
