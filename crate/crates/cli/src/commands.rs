use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use gaitspeed::eval::{scatter_export, split_70_15_15, Aggregation, Pair};
use gaitspeed::imu::{
    apply_calibration, parse_session_at, read_manifest, session_file_name, trim_session, write_manifest,
    write_session, ManifestEntry, DEFAULT_SAMPLE_RATE_HZ, DEFAULT_TRIM_SECONDS,
};
use gaitspeed::pipeline::{evaluate, train_lopo, train_split, windows_from_manifest, windows_from_sessions, WindowingConfig};
use gaitspeed::spectral::step_frequency;
use gaitspeed::speednet::{
    build_model, load_model, predict_dataset, random_search, save_model, train, EpochRecord, Monitor, SearchResult,
};
use gaitspeed::synth::{generate_dataset, speed_grid};
use gaitspeed::window::{DEFAULT_FRAME_SIZE, DEFAULT_OVERLAP};
use gaitspeed::{
    ArchSpec, CadenceConfig, CalibrationParams, Error, EvalReport, LopoConfig, LopoReport, SearchSpace, SegmentMode,
    SplitSpec, SynthConfig, TrainConfig, WindowedDataset,
};

const THREADS_VAR: &str = "GAITSPEED_THREADS";

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or inputs that cannot be found; exit code 2.
    Usage(String),
    /// Everything else; exit code 1.
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) | Self::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::ManifestNotFound(_)
            | Error::InvalidArgument(_)
            | Error::OutOfRange { .. }
            | Error::InvalidOverlap(_) => Self::Usage(e.to_string()),
            other => Self::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "gaitspeed", version, about = "Gait speed estimation from wrist IMU recordings")]
pub struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Calibrate and trim every session of a manifest into a new directory.
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cut a manifest's sessions into labeled windows (binary GSW1 file).
    Segment {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate step frequency of one session CSV.
    Stepfreq {
        #[arg(long)]
        input: PathBuf,
        /// Search band in Hz as LOW:HIGH.
        #[arg(long, default_value = "0.5:4.0")]
        band: String,
        /// Steps per dominant spectral cycle.
        #[arg(long, default_value_t = 2.0)]
        harmonic: f64,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE_HZ)]
        rate: f64,
        /// Use the recording as is, without trimming.
        #[arg(long)]
        raw: bool,
    },
    /// Generate a synthetic labeled cohort.
    Synth {
        #[arg(long, default_value_t = 15)]
        participants: usize,
        /// START:END:STEP or a comma-separated list, in mph.
        #[arg(long, default_value = "3.0:7.0:0.5")]
        speeds: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = gaitspeed::synth::DEFAULT_DURATION_S)]
        duration: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on a random window split and report on the held-back part.
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// Train, test and evaluation fractions.
        #[arg(long, default_value = "0.7:0.15:0.15")]
        split: String,
        #[command(flatten)]
        training: TrainArgs,
        #[arg(long)]
        out: PathBuf,
        /// Epoch log as JSON lines (default: next to the model).
        #[arg(long)]
        log: Option<PathBuf>,
        /// Evaluation report (default: next to the model).
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        scatter: Option<PathBuf>,
    },
    /// Evaluate a saved model on every window of a manifest.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        scatter: Option<PathBuf>,
    },
    /// Leave-one-participant-out cross-validation.
    Lopo {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        training: TrainArgs,
        /// Aggregate over all held-out windows instead of averaging folds.
        #[arg(long)]
        pooled: bool,
        #[arg(long, default_value_t = 0.15)]
        validation_fraction: f64,
        #[arg(long)]
        scatter: Option<PathBuf>,
    },
    /// Random architecture search on a window split.
    Search {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 50)]
        k: usize,
        #[arg(long, default_value = "0.7:0.15:0.15")]
        split: String,
        #[command(flatten)]
        space: SpaceArgs,
        #[command(flatten)]
        training: TrainArgs,
        /// Retrain the winner at the full budget and save it here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict speed for a session CSV or a GSW1 window file.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_OVERLAP)]
        overlap: f64,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE_HZ)]
        rate: f64,
        /// Use a session CSV as is, without trimming.
        #[arg(long)]
        raw: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    PerSession,
    Concatenated,
}

impl From<ModeArg> for SegmentMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::PerSession => SegmentMode::PerSession,
            ModeArg::Concatenated => SegmentMode::Concatenated,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FRAME_SIZE)]
    frame: usize,
    #[arg(long, default_value_t = DEFAULT_OVERLAP)]
    overlap: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::PerSession)]
    mode: ModeArg,
    /// Sessions are already calibrated and trimmed.
    #[arg(long)]
    raw: bool,
}

impl DataArgs {
    fn windowing(&self) -> WindowingConfig {
        WindowingConfig {
            frame_size: self.frame,
            overlap: self.overlap,
            mode: self.mode.into(),
            raw: self.raw,
        }
    }

    fn load(&self) -> CliResult<WindowedDataset> {
        Ok(windows_from_manifest(&self.manifest, &self.windowing())?)
    }
}

/// Search ranges, each `MIN:MAX` inclusive.
#[derive(Debug, Clone, Args)]
pub struct SpaceArgs {
    #[arg(long, default_value = "2:10")]
    conv_layers: String,
    #[arg(long, default_value = "10:100")]
    filter_range: String,
    #[arg(long, default_value = "2:5")]
    dense_layers: String,
    #[arg(long, default_value = "15:500")]
    unit_range: String,
}

impl SpaceArgs {
    fn space(&self) -> CliResult<SearchSpace> {
        let range = |text: &str, flag: &str| -> CliResult<(usize, usize)> {
            match parse_list::<usize>(&text.replace(':', ","), flag)?.as_slice() {
                &[lo, hi] => Ok((lo, hi)),
                _ => Err(CliError::Usage(format!("{flag} expects MIN:MAX, got {text:?}"))),
            }
        };
        let space = SearchSpace {
            conv_layers: range(&self.conv_layers, "--conv-layers")?,
            filters: range(&self.filter_range, "--filter-range")?,
            dense_layers: range(&self.dense_layers, "--dense-layers")?,
            units: range(&self.unit_range, "--unit-range")?,
        };
        space.validate()?;
        Ok(space)
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 10)]
    patience: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.2)]
    dropout: f64,
    /// Convolution filters per layer, comma-separated.
    #[arg(long, default_value = "27,45")]
    filters: String,
    /// Hidden dense units per layer, comma-separated.
    #[arg(long, default_value = "180,30")]
    units: String,
    /// Stop on training loss instead of the held-out loss.
    #[arg(long)]
    monitor_training: bool,
}

impl TrainArgs {
    fn config(&self) -> CliResult<TrainConfig> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(CliError::Usage(format!("learning rate must be non-negative, got {}", self.lr)));
        }
        let mut config = TrainConfig {
            max_epochs: self.epochs,
            patience: self.patience,
            batch_size: self.batch_size,
            dropout: self.dropout,
            monitor: if self.monitor_training {
                Monitor::Training
            } else {
                Monitor::Validation
            },
            seed: self.seed,
            ..TrainConfig::default()
        };
        config.optimizer.learning_rate = self.lr;
        config.validate()?;
        Ok(config)
    }

    fn arch(&self, frames: usize) -> CliResult<ArchSpec> {
        let arch = ArchSpec {
            input_frames: frames,
            conv_filters: parse_list(&self.filters, "--filters")?,
            dense_units: parse_list(&self.units, "--units")?,
            dropout: self.dropout,
        };
        arch.validate_structure()?;
        Ok(arch)
    }
}

fn parse_list<T: std::str::FromStr>(text: &str, flag: &str) -> CliResult<Vec<T>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{flag}: cannot parse {s:?}")))
        })
        .collect()
}

fn parse_colon(text: &str, flag: &str) -> CliResult<Vec<f64>> {
    text.split(':')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("{flag}: cannot parse {s:?}")))
        })
        .collect()
}

fn parse_split(text: &str, seed: u64) -> CliResult<SplitSpec> {
    let parts = parse_colon(text, "--split")?;
    let fractions: [f64; 3] = parts
        .try_into()
        .map_err(|_| CliError::Usage(format!("--split expects three fractions, got {text:?}")))?;
    let spec = SplitSpec { fractions, seed };
    spec.validate()?;
    Ok(spec)
}

fn parse_band(text: &str) -> CliResult<(f64, f64)> {
    match parse_colon(text, "--band")?.as_slice() {
        &[low, high] if low < high => Ok((low, high)),
        _ => Err(CliError::Usage(format!("--band expects LOW:HIGH, got {text:?}"))),
    }
}

fn parse_speeds(text: &str) -> CliResult<Vec<f64>> {
    if text.contains(':') {
        match parse_colon(text, "--speeds")?.as_slice() {
            &[start, end, step] => Ok(speed_grid(start, end, step)?),
            _ => Err(CliError::Usage(format!("--speeds expects START:END:STEP, got {text:?}"))),
        }
    } else {
        parse_list(text, "--speeds")
    }
}

/// Caps the global rayon pool when `GAITSPEED_THREADS` is set.
pub fn configure_threads() -> CliResult {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_VAR} must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn run(cli: Cli) -> CliResult {
    let json = cli.json;
    match cli.command {
        Command::Ingest { manifest, out } => ingest(&manifest, &out, json),
        Command::Segment { data, out } => segment(&data, &out, json),
        Command::Stepfreq {
            input,
            band,
            harmonic,
            rate,
            raw,
        } => stepfreq(&input, &band, harmonic, rate, raw, json),
        Command::Synth {
            participants,
            speeds,
            seed,
            duration,
            out,
        } => synth(participants, &speeds, seed, duration, &out, json),
        Command::Train {
            data,
            split,
            training,
            out,
            log,
            report,
            scatter,
        } => cmd_train(&data, &split, &training, &out, log, report, scatter, json),
        Command::Eval { model, data, scatter } => cmd_eval(&model, &data, scatter.as_deref(), json),
        Command::Lopo {
            data,
            training,
            pooled,
            validation_fraction,
            scatter,
        } => cmd_lopo(&data, &training, pooled, validation_fraction, scatter.as_deref(), json),
        Command::Search {
            data,
            k,
            split,
            space,
            training,
            out,
        } => cmd_search(&data, k, &split, &space.space()?, &training, out.as_deref(), json),
        Command::Predict {
            model,
            input,
            overlap,
            rate,
            raw,
        } => cmd_predict(&model, &input, overlap, rate, raw, json),
    }
}

fn emit<T: Serialize>(json: bool, value: &T, text: impl FnOnce() -> String) -> CliResult {
    let mut stdout = std::io::stdout().lock();
    if json {
        serde_json::to_writer(&mut stdout, value)?;
        writeln!(stdout)?;
    } else {
        writeln!(stdout, "{}", text())?;
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn metrics_line(report: &EvalReport) -> String {
    let r2 = report.r2.map_or("n/a".to_string(), |r| format!("{r:.4}"));
    format!("mae {:.4} mph, mape {:.2} %, r2 {r2}", report.mae, report.mape)
}

#[derive(Serialize)]
struct IngestSummary {
    sessions: usize,
    manifest: PathBuf,
}

fn ingest(manifest: &Path, out: &Path, json: bool) -> CliResult {
    let entries = read_manifest(manifest)?;
    fs::create_dir_all(out)?;
    let calib = CalibrationParams::identity();
    let mut written = Vec::with_capacity(entries.len());
    for e in &entries {
        let session = parse_session_at(&e.path, &e.participant, e.speed_mph, DEFAULT_SAMPLE_RATE_HZ)?;
        let cleaned = trim_session(&apply_calibration(&session, &calib)?, DEFAULT_TRIM_SECONDS)?;
        let path = out.join(session_file_name(&e.participant, e.speed_mph));
        write_session(&path, &cleaned)?;
        written.push(ManifestEntry { path, ..e.clone() });
    }
    let out_manifest = out.join("manifest.csv");
    write_manifest(&out_manifest, &written)?;
    let summary = IngestSummary {
        sessions: written.len(),
        manifest: out_manifest,
    };
    emit(json, &summary, || {
        format!("{} sessions cleaned, manifest {}", summary.sessions, summary.manifest.display())
    })
}

#[derive(Serialize)]
struct SegmentSummary {
    windows: usize,
    shape: [usize; 3],
    participants: usize,
    out: PathBuf,
}

fn segment(data: &DataArgs, out: &Path, json: bool) -> CliResult {
    let ds = data.load()?;
    ds.write(out)?;
    let summary = SegmentSummary {
        windows: ds.len(),
        shape: ds.shape(),
        participants: ds.participants.len(),
        out: out.to_path_buf(),
    };
    emit(json, &summary, || {
        let [n, f, c] = summary.shape;
        format!("{n} windows of {f}x{c} from {} participants", summary.participants)
    })
}

fn read_input_session(path: &Path, rate: f64, raw: bool) -> CliResult<gaitspeed::Session> {
    if !path.is_file() {
        return Err(CliError::Usage(format!("input not found: {}", path.display())));
    }
    // The label is not used downstream; any positive speed passes validation.
    let session = parse_session_at(path, "input", 1.0, rate)?;
    if raw {
        Ok(session)
    } else {
        Ok(trim_session(&apply_calibration(&session, &CalibrationParams::identity())?, DEFAULT_TRIM_SECONDS)?)
    }
}

fn stepfreq(input: &Path, band: &str, harmonic: f64, rate: f64, raw: bool, json: bool) -> CliResult {
    let config = CadenceConfig {
        band: parse_band(band)?,
        harmonic_multiplier: harmonic,
        ..CadenceConfig::default()
    };
    let session = read_input_session(input, rate, raw)?;
    let accel: Vec<[f64; 3]> = session.samples.iter().map(|s| s.accel()).collect();
    let estimate = step_frequency(&accel, session.sample_rate_hz, &config)?;
    emit(json, &estimate, || {
        format!(
            "dominant {:.4} Hz, step frequency {:.4} Hz",
            estimate.dominant_hz, estimate.step_frequency_hz
        )
    })
}

#[derive(Serialize)]
struct SynthSummary {
    config: SynthConfig,
    sessions: usize,
    manifest: PathBuf,
}

fn synth(participants: usize, speeds: &str, seed: u64, duration: f64, out: &Path, json: bool) -> CliResult {
    let config = SynthConfig {
        participants,
        speeds: parse_speeds(speeds)?,
        master_seed: seed,
        duration_s: duration,
        ..SynthConfig::default()
    };
    let entries = generate_dataset(&config, out)?;
    let summary = SynthSummary {
        config,
        sessions: entries.len(),
        manifest: out.join("manifest.csv"),
    };
    emit(json, &summary, || {
        format!(
            "{} sessions (seed {seed}), manifest {}",
            summary.sessions,
            summary.manifest.display()
        )
    })
}

/// Resolved settings stored inside every training report.
#[derive(Serialize)]
struct RunConfig {
    manifest: PathBuf,
    windowing: WindowingConfig,
    arch: ArchSpec,
    train: TrainConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    split: Option<SplitSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lopo: Option<LopoConfig>,
}

#[derive(Serialize)]
struct TrainReport {
    config: RunConfig,
    model: PathBuf,
    windows: usize,
    train_windows: usize,
    test_windows: usize,
    best_epoch: usize,
    epochs_run: usize,
    report: EvalReport,
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_stem().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    data: &DataArgs,
    split: &str,
    training: &TrainArgs,
    out: &Path,
    log: Option<PathBuf>,
    report_path: Option<PathBuf>,
    scatter: Option<PathBuf>,
    json: bool,
) -> CliResult {
    let config = training.config()?;
    let split = parse_split(split, training.seed)?;
    let arch = training.arch(data.frame)?;
    let ds = data.load()?;

    let log_path = log.unwrap_or_else(|| with_suffix(out, ".epochs.jsonl"));
    let mut log_out = BufWriter::new(File::create(&log_path)?);
    let mut log_err = None;
    let run = train_split(&ds, &arch, &split, &config, |rec: &EpochRecord| {
        if log_err.is_none() {
            if let Err(e) = serde_json::to_writer(&mut log_out, rec)
                .map_err(std::io::Error::from)
                .and_then(|()| writeln!(log_out))
            {
                log_err = Some(e);
            }
        }
    })?;
    if let Some(e) = log_err {
        return Err(e.into());
    }
    log_out.flush()?;

    save_model(out, &run.params)?;
    if let Some(path) = &scatter {
        scatter_export(&run.report, path)?;
    }
    let result = TrainReport {
        config: RunConfig {
            manifest: data.manifest.clone(),
            windowing: data.windowing(),
            arch: run.params.arch.clone(),
            train: config,
            split: Some(split),
            lopo: None,
        },
        model: out.to_path_buf(),
        windows: ds.len(),
        train_windows: run.train_windows,
        test_windows: run.test_windows,
        best_epoch: run.best_epoch,
        epochs_run: run.history.len(),
        report: run.report,
    };
    write_json(&report_path.unwrap_or_else(|| with_suffix(out, ".report.json")), &result)?;
    emit(json, &result, || {
        format!(
            "best epoch {} of {}; evaluation {}",
            result.best_epoch,
            result.epochs_run,
            metrics_line(&result.report)
        )
    })
}

#[derive(Serialize)]
struct EvalOutput {
    model: PathBuf,
    manifest: PathBuf,
    windowing: WindowingConfig,
    windows: usize,
    report: EvalReport,
}

fn cmd_eval(model: &Path, data: &DataArgs, scatter: Option<&Path>, json: bool) -> CliResult {
    let ds = data.load()?;
    let params = load_model(model)?;
    let report = evaluate(&params, &ds)?;
    if let Some(path) = scatter {
        scatter_export(&report, path)?;
    }
    let out = EvalOutput {
        model: model.to_path_buf(),
        manifest: data.manifest.clone(),
        windowing: data.windowing(),
        windows: ds.len(),
        report,
    };
    emit(json, &out, || format!("{} windows: {}", out.windows, metrics_line(&out.report)))
}

#[derive(Serialize)]
struct LopoOutput {
    config: RunConfig,
    windows: usize,
    #[serde(flatten)]
    report: LopoReport,
}

fn cmd_lopo(
    data: &DataArgs,
    training: &TrainArgs,
    pooled: bool,
    validation_fraction: f64,
    scatter: Option<&Path>,
    json: bool,
) -> CliResult {
    let config = training.config()?;
    let arch = training.arch(data.frame)?;
    let lopo = LopoConfig {
        seed: training.seed,
        validation_fraction,
        aggregation: if pooled {
            Aggregation::Pooled
        } else {
            Aggregation::PerFold
        },
    };
    let ds = data.load()?;
    let report = train_lopo(&ds, &arch, &config, &lopo)?;
    if let Some(path) = scatter {
        let pairs: Vec<Pair> = report.folds.iter().flat_map(|f| f.report.pairs.iter().copied()).collect();
        let truth: Vec<f64> = pairs.iter().map(|p| p.truth).collect();
        let pred: Vec<f64> = pairs.iter().map(|p| p.predicted).collect();
        scatter_export(&EvalReport::from_predictions(&truth, &pred)?, path)?;
    }
    let out = LopoOutput {
        config: RunConfig {
            manifest: data.manifest.clone(),
            windowing: data.windowing(),
            arch,
            train: config,
            split: None,
            lopo: Some(lopo),
        },
        windows: ds.len(),
        report,
    };
    emit(json, &out, || {
        let mut text = String::new();
        for fold in &out.report.folds {
            text.push_str(&format!("{}: {}\n", fold.participant, metrics_line(&fold.report)));
        }
        let agg = &out.report.aggregate;
        let r2 = agg.r2.map_or("n/a".to_string(), |r| format!("{r:.4}"));
        text.push_str(&format!(
            "aggregate ({} folds): mae {:.4} mph, mape {:.2} %, r2 {r2}",
            out.report.folds.len(),
            agg.mae,
            agg.mape
        ));
        text
    })
}

#[derive(Serialize)]
struct SearchOutput {
    space: SearchSpace,
    k: usize,
    seed: u64,
    budget: TrainConfig,
    search: SearchResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    retrained: Option<RetrainSummary>,
}

#[derive(Serialize)]
struct RetrainSummary {
    model: PathBuf,
    best_epoch: usize,
    report: EvalReport,
}

fn cmd_search(
    data: &DataArgs,
    k: usize,
    split: &str,
    space: &SearchSpace,
    training: &TrainArgs,
    out: Option<&Path>,
    json: bool,
) -> CliResult {
    let config = training.config()?;
    let split = parse_split(split, training.seed)?;
    let ds = data.load()?;
    let (train_set, test_set, eval_set) = split_70_15_15(&ds, &split)?;
    let budget = config.search_budget();
    let search = random_search(space, k, training.seed, &budget, &train_set, &test_set)?;

    let retrained = match out {
        Some(path) => {
            let winner = search.best();
            let params = build_model(&winner.arch, winner.seed)?;
            let full = TrainConfig {
                seed: winner.seed,
                ..config.clone()
            };
            let outcome = train(params, &train_set, &test_set, &full)?;
            save_model(path, &outcome.params)?;
            Some(RetrainSummary {
                model: path.to_path_buf(),
                best_epoch: outcome.best_epoch,
                report: evaluate(&outcome.params, &eval_set)?,
            })
        }
        None => None,
    };
    let result = SearchOutput {
        space: *space,
        k,
        seed: training.seed,
        budget,
        search,
        retrained,
    };
    emit(json, &result, || {
        let best = result.search.best();
        let mut text = format!(
            "best of {k}: conv {:?}, dense {:?}, validation mae {:.4}",
            best.arch.conv_filters, best.arch.dense_units, best.val_mae
        );
        if let Some(r) = &result.retrained {
            text.push_str(&format!("\nretrained: {}", metrics_line(&r.report)));
        }
        text
    })
}

#[derive(Debug, Serialize)]
struct Prediction {
    windows: usize,
    predictions: Vec<f64>,
    /// Session estimate: mean of the window predictions.
    mean_mph: f64,
}

fn cmd_predict(model: &Path, input: &Path, overlap: f64, rate: f64, raw: bool, json: bool) -> CliResult {
    let params = load_model(model)?;
    let ds = if is_window_file(input)? {
        WindowedDataset::read(input)?
    } else {
        let session = read_input_session(input, rate, raw)?;
        let config = WindowingConfig {
            frame_size: params.arch.input_frames,
            overlap,
            mode: SegmentMode::PerSession,
            raw: true,
        };
        windows_from_sessions(std::slice::from_ref(&session), &config)?
    };
    if ds.frame_size != params.arch.input_frames {
        return Err(Error::ShapeMismatch {
            expected: format!("{}-row windows", params.arch.input_frames),
            got: format!("{}-row windows", ds.frame_size),
        }
        .into());
    }
    if ds.is_empty() {
        return Err(Error::Empty.into());
    }
    let predictions = predict_dataset(&params, &ds)?;
    let mean_mph = predictions.iter().sum::<f64>() / predictions.len() as f64;
    let out = Prediction {
        windows: predictions.len(),
        predictions,
        mean_mph,
    };
    emit(json, &out, || format!("{:.4} mph over {} windows", out.mean_mph, out.windows))
}

fn is_window_file(path: &Path) -> CliResult<bool> {
    if !path.is_file() {
        return Err(CliError::Usage(format!("input not found: {}", path.display())));
    }
    let mut magic = [0u8; 4];
    let mut file = File::open(path)?;
    Ok(file.read(&mut magic)? == 4 && &magic == b"GSW1")
}
