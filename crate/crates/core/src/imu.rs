//! Session data model, CSV ingestion, calibration and edge trimming.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nominal sampling rate of the wrist sensor.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 51.0;
/// Seconds discarded from each end of a session during cleansing.
pub const DEFAULT_TRIM_SECONDS: f64 = 2.5;
/// Low-noise accelerometer range in g.
pub const ACCEL_RANGE_G: f64 = 2.0;
/// Gyroscope range in degrees per second.
pub const GYRO_RANGE_DPS: f64 = 1000.0;

pub const SESSION_HEADER: [&str; 7] = ["t", "ax", "ay", "az", "gx", "gy", "gz"];

/// One timestamped 6-channel reading.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ImuSample {
    /// Seconds since session start.
    pub t: f64,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
    pub gx: f64,
    pub gy: f64,
    pub gz: f64,
}

impl ImuSample {
    pub fn new(t: f64, accel: [f64; 3], gyro: [f64; 3]) -> Self {
        Self {
            t,
            ax: accel[0],
            ay: accel[1],
            az: accel[2],
            gx: gyro[0],
            gy: gyro[1],
            gz: gyro[2],
        }
    }

    pub fn accel(&self) -> [f64; 3] {
        [self.ax, self.ay, self.az]
    }

    pub fn gyro(&self) -> [f64; 3] {
        [self.gx, self.gy, self.gz]
    }

    /// The six signal channels in network column order: accel xyz then gyro xyz.
    pub fn channels(&self) -> [f64; 6] {
        [self.ax, self.ay, self.az, self.gx, self.gy, self.gz]
    }

    fn values(&self) -> [f64; 7] {
        [self.t, self.ax, self.ay, self.az, self.gx, self.gy, self.gz]
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }

    /// True when the sample respects the calibrated sensor ranges.
    pub fn in_sensor_range(&self) -> bool {
        self.accel().iter().all(|a| a.abs() <= ACCEL_RANGE_G)
            && self.gyro().iter().all(|g| g.abs() <= GYRO_RANGE_DPS)
    }
}

/// A fixed-speed treadmill recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub participant_id: String,
    pub speed_mph: f64,
    pub sample_rate_hz: f64,
    pub samples: Vec<ImuSample>,
}

impl Session {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds, counting one sample period per sample.
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Row-major `[T, 6]` copy of the signal channels.
    pub fn channel_matrix(&self) -> Vec<[f64; 6]> {
        self.samples.iter().map(ImuSample::channels).collect()
    }

    /// Checks the structural invariants: positive label and rate, finite
    /// values, strictly increasing time and a sample count that agrees with
    /// the timestamp span to within one sample.
    pub fn validate(&self) -> Result<()> {
        if !(self.speed_mph > 0.0 && self.speed_mph.is_finite()) {
            return Err(Error::InvalidSession(format!(
                "speed must be positive, got {}",
                self.speed_mph
            )));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(Error::InvalidSession(format!(
                "sample rate must be positive, got {}",
                self.sample_rate_hz
            )));
        }
        for (i, s) in self.samples.iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::InvalidSession(format!("sample {i} is not finite")));
            }
        }
        for (i, w) in self.samples.windows(2).enumerate() {
            if w[1].t <= w[0].t {
                return Err(Error::InvalidSession(format!(
                    "timestamp of sample {} does not increase",
                    i + 1
                )));
            }
        }
        if let (Some(first), Some(last)) = (self.samples.first(), self.samples.last()) {
            let expected = (last.t - first.t) * self.sample_rate_hz + 1.0;
            if (expected - self.samples.len() as f64).abs() > 1.0 + 1e-9 {
                return Err(Error::InvalidSession(format!(
                    "{} samples disagree with a {:.3} s span at {} Hz",
                    self.samples.len(),
                    last.t - first.t,
                    self.sample_rate_hz
                )));
            }
        }
        Ok(())
    }
}

/// Reads a session CSV at the nominal 51 Hz rate.
pub fn parse_session(path: impl AsRef<Path>, participant_id: &str, speed_mph: f64) -> Result<Session> {
    parse_session_at(path, participant_id, speed_mph, DEFAULT_SAMPLE_RATE_HZ)
}

pub fn parse_session_at(
    path: impl AsRef<Path>,
    participant_id: &str,
    speed_mph: f64,
    sample_rate_hz: f64,
) -> Result<Session> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;

    let mut samples: Vec<ImuSample> = Vec::new();
    let mut saw_header = false;
    let mut record = csv::StringRecord::new();
    while reader.read_record(&mut record)? {
        let line = record.position().map_or(0, |p| p.line());
        if !saw_header {
            saw_header = true;
            if record.iter().map(str::trim).eq(SESSION_HEADER.iter().copied()) {
                continue;
            }
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected header `{}`", SESSION_HEADER.join(",")),
            });
        }
        if record.len() != 7 {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected 7 fields, found {}", record.len()),
            });
        }
        let mut v = [0.0f64; 7];
        for (slot, field) in v.iter_mut().zip(record.iter()) {
            let parsed: f64 = field.trim().parse().map_err(|_| Error::MalformedRow {
                line,
                reason: format!("non-numeric field {field:?}"),
            })?;
            if !parsed.is_finite() {
                return Err(Error::MalformedRow {
                    line,
                    reason: format!("non-finite field {field:?}"),
                });
            }
            *slot = parsed;
        }
        if let Some(prev) = samples.last() {
            if v[0] <= prev.t {
                return Err(Error::NonMonotonicTime { line });
            }
        }
        samples.push(ImuSample::new(v[0], [v[1], v[2], v[3]], [v[4], v[5], v[6]]));
    }
    if samples.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }

    let session = Session {
        participant_id: participant_id.to_string(),
        speed_mph,
        sample_rate_hz,
        samples,
    };
    session.validate()?;
    Ok(session)
}

/// Writes a session in the CSV format read by [`parse_session`]. Values use
/// the shortest representation that parses back to the same `f64`.
pub fn write_session(path: impl AsRef<Path>, session: &Session) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_session_to(&mut out, session)?;
    out.flush()?;
    Ok(())
}

pub fn write_session_to<W: Write>(out: &mut W, session: &Session) -> Result<()> {
    writeln!(out, "{}", SESSION_HEADER.join(","))?;
    for s in &session.samples {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.t, s.ax, s.ay, s.az, s.gx, s.gy, s.gz
        )?;
    }
    Ok(())
}

/// Conventional file name `<participant>_<speed>mph.csv`.
pub fn session_file_name(participant_id: &str, speed_mph: f64) -> String {
    format!("{participant_id}_{speed_mph:.1}mph.csv")
}

/// Affine correction `c = M (r - b)` for one tri-axial sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisCalibration {
    pub offset: [f64; 3],
    pub matrix: [[f64; 3]; 3],
}

impl Default for AxisCalibration {
    fn default() -> Self {
        Self::identity()
    }
}

impl AxisCalibration {
    pub fn identity() -> Self {
        Self {
            offset: [0.0; 3],
            matrix: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.matrix;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    fn is_invertible(&self) -> bool {
        let scale = self
            .matrix
            .iter()
            .flatten()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        let det = self.determinant();
        det.is_finite() && scale > 0.0 && det.abs() > 1e-12 * scale.powi(3)
    }

    pub fn apply(&self, raw: [f64; 3]) -> [f64; 3] {
        let d = [
            raw[0] - self.offset[0],
            raw[1] - self.offset[1],
            raw[2] - self.offset[2],
        ];
        let m = &self.matrix;
        [
            m[0][0] * d[0] + m[0][1] * d[1] + m[0][2] * d[2],
            m[1][0] * d[0] + m[1][1] * d[1] + m[1][2] * d[2],
            m[2][0] * d[0] + m[2][1] * d[1] + m[2][2] * d[2],
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CalibrationParams {
    pub accel: AxisCalibration,
    pub gyro: AxisCalibration,
}

impl CalibrationParams {
    pub fn identity() -> Self {
        Self::default()
    }
}

pub fn apply_calibration(session: &Session, calib: &CalibrationParams) -> Result<Session> {
    if !calib.accel.is_invertible() {
        return Err(Error::SingularMatrix("accelerometer"));
    }
    if !calib.gyro.is_invertible() {
        return Err(Error::SingularMatrix("gyroscope"));
    }
    let samples = session
        .samples
        .iter()
        .map(|s| ImuSample::new(s.t, calib.accel.apply(s.accel()), calib.gyro.apply(s.gyro())))
        .collect();
    Ok(Session {
        samples,
        ..session.clone()
    })
}

/// Drops `floor(trim_seconds * rate)` samples from the front and keeps
/// `n - round(2 * trim_seconds * rate)` samples, so a 45 s recording at
/// 51 Hz becomes exactly 2040 samples. Timestamps are regenerated as
/// `index / rate`.
pub fn trim_session(session: &Session, trim_seconds: f64) -> Result<Session> {
    if !(trim_seconds >= 0.0 && trim_seconds.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "trim seconds must be non-negative, got {trim_seconds}"
        )));
    }
    let n = session.samples.len();
    let rate = session.sample_rate_hz;
    let head = (trim_seconds * rate).floor() as usize;
    let removed = (2.0 * trim_seconds * rate).round() as usize;
    if head == 0 && removed == 0 {
        return Ok(session.clone());
    }
    if n <= removed.max(2 * head) {
        return Err(Error::TooShort {
            samples: n,
            trim: head,
        });
    }
    let keep = n - removed;
    let samples = session.samples[head..head + keep]
        .iter()
        .enumerate()
        .map(|(i, s)| ImuSample {
            t: i as f64 / rate,
            ..*s
        })
        .collect();
    Ok(Session {
        samples,
        ..session.clone()
    })
}

/// One line of a dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub speed_mph: f64,
    pub participant: String,
}

/// Reads a manifest CSV (`path,speed_mph,participant`). Relative session
/// paths are resolved against the manifest's directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::ManifestNotFound(path.to_path_buf()));
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut reader = csv::Reader::from_path(path)?;
    let mut entries = Vec::new();
    for row in reader.deserialize() {
        let mut entry: ManifestEntry = row?;
        if entry.path.is_relative() {
            entry.path = base.join(&entry.path);
        }
        entries.push(entry);
    }
    if entries.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    Ok(entries)
}

/// Writes a manifest, storing paths relative to the manifest directory when
/// possible.
pub fn write_manifest(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new(""));
    let mut writer = csv::Writer::from_path(path)?;
    for e in entries {
        let rel = e.path.strip_prefix(base).unwrap_or(&e.path).to_path_buf();
        writer.serialize(ManifestEntry {
            path: rel,
            speed_mph: e.speed_mph,
            participant: e.participant.clone(),
        })?;
    }
    writer.flush()?;
    Ok(())
}

/// Loads every session listed in a manifest.
pub fn load_manifest_sessions(path: impl AsRef<Path>) -> Result<Vec<Session>> {
    read_manifest(path)?
        .iter()
        .map(|e| parse_session(&e.path, &e.participant, e.speed_mph))
        .collect()
}

/// Calibrates and trims every session with the default cleansing settings.
pub fn prepare_sessions(sessions: &[Session], calib: &CalibrationParams) -> Result<Vec<Session>> {
    sessions
        .iter()
        .map(|s| trim_session(&apply_calibration(s, calib)?, DEFAULT_TRIM_SECONDS))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_session(n: usize) -> Session {
        Session {
            participant_id: "p01".into(),
            speed_mph: 3.0,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            samples: (0..n)
                .map(|i| {
                    let x = i as f64 * 1e-3;
                    ImuSample::new(
                        i as f64 / DEFAULT_SAMPLE_RATE_HZ,
                        [x, -x, 1.0 - x],
                        [10.0 * x, 0.5, -3.0 * x],
                    )
                })
                .collect(),
        }
    }

    fn write_text(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn parses_45_second_session() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p01_3.0mph.csv");
        write_session(&path, &ramp_session(2295)).unwrap();
        let s = parse_session(&path, "p01", 3.0).unwrap();
        assert_eq!(s.len(), 2295);
        assert!((s.duration_s() - 45.0).abs() < 1e-9);
        assert_eq!(s.speed_mph, 3.0);
    }

    #[test]
    fn empty_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_text(dir.path(), "empty.csv", "");
        assert!(matches!(parse_session(&p, "x", 3.0), Err(Error::EmptyFile(_))));
        let p = write_text(dir.path(), "header.csv", "t,ax,ay,az,gx,gy,gz\n");
        assert!(matches!(parse_session(&p, "x", 3.0), Err(Error::EmptyFile(_))));
    }

    #[test]
    fn nan_cell_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_text(
            dir.path(),
            "nan.csv",
            "t,ax,ay,az,gx,gy,gz\n0,0,0,1,0,0,0\n0.0196078431372549,NaN,0,1,0,0,0\n",
        );
        match parse_session(&p, "x", 3.0) {
            Err(Error::MalformedRow { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_and_non_monotonic_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_text(
            dir.path(),
            "abc.csv",
            "t,ax,ay,az,gx,gy,gz\n0,0,abc,1,0,0,0\n",
        );
        assert!(matches!(
            parse_session(&p, "x", 3.0),
            Err(Error::MalformedRow { line: 2, .. })
        ));
        let p = write_text(
            dir.path(),
            "back.csv",
            "t,ax,ay,az,gx,gy,gz\n0.02,0,0,1,0,0,0\n0.01,0,0,1,0,0,0\n",
        );
        assert!(matches!(
            parse_session(&p, "x", 3.0),
            Err(Error::NonMonotonicTime { line: 3 })
        ));
    }

    #[test]
    fn identity_calibration_is_identity() {
        let s = ramp_session(50);
        assert_eq!(apply_calibration(&s, &CalibrationParams::identity()).unwrap(), s);
    }

    #[test]
    fn affine_calibration_examples() {
        let mut s = ramp_session(1);
        s.samples[0] = ImuSample::new(0.0, [0.5, 0.0, 1.0], [0.0; 3]);

        let mut calib = CalibrationParams::identity();
        calib.accel.offset = [0.1, 0.0, 0.0];
        let out = apply_calibration(&s, &calib).unwrap();
        let a = out.samples[0].accel();
        assert!((a[0] - 0.4).abs() < 1e-15 && a[1] == 0.0 && a[2] == 1.0);

        let mut calib = CalibrationParams::identity();
        calib.accel.matrix = [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]];
        let out = apply_calibration(&s, &calib).unwrap();
        assert_eq!(out.samples[0].accel(), [1.0, 0.0, 2.0]);
        assert_eq!(out.samples[0].t, 0.0);
    }

    #[test]
    fn singular_calibration_is_rejected() {
        let mut calib = CalibrationParams::identity();
        calib.gyro.matrix = [[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]];
        assert!(matches!(
            apply_calibration(&ramp_session(3), &calib),
            Err(Error::SingularMatrix("gyroscope"))
        ));
    }

    #[test]
    fn trim_45_seconds_to_40() {
        let s = ramp_session(2295);
        let t = trim_session(&s, DEFAULT_TRIM_SECONDS).unwrap();
        assert_eq!(t.len(), 2040);
        // floor(2.5 * 51) = 127 samples dropped from the front
        assert_eq!(t.samples[0].ax, s.samples[127].ax);
        assert_eq!(t.samples[0].t, 0.0);
        assert_eq!(t.samples[1].t, 1.0 / 51.0);
        assert!((t.duration_s() - 40.0).abs() < 1e-12);
    }

    #[test]
    fn trim_zero_is_identity() {
        let s = ramp_session(300);
        assert_eq!(trim_session(&s, 0.0).unwrap(), s);
    }

    #[test]
    fn trim_too_short() {
        assert!(matches!(
            trim_session(&ramp_session(200), 2.5),
            Err(Error::TooShort { samples: 200, .. })
        ));
    }

    #[test]
    fn validate_catches_count_mismatch() {
        let mut s = ramp_session(100);
        s.sample_rate_hz = 25.0;
        assert!(s.validate().is_err());
        let mut s = ramp_session(10);
        s.speed_mph = 0.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn manifest_round_trip_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let session_path = dir.path().join("p01_3.0mph.csv");
        write_session(&session_path, &ramp_session(400)).unwrap();
        let manifest = dir.path().join("manifest.csv");
        let entries = vec![ManifestEntry {
            path: session_path.clone(),
            speed_mph: 3.0,
            participant: "p01".into(),
        }];
        write_manifest(&manifest, &entries).unwrap();
        let text = std::fs::read_to_string(&manifest).unwrap();
        assert!(text.contains("p01_3.0mph.csv,3.0,p01"));
        assert_eq!(read_manifest(&manifest).unwrap(), entries);
        let sessions = load_manifest_sessions(&manifest).unwrap();
        assert_eq!(sessions[0].len(), 400);
        assert!(matches!(
            read_manifest(dir.path().join("missing.csv")),
            Err(Error::ManifestNotFound(_))
        ));
    }
}
