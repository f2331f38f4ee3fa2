//! Sliding-window segmentation of 6-channel streams.
//!
//! Window `i` starts at row `floor(i * F * (1 - ov))`. The fractional stride
//! (76.5 rows for a 153-row frame at 50 % overlap) is never rounded to an
//! integer; only the product is floored. A window exists when its ideal,
//! unfloored start still leaves room for a whole frame, which gives the
//! closed-form count `floor((T - F) / (F (1 - ov))) + 1`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imu::Session;

pub const CHANNELS: usize = 6;
/// Three seconds at 51 Hz.
pub const DEFAULT_FRAME_SIZE: usize = 153;
pub const DEFAULT_OVERLAP: f64 = 0.5;

const MAGIC: [u8; 4] = *b"GSW1";
// Tolerance for comparing the ideal start against the last admissible row.
const START_EPS: f64 = 1e-9;

/// How sessions are laid out before windowing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentMode {
    /// Each session is windowed on its own; no window crosses a session edge.
    #[default]
    PerSession,
    /// Sessions are stacked into one stream first. Windows may straddle two
    /// sessions and take the label of the session holding their first row.
    Concatenated,
}

impl std::str::FromStr for SegmentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-session" | "per_session" => Ok(Self::PerSession),
            "concatenated" => Ok(Self::Concatenated),
            other => Err(Error::InvalidArgument(format!("unknown segment mode {other:?}"))),
        }
    }
}

fn check_params(len: usize, frame_size: usize, overlap: f64) -> Result<()> {
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::InvalidOverlap(overlap));
    }
    if frame_size == 0 {
        return Err(Error::InvalidArgument("frame size must be positive".into()));
    }
    if len < frame_size {
        return Err(Error::StreamTooShort {
            len,
            frame: frame_size,
        });
    }
    Ok(())
}

/// Number of windows for a stream of `len` rows.
pub fn window_count(len: usize, frame_size: usize, overlap: f64) -> Result<usize> {
    check_params(len, frame_size, overlap)?;
    let stride = frame_size as f64 * (1.0 - overlap);
    Ok((((len - frame_size) as f64 + START_EPS) / stride).floor() as usize + 1)
}

/// First row of every window.
pub fn window_starts(len: usize, frame_size: usize, overlap: f64) -> Result<Vec<usize>> {
    let n = window_count(len, frame_size, overlap)?;
    let stride = frame_size as f64 * (1.0 - overlap);
    Ok((0..n).map(|i| (i as f64 * stride).floor() as usize).collect())
}

/// Borrowing segmentation of a `[T, C]` stream into `[F, C]` windows.
pub fn segment<R>(stream: &[R], frame_size: usize, overlap: f64) -> Result<Vec<&[R]>> {
    Ok(window_starts(stream.len(), frame_size, overlap)?
        .into_iter()
        .map(|s| &stream[s..s + frame_size])
        .collect())
}

/// Where a window came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowOrigin {
    /// Index into [`WindowedDataset::participants`].
    pub participant: u32,
    /// Index of the source session in the segmented list.
    pub session: u32,
}

/// Segmented tensor `[n, F, 6]` with per-window labels and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    /// Row-major `[n, frame_size, 6]`.
    pub data: Vec<f64>,
    pub labels: Vec<f64>,
    pub origins: Vec<WindowOrigin>,
    pub participants: Vec<String>,
    pub frame_size: usize,
    /// `None` when the dataset was read back from disk.
    pub overlap: Option<f64>,
}

impl WindowedDataset {
    pub fn empty(frame_size: usize) -> Self {
        Self {
            data: Vec::new(),
            labels: Vec::new(),
            origins: Vec::new(),
            participants: Vec::new(),
            frame_size,
            overlap: None,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.len(), self.frame_size, CHANNELS]
    }

    fn window_len(&self) -> usize {
        self.frame_size * CHANNELS
    }

    /// Row-major `[frame_size, 6]` slice of window `i`.
    pub fn window(&self, i: usize) -> &[f64] {
        let w = self.window_len();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn participant_of(&self, i: usize) -> &str {
        &self.participants[self.origins[i].participant as usize]
    }

    fn participant_index(&mut self, id: &str) -> u32 {
        match self.participants.iter().position(|p| p == id) {
            Some(i) => i as u32,
            None => {
                self.participants.push(id.to_string());
                (self.participants.len() - 1) as u32
            }
        }
    }

    pub fn push(&mut self, window: &[f64], label: f64, participant: &str, session: u32) -> Result<()> {
        if window.len() != self.window_len() {
            return Err(Error::ShapeMismatch {
                expected: format!("[{}, {CHANNELS}]", self.frame_size),
                got: format!("{} values", window.len()),
            });
        }
        let participant = self.participant_index(participant);
        self.data.extend_from_slice(window);
        self.labels.push(label);
        self.origins.push(WindowOrigin {
            participant,
            session,
        });
        Ok(())
    }

    /// New dataset holding the given windows, in the given order. The
    /// participant table is carried over unchanged so indices stay valid.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let w = self.window_len();
        let mut data = Vec::with_capacity(indices.len() * w);
        for &i in indices {
            data.extend_from_slice(self.window(i));
        }
        Self {
            data,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            origins: indices.iter().map(|&i| self.origins[i]).collect(),
            participants: self.participants.clone(),
            frame_size: self.frame_size,
            overlap: self.overlap,
        }
    }

    /// Participants that own at least one window, in first-seen order.
    pub fn distinct_participants(&self) -> Vec<u32> {
        let mut seen = Vec::new();
        for o in &self.origins {
            if !seen.contains(&o.participant) {
                seen.push(o.participant);
            }
        }
        seen
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    /// Serializes as `GSW1`, `u32 n`, `u32 F`, `u32 channels`, the samples
    /// as `f32`, the labels as `f32`, then the provenance table: `u32`
    /// participant count, each id as `u32` length plus UTF-8 bytes, and one
    /// `(u32 participant, u32 session)` pair per window. Little-endian.
    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        out.write_all(&MAGIC)?;
        for v in [self.len(), self.frame_size, CHANNELS] {
            out.write_all(&(v as u32).to_le_bytes())?;
        }
        for &v in self.data.iter().chain(&self.labels) {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
        out.write_all(&(self.participants.len() as u32).to_le_bytes())?;
        for p in &self.participants {
            out.write_all(&(p.len() as u32).to_le_bytes())?;
            out.write_all(p.as_bytes())?;
        }
        for o in &self.origins {
            out.write_all(&o.participant.to_le_bytes())?;
            out.write_all(&o.session.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }

    pub fn read_from<R: Read>(input: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(input, &mut magic)?;
        if magic != MAGIC {
            return Err(Error::BadMagic {
                expected: MAGIC,
                found: magic,
            });
        }
        let n = read_u32(input)? as usize;
        let frame_size = read_u32(input)? as usize;
        let channels = read_u32(input)? as usize;
        if channels != CHANNELS {
            return Err(Error::ShapeMismatch {
                expected: format!("{CHANNELS} channels"),
                got: format!("{channels} channels"),
            });
        }
        let data = (0..n * frame_size * channels)
            .map(|_| read_f32(input).map(f64::from))
            .collect::<Result<Vec<_>>>()?;
        let labels = (0..n)
            .map(|_| read_f32(input).map(f64::from))
            .collect::<Result<Vec<_>>>()?;
        let n_participants = read_u32(input)? as usize;
        let mut participants = Vec::with_capacity(n_participants);
        for _ in 0..n_participants {
            let len = read_u32(input)? as usize;
            let mut buf = vec![0u8; len];
            read_exact(input, &mut buf)?;
            participants.push(
                String::from_utf8(buf)
                    .map_err(|_| Error::InvalidArgument("participant id is not UTF-8".into()))?,
            );
        }
        let mut origins = Vec::with_capacity(n);
        for _ in 0..n {
            let participant = read_u32(input)?;
            let session = read_u32(input)?;
            if participant as usize >= participants.len() {
                return Err(Error::InvalidArgument(format!(
                    "participant index {participant} out of range"
                )));
            }
            origins.push(WindowOrigin {
                participant,
                session,
            });
        }
        Ok(Self {
            data,
            labels,
            origins,
            participants,
            frame_size,
            overlap: None,
        })
    }
}

fn read_exact<R: Read>(input: &mut R, buf: &mut [u8]) -> Result<()> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Truncated,
        _ => Error::Io(e),
    })
}

pub(crate) fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(input, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_f32<R: Read>(input: &mut R) -> Result<f32> {
    let mut b = [0u8; 4];
    read_exact(input, &mut b)?;
    Ok(f32::from_le_bytes(b))
}

pub(crate) fn read_bytes<R: Read>(input: &mut R, buf: &mut [u8]) -> Result<()> {
    read_exact(input, buf)
}

/// Segments a list of sessions into a labeled dataset.
pub fn segment_dataset(
    sessions: &[Session],
    frame_size: usize,
    overlap: f64,
    mode: SegmentMode,
) -> Result<WindowedDataset> {
    let first = sessions.first().ok_or(Error::NoSessions)?;
    for s in sessions {
        if s.sample_rate_hz != first.sample_rate_hz {
            return Err(Error::MixedSampleRates(first.sample_rate_hz, s.sample_rate_hz));
        }
    }
    let mut ds = WindowedDataset::empty(frame_size);
    ds.overlap = Some(overlap);

    match mode {
        SegmentMode::PerSession => {
            for (si, s) in sessions.iter().enumerate() {
                let rows = s.channel_matrix();
                for w in segment(&rows, frame_size, overlap)? {
                    ds.push(w.as_flattened(), s.speed_mph, &s.participant_id, si as u32)?;
                }
            }
        }
        SegmentMode::Concatenated => {
            let mut rows = Vec::new();
            // session_end[k] is one past the last stacked row of session k
            let mut session_end = Vec::with_capacity(sessions.len());
            for s in sessions {
                rows.extend(s.samples.iter().map(|x| x.channels()));
                session_end.push(rows.len());
            }
            for start in window_starts(rows.len(), frame_size, overlap)? {
                let si = session_end.partition_point(|&end| end <= start);
                let s = &sessions[si];
                ds.push(
                    rows[start..start + frame_size].as_flattened(),
                    s.speed_mph,
                    &s.participant_id,
                    si as u32,
                )?;
            }
        }
    }
    Ok(ds)
}
