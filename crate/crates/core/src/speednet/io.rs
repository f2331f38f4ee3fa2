//! `GSN1` model files.
//!
//! Layout, little-endian: magic `GSN1`, `u32` version, then the
//! architecture (`u32` input frames, `u32` conv count and one `u32` per conv
//! layer, `u32` dense count and one `u32` per dense layer, `f32` dropout),
//! then every parameter tensor as `f32` in [`SpeedNetParams::tensors`]
//! order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::arch::ArchSpec;
use super::network::SpeedNetParams;
use crate::error::{Error, Result};
use crate::window::{read_bytes, read_f32, read_u32};

const MAGIC: [u8; 4] = *b"GSN1";
pub const MODEL_FORMAT_VERSION: u32 = 1;
// Keeps a corrupt header from requesting absurd allocations.
const MAX_LAYERS: u32 = 64;

pub fn save_model(path: impl AsRef<Path>, params: &SpeedNetParams) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_model(&mut out, params)?;
    out.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SpeedNetParams> {
    read_model(&mut BufReader::new(File::open(path)?))
}

pub fn write_model<W: Write>(out: &mut W, params: &SpeedNetParams) -> Result<()> {
    let arch = &params.arch;
    out.write_all(&MAGIC)?;
    out.write_all(&MODEL_FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(arch.input_frames as u32).to_le_bytes())?;
    for list in [&arch.conv_filters, &arch.dense_units] {
        out.write_all(&(list.len() as u32).to_le_bytes())?;
        for &v in list {
            out.write_all(&(v as u32).to_le_bytes())?;
        }
    }
    out.write_all(&(arch.dropout as f32).to_le_bytes())?;
    for t in params.tensors() {
        for &v in t {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_list<R: Read>(input: &mut R) -> Result<Vec<usize>> {
    let n = read_u32(input)?;
    if n > MAX_LAYERS {
        return Err(Error::InvalidArgument(format!("implausible layer count {n}")));
    }
    (0..n).map(|_| read_u32(input).map(|v| v as usize)).collect()
}

pub fn read_model<R: Read>(input: &mut R) -> Result<SpeedNetParams> {
    let mut magic = [0u8; 4];
    read_bytes(input, &mut magic)?;
    if magic != MAGIC {
        return Err(Error::BadMagic {
            expected: MAGIC,
            found: magic,
        });
    }
    let version = read_u32(input)?;
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::VersionMismatch(version));
    }
    let input_frames = read_u32(input)? as usize;
    let conv_filters = read_list(input)?;
    let dense_units = read_list(input)?;
    let dropout = f64::from(read_f32(input)?);
    let arch = ArchSpec {
        input_frames,
        conv_filters,
        dense_units,
        dropout,
    };
    let mut params = SpeedNetParams::init(&arch, 0)?;
    for t in params.tensors_mut() {
        for v in t {
            *v = f64::from(read_f32(input)?);
        }
    }
    let mut extra = [0u8; 1];
    if input.read(&mut extra)? != 0 {
        return Err(Error::InvalidArgument("trailing bytes after model parameters".into()));
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::speednet::network::random_window;
    use crate::rng::seeded_rng;

    #[test]
    fn round_trip_preserves_predictions() {
        let p = super::super::build_model(&ArchSpec::default(), 4).unwrap();
        let mut buf = Vec::new();
        write_model(&mut buf, &p).unwrap();
        assert_eq!(&buf[..4], b"GSN1");
        assert_eq!(buf.len(), 4 + 4 + 4 + 4 + 8 + 4 + 8 + 4 + 44_341 * 4);
        let q = read_model(&mut buf.as_slice()).unwrap();
        assert_eq!(q.arch.conv_filters, vec![27, 45]);
        assert!((q.arch.dropout - 0.2).abs() < 1e-7);
        let mut rng = seeded_rng(3);
        for _ in 0..5 {
            let w = random_window(153, &mut rng);
            let (a, b) = (p.predict(&w).unwrap(), q.predict(&w).unwrap());
            assert!((a - b).abs() < 1e-5 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn corrupt_files() {
        let p = super::super::build_model(&ArchSpec::default(), 4).unwrap();
        let mut buf = Vec::new();
        write_model(&mut buf, &p).unwrap();

        let mut bad = buf.clone();
        bad[1] = b'X';
        assert!(matches!(read_model(&mut bad.as_slice()), Err(Error::BadMagic { .. })));
        let mut bad = buf.clone();
        bad[4] = 9;
        assert!(matches!(read_model(&mut bad.as_slice()), Err(Error::VersionMismatch(9))));
        assert!(matches!(read_model(&mut &buf[..buf.len() - 1]), Err(Error::Truncated)));
        assert!(matches!(read_model(&mut &[][..]), Err(Error::Truncated)));
        buf.push(0);
        assert!(read_model(&mut buf.as_slice()).is_err());
    }
}
