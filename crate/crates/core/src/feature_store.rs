//! Frame-aligned feature sequences and the DSFF on-disk container.
//!
//! A DSFF file is a flat little-endian layout:
//!
//! ```text
//! magic   4  b"DSFF"
//! version u32   format version, currently 1
//! n_frames u64
//! dim     u32
//! frame_rate f64  frames per second
//! tag_len u16   length of the source tag in bytes
//! tag     [u8]  UTF-8 source tag
//! payload n_frames * dim f32, row-major
//! ```
//!
//! Values are held as f64 in memory and stored as f32 on disk, so a
//! write/read round trip is lossless exactly when the data is
//! f32-representable (which everything produced by this crate's writers is,
//! by construction: they store what they read or quantize).

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

pub const DSFF_MAGIC: &[u8; 4] = b"DSFF";
pub const DSFF_VERSION: u32 = 1;

/// Fixed-size portion of the header: magic, version, n_frames, dim,
/// frame_rate, tag_len.
const HEADER_FIXED_LEN: usize = 4 + 4 + 8 + 4 + 8 + 2;

/// A sequence of feature frames on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    data: Array2<f64>,
    frame_rate: f64,
    source_tag: String,
}

impl FeatureSequence {
    /// Builds a sequence, validating shape, finiteness, and frame rate.
    pub fn new(data: Array2<f64>, frame_rate: f64, source_tag: impl Into<String>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::invalid("empty sequence"));
        }
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(Error::invalid(format!(
                "frame rate must be positive and finite, got {frame_rate}"
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite value in feature data"));
        }
        Ok(FeatureSequence {
            data,
            frame_rate,
            source_tag: source_tag.into(),
        })
    }

    pub fn n_frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn duration_seconds(&self) -> f64 {
        self.n_frames() as f64 / self.frame_rate
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn frame(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    /// Same data under a different tag.
    pub fn retagged(mut self, tag: impl Into<String>) -> Self {
        self.source_tag = tag.into();
        self
    }

    /// Same data at a different frame rate (used when a transform changes the
    /// time base).
    pub(crate) fn with_frame_rate(mut self, frame_rate: f64) -> Result<Self> {
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(Error::invalid(format!(
                "frame rate must be positive and finite, got {frame_rate}"
            )));
        }
        self.frame_rate = frame_rate;
        Ok(self)
    }
}

/// Serializes a sequence into the DSFF byte layout.
pub fn encode_feature(seq: &FeatureSequence) -> Result<Vec<u8>> {
    let tag = seq.source_tag.as_bytes();
    if tag.len() > u16::MAX as usize {
        return Err(Error::invalid("source tag longer than 65535 bytes"));
    }
    for &v in seq.data.iter() {
        if v.abs() > f32::MAX as f64 {
            return Err(Error::invalid(format!("value {v} overflows f32 storage")));
        }
    }
    let n = seq.n_frames();
    let d = seq.dim();
    let mut out = Vec::with_capacity(HEADER_FIXED_LEN + tag.len() + n * d * 4);
    out.extend_from_slice(DSFF_MAGIC);
    out.extend_from_slice(&DSFF_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&seq.frame_rate.to_le_bytes());
    out.extend_from_slice(&(tag.len() as u16).to_le_bytes());
    out.extend_from_slice(tag);
    for &v in seq.data.iter() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

/// Parses the DSFF byte layout. Every field is validated before any
/// length-dependent allocation, so arbitrary input is safe to feed in.
pub fn decode_feature(bytes: &[u8]) -> Result<FeatureSequence> {
    if bytes.len() < 4 || &bytes[..4] != DSFF_MAGIC {
        return Err(Error::format("not a DSFF file"));
    }
    if bytes.len() < HEADER_FIXED_LEN {
        return Err(Error::format("truncated DSFF header"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != DSFF_VERSION {
        return Err(Error::format(format!(
            "unsupported DSFF version {version}, expected {DSFF_VERSION}"
        )));
    }
    let n_frames = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let dim = u32::from_le_bytes(bytes[16..20].try_into().unwrap());
    let frame_rate = f64::from_le_bytes(bytes[20..28].try_into().unwrap());
    let tag_len = u16::from_le_bytes(bytes[28..30].try_into().unwrap()) as usize;

    if n_frames == 0 || dim == 0 {
        return Err(Error::format("empty sequence"));
    }
    if !(frame_rate.is_finite() && frame_rate > 0.0) {
        return Err(Error::format(format!("invalid frame rate {frame_rate}")));
    }

    let body = &bytes[HEADER_FIXED_LEN..];
    if body.len() < tag_len {
        return Err(Error::format("truncated DSFF tag"));
    }
    let tag = std::str::from_utf8(&body[..tag_len])
        .map_err(|_| Error::format("source tag is not valid UTF-8"))?
        .to_owned();
    let payload = &body[tag_len..];

    let n = usize::try_from(n_frames).map_err(|_| Error::format("frame count overflow"))?;
    let d = dim as usize;
    let expected = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| Error::format("payload size overflow"))?;
    if payload.len() != expected {
        return Err(Error::format(format!(
            "inconsistent payload length: header declares {n} x {d} frames ({expected} bytes), file carries {}",
            payload.len()
        )));
    }

    let mut values = Vec::with_capacity(n * d);
    for chunk in payload.chunks_exact(4) {
        let v = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
        if !v.is_finite() {
            return Err(Error::format("non-finite value in payload"));
        }
        values.push(v);
    }
    let data = Array2::from_shape_vec((n, d), values).expect("shape checked above");
    FeatureSequence::new(data, frame_rate, tag)
}

pub fn write_feature(seq: &FeatureSequence, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_feature(seq)?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_feature(path: impl AsRef<Path>) -> Result<FeatureSequence> {
    let bytes = fs::read(path)?;
    decode_feature(&bytes)
}

/// Parses comma-separated numeric rows into a sequence. Rows must all carry
/// the same number of cells; blank lines are skipped. Line numbers in errors
/// are 1-based and count physical lines, including the skipped ones.
pub fn parse_csv(text: &str, frame_rate: f64, source_tag: &str) -> Result<FeatureSequence> {
    let mut rows: Vec<f64> = Vec::new();
    let mut dim: Option<usize> = None;
    let mut n_rows = 0usize;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut cells = 0usize;
        for (col, cell) in line.split(',').enumerate() {
            let cell = cell.trim();
            let v: f64 = cell.parse().map_err(|_| {
                Error::format(format!(
                    "non-numeric cell {cell:?} at line {line_no}, column {}",
                    col + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::format(format!(
                    "non-finite value at line {line_no}, column {}",
                    col + 1
                )));
            }
            rows.push(v);
            cells += 1;
        }
        match dim {
            None => dim = Some(cells),
            Some(d) if d != cells => {
                return Err(Error::format(format!("ragged row at line {line_no}")));
            }
            Some(_) => {}
        }
        n_rows += 1;
    }
    let dim = dim.ok_or_else(|| Error::format("empty sequence"))?;
    let data = Array2::from_shape_vec((n_rows, dim), rows).expect("row arity enforced");
    FeatureSequence::new(data, frame_rate, source_tag)
}

pub fn import_csv(path: impl AsRef<Path>, frame_rate: f64, source_tag: &str) -> Result<FeatureSequence> {
    let text = fs::read_to_string(path)?;
    parse_csv(&text, frame_rate, source_tag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn seq(data: Array2<f64>, rate: f64) -> FeatureSequence {
        FeatureSequence::new(data, rate, "test").unwrap()
    }

    #[test]
    fn round_trip_is_lossless_for_f32_data() {
        let s = seq(array![[1.0, -2.5], [0.25, 0.0009765625], [3.25, -0.125]], 50.0);
        let bytes = encode_feature(&s).unwrap();
        let back = decode_feature(&bytes).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn header_is_byte_exact() {
        let s = seq(array![[1.0_f64]], 100.0);
        let bytes = encode_feature(&s).unwrap();
        assert_eq!(&bytes[..4], b"DSFF");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 1);
        assert_eq!(f64::from_le_bytes(bytes[20..28].try_into().unwrap()), 100.0);
        assert_eq!(u16::from_le_bytes(bytes[28..30].try_into().unwrap()), 4);
        assert_eq!(&bytes[30..34], b"test");
        assert_eq!(f32::from_le_bytes(bytes[34..38].try_into().unwrap()), 1.0);
        assert_eq!(bytes.len(), 38);
    }

    #[test]
    fn rejects_bad_magic() {
        let err = decode_feature(b"RIFF1234").unwrap_err();
        assert!(err.to_string().contains("not a DSFF file"), "{err}");
    }

    #[test]
    fn rejects_wrong_version() {
        let s = seq(array![[1.0_f64]], 10.0);
        let mut bytes = encode_feature(&s).unwrap();
        bytes[4] = 9;
        let err = decode_feature(&bytes).unwrap_err();
        assert!(err.to_string().contains("unsupported DSFF version 9"), "{err}");
    }

    #[test]
    fn rejects_truncated_payload() {
        let s = seq(Array2::from_elem((10, 4), 0.5), 25.0);
        let mut bytes = encode_feature(&s).unwrap();
        bytes.truncate(bytes.len() - 7);
        let err = decode_feature(&bytes).unwrap_err();
        assert!(err.to_string().contains("inconsistent payload length"), "{err}");
    }

    #[test]
    fn rejects_trailing_garbage() {
        let s = seq(array![[1.0_f64, 2.0]], 10.0);
        let mut bytes = encode_feature(&s).unwrap();
        bytes.extend_from_slice(&[0, 0, 0, 0]);
        assert!(decode_feature(&bytes).is_err());
    }

    #[test]
    fn rejects_declared_size_overflow_without_allocating() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"DSFF");
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&u64::MAX.to_le_bytes());
        bytes.extend_from_slice(&u32::MAX.to_le_bytes());
        bytes.extend_from_slice(&50.0f64.to_le_bytes());
        bytes.extend_from_slice(&0u16.to_le_bytes());
        assert!(decode_feature(&bytes).is_err());
    }

    #[test]
    fn empty_tag_is_fine() {
        let s = FeatureSequence::new(array![[1.0_f64]], 10.0, "").unwrap();
        let back = decode_feature(&encode_feature(&s).unwrap()).unwrap();
        assert_eq!(back.source_tag(), "");
    }

    #[test]
    fn rejects_nan_payload() {
        let s = seq(array![[1.0_f64, 2.0]], 10.0);
        let mut bytes = encode_feature(&s).unwrap();
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        let err = decode_feature(&bytes).unwrap_err();
        assert!(err.to_string().contains("non-finite"), "{err}");
    }

    #[test]
    fn constructor_rejects_bad_inputs() {
        assert!(FeatureSequence::new(Array2::zeros((0, 3)), 10.0, "t").is_err());
        assert!(FeatureSequence::new(Array2::zeros((3, 0)), 10.0, "t").is_err());
        assert!(FeatureSequence::new(array![[1.0_f64]], 0.0, "t").is_err());
        assert!(FeatureSequence::new(array![[1.0_f64]], -5.0, "t").is_err());
        assert!(FeatureSequence::new(array![[f64::NAN]], 10.0, "t").is_err());
    }

    #[test]
    fn csv_parses_rectangular_rows() {
        let s = parse_csv("1,2\n3,4\n-0.5, 6e1\n", 25.0, "csv").unwrap();
        assert_eq!(s.n_frames(), 3);
        assert_eq!(s.dim(), 2);
        assert_eq!(s.data()[[2, 1]], 60.0);
        assert_eq!(s.frame_rate(), 25.0);
    }

    #[test]
    fn csv_ragged_row_reports_line() {
        let err = parse_csv("1,2\n3\n", 25.0, "csv").unwrap_err();
        assert!(err.to_string().contains("ragged row at line 2"), "{err}");
    }

    #[test]
    fn csv_non_numeric_reports_position() {
        let err = parse_csv("1,2\n3,x\n", 25.0, "csv").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("column 2"), "{msg}");
    }

    #[test]
    fn csv_skips_blank_lines_but_counts_them() {
        let s = parse_csv("1,2\n\n3,4\n", 25.0, "csv").unwrap();
        assert_eq!(s.n_frames(), 2);
        let err = parse_csv("1,2\n\n3\n", 25.0, "csv").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }
}
