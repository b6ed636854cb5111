//! Binary container for feature matrices and trained models.
//!
//! All integers and floats are little-endian. Feature file layout:
//!
//! ```text
//! magic        8 bytes   "METAFUSF"
//! version      u32       1
//! rows (N)     u64
//! cols (d)     u64
//! name         u32 byte length, UTF-8 bytes     (extractor name)
//! sample ids   N × (u32 byte length, UTF-8 bytes)
//! payload      N × d × f32, row-major
//! crc32        u32       CRC-32 (IEEE) of the payload bytes
//! ```
//!
//! Model files share the framing with magic `"METAFUSM"`:
//!
//! ```text
//! magic, version, d: u64, K: u64,
//! K × class name (u32 length + UTF-8), config echo (u32 length + UTF-8),
//! payload: f64 × (d·K weights row-major, K bias, d mean, d scale),
//! crc32 of payload
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use metafuse_core::softmax::{Params, Preprocess};
use metafuse_core::{FeatureMatrix, Matrix, SoftmaxModel};

use crate::error::{Error, Result};

pub const FEATURE_MAGIC: [u8; 8] = *b"METAFUSF";
pub const MODEL_MAGIC: [u8; 8] = *b"METAFUSM";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic bytes {found:02x?}, expected {expected:02x?}")]
    MagicMismatch { expected: [u8; 8], found: Vec<u8> },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated file: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("payload checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("invalid content: {0}")]
    Invalid(String),
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let remaining = self.buf.len() - self.pos;
        if n > remaining {
            return Err(FormatError::Truncated { offset: self.pos, needed: n - remaining });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize, FormatError> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| FormatError::Invalid(format!("size {v} overflows")))
    }

    fn string(&mut self) -> Result<String, FormatError> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| FormatError::Invalid(format!("string at offset {} is not UTF-8", self.pos - len)))
    }

    fn header(&mut self, magic: [u8; 8]) -> Result<(), FormatError> {
        let found = self.take(8).map_err(|_| FormatError::MagicMismatch {
            expected: magic,
            found: self.buf[..self.buf.len().min(8)].to_vec(),
        })?;
        if found != magic {
            return Err(FormatError::MagicMismatch { expected: magic, found: found.to_vec() });
        }
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        Ok(())
    }

    /// Payload of `len` bytes followed by its CRC-32; must end the buffer.
    fn checked_payload(&mut self, len: usize) -> Result<&'a [u8], FormatError> {
        let payload = self.take(len)?;
        let stored = self.u32()?;
        let computed = crc32fast::hash(payload);
        if stored != computed {
            return Err(FormatError::ChecksumMismatch { stored, computed });
        }
        let trailing = self.buf.len() - self.pos;
        if trailing != 0 {
            return Err(FormatError::TrailingBytes(trailing));
        }
        Ok(payload)
    }
}

fn put_string(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn put_checked_payload(out: &mut Vec<u8>, payload: &[u8]) {
    out.extend_from_slice(payload);
    out.extend_from_slice(&crc32fast::hash(payload).to_le_bytes());
}

pub fn encode_features(m: &FeatureMatrix) -> Vec<u8> {
    let data = m.data().as_slice();
    let mut out = Vec::with_capacity(64 + data.len() * 4);
    out.extend_from_slice(&FEATURE_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.dim() as u64).to_le_bytes());
    put_string(&mut out, m.extractor_name());
    for id in m.sample_ids() {
        put_string(&mut out, id);
    }
    let payload: Vec<u8> = data.iter().flat_map(|v| v.to_le_bytes()).collect();
    put_checked_payload(&mut out, &payload);
    out
}

pub fn decode_features(buf: &[u8]) -> Result<FeatureMatrix, FormatError> {
    let mut r = Reader { buf, pos: 0 };
    r.header(FEATURE_MAGIC)?;
    let rows = r.usize()?;
    let cols = r.usize()?;
    let name = r.string()?;
    // Every id costs at least 4 bytes; reject absurd headers before allocating.
    if rows > buf.len() / 4 {
        return Err(FormatError::Truncated { offset: r.pos, needed: rows * 4 });
    }
    let ids = (0..rows).map(|_| r.string()).collect::<Result<Vec<_>, _>>()?;
    let len = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| FormatError::Invalid("payload size overflows".into()))?;
    let payload = r.checked_payload(len)?;
    let data: Vec<f32> = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    let matrix = Matrix::from_vec(rows, cols, data).map_err(|e| FormatError::Invalid(e.to_string()))?;
    FeatureMatrix::new(matrix, ids, name).map_err(|e| FormatError::Invalid(e.to_string()))
}

/// Writes through a temporary sibling file and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let file_name = path.file_name().ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", file_name.to_string_lossy(), std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_features(m: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_features(m))
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(&buf).map_err(|source| Error::Format { path: path.into(), source })
}

/// Reads a CSV feature table: header `sample_id,<col>,<col>,...`, one row per
/// sample. The extractor name is the file stem.
pub fn read_features_csv(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let csv_err = |message: String| Error::Csv { path: path.into(), message };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(e.to_string()))?;
    let cols = rdr.headers().map_err(|e| csv_err(e.to_string()))?.len().saturating_sub(1);
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(e.to_string()))?;
        ids.push(rec[0].to_string());
        for field in rec.iter().skip(1) {
            let v: f32 =
                field.trim().parse().map_err(|_| csv_err(format!("row {}: '{field}' is not a number", line + 1)))?;
            data.push(v);
        }
    }
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let matrix = Matrix::from_vec(ids.len(), cols, data).map_err(|e| csv_err(e.to_string()))?;
    FeatureMatrix::new(matrix, ids, name).map_err(|e| csv_err(e.to_string()))
}

/// A trained model with the class names it predicts and a free-form echo of
/// the configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub model: SoftmaxModel,
    pub class_names: Vec<String>,
    pub config_echo: String,
}

pub fn encode_model(saved: &SavedModel) -> Vec<u8> {
    let m = &saved.model;
    let (d, k) = (m.input_dim(), m.num_classes());
    let mut out = Vec::new();
    out.extend_from_slice(&MODEL_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(d as u64).to_le_bytes());
    out.extend_from_slice(&(k as u64).to_le_bytes());
    for name in &saved.class_names {
        put_string(&mut out, name);
    }
    put_string(&mut out, &saved.config_echo);
    let payload: Vec<u8> = m
        .params
        .weights
        .as_slice()
        .iter()
        .chain(&m.params.bias)
        .chain(&m.preprocess.mean)
        .chain(&m.preprocess.scale)
        .flat_map(|v| v.to_le_bytes())
        .collect();
    put_checked_payload(&mut out, &payload);
    out
}

pub fn decode_model(buf: &[u8]) -> Result<SavedModel, FormatError> {
    let mut r = Reader { buf, pos: 0 };
    r.header(MODEL_MAGIC)?;
    let d = r.usize()?;
    let k = r.usize()?;
    if k > buf.len() / 4 {
        return Err(FormatError::Truncated { offset: r.pos, needed: k * 4 });
    }
    let class_names = (0..k).map(|_| r.string()).collect::<Result<Vec<_>, _>>()?;
    let config_echo = r.string()?;
    let count = d
        .checked_add(1)
        .and_then(|v| v.checked_mul(k))
        .and_then(|v| v.checked_add(2 * d))
        .ok_or_else(|| FormatError::Invalid("payload size overflows".into()))?;
    let payload = r.checked_payload(count * 8)?;
    let vals: Vec<f64> = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(FormatError::Invalid("non-finite model parameter".into()));
    }
    let (weights, rest) = vals.split_at(d * k);
    let (bias, rest) = rest.split_at(k);
    let (mean, scale) = rest.split_at(d);
    if scale.iter().any(|&s| s <= 0.0) {
        return Err(FormatError::Invalid("non-positive scale".into()));
    }
    let model = SoftmaxModel {
        params: Params { weights: Matrix::from_vec(d, k, weights.to_vec()).expect("sized above"), bias: bias.to_vec() },
        preprocess: Preprocess { mean: mean.to_vec(), scale: scale.to_vec() },
    };
    Ok(SavedModel { model, class_names, config_echo })
}

pub fn write_model(saved: &SavedModel, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_model(saved))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<SavedModel> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&buf).map_err(|source| Error::Format { path: path.into(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FeatureMatrix {
        let data = (0..12).map(|i| i as f32 * 0.25 - 1.0).collect();
        let ids = (0..3).map(|i| format!("ISIC_{i:07}")).collect();
        FeatureMatrix::new(Matrix::from_vec(3, 4, data).unwrap(), ids, "alexnet").unwrap()
    }

    #[test]
    fn round_trip() {
        let m = sample();
        assert_eq!(decode_features(&encode_features(&m)).unwrap(), m);
    }

    #[test]
    fn corrupted_magic() {
        let mut buf = encode_features(&sample());
        buf[0] = b'X';
        assert!(matches!(decode_features(&buf), Err(FormatError::MagicMismatch { .. })));
        assert!(matches!(decode_features(b"MET"), Err(FormatError::MagicMismatch { .. })));
    }

    #[test]
    fn truncated_payload() {
        let buf = encode_features(&sample());
        assert!(matches!(decode_features(&buf[..buf.len() - 9]), Err(FormatError::Truncated { .. })));
    }

    #[test]
    fn flipped_payload_bit() {
        let mut buf = encode_features(&sample());
        let i = buf.len() - 10;
        buf[i] ^= 0x01;
        assert!(matches!(decode_features(&buf), Err(FormatError::ChecksumMismatch { .. })));
    }

    #[test]
    fn version_and_trailing_bytes() {
        let mut buf = encode_features(&sample());
        buf[8] = 9;
        assert_eq!(decode_features(&buf), Err(FormatError::UnsupportedVersion(9)));
        let mut buf = encode_features(&sample());
        buf.push(0);
        assert_eq!(decode_features(&buf), Err(FormatError::TrailingBytes(1)));
    }

    #[test]
    fn header_layout_is_fixed() {
        let buf = encode_features(&sample());
        assert_eq!(&buf[..8], b"METAFUSF");
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(buf[12..20].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(buf[20..28].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(buf[28..32].try_into().unwrap()), 7);
        assert_eq!(&buf[32..39], b"alexnet");
    }

    #[test]
    fn model_round_trip() {
        let mut model = SoftmaxModel::zeroed(2, 3);
        model.params.weights.set(1, 2, -0.5);
        model.params.bias[0] = 0.25;
        model.preprocess.mean[1] = 3.0;
        model.preprocess.scale[0] = 2.0;
        let saved = SavedModel {
            model,
            class_names: vec!["a".into(), "b".into(), "c".into()],
            config_echo: "max_epochs = 2000".into(),
        };
        let buf = encode_model(&saved);
        assert_eq!(decode_model(&buf).unwrap(), saved);
        assert!(matches!(decode_features(&buf), Err(FormatError::MagicMismatch { .. })));
    }
}
