//! ASCII-decimal metadata encoding.
//!
//! Every metadata value is treated as text. A field's width is the byte
//! length of its longest value across the whole table; shorter values are
//! right-padded with spaces (code 32) and each byte becomes one column
//! holding its ASCII code. Missing values become a run of zeros.
//!
//! ```
//! use metafuse_core::codec::{encode_table, MetadataTable};
//!
//! let table = MetadataTable::new(
//!     vec!["age".into()],
//!     vec![vec![Some("55".into())], vec![Some("5".into())], vec![None]],
//! )
//! .unwrap();
//! let enc = encode_table(&table).unwrap();
//! assert_eq!(enc.values.as_slice(), &[53, 53, 53, 32, 0, 0]);
//! ```

use alloc::string::String;
use alloc::vec::Vec;

use crate::matrix::Matrix;

const PAD: u8 = b' ';
const MISSING: u8 = 0;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("metadata table has no records")]
    EmptyInput,
    #[error("non-ASCII byte 0x{byte:02x} in row {row}, field '{field}'")]
    NonAscii { row: usize, field: String, byte: u8 },
    #[error("NUL byte in row {row}, field '{field}' collides with the missing-value code")]
    NulByte { row: usize, field: String },
    #[error("invalid metadata table: {0}")]
    InvalidTable(String),
    #[error("encoded metadata is malformed: {0}")]
    Structural(String),
}

/// N records × F named fields of optional text values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetadataTable {
    field_names: Vec<String>,
    records: Vec<Vec<Option<String>>>,
}

impl MetadataTable {
    /// Builds a table, normalizing explicitly empty strings to missing.
    pub fn new(field_names: Vec<String>, records: Vec<Vec<Option<String>>>) -> Result<Self, CodecError> {
        for (i, name) in field_names.iter().enumerate() {
            if name.is_empty() {
                return Err(CodecError::InvalidTable(alloc::format!("field {i} has an empty name")));
            }
            if field_names[..i].contains(name) {
                return Err(CodecError::InvalidTable(alloc::format!("duplicate field name '{name}'")));
            }
        }
        let f = field_names.len();
        let mut records = records;
        for (row, rec) in records.iter_mut().enumerate() {
            if rec.len() != f {
                return Err(CodecError::InvalidTable(alloc::format!(
                    "row {row} has {} entries, expected {f}",
                    rec.len()
                )));
            }
            for v in rec.iter_mut() {
                if v.as_deref() == Some("") {
                    *v = None;
                }
            }
        }
        Ok(Self { field_names, records })
    }

    pub fn field_names(&self) -> &[String] {
        &self.field_names
    }

    pub fn records(&self) -> &[Vec<Option<String>>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, row: usize, field: usize) -> Option<&str> {
        self.records[row][field].as_deref()
    }

    /// Keeps only the named fields, in the order given.
    pub fn project(&self, fields: &[&str]) -> Result<Self, CodecError> {
        let idx = fields
            .iter()
            .map(|name| {
                self.field_names
                    .iter()
                    .position(|f| f == name)
                    .ok_or_else(|| CodecError::InvalidTable(alloc::format!("unknown field '{name}'")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let records = self.records.iter().map(|rec| idx.iter().map(|&i| rec[i].clone()).collect()).collect();
        Self::new(fields.iter().map(|&f| String::from(f)).collect(), records)
    }

    /// Copies the listed records, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self {
            field_names: self.field_names.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }
}

/// Column range occupied by one field in an [`EncodedMetadata`] matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldSpan {
    pub offset: usize,
    pub width: usize,
}

/// N × d' matrix of ASCII codes with the per-field column layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedMetadata {
    pub values: Matrix<u8>,
    pub field_spans: Vec<FieldSpan>,
}

impl EncodedMetadata {
    /// Total encoded width d'.
    pub fn width(&self) -> usize {
        self.values.cols()
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    /// An N-row matrix with no fields.
    pub fn empty(rows: usize) -> Self {
        Self { values: Matrix::zeros(rows, 0), field_spans: Vec::new() }
    }

    fn check_layout(&self) -> Result<(), CodecError> {
        let mut offset = 0;
        for (i, span) in self.field_spans.iter().enumerate() {
            if span.offset != offset || span.width == 0 {
                return Err(CodecError::Structural(alloc::format!(
                    "span {i} at offset {} width {} breaks contiguous layout (expected offset {offset})",
                    span.offset,
                    span.width
                )));
            }
            offset += span.width;
        }
        if offset != self.values.cols() {
            return Err(CodecError::Structural(alloc::format!(
                "spans cover {offset} columns but matrix has {}",
                self.values.cols()
            )));
        }
        Ok(())
    }
}

/// Per-field widths: longest value in bytes, at least 1.
pub fn field_widths(table: &MetadataTable) -> Vec<usize> {
    (0..table.field_names.len())
        .map(|f| table.records.iter().filter_map(|rec| rec[f].as_ref().map(String::len)).max().unwrap_or(0).max(1))
        .collect()
}

pub fn encode_table(table: &MetadataTable) -> Result<EncodedMetadata, CodecError> {
    if table.is_empty() {
        return Err(CodecError::EmptyInput);
    }
    let widths = field_widths(table);
    let mut spans = Vec::with_capacity(widths.len());
    let mut offset = 0;
    for &width in &widths {
        spans.push(FieldSpan { offset, width });
        offset += width;
    }
    let total = offset;

    let mut values = Vec::with_capacity(total * table.len());
    for (row, rec) in table.records.iter().enumerate() {
        for (f, (value, &width)) in rec.iter().zip(&widths).enumerate() {
            match value {
                None => values.extend(core::iter::repeat_n(MISSING, width)),
                Some(text) => {
                    for &byte in text.as_bytes() {
                        if !byte.is_ascii() {
                            return Err(CodecError::NonAscii { row, field: table.field_names[f].clone(), byte });
                        }
                        if byte == 0 {
                            return Err(CodecError::NulByte { row, field: table.field_names[f].clone() });
                        }
                    }
                    values.extend_from_slice(text.as_bytes());
                    values.extend(core::iter::repeat_n(PAD, width - text.len()));
                }
            }
        }
    }
    let values = Matrix::from_vec(table.len(), total, values).expect("encoded buffer length follows from widths");
    Ok(EncodedMetadata { values, field_spans: spans })
}

/// Inverse of [`encode_table`] up to trailing-space padding. All-zero spans
/// (and values that were only spaces) decode to missing.
pub fn decode_table(enc: &EncodedMetadata, field_names: &[String]) -> Result<MetadataTable, CodecError> {
    enc.check_layout()?;
    if field_names.len() != enc.field_spans.len() {
        return Err(CodecError::Structural(alloc::format!(
            "{} field names for {} spans",
            field_names.len(),
            enc.field_spans.len()
        )));
    }
    let mut records = Vec::with_capacity(enc.rows());
    for (row, codes) in enc.values.iter_rows().enumerate() {
        let mut rec = Vec::with_capacity(enc.field_spans.len());
        for span in &enc.field_spans {
            let bytes = &codes[span.offset..span.offset + span.width];
            if bytes.iter().all(|&b| b == MISSING) {
                rec.push(None);
                continue;
            }
            if let Some(&b) = bytes.iter().find(|&&b| b == MISSING || b > 127) {
                return Err(CodecError::Structural(alloc::format!(
                    "row {row}: code {b} inside a non-missing span at offset {}",
                    span.offset
                )));
            }
            let end = bytes.iter().rposition(|&b| b != PAD).map_or(0, |p| p + 1);
            let text: String = bytes[..end].iter().map(|&b| char::from(b)).collect();
            rec.push(if text.is_empty() { None } else { Some(text) });
        }
        records.push(rec);
    }
    MetadataTable::new(field_names.to_vec(), records)
}
