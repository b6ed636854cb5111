//! CSV ingestion for metadata and labels.

use std::collections::BTreeSet;
use std::path::Path;

use metafuse_core::{LabelVector, MetadataTable};

use crate::error::{Error, Result};

fn csv_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Csv { path: path.into(), message: message.into() }
}

fn open(path: &Path) -> Result<(csv::Reader<std::fs::File>, Vec<String>)> {
    let mut rdr =
        csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(|e| csv_error(path, e.to_string()))?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e.to_string()))?.iter().map(String::from).collect();
    Ok((rdr, headers))
}

fn column(path: &Path, headers: &[String], name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| csv_error(path, format!("missing column '{name}' (have: {})", headers.join(", "))))
}

/// Reads a metadata CSV. Every column except `id_column` becomes a field;
/// empty cells are missing values. Cell text is kept verbatim.
pub fn read_metadata_csv(path: impl AsRef<Path>, id_column: &str) -> Result<(Vec<String>, MetadataTable)> {
    let path = path.as_ref();
    let (mut rdr, headers) = open(path)?;
    let id_idx = column(path, &headers, id_column)?;
    let field_names: Vec<String> =
        headers.iter().enumerate().filter(|&(i, _)| i != id_idx).map(|(_, h)| h.clone()).collect();
    let mut ids = Vec::new();
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e.to_string()))?;
        ids.push(rec[id_idx].to_string());
        records.push(
            rec.iter()
                .enumerate()
                .filter(|&(i, _)| i != id_idx)
                .map(|(_, v)| (!v.is_empty()).then(|| v.to_string()))
                .collect(),
        );
    }
    let table = MetadataTable::new(field_names, records).map_err(|e| csv_error(path, e.to_string()))?;
    Ok((ids, table))
}

/// Reads `id_column,label_column` pairs. Class names come from `classes`
/// when given (fixing the class order), otherwise from the sorted set of
/// label values.
pub fn read_labels_csv(
    path: impl AsRef<Path>,
    id_column: &str,
    label_column: &str,
    classes: Option<&[String]>,
) -> Result<(Vec<String>, LabelVector)> {
    let path = path.as_ref();
    let (mut rdr, headers) = open(path)?;
    let id_idx = column(path, &headers, id_column)?;
    let label_idx = column(path, &headers, label_column)?;
    let mut ids = Vec::new();
    let mut raw = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e.to_string()))?;
        ids.push(rec[id_idx].to_string());
        raw.push(rec[label_idx].to_string());
    }
    let class_names: Vec<String> = match classes {
        Some(c) => c.to_vec(),
        None => raw.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect(),
    };
    let labels = raw
        .iter()
        .zip(&ids)
        .map(|(l, id)| {
            class_names
                .iter()
                .position(|c| c == l)
                .ok_or_else(|| Error::Data(format!("sample '{id}' has unknown class '{l}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = LabelVector::new(labels, class_names).map_err(|e| Error::Data(e.to_string()))?;
    Ok((ids, labels))
}

pub fn write_metadata_csv(
    path: impl AsRef<Path>,
    id_column: &str,
    ids: &[String],
    table: &MetadataTable,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e.to_string()))?;
    let mut header = vec![id_column.to_string()];
    header.extend(table.field_names().iter().cloned());
    w.write_record(&header).map_err(|e| csv_error(path, e.to_string()))?;
    for (id, rec) in ids.iter().zip(table.records()) {
        let mut row = vec![id.as_str()];
        row.extend(rec.iter().map(|v| v.as_deref().unwrap_or("")));
        w.write_record(&row).map_err(|e| csv_error(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_labels_csv(
    path: impl AsRef<Path>,
    id_column: &str,
    label_column: &str,
    ids: &[String],
    labels: &LabelVector,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e.to_string()))?;
    w.write_record([id_column, label_column]).map_err(|e| csv_error(path, e.to_string()))?;
    for (id, &l) in ids.iter().zip(labels.labels()) {
        w.write_record([id.as_str(), labels.class_names()[l].as_str()]).map_err(|e| csv_error(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
