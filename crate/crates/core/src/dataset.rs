//! Validated in-memory dataset types: image features and class labels.

use alloc::string::String;
use alloc::vec::Vec;

use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DatasetError {
    #[error("feature matrix is empty ({rows}x{cols})")]
    Empty { rows: usize, cols: usize },
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("{ids} sample ids for {rows} feature rows")]
    IdCount { ids: usize, rows: usize },
    #[error("duplicate sample id '{0}'")]
    DuplicateId(String),
    #[error("label {label} at position {index} is out of range for {classes} classes")]
    LabelOutOfRange { index: usize, label: usize, classes: usize },
    #[error("at least two classes are required, got {0}")]
    TooFewClasses(usize),
    #[error("duplicate class name '{0}'")]
    DuplicateClass(String),
}

/// N × d matrix of deep image features keyed by sample id.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Matrix<f32>,
    sample_ids: Vec<String>,
    extractor_name: String,
}

impl FeatureMatrix {
    pub fn new(
        data: Matrix<f32>,
        sample_ids: Vec<String>,
        extractor_name: impl Into<String>,
    ) -> Result<Self, DatasetError> {
        if data.rows() == 0 || data.cols() == 0 {
            return Err(DatasetError::Empty { rows: data.rows(), cols: data.cols() });
        }
        if sample_ids.len() != data.rows() {
            return Err(DatasetError::IdCount { ids: sample_ids.len(), rows: data.rows() });
        }
        if let Some(pos) = data.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(DatasetError::NonFinite { row: pos / data.cols(), col: pos % data.cols() });
        }
        check_unique(&sample_ids)?;
        Ok(Self { data, sample_ids, extractor_name: extractor_name.into() })
    }

    pub fn data(&self) -> &Matrix<f32> {
        &self.data
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn extractor_name(&self) -> &str {
        &self.extractor_name
    }

    pub fn rows(&self) -> usize {
        self.data.rows()
    }

    /// Feature dimensionality d_K.
    pub fn dim(&self) -> usize {
        self.data.cols()
    }

    /// Reorders rows to follow `ids`. Returns the first id that is missing.
    pub fn reorder(&self, ids: &[String]) -> Result<Self, String> {
        let mut sorted: Vec<(&str, usize)> = self.sample_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        sorted.sort_unstable();
        let mut indices = Vec::with_capacity(ids.len());
        for id in ids {
            match sorted.binary_search_by(|(s, _)| (*s).cmp(id.as_str())) {
                Ok(p) => indices.push(sorted[p].1),
                Err(_) => return Err(id.clone()),
            }
        }
        Ok(Self {
            data: self.data.select_rows(&indices),
            sample_ids: ids.to_vec(),
            extractor_name: self.extractor_name.clone(),
        })
    }
}

/// Class labels in `[0, K)` with their names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, class_names: Vec<String>) -> Result<Self, DatasetError> {
        let k = class_names.len();
        if k < 2 {
            return Err(DatasetError::TooFewClasses(k));
        }
        for (i, name) in class_names.iter().enumerate() {
            if class_names[..i].contains(name) {
                return Err(DatasetError::DuplicateClass(name.clone()));
            }
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
            return Err(DatasetError::LabelOutOfRange { index, label, classes: k });
        }
        Ok(Self { labels, class_names })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self { labels: indices.iter().map(|&i| self.labels[i]).collect(), class_names: self.class_names.clone() }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0; self.num_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

fn check_unique(ids: &[String]) -> Result<(), DatasetError> {
    let mut sorted: Vec<&String> = ids.iter().collect();
    sorted.sort_unstable();
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            return Err(DatasetError::DuplicateId(w[0].clone()));
        }
    }
    Ok(())
}
