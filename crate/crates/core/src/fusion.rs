//! Column-wise concatenation of image features and encoded metadata.

use alloc::string::String;
use alloc::vec::Vec;

use crate::codec::{EncodedMetadata, FieldSpan};
use crate::dataset::FeatureMatrix;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FusionError {
    #[error("row count mismatch: {features} feature rows, {metadata} metadata rows")]
    RowCount { features: usize, metadata: usize },
    #[error("sample id mismatch at row {row}: feature '{feature_id}' vs metadata '{metadata_id}'")]
    IdMismatch { row: usize, feature_id: String, metadata_id: String },
}

/// The fused design matrix `[features | metadata codes]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedMatrix {
    pub data: Matrix<f32>,
    pub sample_ids: Vec<String>,
    pub extractor_name: String,
    /// Metadata field layout, offsets relative to the metadata block.
    pub metadata_fields: Vec<FieldSpan>,
    image_dim: usize,
}

impl FusedMatrix {
    /// Column range `(offset, width)` of the image block.
    pub fn image_span(&self) -> (usize, usize) {
        (0, self.image_dim)
    }

    /// Column range `(offset, width)` of the metadata block.
    pub fn metadata_span(&self) -> (usize, usize) {
        (self.image_dim, self.data.cols() - self.image_dim)
    }
}

/// Concatenates `features` and `metadata` row by row. `metadata_ids` must list
/// the same sample ids as `features`, in the same order.
pub fn fuse(
    features: &FeatureMatrix,
    metadata: &EncodedMetadata,
    metadata_ids: &[String],
) -> Result<FusedMatrix, FusionError> {
    let n = features.rows();
    if metadata.rows() != n || metadata_ids.len() != n {
        return Err(FusionError::RowCount { features: n, metadata: metadata.rows().min(metadata_ids.len()) });
    }
    if let Some((row, (f, m))) = features.sample_ids().iter().zip(metadata_ids).enumerate().find(|(_, (f, m))| f != m) {
        return Err(FusionError::IdMismatch { row, feature_id: f.clone(), metadata_id: m.clone() });
    }
    let d_img = features.dim();
    let d_meta = metadata.width();
    let mut data = Vec::with_capacity(n * (d_img + d_meta));
    for (img, codes) in features.data().iter_rows().zip(metadata.values.iter_rows()) {
        data.extend_from_slice(img);
        data.extend(codes.iter().map(|&c| f32::from(c)));
    }
    Ok(FusedMatrix {
        data: Matrix::from_vec(n, d_img + d_meta, data).expect("row lengths add up"),
        sample_ids: features.sample_ids().to_vec(),
        extractor_name: features.extractor_name().into(),
        metadata_fields: metadata.field_spans.clone(),
        image_dim: d_img,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| alloc::format!("id{i}")).collect()
    }

    #[test]
    fn block_concatenation() {
        let f = FeatureMatrix::new(Matrix::from_vec(2, 2, vec![1., 2., 3., 4.]).unwrap(), ids(2), "x").unwrap();
        let g = EncodedMetadata {
            values: Matrix::from_vec(2, 3, vec![5, 6, 7, 8, 9, 10]).unwrap(),
            field_spans: vec![FieldSpan { offset: 0, width: 3 }],
        };
        let h = fuse(&f, &g, &ids(2)).unwrap();
        assert_eq!(h.data.as_slice(), &[1., 2., 5., 6., 7., 3., 4., 8., 9., 10.]);
        assert_eq!(h.image_span(), (0, 2));
        assert_eq!(h.metadata_span(), (2, 3));
    }

    #[test]
    fn zero_width_metadata_is_identity() {
        let f = FeatureMatrix::new(Matrix::from_vec(2, 2, vec![1., 2., 3., 4.]).unwrap(), ids(2), "x").unwrap();
        let h = fuse(&f, &EncodedMetadata::empty(2), &ids(2)).unwrap();
        assert_eq!(&h.data, f.data());
        assert_eq!(h.metadata_span(), (2, 0));
    }

    #[test]
    fn alignment_errors() {
        let f = FeatureMatrix::new(Matrix::from_vec(2, 1, vec![1., 2.]).unwrap(), ids(2), "x").unwrap();
        let g = EncodedMetadata::empty(2);
        let swapped = vec!["id0".to_string(), "idX".to_string()];
        assert_eq!(
            fuse(&f, &g, &swapped),
            Err(FusionError::IdMismatch { row: 1, feature_id: "id1".into(), metadata_id: "idX".into() })
        );
        assert!(matches!(fuse(&f, &EncodedMetadata::empty(3), &ids(3)), Err(FusionError::RowCount { .. })));
    }
}
