//! Synthetic dataset generator.
//!
//! Classes come in pairs. Image features separate the pairs well and the two
//! classes inside a pair only weakly; the metadata fields (`age`, `sex`,
//! `site`) carry the within-pair distinction. A model that sees both should
//! therefore beat an image-only model. With [`MetadataSignal::Noise`] the
//! metadata is drawn independently of the class.

use std::fs;
use std::path::{Path, PathBuf};

use metafuse_core::{FeatureMatrix, LabelVector, Matrix, MetadataTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{
    DataConfig, ExperimentConfig, ExtractionManifest, FeatureFiles, RunSection, SplitConfig, TrainSection, Variants,
};
use crate::error::{Error, Result};
use crate::format::write_features;
use crate::tables::{write_labels_csv, write_metadata_csv};

pub const EXTRACTOR_NAME: &str = "synthnet";
pub const METADATA_FIELDS: [&str; 3] = ["age", "sex", "site"];

const SITES_A: [&str; 3] = ["back", "anterior torso", "abdomen"];
const SITES_B: [&str; 3] = ["upper extremity", "lower extremity", "face"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetadataSignal {
    Complementary,
    Noise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub samples: usize,
    pub dim: usize,
    pub classes: usize,
    pub seed: u64,
    pub metadata: MetadataSignal,
    /// Number of leading feature columns that carry the pair means.
    pub informative_dims: usize,
    /// Scale of the pair means relative to unit noise.
    pub separation: f64,
    /// Scale of the per-class offsets inside a pair.
    pub within_pair_separation: f64,
    /// Probability that a metadata cell is left empty.
    pub missing_rate: f64,
    /// Probability that a sample's metadata follows the other class of its pair.
    pub metadata_flip_rate: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            samples: 2000,
            dim: 256,
            classes: 8,
            seed: 0,
            metadata: MetadataSignal::Complementary,
            informative_dims: 32,
            separation: 0.6,
            within_pair_separation: 0.3,
            missing_rate: 0.03,
            metadata_flip_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub sample_ids: Vec<String>,
    pub labels: LabelVector,
    pub metadata: MetadataTable,
    pub features: FeatureMatrix,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    if spec.classes < 2 || spec.classes % 2 != 0 {
        return Err(Error::Config(format!("synthetic data needs an even class count >= 2, got {}", spec.classes)));
    }
    if spec.samples < spec.classes || spec.dim == 0 || spec.informative_dims > spec.dim {
        return Err(Error::Config("synthetic spec has inconsistent sizes".into()));
    }
    // Features and metadata use separate streams, so the image features for a
    // seed are the same whichever metadata mode is requested.
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut meta_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    meta_rng.set_stream(1);
    let pairs = spec.classes / 2;
    let pair_means: Vec<Vec<f64>> =
        (0..pairs).map(|_| (0..spec.informative_dims).map(|_| spec.separation * normal(&mut rng)).collect()).collect();
    let class_means: Vec<Vec<f64>> = (0..spec.classes)
        .map(|c| pair_means[c / 2].iter().map(|&m| m + spec.within_pair_separation * normal(&mut rng)).collect())
        .collect();

    let width = (spec.samples - 1).to_string().len();
    let sample_ids: Vec<String> = (0..spec.samples).map(|i| format!("SYN_{i:0width$}")).collect();
    let labels: Vec<usize> = (0..spec.samples).map(|i| i % spec.classes).collect();
    let mut order: Vec<usize> = (0..spec.samples).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let labels: Vec<usize> = order.iter().map(|&i| labels[i]).collect();

    let mut data = Vec::with_capacity(spec.samples * spec.dim);
    let mut records = Vec::with_capacity(spec.samples);
    for &y in &labels {
        let mean = &class_means[y];
        for j in 0..spec.dim {
            let mu = mean.get(j).copied().unwrap_or(0.0);
            data.push((mu + normal(&mut rng)).max(0.0) as f32);
        }
        let side = match spec.metadata {
            MetadataSignal::Complementary => (y % 2 == 1) ^ meta_rng.random_bool(spec.metadata_flip_rate),
            MetadataSignal::Noise => meta_rng.random_bool(0.5),
        };
        let age = if side { meta_rng.random_range(55..=85) } else { meta_rng.random_range(20..=45) };
        let sex = if side ^ meta_rng.random_bool(0.15) { "male" } else { "female" };
        let site = if side { SITES_B[meta_rng.random_range(0..3)] } else { SITES_A[meta_rng.random_range(0..3)] };
        let mut cell = |v: String| (!meta_rng.random_bool(spec.missing_rate)).then_some(v);
        records.push(vec![cell(age.to_string()), cell(sex.to_string()), cell(site.to_string())]);
    }

    let class_names = (0..spec.classes).map(|c| format!("class{c}")).collect();
    let labels = LabelVector::new(labels, class_names).map_err(|e| Error::Data(e.to_string()))?;
    let metadata = MetadataTable::new(METADATA_FIELDS.iter().map(|s| s.to_string()).collect(), records)
        .map_err(|e| Error::Data(e.to_string()))?;
    let matrix = Matrix::from_vec(spec.samples, spec.dim, data).map_err(|e| Error::Data(e.to_string()))?;
    let features =
        FeatureMatrix::new(matrix, sample_ids.clone(), EXTRACTOR_NAME).map_err(|e| Error::Data(e.to_string()))?;
    Ok(SynthData { sample_ids, labels, metadata, features })
}

/// The config that `write_dataset` pairs with the generated files.
pub fn dataset_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        data: DataConfig {
            labels_csv: "labels.csv".into(),
            metadata_csv: Some("metadata.csv".into()),
            metadata_fields: METADATA_FIELDS.iter().map(|s| s.to_string()).collect(),
            id_column: "sample_id".into(),
            label_column: "label".into(),
            classes: None,
        },
        features: FeatureFiles {
            unprocessed: [(EXTRACTOR_NAME.to_string(), PathBuf::from("features/synthnet.feat"))].into(),
            augmented: Default::default(),
        },
        split: SplitConfig { seed, ..Default::default() },
        train: TrainSection { seed, ..Default::default() },
        variants: Variants::default(),
        run: RunSection::default(),
    }
}

/// Writes labels, metadata, features (with manifest) and `config.toml` into
/// `dir`. Returns the config path.
pub fn write_dataset(data: &SynthData, seed: u64, dir: &Path) -> Result<PathBuf> {
    let feat_dir = dir.join("features");
    fs::create_dir_all(&feat_dir).map_err(|e| Error::io(&feat_dir, e))?;
    write_labels_csv(dir.join("labels.csv"), "sample_id", "label", &data.sample_ids, &data.labels)?;
    write_metadata_csv(dir.join("metadata.csv"), "sample_id", &data.sample_ids, &data.metadata)?;
    let feat = feat_dir.join("synthnet.feat");
    write_features(&data.features, &feat)?;
    let manifest = ExtractionManifest {
        network: EXTRACTOR_NAME.into(),
        d_k: data.features.dim(),
        image_count: data.features.rows(),
        seconds: 0.0,
        extra: Default::default(),
    };
    let mpath = ExtractionManifest::path_for(&feat);
    fs::write(&mpath, manifest.to_toml()).map_err(|e| Error::io(&mpath, e))?;
    let cfg_path = dir.join("config.toml");
    fs::write(&cfg_path, dataset_config(seed).to_toml()).map_err(|e| Error::io(&cfg_path, e))?;
    Ok(cfg_path)
}
