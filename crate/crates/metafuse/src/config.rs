//! Experiment configuration (TOML).
//!
//! ```toml
//! [data]
//! labels_csv = "labels.csv"
//! metadata_csv = "metadata.csv"
//! metadata_fields = ["age_approx", "sex", "anatom_site_general"]
//! id_column = "sample_id"        # default
//! label_column = "label"         # default
//!
//! [features.unprocessed]
//! alexnet = "features/alexnet.feat"
//!
//! [features.augmented]
//! alexnet = "features/alexnet_aug.feat"
//!
//! [split]                        # all optional
//! seed = 0
//! train_fraction = 0.7
//! stratified = false
//!
//! [train]                        # all optional
//! max_epochs = 2000
//! gradient_tolerance = 1e-6
//! learning_rate = 0.1
//! schedule = "backtracking"      # or "constant"
//! seed = 0
//!
//! [variants]                     # all optional
//! image_only = true
//! fused = true
//! unprocessed = true
//! augmented = false
//!
//! [run]                          # all optional
//! output_dir = "out"
//! workers = 1
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use metafuse_core::softmax::StepSchedule;
use metafuse_core::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub features: FeatureFiles,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub variants: Variants,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub labels_csv: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata_csv: Option<PathBuf>,
    #[serde(default)]
    pub metadata_fields: Vec<String>,
    #[serde(default = "default_id_column")]
    pub id_column: String,
    #[serde(default = "default_label_column")]
    pub label_column: String,
    /// Fixes the class order; defaults to the sorted label values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<String>>,
}

fn default_id_column() -> String {
    "sample_id".into()
}

fn default_label_column() -> String {
    "label".into()
}

/// Extractor name → feature file, per image-processing mode.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureFiles {
    #[serde(default)]
    pub unprocessed: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub augmented: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub seed: u64,
    pub train_fraction: f64,
    pub stratified: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { seed: 0, train_fraction: 0.7, stratified: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    #[default]
    Backtracking,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub max_epochs: usize,
    pub gradient_tolerance: f64,
    pub learning_rate: f64,
    pub schedule: Schedule,
    pub seed: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            max_epochs: d.max_epochs,
            gradient_tolerance: d.gradient_tolerance,
            learning_rate: d.learning_rate,
            schedule: Schedule::Backtracking,
            seed: d.seed,
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self) -> TrainConfig {
        TrainConfig {
            max_epochs: self.max_epochs,
            gradient_tolerance: self.gradient_tolerance,
            learning_rate: self.learning_rate,
            schedule: match self.schedule {
                Schedule::Backtracking => StepSchedule::Backtracking,
                Schedule::Constant => StepSchedule::Constant,
            },
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Variants {
    pub image_only: bool,
    pub fused: bool,
    pub unprocessed: bool,
    pub augmented: bool,
}

impl Default for Variants {
    fn default() -> Self {
        Self { image_only: true, fused: true, unprocessed: true, augmented: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub output_dir: PathBuf,
    pub workers: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { output_dir: PathBuf::from("out"), workers: 1 }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads and validates a config file, returning it with the directory that
    /// relative paths resolve against.
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, PathBuf)> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::from_toml(&text)?;
        cfg.validate()?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let v = &self.variants;
        if !v.image_only && !v.fused {
            return Err(Error::Config("no model variant (image_only / fused) requested".into()));
        }
        if !v.unprocessed && !v.augmented {
            return Err(Error::Config("no image mode (unprocessed / augmented) requested".into()));
        }
        if v.unprocessed && self.features.unprocessed.is_empty() {
            return Err(Error::Config("unprocessed mode requested but [features.unprocessed] is empty".into()));
        }
        if v.augmented && self.features.augmented.is_empty() {
            return Err(Error::Config("augmented mode requested but [features.augmented] is empty".into()));
        }
        if v.fused {
            if self.data.metadata_fields.is_empty() {
                return Err(Error::Config("fused variant requested with empty metadata_fields".into()));
            }
            if self.data.metadata_csv.is_none() {
                return Err(Error::Config("fused variant requested without data.metadata_csv".into()));
            }
        }
        let t = &self.train;
        self.train.to_train_config().validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(t.gradient_tolerance.is_finite()) {
            return Err(Error::Config("gradient_tolerance must be finite".into()));
        }
        let f = self.split.train_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!("train_fraction {f} is outside (0, 1)")));
        }
        if self.run.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    /// SHA-256 (first 16 hex digits) of the config with the `[run]` section
    /// reset, so output location and worker count do not change it.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.result_relevant_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// The config as echoed into deterministic reports (`[run]` reset).
    pub fn result_relevant_toml(&self) -> String {
        let mut c = self.clone();
        c.run = RunSection::default();
        c.to_toml()
    }
}

pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Extraction-timing manifest written next to a feature file as
/// `<feature file>.manifest.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionManifest {
    pub network: String,
    pub d_k: usize,
    pub image_count: usize,
    pub seconds: f64,
    #[serde(flatten)]
    pub extra: toml::Table,
}

impl ExtractionManifest {
    pub fn path_for(feature_file: &Path) -> PathBuf {
        let mut name = feature_file.as_os_str().to_owned();
        name.push(".manifest.toml");
        PathBuf::from(name)
    }

    /// Reads the manifest beside `feature_file`, if there is one.
    pub fn load_for(feature_file: &Path) -> Result<Option<Self>> {
        let path = Self::path_for(feature_file);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        toml::from_str(&text).map(Some).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }
}
