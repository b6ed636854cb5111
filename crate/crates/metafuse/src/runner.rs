//! The experiment grid: every extractor × {unprocessed, augmented} ×
//! {image only, fused}, trained and evaluated on one shared split.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::time::Instant;

use metafuse_core::softmax::TrainError;
use metafuse_core::split::{stratified_split, SplitError};
use metafuse_core::{
    delta_report, encode_table, evaluate, fixed_split, fuse, predict_proba, train, DeltaReport, EncodedMetadata,
    EvaluationReport, FeatureMatrix, LabelVector, Matrix, MetadataTable, SoftmaxModel, SplitSpec, TrainTrace,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{resolve, ExperimentConfig, ExtractionManifest};
use crate::error::{Error, Result};
use crate::format::read_features;
use crate::tables::{read_labels_csv, read_metadata_csv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Unprocessed,
    Augmented,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Unprocessed => "unprocessed",
            Mode::Augmented => "augmented",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    ImageOnly,
    Fused,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::ImageOnly => "image_only",
            Variant::Fused => "fused",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One cell of the grid.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Job {
    pub extractor: String,
    pub mode: Mode,
    pub variant: Variant,
}

impl fmt::Display for Job {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.extractor, self.mode, self.variant)
    }
}

#[derive(Debug, Clone)]
pub struct LoadedFeatures {
    pub matrix: FeatureMatrix,
    pub manifest: Option<ExtractionManifest>,
}

/// All inputs of one experiment, aligned to a single sample order.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub sample_ids: Vec<String>,
    pub labels: LabelVector,
    /// Encoded over the full table, so train and test share one layout.
    pub metadata: Option<EncodedMetadata>,
    pub features: BTreeMap<(Mode, String), LoadedFeatures>,
    pub split: SplitSpec,
}

fn first_missing<'a>(wanted: &'a [String], have: &HashMap<&str, usize>) -> Option<&'a String> {
    wanted.iter().find(|id| !have.contains_key(id.as_str()))
}

fn index_ids<'a>(ids: &'a [String], source: &str) -> Result<HashMap<&'a str, usize>> {
    let mut map = HashMap::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        if map.insert(id.as_str(), i).is_some() {
            return Err(Error::Alignment(format!("duplicate sample id '{id}' in {source}")));
        }
    }
    Ok(map)
}

/// Checks that `source_ids` holds exactly the ids in `wanted` and returns,
/// for each wanted id, its row in the source.
fn align(
    wanted: &[String],
    wanted_map: &HashMap<&str, usize>,
    source_ids: &[String],
    source: &str,
) -> Result<Vec<usize>> {
    let source_map = index_ids(source_ids, source)?;
    if let Some(id) = first_missing(wanted, &source_map) {
        return Err(Error::Alignment(format!("sample '{id}' is labelled but missing from {source}")));
    }
    if let Some(id) = first_missing(source_ids, wanted_map) {
        return Err(Error::Alignment(format!("sample '{id}' in {source} has no label")));
    }
    Ok(wanted.iter().map(|id| source_map[id.as_str()]).collect())
}

fn split_error(e: SplitError) -> Error {
    Error::Config(format!("split: {e}"))
}

fn train_error(e: TrainError) -> Error {
    match e {
        TrainError::Divergence { .. } | TrainError::NonFiniteInput { .. } => Error::Numeric(e.to_string()),
        TrainError::InvalidConfig(_) => Error::Config(e.to_string()),
        _ => Error::Data(e.to_string()),
    }
}

impl Experiment {
    /// Reads every file named by `config` (paths relative to `base`).
    /// `only_extractor` restricts feature loading to one extractor.
    pub fn load(config: &ExperimentConfig, base: &Path, only_extractor: Option<&str>) -> Result<Self> {
        config.validate()?;
        let d = &config.data;
        let (ids, labels) =
            read_labels_csv(resolve(base, &d.labels_csv), &d.id_column, &d.label_column, d.classes.as_deref())?;
        let metadata = match (&d.metadata_csv, config.variants.fused) {
            (Some(p), true) => Some(read_metadata_csv(resolve(base, p), &d.id_column)?),
            _ => None,
        };
        let mut features = Vec::new();
        for (mode, enabled, map) in [
            (Mode::Unprocessed, config.variants.unprocessed, &config.features.unprocessed),
            (Mode::Augmented, config.variants.augmented, &config.features.augmented),
        ] {
            if !enabled {
                continue;
            }
            for (name, path) in map {
                if only_extractor.is_some_and(|o| o != name) {
                    continue;
                }
                let path = resolve(base, path);
                let matrix = read_features(&path)?;
                let manifest = ExtractionManifest::load_for(&path)?;
                features.push((mode, name.clone(), matrix, manifest));
            }
        }
        if features.is_empty() {
            return Err(Error::Config(match only_extractor {
                Some(o) => format!("no feature file for extractor '{o}'"),
                None => "no feature files selected".into(),
            }));
        }
        Self::from_parts(config.clone(), ids, labels, metadata, features)
    }

    /// Builds an experiment from in-memory inputs. Features and metadata are
    /// reordered to follow `sample_ids`; any id present in one source but
    /// not another is an error.
    pub fn from_parts(
        config: ExperimentConfig,
        sample_ids: Vec<String>,
        labels: LabelVector,
        metadata: Option<(Vec<String>, MetadataTable)>,
        features: Vec<(Mode, String, FeatureMatrix, Option<ExtractionManifest>)>,
    ) -> Result<Self> {
        config.validate()?;
        if labels.len() != sample_ids.len() {
            return Err(Error::Alignment(format!("{} labels for {} sample ids", labels.len(), sample_ids.len())));
        }
        let id_map = index_ids(&sample_ids, "labels")?;

        let metadata = match metadata {
            Some((meta_ids, table)) if config.variants.fused => {
                let rows = align(&sample_ids, &id_map, &meta_ids, "metadata")?;
                let fields: Vec<&str> = config.data.metadata_fields.iter().map(String::as_str).collect();
                let table = table.select_rows(&rows).project(&fields).map_err(|e| Error::Config(e.to_string()))?;
                Some(encode_table(&table).map_err(|e| Error::Data(e.to_string()))?)
            }
            None if config.variants.fused => {
                return Err(Error::Config("fused variant requested without metadata".into()));
            }
            _ => None,
        };

        let mut loaded = BTreeMap::new();
        for (mode, name, matrix, manifest) in features {
            align(&sample_ids, &id_map, matrix.sample_ids(), &format!("features '{name}' ({mode})"))?;
            let matrix = matrix.reorder(&sample_ids).expect("aligned above");
            if loaded.insert((mode, name.clone()), LoadedFeatures { matrix, manifest }).is_some() {
                return Err(Error::Config(format!("extractor '{name}' listed twice for {mode}")));
            }
        }

        let s = &config.split;
        let split = if s.stratified {
            stratified_split(labels.labels(), labels.num_classes(), s.seed, s.train_fraction)
        } else {
            fixed_split(sample_ids.len(), s.seed, s.train_fraction)
        }
        .map_err(split_error)?;

        Ok(Self { config, sample_ids, labels, metadata, features: loaded, split })
    }

    /// Grid cells in a fixed order: extractor, then mode, then variant.
    pub fn jobs(&self) -> Vec<Job> {
        let v = &self.config.variants;
        let mut variants = Vec::new();
        if v.image_only {
            variants.push(Variant::ImageOnly);
        }
        if v.fused {
            variants.push(Variant::Fused);
        }
        let mut jobs: Vec<Job> = self
            .features
            .keys()
            .flat_map(|(mode, name)| {
                variants.iter().map(move |&variant| Job { extractor: name.clone(), mode: *mode, variant })
            })
            .collect();
        jobs.sort();
        jobs
    }

    pub fn extractors(&self) -> Vec<String> {
        let mut names: Vec<String> = self.features.keys().map(|(_, n)| n.clone()).collect();
        names.sort();
        names.dedup();
        names
    }

    fn features_for(&self, job: &Job) -> Result<&LoadedFeatures> {
        self.features
            .get(&(job.mode, job.extractor.clone()))
            .ok_or_else(|| Error::Config(format!("no {} features for extractor '{}'", job.mode, job.extractor)))
    }

    /// The full design matrix for a job with its image and metadata widths.
    pub fn design_matrix(&self, job: &Job) -> Result<(Matrix<f32>, usize, usize)> {
        let f = &self.features_for(job)?.matrix;
        match job.variant {
            Variant::ImageOnly => Ok((f.data().clone(), f.dim(), 0)),
            Variant::Fused => {
                let meta = self
                    .metadata
                    .as_ref()
                    .ok_or_else(|| Error::Config("fused variant requested without metadata".into()))?;
                let fused = fuse(f, meta, &self.sample_ids).map_err(|e| Error::Alignment(e.to_string()))?;
                let d_meta = fused.metadata_span().1;
                Ok((fused.data, f.dim(), d_meta))
            }
        }
    }

    /// Trains one job on the training split. Returns the model, its trace
    /// (with wall time) and the design widths.
    pub fn fit(&self, job: &Job) -> Result<(SoftmaxModel, TrainTrace, usize, usize)> {
        let (x, d_k, d_meta) = self.design_matrix(job)?;
        let x_train = x.select_rows(&self.split.train_indices);
        let y_train = self.labels.select(&self.split.train_indices);
        let cfg = self.config.train.to_train_config();
        let start = Instant::now();
        let (model, mut trace) =
            train(&x_train, y_train.labels(), self.labels.num_classes(), &cfg).map_err(train_error)?;
        trace.wall_seconds = Some(start.elapsed().as_secs_f64());
        Ok((model, trace, d_k, d_meta))
    }

    /// Evaluates a model on the shared test split.
    pub fn evaluate_model(&self, job: &Job, model: &SoftmaxModel) -> Result<EvaluationReport> {
        let (x, _, _) = self.design_matrix(job)?;
        let x_test = x.select_rows(&self.split.test_indices);
        let y_test = self.labels.select(&self.split.test_indices);
        let probs = predict_proba(model, &x_test).map_err(|e| Error::Data(e.to_string()))?;
        if let Some(pos) = probs.as_slice().iter().position(|p| !p.is_finite()) {
            return Err(Error::Numeric(format!("non-finite probability for test row {}", pos / probs.cols())));
        }
        evaluate(&probs, y_test.labels(), self.labels.class_names(), self.split.fingerprint())
            .map_err(|e| Error::Numeric(e.to_string()))
    }

    pub fn run_job(&self, job: &Job) -> Result<RunRecord> {
        let (model, trace, d_k, d_meta) = self.fit(job)?;
        let report = self.evaluate_model(job, &model)?;
        let extraction_seconds = self.features_for(job)?.manifest.as_ref().map(|m| m.seconds);
        Ok(RunRecord {
            extractor: job.extractor.clone(),
            mode: job.mode,
            variant: job.variant,
            d_k,
            d_meta,
            extraction_seconds,
            train_seconds: trace.wall_seconds.unwrap_or(0.0),
            trace,
            report,
        })
    }

    /// Runs every job on up to `workers` threads. Results come back in job
    /// order regardless of scheduling.
    pub fn run(&self, workers: usize) -> Result<RunOutcome> {
        let jobs = self.jobs();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        let results: Vec<Result<RunRecord>> = pool.install(|| {
            jobs.par_iter().map(|job| self.run_job(job).map_err(|e| e.context(&job.to_string()))).collect()
        });
        let records = results.into_iter().collect::<Result<Vec<_>>>()?;
        let deltas = pair_deltas(&records)?;
        Ok(RunOutcome { records, deltas, split_fingerprint: self.split.fingerprint() })
    }
}

/// Result of one grid cell.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub extractor: String,
    pub mode: Mode,
    pub variant: Variant,
    pub d_k: usize,
    pub d_meta: usize,
    pub extraction_seconds: Option<f64>,
    pub train_seconds: f64,
    pub trace: TrainTrace,
    pub report: EvaluationReport,
}

#[derive(Debug, Clone)]
pub struct DeltaRecord {
    pub extractor: String,
    pub mode: Mode,
    pub delta: DeltaReport,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<RunRecord>,
    pub deltas: Vec<DeltaRecord>,
    pub split_fingerprint: u64,
}

/// (image only, fused) runs of one extractor and mode.
pub(crate) type Pair<'a, T> = (Option<&'a T>, Option<&'a T>);

/// `fused − image_only` for every (extractor, mode) that has both runs.
pub fn pair_deltas(records: &[RunRecord]) -> Result<Vec<DeltaRecord>> {
    let mut by_key: BTreeMap<(String, Mode), Pair<'_, RunRecord>> = BTreeMap::new();
    for r in records {
        let slot = by_key.entry((r.extractor.clone(), r.mode)).or_default();
        match r.variant {
            Variant::ImageOnly => slot.0 = Some(r),
            Variant::Fused => slot.1 = Some(r),
        }
    }
    let mut out = Vec::new();
    for ((extractor, mode), pair) in by_key {
        if let (Some(img), Some(fused)) = pair {
            let delta = delta_report(&fused.report, &img.report).map_err(|e| Error::Data(e.to_string()))?;
            out.push(DeltaRecord { extractor, mode, delta });
        }
    }
    Ok(out)
}
