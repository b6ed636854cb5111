//! File formats, experiment orchestration and reporting on top of
//! [`metafuse_core`].

pub mod config;
pub mod error;
pub mod format;
pub mod images;
pub mod report;
pub mod runner;
pub mod synth;
pub mod tables;

pub use config::{ExperimentConfig, ExtractionManifest};
pub use error::{Error, Result};
pub use runner::{Experiment, Job, Mode, RunOutcome, RunRecord, Variant};
