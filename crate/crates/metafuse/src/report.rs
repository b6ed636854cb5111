//! Report and plot-data emission.
//!
//! An output directory holds two trees:
//!
//! * `reports/` is a pure function of the config: per-run metric tables,
//!   ROC points, the combined summary, bar data (`bars.csv`: network × metric
//!   × delta), box-plot data (`boxplot.csv`: network × class × AUROC delta)
//!   and `records.json`, from which the `report` command regenerates tables.
//! * `timing/` holds everything wall-clock dependent: the runtime table
//!   (`runtimes.csv`), raw timings and the run manifest with timestamps.
//!
//! Every CSV starts with a `#` provenance line carrying the config
//! fingerprint and seeds.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use metafuse_core::metrics::{delta_from_parts, BoxSummary, DeltaReport, Measures};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::runner::{Mode, Pair, RunOutcome, RunRecord, Variant};

pub const REPORTS_DIR: &str = "reports";
pub const TIMING_DIR: &str = "timing";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureValues {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub npv: f64,
    pub f_measure: f64,
    pub informedness: f64,
    pub markedness: f64,
    pub mcc: f64,
}

impl From<Measures> for MeasureValues {
    fn from(m: Measures) -> Self {
        let Measures { accuracy, sensitivity, specificity, precision, npv, f_measure, informedness, markedness, mcc } =
            m;
        Self { accuracy, sensitivity, specificity, precision, npv, f_measure, informedness, markedness, mcc }
    }
}

impl From<MeasureValues> for Measures {
    fn from(m: MeasureValues) -> Self {
        let MeasureValues {
            accuracy,
            sensitivity,
            specificity,
            precision,
            npv,
            f_measure,
            informedness,
            markedness,
            mcc,
        } = m;
        Self { accuracy, sensitivity, specificity, precision, npv, f_measure, informedness, markedness, mcc }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub class: String,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub measures: MeasureValues,
    pub degenerate: bool,
    pub auroc: Option<f64>,
}

/// Deterministic part of a [`RunRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub extractor: String,
    pub mode: Mode,
    pub variant: Variant,
    pub d_k: usize,
    pub d_meta: usize,
    pub epochs: usize,
    pub converged: bool,
    pub final_gradient_inf_norm: f64,
    pub final_gradient_l2_norm: f64,
    pub final_loss: f64,
    pub split_fingerprint: String,
    pub class_names: Vec<String>,
    pub per_class: Vec<ClassRow>,
    pub macro_avg: MeasureValues,
    pub overall_accuracy: f64,
}

impl RunSummary {
    pub fn from_record(r: &RunRecord) -> Self {
        let rep = &r.report;
        let aurocs = rep.aurocs();
        Self {
            extractor: r.extractor.clone(),
            mode: r.mode,
            variant: r.variant,
            d_k: r.d_k,
            d_meta: r.d_meta,
            epochs: r.trace.epochs,
            converged: r.trace.converged,
            final_gradient_inf_norm: r.trace.final_gradient_inf_norm,
            final_gradient_l2_norm: r.trace.final_gradient_l2_norm,
            final_loss: r.trace.final_loss(),
            split_fingerprint: format!("{:016x}", rep.split_fingerprint),
            class_names: rep.class_names.clone(),
            per_class: rep
                .per_class
                .iter()
                .zip(&rep.class_names)
                .zip(aurocs)
                .map(|((m, name), auroc)| ClassRow {
                    class: name.clone(),
                    tp: m.tp,
                    fp: m.fp,
                    tn: m.tn,
                    fn_: m.fn_,
                    measures: m.measures.into(),
                    degenerate: m.degenerate,
                    auroc,
                })
                .collect(),
            macro_avg: rep.macro_avg.into(),
            overall_accuracy: rep.overall_accuracy,
        }
    }

    pub fn run_name(&self) -> String {
        format!("{}__{}__{}", self.extractor, self.mode, self.variant)
    }

    fn aurocs(&self) -> Vec<Option<f64>> {
        self.per_class.iter().map(|c| c.auroc).collect()
    }

    fn fingerprint(&self) -> Result<u64> {
        u64::from_str_radix(&self.split_fingerprint, 16)
            .map_err(|_| Error::Data(format!("bad split fingerprint '{}'", self.split_fingerprint)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub extractor: String,
    pub mode: Mode,
    pub variant: Variant,
    pub d_k: usize,
    pub extraction_seconds: Option<f64>,
    pub train_seconds: f64,
}

/// Provenance shared by every emitted file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_fingerprint: String,
    pub split_seed: u64,
    pub train_seed: u64,
    pub split_fingerprint: String,
}

impl Provenance {
    pub fn new(cfg: &ExperimentConfig, split_fingerprint: u64) -> Self {
        Self {
            config_fingerprint: cfg.fingerprint(),
            split_seed: cfg.split.seed,
            train_seed: cfg.train.seed,
            split_fingerprint: format!("{split_fingerprint:016x}"),
        }
    }

    fn header(&self) -> String {
        format!(
            "# config_fingerprint={} split_seed={} train_seed={} split_fingerprint={}\n",
            self.config_fingerprint, self.split_seed, self.train_seed, self.split_fingerprint
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordsFile {
    pub provenance: Provenance,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingsFile {
    pub provenance: Provenance,
    pub runs: Vec<RunTiming>,
}

/// `fused − image_only` per (extractor, mode) computed from summaries.
pub fn summary_deltas(runs: &[RunSummary]) -> Result<Vec<(String, Mode, DeltaReport)>> {
    let mut by_key: BTreeMap<(String, Mode), Pair<'_, RunSummary>> = BTreeMap::new();
    for r in runs {
        let slot = by_key.entry((r.extractor.clone(), r.mode)).or_default();
        match r.variant {
            Variant::ImageOnly => slot.0 = Some(r),
            Variant::Fused => slot.1 = Some(r),
        }
    }
    let mut out = Vec::new();
    for ((extractor, mode), pair) in by_key {
        if let (Some(img), Some(fused)) = pair {
            let (fa, fb) = (fused.aurocs(), img.aurocs());
            let (ma, mb): (Measures, Measures) = (fused.macro_avg.into(), img.macro_avg.into());
            let delta = delta_from_parts(
                (&fused.class_names, fused.fingerprint()?, &ma, &fa),
                (&img.class_names, img.fingerprint()?, &mb, &fb),
            )
            .map_err(|e| Error::Data(format!("{extractor}/{mode}: {e}")))?;
            out.push((extractor, mode, delta));
        }
    }
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}

fn measure_header() -> String {
    Measures::NAMES.join(",")
}

fn measure_cells(m: &MeasureValues) -> String {
    Measures::from(*m).values().iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(",")
}

fn metrics_table(p: &Provenance, run: &RunSummary) -> String {
    let mut s = p.header();
    let _ = writeln!(s, "class,tp,fp,tn,fn,{},auroc,degenerate", measure_header());
    for c in &run.per_class {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            c.class,
            c.tp,
            c.fp,
            c.tn,
            c.fn_,
            measure_cells(&c.measures),
            fmt_opt(c.auroc),
            c.degenerate
        );
    }
    let defined: Vec<f64> = run.per_class.iter().filter_map(|c| c.auroc).collect();
    let mean_auroc = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    let _ = writeln!(s, "macro,,,,,{},{},", measure_cells(&run.macro_avg), fmt_opt(mean_auroc));
    s
}

fn summary_table(p: &Provenance, runs: &[RunSummary]) -> String {
    let mut s = p.header();
    let _ = writeln!(
        s,
        "network,mode,variant,d_k,d_meta,epochs,converged,final_gradient_inf_norm,overall_accuracy,{}",
        Measures::NAMES.map(|n| format!("macro_{n}")).join(",")
    );
    for r in runs {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{:.3e},{:.6},{}",
            r.extractor,
            r.mode,
            r.variant,
            r.d_k,
            r.d_meta,
            r.epochs,
            r.converged,
            r.final_gradient_inf_norm,
            r.overall_accuracy,
            measure_cells(&r.macro_avg)
        );
    }
    s
}

fn bars_table(p: &Provenance, deltas: &[(String, Mode, DeltaReport)]) -> String {
    let mut s = p.header();
    s.push_str("network,mode,metric,delta\n");
    for (name, mode, d) in deltas {
        for (metric, v) in Measures::NAMES.iter().zip(d.macro_delta.values()) {
            let _ = writeln!(s, "{name},{mode},{metric},{v:.6}");
        }
    }
    s
}

fn boxplot_table(p: &Provenance, deltas: &[(String, Mode, DeltaReport)]) -> String {
    let mut s = p.header();
    s.push_str("network,mode,class,auroc_delta\n");
    for (name, mode, d) in deltas {
        for (class, v) in d.class_names.iter().zip(&d.auroc_deltas) {
            let _ = writeln!(s, "{name},{mode},{class},{}", fmt_opt(*v));
        }
    }
    s
}

fn box_summary_table(p: &Provenance, deltas: &[(String, Mode, DeltaReport)]) -> String {
    let mut s = p.header();
    s.push_str("network,mode,count,min,q1,median,q3,max\n");
    for (name, mode, d) in deltas {
        match d.auroc_summary {
            Some(BoxSummary { count, min, q1, median, q3, max }) => {
                let _ = writeln!(s, "{name},{mode},{count},{min:.6},{q1:.6},{median:.6},{q3:.6},{max:.6}");
            }
            None => {
                let _ = writeln!(s, "{name},{mode},0,NA,NA,NA,NA,NA");
            }
        }
    }
    s
}

/// Runtime table: one row per network with extraction and classifier
/// training times for unprocessed and augmented images.
fn runtime_table(p: &Provenance, timings: &[RunTiming]) -> String {
    let mut rows: BTreeMap<&str, (usize, [Option<f64>; 6])> = BTreeMap::new();
    for t in timings {
        let entry = rows.entry(&t.extractor).or_insert((t.d_k, [None; 6]));
        let m = usize::from(t.mode == Mode::Augmented);
        entry.1[m] = entry.1[m].or(t.extraction_seconds);
        let slot = match t.variant {
            Variant::ImageOnly => 2 + m,
            Variant::Fused => 4 + m,
        };
        entry.1[slot] = Some(t.train_seconds);
    }
    let mut s = p.header();
    s.push_str(
        "network,d_k,extraction_unprocessed_s,extraction_augmented_s,train_image_only_unprocessed_s,\
         train_image_only_augmented_s,train_fused_unprocessed_s,train_fused_augmented_s\n",
    );
    for (name, (d_k, cells)) in rows {
        let cells: Vec<String> = cells.iter().map(|c| c.map_or_else(|| "NA".into(), |v| format!("{v:.3}"))).collect();
        let _ = writeln!(s, "{name},{d_k},{}", cells.join(","));
    }
    s
}

fn roc_table(p: &Provenance, r: &RunRecord) -> String {
    let mut s = p.header();
    s.push_str("class,threshold,fpr,tpr\n");
    for (class, roc) in r.report.class_names.iter().zip(&r.report.rocs) {
        if let Some(roc) = roc {
            for (t, (fpr, tpr)) in roc.thresholds.iter().zip(&roc.points) {
                let _ = writeln!(s, "{class},{t},{fpr},{tpr}");
            }
        }
    }
    s
}

struct Emitter {
    files: Vec<PathBuf>,
}

impl Emitter {
    fn write(&mut self, path: PathBuf, contents: &str) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.files.push(path);
        Ok(())
    }
}

/// Writes the tables derivable from summaries and timings into `dir`.
pub fn write_tables(records: &RecordsFile, timings: Option<&TimingsFile>, dir: &Path) -> Result<Vec<PathBuf>> {
    let p = &records.provenance;
    let deltas = summary_deltas(&records.runs)?;
    let reports = dir.join(REPORTS_DIR);
    let mut e = Emitter { files: Vec::new() };
    for run in &records.runs {
        e.write(reports.join("metrics").join(format!("{}.csv", run.run_name())), &metrics_table(p, run))?;
    }
    e.write(reports.join("summary.csv"), &summary_table(p, &records.runs))?;
    e.write(reports.join("bars.csv"), &bars_table(p, &deltas))?;
    e.write(reports.join("boxplot.csv"), &boxplot_table(p, &deltas))?;
    e.write(reports.join("box_summary.csv"), &box_summary_table(p, &deltas))?;
    if let Some(t) = timings {
        e.write(dir.join(TIMING_DIR).join("runtimes.csv"), &runtime_table(&t.provenance, &t.runs))?;
    }
    Ok(e.files)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub workers: usize,
    pub provenance: Provenance,
    pub config: String,
    pub files: Vec<PathBuf>,
}

/// Writes every report for one completed run and returns the file list.
pub fn emit_reports(
    outcome: &RunOutcome,
    cfg: &ExperimentConfig,
    output_dir: &Path,
    started_unix_s: f64,
    finished_unix_s: f64,
) -> Result<Vec<PathBuf>> {
    if outcome.records.is_empty() {
        return Err(Error::Data("no run records to report".into()));
    }
    fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    let provenance = Provenance::new(cfg, outcome.split_fingerprint);
    let records = RecordsFile {
        provenance: provenance.clone(),
        runs: outcome.records.iter().map(RunSummary::from_record).collect(),
    };
    let timings = TimingsFile {
        provenance: provenance.clone(),
        runs: outcome
            .records
            .iter()
            .map(|r| RunTiming {
                extractor: r.extractor.clone(),
                mode: r.mode,
                variant: r.variant,
                d_k: r.d_k,
                extraction_seconds: r.extraction_seconds,
                train_seconds: r.train_seconds,
            })
            .collect(),
    };

    let mut e = Emitter { files: Vec::new() };
    let reports = output_dir.join(REPORTS_DIR);
    e.write(reports.join("config.toml"), &cfg.result_relevant_toml())?;
    e.write(reports.join("records.json"), &to_json(&records))?;
    for r in &outcome.records {
        let name = format!("{}__{}__{}", r.extractor, r.mode, r.variant);
        e.write(reports.join("roc").join(format!("{name}.csv")), &roc_table(&provenance, r))?;
    }
    e.files.extend(write_tables(&records, Some(&timings), output_dir)?);
    let timing = output_dir.join(TIMING_DIR);
    e.write(timing.join("timings.json"), &to_json(&timings))?;

    let manifest_path = timing.join("manifest.json");
    let mut files = e.files;
    files.push(manifest_path.clone());
    let manifest = RunManifest {
        started_unix_s,
        finished_unix_s,
        workers: cfg.run.workers,
        provenance,
        config: cfg.to_toml(),
        files: files.clone(),
    };
    fs::write(&manifest_path, to_json(&manifest)).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(files)
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Regenerates tables from a previous run's `records.json` (and
/// `timings.json`, when present) into `out_dir`.
pub fn regenerate(run_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let records: RecordsFile = read_json(&run_dir.join(REPORTS_DIR).join("records.json"))?;
    let timings_path = run_dir.join(TIMING_DIR).join("timings.json");
    let timings: Option<TimingsFile> = if timings_path.exists() { Some(read_json(&timings_path)?) } else { None };
    write_tables(&records, timings.as_ref(), out_dir)
}
