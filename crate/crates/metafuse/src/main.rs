use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use metafuse::config::{resolve, ExperimentConfig};
use metafuse::error::{Error, Result};
use metafuse::format::{read_model, write_model, SavedModel};
use metafuse::runner::{Experiment, Job, Mode, Variant};
use metafuse::tables::read_metadata_csv;
use metafuse::{images, report, synth};
use metafuse_core::{encode_table, Measures};

#[derive(Parser)]
#[command(name = "metafuse", version, about = "Fuse image features with metadata and train softmax classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode metadata fields as ASCII-decimal columns.
    Encode {
        #[arg(long)]
        metadata: PathBuf,
        /// Comma-separated field names, in output order.
        #[arg(long, value_delimiter = ',', required = true)]
        fields: Vec<String>,
        #[arg(long, default_value = "sample_id")]
        id_column: String,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Stage randomly augmented copies of an image directory.
    Augment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Resize after augmenting, as HEIGHTxWIDTH.
        #[arg(long, value_parser = parse_size)]
        resize: Option<(usize, usize)>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Train one grid cell on the training split and save the model.
    Train {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[command(flatten)]
        cell: CellArgs,
        #[arg(long)]
        model: PathBuf,
    },
    /// Evaluate a saved model on the test split.
    Evaluate {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[command(flatten)]
        cell: CellArgs,
        #[arg(long)]
        model: PathBuf,
    },
    /// Run the full grid and write reports.
    Run {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, short)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Regenerate report tables from a previous run directory.
    Report {
        #[arg(long)]
        run_dir: PathBuf,
        /// Defaults to the run directory.
        #[arg(long, short)]
        output_dir: Option<PathBuf>,
    },
    /// Generate a synthetic dataset with a matching config.
    Synth {
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Draw metadata independently of the class.
        #[arg(long)]
        noise: bool,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 256)]
        dim: usize,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, short)]
    config: PathBuf,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    train_seed: Option<u64>,
}

#[derive(Args)]
struct CellArgs {
    #[arg(long)]
    extractor: String,
    #[arg(long, value_enum, default_value_t = ModeArg::Unprocessed)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = VariantArg::Fused)]
    variant: VariantArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Unprocessed,
    Augmented,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    ImageOnly,
    Fused,
}

impl CellArgs {
    fn job(&self) -> Job {
        Job {
            extractor: self.extractor.clone(),
            mode: match self.mode {
                ModeArg::Unprocessed => Mode::Unprocessed,
                ModeArg::Augmented => Mode::Augmented,
            },
            variant: match self.variant {
                VariantArg::ImageOnly => Variant::ImageOnly,
                VariantArg::Fused => Variant::Fused,
            },
        }
    }
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (h, w) = s.split_once(['x', 'X']).ok_or("expected HEIGHTxWIDTH")?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| e.to_string());
    Ok((parse(h)?, parse(w)?))
}

impl ExperimentArgs {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let (mut cfg, base) = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.split_seed {
            cfg.split.seed = s;
        }
        if let Some(s) = self.train_seed {
            cfg.train.seed = s;
        }
        Ok((cfg, base))
    }

    /// Loads the experiment with only the variants and extractor `cell` needs.
    fn experiment_for(&self, cell: &CellArgs) -> Result<Experiment> {
        let (mut cfg, base) = self.load()?;
        let job = cell.job();
        cfg.variants.image_only = job.variant == Variant::ImageOnly;
        cfg.variants.fused = job.variant == Variant::Fused;
        cfg.variants.unprocessed = job.mode == Mode::Unprocessed;
        cfg.variants.augmented = job.mode == Mode::Augmented;
        Experiment::load(&cfg, &base, Some(&job.extractor))
    }
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn encode(metadata: &Path, fields: &[String], id_column: &str, output: &Path) -> Result<()> {
    let (ids, table) = read_metadata_csv(metadata, id_column)?;
    let names: Vec<&str> = fields.iter().map(String::as_str).collect();
    let table = table.project(&names).map_err(|e| Error::Config(e.to_string()))?;
    let enc = encode_table(&table).map_err(|e| Error::Data(e.to_string()))?;
    let mut out = String::from(id_column);
    for (name, span) in fields.iter().zip(&enc.field_spans) {
        for j in 0..span.width {
            let _ = write!(out, ",{name}_{j}");
        }
    }
    out.push('\n');
    for (id, row) in ids.iter().zip(enc.values.iter_rows()) {
        out.push_str(id);
        for b in row {
            let _ = write!(out, ",{b}");
        }
        out.push('\n');
    }
    fs::write(output, out).map_err(|e| Error::io(output, e))
}

fn print_measures(label: &str, m: &Measures) {
    let cells: Vec<String> = Measures::NAMES.iter().zip(m.values()).map(|(n, v)| format!("{n}={v:.4}")).collect();
    println!("{label}: {}", cells.join(" "));
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Encode { metadata, fields, id_column, output } => encode(&metadata, &fields, &id_column, &output),
        Command::Augment { input, output, seed, resize, workers } => {
            let staged = images::stage_augmented(&input, &output, seed, resize, workers)?;
            println!("staged {} images into {}", staged.len(), output.display());
            Ok(())
        }
        Command::Train { exp, cell, model } => {
            let experiment = exp.experiment_for(&cell)?;
            let job = cell.job();
            let (fitted, trace, _, _) = experiment.fit(&job).map_err(|e| e.context(&job.to_string()))?;
            let saved = SavedModel {
                model: fitted,
                class_names: experiment.labels.class_names().to_vec(),
                config_echo: experiment.config.result_relevant_toml(),
            };
            write_model(&saved, &model)?;
            println!(
                "{job}: epochs={} converged={} grad_inf={:.3e} loss={:.6}",
                trace.epochs,
                trace.converged,
                trace.final_gradient_inf_norm,
                trace.final_loss()
            );
            Ok(())
        }
        Command::Evaluate { exp, cell, model } => {
            let experiment = exp.experiment_for(&cell)?;
            let job = cell.job();
            let saved = read_model(&model)?;
            if saved.class_names != experiment.labels.class_names() {
                return Err(Error::Alignment("model class names differ from the label file".into()));
            }
            let rep = experiment.evaluate_model(&job, &saved.model).map_err(|e| e.context(&job.to_string()))?;
            println!("{job}: accuracy={:.4}", rep.overall_accuracy);
            print_measures("macro", &rep.macro_avg);
            for (name, auroc) in rep.class_names.iter().zip(rep.aurocs()) {
                println!("auroc {name}: {}", auroc.map_or("NA".into(), |v| format!("{v:.4}")));
            }
            Ok(())
        }
        Command::Run { exp, output_dir, workers } => {
            let (cfg, base) = exp.load()?;
            let started = unix_now();
            let experiment = Experiment::load(&cfg, &base, None)?;
            let workers = workers.unwrap_or(cfg.run.workers);
            let outcome = experiment.run(workers)?;
            let out = output_dir.unwrap_or_else(|| resolve(&base, &cfg.run.output_dir));
            let files = report::emit_reports(&outcome, &cfg, &out, started, unix_now())?;
            for d in &outcome.deltas {
                print_measures(&format!("delta {}/{}", d.extractor, d.mode), &d.delta.macro_delta);
            }
            println!("wrote {} files to {}", files.len(), out.display());
            Ok(())
        }
        Command::Report { run_dir, output_dir } => {
            let out = output_dir.unwrap_or_else(|| run_dir.clone());
            let files = report::regenerate(&run_dir, &out)?;
            println!("wrote {} files to {}", files.len(), out.display());
            Ok(())
        }
        Command::Synth { output, seed, noise, samples, dim } => {
            let spec = synth::SynthSpec {
                samples,
                dim,
                seed,
                informative_dims: synth::SynthSpec::default().informative_dims.min(dim),
                metadata: if noise { synth::MetadataSignal::Noise } else { synth::MetadataSignal::Complementary },
                ..Default::default()
            };
            let data = synth::generate(&spec)?;
            let cfg = synth::write_dataset(&data, seed, &output)?;
            println!("wrote {}", cfg.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
