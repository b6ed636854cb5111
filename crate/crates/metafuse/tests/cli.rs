use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use metafuse::config::ExperimentConfig;
use metafuse::format::{read_features, write_features};
use metafuse::synth::{generate, write_dataset, SynthSpec};
use metafuse_core::FeatureMatrix;

fn metafuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metafuse")).args(args).output().expect("binary runs")
}

fn small_dataset(dir: &Path) -> PathBuf {
    let spec = SynthSpec { samples: 160, dim: 12, informative_dims: 6, ..Default::default() };
    let cfg_path = write_dataset(&generate(&spec).unwrap(), 0, dir).unwrap();
    let mut cfg = ExperimentConfig::load(&cfg_path).unwrap().0;
    cfg.train.max_epochs = 150;
    fs::write(&cfg_path, cfg.to_toml()).unwrap();
    cfg_path
}

fn edit_config(path: &Path, f: impl FnOnce(&mut ExperimentConfig)) {
    let mut cfg = ExperimentConfig::from_toml(&fs::read_to_string(path).unwrap()).unwrap();
    f(&mut cfg);
    fs::write(path, cfg.to_toml()).unwrap();
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_then_report_regenerates_identical_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_dataset(dir.path());
    let out = dir.path().join("out");
    let res = metafuse(&["run", "-c", s(&cfg), "-o", s(&out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));

    let regen = dir.path().join("regen");
    assert_eq!(code(&metafuse(&["report", "--run-dir", s(&out), "-o", s(&regen)])), 0);
    for rel in [
        "reports/summary.csv",
        "reports/bars.csv",
        "reports/boxplot.csv",
        "reports/box_summary.csv",
        "reports/metrics/synthnet__unprocessed__fused.csv",
        "reports/metrics/synthnet__unprocessed__image_only.csv",
        "timing/runtimes.csv",
    ] {
        assert_eq!(fs::read(out.join(rel)).unwrap(), fs::read(regen.join(rel)).unwrap(), "{rel}");
    }

    let bars = fs::read_to_string(out.join("reports/bars.csv")).unwrap();
    assert!(bars.starts_with("# config_fingerprint="));
    assert!(bars.contains("split_seed=0 train_seed=0"));
    let runtimes = fs::read_to_string(out.join("timing/runtimes.csv")).unwrap();
    assert!(runtimes.lines().any(|l| l.starts_with("synthnet,12,")));
    assert!(out.join("timing/manifest.json").exists());
}

#[test]
fn one_box_row_per_network_and_class() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_dataset(dir.path());
    let feat = read_features(dir.path().join("features/synthnet.feat")).unwrap();
    let doubled = feat.data().map(|v| v * 2.0 + 1.0);
    let second = FeatureMatrix::new(doubled, feat.sample_ids().to_vec(), "othernet").unwrap();
    write_features(&second, dir.path().join("features/othernet.feat")).unwrap();
    edit_config(&cfg, |c| {
        c.features.unprocessed.insert("othernet".into(), "features/othernet.feat".into());
    });
    let out = dir.path().join("out");
    assert_eq!(code(&metafuse(&["run", "-c", s(&cfg), "-o", s(&out), "--workers", "2"])), 0);
    let boxplot = fs::read_to_string(out.join("reports/boxplot.csv")).unwrap();
    assert_eq!(boxplot.lines().filter(|l| !l.starts_with('#')).count() - 1, 2 * 8);
    let bars = fs::read_to_string(out.join("reports/bars.csv")).unwrap();
    assert_eq!(bars.lines().filter(|l| !l.starts_with('#')).count() - 1, 2 * 9);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_dataset(dir.path());
    edit_config(&cfg, |c| c.data.metadata_fields.clear());
    let res = metafuse(&["run", "-c", s(&cfg)]);
    assert_eq!(code(&res), 2);
    assert!(String::from_utf8_lossy(&res.stderr).contains("metadata_fields"));

    fs::write(&cfg, "[data]\nlabels_csv = 3\n").unwrap();
    assert_eq!(code(&metafuse(&["run", "-c", s(&cfg)])), 2);
}

#[test]
fn alignment_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_dataset(dir.path());
    let labels = dir.path().join("labels.csv");
    let text = fs::read_to_string(&labels).unwrap();
    fs::write(&labels, format!("{text}SYN_EXTRA,class0\n")).unwrap();
    let res = metafuse(&["run", "-c", s(&cfg)]);
    assert_eq!(code(&res), 3);
    assert!(String::from_utf8_lossy(&res.stderr).contains("SYN_EXTRA"));
}

#[test]
fn divergence_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_dataset(dir.path());
    edit_config(&cfg, |c| {
        c.train.learning_rate = f64::MAX;
        c.train.schedule = metafuse::config::Schedule::Constant;
    });
    let res = metafuse(&["run", "-c", s(&cfg)]);
    assert_eq!(code(&res), 4, "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn missing_files_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_dataset(dir.path());
    fs::remove_file(dir.path().join("features/synthnet.feat")).unwrap();
    assert_eq!(code(&metafuse(&["run", "-c", s(&cfg)])), 1);
}

#[test]
fn train_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_dataset(dir.path());
    let model = dir.path().join("fused.model");
    let res = metafuse(&["train", "-c", s(&cfg), "--extractor", "synthnet", "--model", s(&model)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let res = metafuse(&["evaluate", "-c", s(&cfg), "--extractor", "synthnet", "--model", s(&model)]);
    assert_eq!(code(&res), 0);
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("macro: accuracy="));
    assert_eq!(stdout.lines().filter(|l| l.starts_with("auroc ")).count(), 8);

    let res = metafuse(&[
        "evaluate",
        "-c",
        s(&cfg),
        "--extractor",
        "synthnet",
        "--variant",
        "image-only",
        "--model",
        s(&model),
    ]);
    assert_ne!(code(&res), 0);
}

#[test]
fn encode_writes_ascii_codes() {
    let dir = tempfile::tempdir().unwrap();
    let meta = dir.path().join("meta.csv");
    fs::write(&meta, "sample_id,age,sex\na,45,male\nb,,female\n").unwrap();
    let out = dir.path().join("enc.csv");
    assert_eq!(code(&metafuse(&["encode", "--metadata", s(&meta), "--fields", "age,sex", "-o", s(&out)])), 0);
    assert_eq!(
        fs::read_to_string(&out).unwrap(),
        "sample_id,age_0,age_1,sex_0,sex_1,sex_2,sex_3,sex_4,sex_5\na,52,53,109,97,108,101,32,32\nb,0,0,102,101,109,97,108,101\n"
    );
    assert_eq!(code(&metafuse(&["encode", "--metadata", s(&meta), "--fields", "site", "-o", s(&out)])), 2);
}

#[test]
fn augment_stages_images() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    fs::create_dir_all(&input).unwrap();
    let img = image::RgbImage::from_fn(10, 6, |x, y| image::Rgb([x as u8 * 20, y as u8 * 30, 7]));
    img.save(input.join("ISIC_0000001.png")).unwrap();
    let out = dir.path().join("out");
    let res = metafuse(&["augment", "--input", s(&input), "-o", s(&out), "--seed", "3", "--resize", "8x8"]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let staged = image::open(out.join("ISIC_0000001.png")).unwrap();
    assert_eq!((staged.width(), staged.height()), (8, 8));
    let params = fs::read_to_string(out.join("augmentation_params.csv")).unwrap();
    assert!(params.lines().nth(1).unwrap().starts_with("ISIC_0000001,"));
}
