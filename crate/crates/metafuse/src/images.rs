//! Augmented-image staging: read a directory of images, apply the
//! per-sample random operator and write PNGs for feature extraction.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use metafuse_core::augment::{augment, params_for_sample, resize_bilinear, AugmentationParams, Image};
use rayon::prelude::*;

use crate::error::{Error, Result};

const EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

pub fn load_image(path: &Path) -> Result<Image> {
    let dynimg = image::open(path).map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
    let rgb = dynimg.into_rgb8();
    let (w, h) = rgb.dimensions();
    Image::new(h as usize, w as usize, 3, rgb.into_raw()).map_err(|e| Error::Image(format!("{}: {e}", path.display())))
}

pub fn save_png(img: &Image, path: &Path) -> Result<()> {
    let color = match img.channels() {
        1 => image::ExtendedColorType::L8,
        _ => image::ExtendedColorType::Rgb8,
    };
    image::save_buffer_with_format(
        path,
        img.pixels(),
        img.width() as u32,
        img.height() as u32,
        color,
        image::ImageFormat::Png,
    )
    .map_err(|e| Error::Image(format!("{}: {e}", path.display())))
}

/// Image files in `dir`, sorted by name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && ext.is_some_and(|e| EXTENSIONS.contains(&e.as_str())) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct StagedImage {
    pub sample_id: String,
    pub params: AugmentationParams,
    pub output: PathBuf,
}

/// Augments every image in `input_dir` into `output_dir/<stem>.png`.
/// Parameters depend only on `(seed, stem)`. `resize` (height, width) is
/// applied after augmentation. Writes `augmentation_params.csv` alongside.
pub fn stage_augmented(
    input_dir: &Path,
    output_dir: &Path,
    seed: u64,
    resize: Option<(usize, usize)>,
    workers: usize,
) -> Result<Vec<StagedImage>> {
    let inputs = list_images(input_dir)?;
    if inputs.is_empty() {
        return Err(Error::Data(format!("no images in {}", input_dir.display())));
    }
    fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let staged: Vec<Result<StagedImage>> = pool.install(|| {
        inputs
            .par_iter()
            .map(|path| {
                let sample_id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
                let params = params_for_sample(seed, &sample_id);
                let mut img = augment(&load_image(path)?, &params);
                if let Some((h, w)) = resize {
                    img = resize_bilinear(&img, h, w).map_err(|e| Error::Image(e.to_string()))?;
                }
                let output = output_dir.join(format!("{sample_id}.png"));
                save_png(&img, &output)?;
                Ok(StagedImage { sample_id, params, output })
            })
            .collect()
    });
    let staged = staged.into_iter().collect::<Result<Vec<_>>>()?;

    let mut csv = String::from("sample_id,shift_x,shift_y,flip_x,flip_y,rotation_deg\n");
    for s in &staged {
        let p = &s.params;
        let _ =
            writeln!(csv, "{},{},{},{},{},{}", s.sample_id, p.shift_x, p.shift_y, p.flip_x, p.flip_y, p.rotation_deg);
    }
    let csv_path = output_dir.join("augmentation_params.csv");
    fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
    Ok(staged)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stages_with_stable_params() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in");
        fs::create_dir_all(&input).unwrap();
        let img = Image::new(8, 8, 3, (0..192).map(|v| v as u8).collect()).unwrap();
        save_png(&img, &input.join("ISIC_1.png")).unwrap();
        save_png(&img, &input.join("ISIC_2.png")).unwrap();
        fs::write(input.join("notes.txt"), "x").unwrap();

        let a = stage_augmented(&input, &dir.path().join("a"), 5, Some((4, 4)), 2).unwrap();
        let b = stage_augmented(&input, &dir.path().join("b"), 5, Some((4, 4)), 1).unwrap();
        assert_eq!(a.len(), 2);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.params, y.params);
            assert_eq!(fs::read(&x.output).unwrap(), fs::read(&y.output).unwrap());
        }
        let out = load_image(&a[0].output).unwrap();
        assert_eq!((out.height(), out.width()), (4, 4));
    }
}
