use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;

use super::label::{load_label_image, save_label_image};
use super::synth::{Sample, SampleMeta};
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Mean pixel subtracted from network inputs, per channel on a [0, 1] scale.
pub const MEAN_PIXEL: [f64; 3] = [0.5, 0.5, 0.5];

/// `1×3×H×W` network input: `value/255 − mean`.
pub fn image_tensor<T: Real>(img: &RgbImage, mean: [f64; 3]) -> Tensor<T> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raw = img.as_raw();
    Tensor::from_fn(&[1, 3, h, w], |i| {
        let (c, p) = (i / (h * w), i % (h * w));
        T::from_f64(raw[p * 3 + c] as f64 / 255.0 - mean[c])
    })
}

pub const MANIFEST_NAME: &str = "manifest.txt";

/// Writes `images/NNNN.png`, `labels/NNNN.png` and a manifest of relative
/// path pairs, one per line.
pub fn write_dataset(dir: &Path, samples: &[Sample]) -> Result<PathBuf> {
    for sub in ["images", "labels"] {
        let d = dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let mut manifest = String::new();
    for (i, s) in samples.iter().enumerate() {
        let img = format!("images/{i:04}.png");
        let lab = format!("labels/{i:04}.png");
        s.image.save(dir.join(&img))?;
        save_label_image(&s.label, &dir.join(&lab))?;
        manifest.push_str(&format!("{img} {lab}\n"));
    }
    let path = dir.join(MANIFEST_NAME);
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Image/label path pairs, resolved against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            let mut parts = l.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) => Ok((base.join(a), base.join(b))),
                _ => Err(Error::InvalidArgument(format!(
                    "{} line {}: expected `image label`",
                    path.display(),
                    i + 1
                ))),
            }
        })
        .collect()
}

pub fn load_dataset(manifest: &Path, classes: usize) -> Result<Vec<Sample>> {
    read_manifest(manifest)?
        .into_iter()
        .enumerate()
        .map(|(i, (img, lab))| {
            let image = image::open(&img)?.to_rgb8();
            let label = load_label_image(&lab, classes)?;
            if (image.width() as usize, image.height() as usize) != (label.width(), label.height())
            {
                return Err(Error::shape(
                    "load_dataset",
                    format!("{} and {} differ in size", img.display(), lab.display()),
                ));
            }
            Ok(Sample {
                image,
                label,
                meta: SampleMeta {
                    seed: i as u64,
                    pose: None,
                },
            })
        })
        .collect()
}
