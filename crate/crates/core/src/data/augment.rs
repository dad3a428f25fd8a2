use image::imageops::{self, FilterType};
use rand::Rng;

use super::label::LabelMap;
use super::synth::Sample;
use crate::config::parse_pairs;
use crate::error::{Error, Result};

/// Involution on class ids applied when an image is mirrored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlipSwap {
    table: Vec<u8>,
}

impl FlipSwap {
    pub fn identity(classes: usize) -> Self {
        Self {
            table: (0..classes).map(|c| c as u8).collect(),
        }
    }

    /// Each pair is swapped in both directions.
    pub fn from_pairs(classes: usize, pairs: &[(u8, u8)]) -> Result<Self> {
        let mut s = Self::identity(classes);
        for &(a, b) in pairs {
            if a as usize >= classes || b as usize >= classes {
                return Err(Error::config(
                    "flip_swap",
                    format!("pair {a}={b} exceeds {classes} classes"),
                ));
            }
            if s.table[a as usize] != a || s.table[b as usize] != b {
                return Err(Error::config(
                    "flip_swap",
                    format!("class in pair {a}={b} is already paired"),
                ));
            }
            s.table[a as usize] = b;
            s.table[b as usize] = a;
        }
        Ok(s)
    }

    /// `a=b` lines; `#` starts a comment.
    pub fn parse(classes: usize, text: &str) -> Result<Self> {
        let pairs: Vec<(u8, u8)> = parse_pairs("flip_swap", text)?;
        Self::from_pairs(classes, &pairs)
    }

    /// Left/right arm and leg pairs of the synthetic figure.
    pub fn figure() -> Self {
        Self::from_pairs(super::FIGURE_CLASSES, &[(3, 4), (5, 6)]).expect("valid pairs")
    }

    pub fn classes(&self) -> usize {
        self.table.len()
    }

    pub fn apply(&self, class: u8) -> u8 {
        self.table[class as usize]
    }
}

/// Mirrors image and label, swapping paired classes.
pub fn flip_sample(sample: &Sample, swap: &FlipSwap) -> Result<Sample> {
    if swap.classes() != sample.label.classes() {
        return Err(Error::InvalidArgument(format!(
            "flip table covers {} classes, label map has {}",
            swap.classes(),
            sample.label.classes()
        )));
    }
    let image = imageops::flip_horizontal(&sample.image);
    let mut gray = imageops::flip_horizontal(&sample.label.to_gray());
    for p in gray.pixels_mut() {
        p.0[0] = swap.apply(p.0[0]);
    }
    Ok(Sample {
        image,
        label: LabelMap::from_gray(&gray, sample.label.classes())?,
        meta: sample.meta.clone(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentConfig {
    /// Shorter side after the initial resize.
    pub resize_short: usize,
    /// Side of the square random crop.
    pub crop: usize,
    pub flip: bool,
    pub swap: FlipSwap,
}

impl AugmentConfig {
    pub fn desk() -> Self {
        Self {
            resize_short: 72,
            crop: 64,
            flip: true,
            swap: FlipSwap::figure(),
        }
    }

    pub fn full(swap: FlipSwap) -> Self {
        Self {
            resize_short: 288,
            crop: 256,
            flip: true,
            swap,
        }
    }
}

/// Resize shorter side, random square crop, random mirror. The image is
/// resampled bilinearly and the label with nearest neighbor.
pub fn augment<R: Rng + ?Sized>(
    sample: &Sample,
    config: &AugmentConfig,
    rng: &mut R,
) -> Result<Sample> {
    let (w, h) = (
        sample.image.width() as usize,
        sample.image.height() as usize,
    );
    if (w, h) != (sample.label.width(), sample.label.height()) {
        return Err(Error::shape(
            "augment",
            format!(
                "image {w}×{h} vs label {}×{}",
                sample.label.width(),
                sample.label.height()
            ),
        ));
    }
    let short = w.min(h);
    let (rw, rh) = (
        (w * config.resize_short + short / 2) / short,
        (h * config.resize_short + short / 2) / short,
    );
    if config.crop > rw || config.crop > rh {
        return Err(Error::InvalidArgument(format!(
            "crop {} is larger than the resized {rw}×{rh} image",
            config.crop
        )));
    }
    let image = imageops::resize(&sample.image, rw as u32, rh as u32, FilterType::Triangle);
    let gray = imageops::resize(
        &sample.label.to_gray(),
        rw as u32,
        rh as u32,
        FilterType::Nearest,
    );
    let x0 = rng.random_range(0..=rw - config.crop) as u32;
    let y0 = rng.random_range(0..=rh - config.crop) as u32;
    let c = config.crop as u32;
    let cropped = Sample {
        image: imageops::crop_imm(&image, x0, y0, c, c).to_image(),
        label: LabelMap::from_gray(
            &imageops::crop_imm(&gray, x0, y0, c, c).to_image(),
            sample.label.classes(),
        )?,
        meta: sample.meta.clone(),
    };
    if config.flip && rng.random_bool(0.5) {
        flip_sample(&cropped, &config.swap)
    } else {
        Ok(cropped)
    }
}
