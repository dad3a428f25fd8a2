use std::path::Path;

use image::GrayImage;

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Per-pixel class indices, row-major `H×W`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LabelMap {
    height: usize,
    width: usize,
    classes: usize,
    data: Vec<u8>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, classes: usize, data: Vec<u8>) -> Result<Self> {
        if classes == 0 || classes > 256 {
            return Err(Error::InvalidArgument(format!(
                "class count {classes} not in 1..=256"
            )));
        }
        if data.len() != height * width {
            return Err(Error::shape(
                "label_map",
                format!("{} values for a {height}×{width} map", data.len()),
            ));
        }
        if let Some(i) = data.iter().position(|&v| v as usize >= classes) {
            return Err(Error::ClassOutOfRange {
                x: i % width,
                y: i / width,
                value: data[i] as usize,
                classes,
            });
        }
        Ok(Self {
            height,
            width,
            classes,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, classes: usize, class: u8) -> Result<Self> {
        Self::new(height, width, classes, vec![class; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, y: usize, x: usize, class: u8) {
        assert!(
            (class as usize) < self.classes,
            "class {class} out of range"
        );
        self.data[y * self.width + x] = class;
    }

    /// Same pixels reinterpreted with a different class count.
    pub fn with_classes(&self, classes: usize) -> Result<Self> {
        Self::new(self.height, self.width, classes, self.data.clone())
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &v in &self.data {
            counts[v as usize] += 1;
        }
        counts
    }

    /// `1×C×H×W` one-hot tensor.
    pub fn one_hot<T: Real>(&self) -> Tensor<T> {
        let plane = self.height * self.width;
        let mut t = Tensor::zeros(&[1, self.classes, self.height, self.width]);
        for (p, &c) in self.data.iter().enumerate() {
            t.data_mut()[c as usize * plane + p] = T::one();
        }
        t
    }

    /// Per-pixel argmax of a `1×C×H×W` distribution; ties go to the lower class.
    pub fn from_probs<T: Real>(probs: &Tensor<T>) -> Result<Self> {
        let (n, c, h, w) = probs.dims4()?;
        if n != 1 {
            return Err(Error::shape(
                "from_probs",
                format!("batch of {n}, expected 1"),
            ));
        }
        let plane = h * w;
        let data = (0..plane)
            .map(|p| {
                let mut best = 0;
                for k in 1..c {
                    if probs.data()[k * plane + p] > probs.data()[best * plane + p] {
                        best = k;
                    }
                }
                best as u8
            })
            .collect();
        Self::new(h, w, c, data)
    }

    /// Whether every pixel of `class` lies in one 4-connected component.
    /// Vacuously true for an absent class.
    pub fn is_four_connected(&self, class: u8) -> bool {
        let Some(start) = self.data.iter().position(|&v| v == class) else {
            return true;
        };
        let mut seen = vec![false; self.data.len()];
        let mut stack = vec![start];
        seen[start] = true;
        let mut reached = 0;
        while let Some(i) = stack.pop() {
            reached += 1;
            let (y, x) = (i / self.width, i % self.width);
            let mut visit = |j: usize| {
                if !seen[j] && self.data[j] == class {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if y > 0 {
                visit(i - self.width);
            }
            if y + 1 < self.height {
                visit(i + self.width);
            }
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < self.width {
                visit(i + 1);
            }
        }
        reached == self.data.iter().filter(|&&v| v == class).count()
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .expect("buffer matches extent")
    }

    pub fn from_gray(img: &GrayImage, classes: usize) -> Result<Self> {
        Self::new(
            img.height() as usize,
            img.width() as usize,
            classes,
            img.as_raw().clone(),
        )
    }
}

/// Block-to-pixel downsampling rule for the low-resolution target.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DownsampleRule {
    /// Most frequent class of each block; ties go to the lower class id.
    #[default]
    Majority,
    /// Centre pixel of each block (the lower-right of the central four).
    Nearest,
}

/// Shrinks `y` by `factor` per side.
pub fn low_res_target(y: &LabelMap, factor: usize, rule: DownsampleRule) -> Result<LabelMap> {
    if factor == 0 || !y.height.is_multiple_of(factor) || !y.width.is_multiple_of(factor) || y.is_empty() {
        return Err(Error::shape(
            "low_res_target",
            format!("{}×{} is not divisible by {factor}", y.height, y.width),
        ));
    }
    let (lh, lw) = (y.height / factor, y.width / factor);
    let mut data = Vec::with_capacity(lh * lw);
    let mut counts = vec![0usize; y.classes];
    for by in 0..lh {
        for bx in 0..lw {
            let class = match rule {
                DownsampleRule::Majority => {
                    counts.fill(0);
                    for yy in by * factor..(by + 1) * factor {
                        for xx in bx * factor..(bx + 1) * factor {
                            counts[y.get(yy, xx) as usize] += 1;
                        }
                    }
                    let mut best = 0;
                    for (c, &n) in counts.iter().enumerate() {
                        if n > counts[best] {
                            best = c;
                        }
                    }
                    best as u8
                }
                DownsampleRule::Nearest => {
                    y.get(by * factor + factor / 2, bx * factor + factor / 2)
                }
            };
            data.push(class);
        }
    }
    LabelMap::new(lh, lw, y.classes, data)
}

/// Full-resolution and 1/`factor` one-hot targets for one sample.
#[derive(Clone, Debug)]
pub struct GroundTruth<T> {
    pub y: Tensor<T>,
    pub y_low: Tensor<T>,
}

impl<T: Real> GroundTruth<T> {
    pub fn new(label: &LabelMap, factor: usize, rule: DownsampleRule) -> Result<Self> {
        Ok(Self {
            y: label.one_hot(),
            y_low: low_res_target(label, factor, rule)?.one_hot(),
        })
    }
}

/// Reads an 8-bit single-channel PNG of class indices.
pub fn load_label_image(path: &Path, classes: usize) -> Result<LabelMap> {
    let img = image::open(path)?;
    let gray = match img {
        image::DynamicImage::ImageLuma8(g) => g,
        other => {
            return Err(Error::InvalidArgument(format!(
                "{}: expected an 8-bit single-channel image, got {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    LabelMap::from_gray(&gray, classes)
}

pub fn save_label_image(map: &LabelMap, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    map.to_gray().save(path)?;
    Ok(())
}
