use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::label::LabelMap;
use super::synth::part;
use crate::error::{Error, Result};

/// Synthetic defects used to validate the consistency metrics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Corruption {
    /// `count` open discs (`dx²+dy² < radius²`) relabeled to a class absent
    /// from the disc's neighborhood. Radius 1 is a single pixel.
    Holes { count: usize, radius: usize },
    /// Exchanges the outer (forearm) halves of the left and right arm labels.
    LimbSwap,
}

pub fn corrupt_map(label: &LabelMap, kind: Corruption, seed: u64) -> Result<LabelMap> {
    match kind {
        Corruption::Holes { count, radius } => holes(label, count, radius, seed),
        Corruption::LimbSwap => limb_swap(label),
    }
}

fn holes(label: &LabelMap, count: usize, radius: usize, seed: u64) -> Result<LabelMap> {
    let (h, w) = (label.height(), label.width());
    if radius == 0 || radius > h.min(w) {
        return Err(Error::InvalidArgument(format!(
            "hole radius {radius} does not fit a {h}×{w} map"
        )));
    }
    if label.classes() < 2 {
        return Err(Error::InvalidArgument(
            "holes need at least two classes".into(),
        ));
    }
    let mut out = label.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = radius as isize;
    for _ in 0..count {
        let cy = rng.random_range(0..h) as isize;
        let cx = rng.random_range(0..w) as isize;
        let in_bounds =
            |y: isize, x: isize| y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w;
        // classes touching the disc or its one-pixel ring
        let mut near = vec![false; label.classes()];
        for dy in -r..=r {
            for dx in -r..=r {
                let (y, x) = (cy + dy, cx + dx);
                if in_bounds(y, x) && dy * dy + dx * dx < (r + 1) * (r + 1) {
                    near[out.get(y as usize, x as usize) as usize] = true;
                }
            }
        }
        let center = out.get(cy as usize, cx as usize);
        let mut candidates: Vec<u8> = (0..label.classes() as u8)
            .filter(|&c| !near[c as usize])
            .collect();
        if candidates.is_empty() {
            candidates = (0..label.classes() as u8)
                .filter(|&c| c != center)
                .collect();
        }
        let class = candidates[rng.random_range(0..candidates.len())];
        for dy in -r..=r {
            for dx in -r..=r {
                let (y, x) = (cy + dy, cx + dx);
                if in_bounds(y, x) && dy * dy + dx * dx < r * r {
                    out.set(y as usize, x as usize, class);
                }
            }
        }
    }
    Ok(out)
}

fn centroid(label: &LabelMap, class: u8) -> Option<(f64, f64)> {
    let (mut sy, mut sx, mut n) = (0.0, 0.0, 0usize);
    for y in 0..label.height() {
        for x in 0..label.width() {
            if label.get(y, x) == class {
                sy += y as f64;
                sx += x as f64;
                n += 1;
            }
        }
    }
    (n > 0).then(|| (sy / n as f64, sx / n as f64))
}

/// Pixels of `class` farther from `anchor` than the class's median distance.
fn outer_half(label: &LabelMap, class: u8, anchor: (f64, f64)) -> Vec<(usize, usize)> {
    let mut pixels: Vec<((usize, usize), f64)> = Vec::new();
    for y in 0..label.height() {
        for x in 0..label.width() {
            if label.get(y, x) == class {
                let d = (y as f64 - anchor.0).powi(2) + (x as f64 - anchor.1).powi(2);
                pixels.push(((y, x), d));
            }
        }
    }
    if pixels.is_empty() {
        return Vec::new();
    }
    let mut ds: Vec<f64> = pixels.iter().map(|p| p.1).collect();
    ds.sort_by(f64::total_cmp);
    let median = ds[ds.len() / 2];
    pixels
        .into_iter()
        .filter(|p| p.1 > median)
        .map(|p| p.0)
        .collect()
}

fn limb_swap(label: &LabelMap) -> Result<LabelMap> {
    let (l, r) = (part::LEFT_ARM, part::RIGHT_ARM);
    if label.classes() <= r as usize {
        return Err(Error::InvalidArgument(format!(
            "limb swap needs the figure taxonomy, map has {} classes",
            label.classes()
        )));
    }
    let anchor = centroid(label, part::TORSO).unwrap_or((
        (label.height() as f64 - 1.0) / 2.0,
        (label.width() as f64 - 1.0) / 2.0,
    ));
    let left = outer_half(label, l, anchor);
    let right = outer_half(label, r, anchor);
    let mut out = label.clone();
    for (y, x) in left {
        out.set(y, x, r);
    }
    for (y, x) in right {
        out.set(y, x, l);
    }
    Ok(out)
}
