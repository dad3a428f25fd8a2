use std::f64::consts::FRAC_PI_2;

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::label::LabelMap;
use crate::error::{Error, Result};

/// Part classes of the synthetic figure.
pub mod part {
    pub const BACKGROUND: u8 = 0;
    pub const HEAD: u8 = 1;
    pub const TORSO: u8 = 2;
    pub const LEFT_ARM: u8 = 3;
    pub const RIGHT_ARM: u8 = 4;
    pub const LEFT_LEG: u8 = 5;
    pub const RIGHT_LEG: u8 = 6;
}

/// Classes of the synthetic figure, background included.
pub const FIGURE_CLASSES: usize = 7;
/// Smallest canvas the renderer accepts.
pub const MIN_CANVAS: usize = 32;
const MAX_ATTEMPTS: usize = 200;

/// Two-segment limb. Angles are absolute, in radians, measured from the
/// downward vertical with positive values turning towards +x.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Limb {
    pub upper_angle: f64,
    pub lower_angle: f64,
    pub upper_len: f64,
    pub lower_len: f64,
    pub width: f64,
}

/// Pose and shape of one figure, in pixel units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FigureSpec {
    pub torso_center: (f64, f64),
    pub torso_angle: f64,
    pub torso_len: f64,
    pub torso_width: f64,
    pub head_radius: f64,
    /// Image-left arm first.
    pub arms: [Limb; 2],
    pub legs: [Limb; 2],
}

/// A rendered image with its exact label map.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub image: RgbImage,
    pub label: LabelMap,
    pub meta: SampleMeta,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleMeta {
    pub seed: u64,
    pub pose: Option<FigureSpec>,
}

impl FigureSpec {
    /// Random pose scaled to a square canvas of side `extent`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, extent: usize) -> Self {
        let s = extent as f64;
        let mut limb =
            |outward: f64, spread: (f64, f64), bend: f64, len: (f64, f64), width: f64| {
                let upper = outward * rng.random_range(spread.0..spread.1);
                Limb {
                    upper_angle: upper,
                    lower_angle: upper + rng.random_range(-bend..bend),
                    upper_len: s * len.0 * rng.random_range(0.85..1.15),
                    lower_len: s * len.1 * rng.random_range(0.85..1.15),
                    width: s * width,
                }
            };
        let arms = [
            limb(-1.0, (0.15, 1.6), 1.3, (0.15, 0.14), 0.055),
            limb(1.0, (0.15, 1.6), 1.3, (0.15, 0.14), 0.055),
        ];
        let legs = [
            limb(-1.0, (0.0, 0.45), 0.4, (0.16, 0.15), 0.07),
            limb(1.0, (0.0, 0.45), 0.4, (0.16, 0.15), 0.07),
        ];
        Self {
            torso_center: (
                s * rng.random_range(0.42..0.58),
                s * rng.random_range(0.38..0.46),
            ),
            torso_angle: rng.random_range(-0.2..0.2),
            torso_len: s * rng.random_range(0.26..0.32),
            torso_width: s * rng.random_range(0.15..0.2),
            head_radius: s * rng.random_range(0.065..0.085),
            arms,
            legs,
        }
    }

    fn validate(&self) -> Result<()> {
        let limbs = self.arms.iter().chain(&self.legs);
        let lengths = limbs.flat_map(|l| [l.upper_len, l.lower_len, l.width]);
        for v in lengths.chain([self.torso_len, self.torso_width, self.head_radius]) {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "degenerate figure: length {v}"
                )));
            }
        }
        Ok(())
    }
}

type Point = (f64, f64);

fn add(p: Point, len: f64, angle: f64) -> Point {
    // angle 0 points down (+y)
    (p.0 + len * angle.sin(), p.1 + len * angle.cos())
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

/// A capsule: every point within `radius` of segment `a–b`.
#[derive(Clone, Copy)]
struct Capsule {
    a: Point,
    b: Point,
    radius: f64,
}

impl Capsule {
    fn contains(&self, p: Point) -> bool {
        segment_distance(p, self.a, self.b) <= self.radius
    }

    fn inside(&self, extent: f64) -> bool {
        [self.a, self.b].iter().all(|&(x, y)| {
            x - self.radius >= 0.0
                && y - self.radius >= 0.0
                && x + self.radius < extent
                && y + self.radius < extent
        })
    }
}

/// Parts in drawing order; later shapes occlude earlier ones.
fn layout(spec: &FigureSpec) -> Vec<(u8, Capsule)> {
    let up = spec.torso_angle + std::f64::consts::PI;
    let top = add(spec.torso_center, spec.torso_len / 2.0, up);
    let bottom = add(spec.torso_center, spec.torso_len / 2.0, spec.torso_angle);
    let across = spec.torso_angle + FRAC_PI_2;
    let half_w = spec.torso_width / 2.0;
    let mut parts = Vec::new();

    let limb_caps = |root: Point, l: &Limb| {
        let joint = add(root, l.upper_len, l.upper_angle);
        let end = add(joint, l.lower_len, l.lower_angle);
        [
            Capsule {
                a: root,
                b: joint,
                radius: l.width / 2.0,
            },
            Capsule {
                a: joint,
                b: end,
                radius: l.width / 2.0,
            },
        ]
    };
    for (i, (leg, class)) in spec
        .legs
        .iter()
        .zip([part::LEFT_LEG, part::RIGHT_LEG])
        .enumerate()
    {
        let side = if i == 0 { -1.0 } else { 1.0 };
        let hip = add(bottom, side * (half_w - leg.width / 2.0), across);
        for c in limb_caps(hip, leg) {
            parts.push((class, c));
        }
    }
    parts.push((
        part::TORSO,
        Capsule {
            a: add(top, half_w * 0.5, spec.torso_angle),
            b: add(bottom, half_w * 0.3, up),
            radius: half_w,
        },
    ));
    for (i, (arm, class)) in spec
        .arms
        .iter()
        .zip([part::LEFT_ARM, part::RIGHT_ARM])
        .enumerate()
    {
        let side = if i == 0 { -1.0 } else { 1.0 };
        let shoulder = add(
            add(top, side * (half_w + arm.width * 0.3), across),
            arm.width,
            spec.torso_angle,
        );
        for c in limb_caps(shoulder, arm) {
            parts.push((class, c));
        }
    }
    let neck = add(top, spec.head_radius * 0.9, up);
    parts.push((
        part::HEAD,
        Capsule {
            a: neck,
            b: neck,
            radius: spec.head_radius,
        },
    ));
    parts
}

/// Rasterizes `spec` on a square canvas. Colors and texture come from `rng`.
pub fn render<R: Rng + ?Sized>(
    spec: &FigureSpec,
    extent: usize,
    rng: &mut R,
) -> Result<(RgbImage, LabelMap)> {
    if extent < MIN_CANVAS {
        return Err(Error::InvalidArgument(format!(
            "canvas {extent} is smaller than {MIN_CANVAS}"
        )));
    }
    spec.validate()?;
    let parts = layout(spec);

    let mut label = vec![part::BACKGROUND; extent * extent];
    for y in 0..extent {
        for x in 0..extent {
            let p = (x as f64 + 0.5, y as f64 + 0.5);
            for &(class, cap) in &parts {
                if cap.contains(p) {
                    label[y * extent + x] = class;
                }
            }
        }
    }

    let skin = [
        rng.random_range(170.0..235.0),
        rng.random_range(120.0..190.0),
        rng.random_range(90.0..160.0),
    ];
    let shirt = [0; 3].map(|_| rng.random_range(20.0..235.0));
    let pants = [0; 3].map(|_| rng.random_range(20.0..200.0));
    let bg = [0; 3].map(|_| rng.random_range(60.0..180.0));
    let mut palette = [bg, skin, shirt, shirt, shirt, pants, pants];
    // sleeves slightly darker than the shirt body
    for c in [3, 4] {
        palette[c] = palette[c].map(|v| v * 0.85);
    }
    let waves: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(0.05..0.4),
                rng.random_range(0.05..0.4),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(10.0..30.0),
            )
        })
        .collect();

    let mut img = RgbImage::new(extent as u32, extent as u32);
    for y in 0..extent {
        for x in 0..extent {
            let class = label[y * extent + x] as usize;
            let texture = if class == 0 {
                waves
                    .iter()
                    .map(|&(fx, fy, ph, amp)| amp * (fx * x as f64 + fy * y as f64 + ph).sin())
                    .sum::<f64>()
            } else {
                0.0
            };
            let px = palette[class].map(|v| {
                let noise = rng.random_range(-12.0..12.0);
                (v + texture + noise).round().clamp(0.0, 255.0) as u8
            });
            img.put_pixel(x as u32, y as u32, Rgb(px));
        }
    }
    Ok((img, LabelMap::new(extent, extent, FIGURE_CLASSES, label)?))
}

fn acceptable(spec: &FigureSpec, label: &LabelMap, extent: usize) -> bool {
    let inside = layout(spec).iter().all(|(_, c)| c.inside(extent as f64));
    let counts = label.class_counts();
    inside
        && counts.iter().all(|&n| n > 0)
        && (1..FIGURE_CLASSES as u8).all(|c| label.is_four_connected(c))
}

/// Deterministic figure for `seed`: poses are redrawn until the figure lies
/// inside the canvas with every part present and 4-connected.
pub fn synth_figure(seed: u64, extent: usize) -> Result<Sample> {
    if extent < MIN_CANVAS {
        return Err(Error::InvalidArgument(format!(
            "canvas {extent} is smaller than {MIN_CANVAS}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let spec = FigureSpec::random(&mut rng, extent);
        let (image, label) = render(&spec, extent, &mut rng)?;
        if acceptable(&spec, &label, extent) {
            return Ok(Sample {
                image,
                label,
                meta: SampleMeta {
                    seed,
                    pose: Some(spec),
                },
            });
        }
    }
    Err(Error::InvalidArgument(format!(
        "no admissible figure for seed {seed} after {MAX_ATTEMPTS} attempts"
    )))
}

/// `count` figures whose per-figure seeds are drawn from `seed`.
pub fn synth_set(seed: u64, count: usize, extent: usize) -> Result<Vec<Sample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| synth_figure(rng.random(), extent))
        .collect()
}
