use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{image_tensor, low_res_target, DownsampleRule, LabelMap, Sample, MEAN_PIXEL};
use crate::error::{Error, Result};
use crate::metrics::{Connectivity, MetricsAccumulator, MetricsReport};
use crate::models::{DualOutputGenerator, LOW_RES_FACTOR};
use crate::nn::ForwardCtx;
use crate::tensor::{Graph, Real, Tensor};

/// Per-pixel class distributions from both generator heads.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMaps<T> {
    pub high: Tensor<T>,
    pub low: Tensor<T>,
}

/// Inference-mode forward pass (dropout off).
pub fn predict<T: Real>(gen: &DualOutputGenerator<T>, image: &Tensor<T>) -> Result<ScoreMaps<T>> {
    let mut g = Graph::new();
    let bound = gen.store().bind(&mut g, false);
    let x = g.constant(image.clone());
    // never drawn from while training is false
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut ctx = ForwardCtx {
        training: false,
        rng: &mut rng,
    };
    let out = gen.forward(&mut g, &bound, x, &mut ctx)?;
    Ok(ScoreMaps {
        high: g.value(out.high).clone(),
        low: g.value(out.low).clone(),
    })
}

/// `extent·scale` rounded to the nearest positive multiple of the
/// generator's total stride, or `None` when it rounds to zero.
pub fn snap_extent(extent: usize, scale: f64) -> Option<usize> {
    let k = (extent as f64 * scale / LOW_RES_FACTOR as f64).round();
    (k >= 1.0 && k.is_finite()).then(|| k as usize * LOW_RES_FACTOR)
}

fn resize<T: Real>(t: &Tensor<T>, h: usize, w: usize) -> Result<Tensor<T>> {
    let (_, _, th, tw) = t.dims4()?;
    if (th, tw) == (h, w) {
        return Ok(t.clone());
    }
    let mut g = Graph::new();
    let x = g.constant(t.clone());
    let y = g.resize_bilinear(x, h, w)?;
    Ok(g.value(y).clone())
}

fn normalize_channels<T: Real>(t: &mut Tensor<T>) -> Result<()> {
    let (n, c, h, w) = t.dims4()?;
    let plane = h * w;
    let data = t.data_mut();
    for b in 0..n {
        for p in 0..plane {
            let base = b * c * plane + p;
            let s: T = (0..c).map(|k| data[base + k * plane]).sum();
            if s > T::zero() {
                for k in 0..c {
                    data[base + k * plane] /= s;
                }
            }
        }
    }
    Ok(())
}

/// Averages both heads over `scales`, each resized back to the native
/// extent (full and 1/16), then renormalizes every pixel to sum to 1.
/// Scales whose snapped extent is empty are skipped with a warning.
pub fn multi_scale_infer<T: Real>(
    gen: &DualOutputGenerator<T>,
    image: &Tensor<T>,
    scales: &[f64],
) -> Result<ScoreMaps<T>> {
    if scales.is_empty() {
        return Err(Error::InvalidArgument("no inference scales".into()));
    }
    let (_, _, h, w) = image.dims4()?;
    if h % LOW_RES_FACTOR != 0 || w % LOW_RES_FACTOR != 0 {
        return Err(Error::shape(
            "multi_scale_infer",
            format!("native extent {h}×{w} is not divisible by {LOW_RES_FACTOR}"),
        ));
    }
    let (lh, lw) = (h / LOW_RES_FACTOR, w / LOW_RES_FACTOR);
    let mut sum: Option<ScoreMaps<T>> = None;
    let mut used = 0usize;
    for &s in scales {
        let (Some(sh), Some(sw)) = (snap_extent(h, s), snap_extent(w, s)) else {
            log::warn!("scale {s} has no legal extent for a {h}×{w} input; skipped");
            continue;
        };
        if !(s > 0.0) {
            log::warn!("scale {s} is not positive; skipped");
            continue;
        }
        let scaled = resize(image, sh, sw)?;
        let maps = predict(gen, &scaled)?;
        let high = resize(&maps.high, h, w)?;
        let low = resize(&maps.low, lh, lw)?;
        sum = Some(match sum {
            None => ScoreMaps { high, low },
            Some(mut acc) => {
                acc.high.add_assign(&high);
                acc.low.add_assign(&low);
                acc
            }
        });
        used += 1;
    }
    let mut out = sum.ok_or_else(|| {
        Error::InvalidArgument(format!("none of the scales {scales:?} is usable"))
    })?;
    if used > 1 {
        let inv = T::from_f64(1.0 / used as f64);
        for t in [&mut out.high, &mut out.low] {
            t.data_mut().iter_mut().for_each(|v| *v *= inv);
        }
    }
    normalize_channels(&mut out.high)?;
    normalize_channels(&mut out.low)?;
    Ok(out)
}

/// Predicted label maps (full and 1/16) for one sample.
pub fn segment<T: Real>(
    gen: &DualOutputGenerator<T>,
    sample: &Sample,
    scales: &[f64],
) -> Result<(LabelMap, LabelMap)> {
    let image = image_tensor::<T>(&sample.image, MEAN_PIXEL);
    let maps = multi_scale_infer(gen, &image, scales)?;
    Ok((
        LabelMap::from_probs(&maps.high)?,
        LabelMap::from_probs(&maps.low)?,
    ))
}

/// Dataset metrics of `gen` on `samples`. The low-resolution score compares
/// the 1/16 head with the `rule`-downsampled ground truth.
pub fn evaluate<T: Real>(
    gen: &DualOutputGenerator<T>,
    samples: &[Sample],
    scales: &[f64],
    rule: DownsampleRule,
) -> Result<MetricsReport> {
    let mut acc = MetricsAccumulator::new(gen.classes(), Connectivity::Four);
    for s in samples {
        if s.label.classes() != gen.classes() {
            return Err(Error::InvalidArgument(format!(
                "label has {} classes, generator {}",
                s.label.classes(),
                gen.classes()
            )));
        }
        let (pred, pred_low) = segment(gen, s, scales)?;
        let gt_low = low_res_target(&s.label, LOW_RES_FACTOR, rule)?;
        acc.add(&pred, &s.label, &pred_low, &gt_low)?;
    }
    Ok(acc.report())
}
