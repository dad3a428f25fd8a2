//! Browser front end for the segmentation toolkit.
//!
//! Every export takes and returns plain values so the same functions run
//! natively under `cargo test` and in the page through wasm-bindgen.

use mman_core::data::{
    corrupt_map, low_res_target, synth_figure, Corruption, DownsampleRule, LabelMap, Sample,
};
use mman_core::metrics::{iou, ipr, Connectivity};
use mman_core::models::{macro_stack, micro_stack};
use mman_core::nn::LayerStack;
use wasm_bindgen::prelude::*;

/// Part colors: background, head, torso, left/right arm, left/right leg.
const PALETTE: [[u8; 3]; 7] = [
    [20, 20, 28],
    [240, 200, 80],
    [200, 70, 60],
    [70, 140, 230],
    [60, 200, 200],
    [120, 200, 80],
    [200, 110, 220],
];

fn rgba_labels(map: &LabelMap) -> Vec<u8> {
    map.data()
        .iter()
        .flat_map(|&c| {
            let [r, g, b] = PALETTE[c as usize % PALETTE.len()];
            [r, g, b, 255]
        })
        .collect()
}

fn figure_sample(seed: u32, extent: u32) -> Result<Sample, String> {
    synth_figure(seed as u64, extent as usize).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub struct FigureView {
    extent: u32,
    image: Vec<u8>,
    clean: Vec<u8>,
    corrupted: Vec<u8>,
    ipr_clean: f64,
    ipr_corrupted: f64,
    miou: f64,
}

#[wasm_bindgen]
impl FigureView {
    #[wasm_bindgen(getter)]
    pub fn extent(&self) -> u32 {
        self.extent
    }

    /// RGBA pixels of the rendered figure.
    pub fn image(&self) -> Vec<u8> {
        self.image.clone()
    }

    pub fn clean(&self) -> Vec<u8> {
        self.clean.clone()
    }

    pub fn corrupted(&self) -> Vec<u8> {
        self.corrupted.clone()
    }

    #[wasm_bindgen(getter = iprClean)]
    pub fn ipr_clean(&self) -> f64 {
        self.ipr_clean
    }

    #[wasm_bindgen(getter = iprCorrupted)]
    pub fn ipr_corrupted(&self) -> f64 {
        self.ipr_corrupted
    }

    /// mIoU of the corrupted map against the clean one.
    #[wasm_bindgen(getter)]
    pub fn miou(&self) -> f64 {
        self.miou
    }
}

/// Renders figure `seed`, then punches `holes` discs of `radius` into its
/// label map and optionally swaps the forearms.
#[wasm_bindgen]
pub fn figure(
    seed: u32,
    extent: u32,
    holes: u32,
    radius: u32,
    limb_swap: bool,
) -> Result<FigureView, String> {
    let sample = figure_sample(seed, extent)?;
    let mut bad = sample.label.clone();
    if holes > 0 {
        let kind = Corruption::Holes {
            count: holes as usize,
            radius: radius as usize,
        };
        bad = corrupt_map(&bad, kind, seed as u64).map_err(|e| e.to_string())?;
    }
    if limb_swap {
        bad = corrupt_map(&bad, Corruption::LimbSwap, seed as u64).map_err(|e| e.to_string())?;
    }
    let err = |e: mman_core::Error| e.to_string();
    Ok(FigureView {
        extent,
        image: sample
            .image
            .pixels()
            .flat_map(|p| [p[0], p[1], p[2], 255])
            .collect(),
        clean: rgba_labels(&sample.label),
        corrupted: rgba_labels(&bad),
        ipr_clean: ipr(&sample.label, Connectivity::Four).map_err(err)?,
        ipr_corrupted: ipr(&bad, Connectivity::Four).map_err(err)?,
        miou: iou(&bad, &sample.label).map_err(err)?.miou,
    })
}

fn describe(out: &mut String, stack: &LayerStack, input: [usize; 3]) -> Result<(), String> {
    let shapes = stack.shape_trace(input).map_err(|e| e.to_string())?;
    let rf = stack.receptive_field().map_err(|e| e.to_string())?;
    out.push_str(&format!(
        "{}  input {}×{}×{}  receptive field {rf}×{rf}  stride {}  {} params\n",
        stack.name(),
        input[0],
        input[1],
        input[2],
        stack.total_stride(),
        stack.param_count()
    ));
    for (layer, [c, h, w]) in stack.layers().iter().zip(shapes) {
        out.push_str(&format!("  {:<40} -> {c}×{h}×{w}\n", layer.to_string()));
    }
    Ok(())
}

/// Layer-by-layer shapes of both discriminators for a `classes`-channel map
/// of side `extent`; the macro one scores the map at 1/16.
#[wasm_bindgen]
pub fn discriminator_shapes(extent: u32, classes: u32) -> Result<String, String> {
    let (extent, classes) = (extent as usize, classes as usize);
    if classes == 0 || extent % 16 != 0 {
        return Err(format!(
            "need classes > 0 and an extent divisible by 16, got {classes} and {extent}"
        ));
    }
    let pair = classes + 3;
    let low = extent / 16;
    let mut out = String::new();
    let mac = macro_stack(pair, low).map_err(|e| e.to_string())?;
    describe(&mut out, &mac, [pair, low, low])?;
    out.push('\n');
    let mic = micro_stack(pair).map_err(|e| e.to_string())?;
    describe(&mut out, &mic, [pair, extent, extent])?;
    Ok(out)
}

#[wasm_bindgen]
pub struct LowResView {
    extent: u32,
    blocks: u32,
    pixels: Vec<u8>,
    agreement: f64,
}

#[wasm_bindgen]
impl LowResView {
    #[wasm_bindgen(getter)]
    pub fn extent(&self) -> u32 {
        self.extent
    }

    #[wasm_bindgen(getter)]
    pub fn blocks(&self) -> u32 {
        self.blocks
    }

    /// RGBA of the coarse map, upsampled back to the full extent.
    pub fn pixels(&self) -> Vec<u8> {
        self.pixels.clone()
    }

    /// Fraction of full-resolution pixels that keep their label.
    #[wasm_bindgen(getter)]
    pub fn agreement(&self) -> f64 {
        self.agreement
    }
}

/// The coarse target the low-resolution head is trained against.
#[wasm_bindgen]
pub fn low_res_view(
    seed: u32,
    extent: u32,
    factor: u32,
    majority: bool,
) -> Result<LowResView, String> {
    let sample = figure_sample(seed, extent)?;
    let rule = if majority {
        DownsampleRule::Majority
    } else {
        DownsampleRule::Nearest
    };
    let f = factor as usize;
    let low = low_res_target(&sample.label, f, rule).map_err(|e| e.to_string())?;
    let n = sample.label.height();
    let mut up = Vec::with_capacity(n * n);
    for y in 0..n {
        for x in 0..n {
            up.push(low.get(y / f, x / f));
        }
    }
    let up = LabelMap::new(n, n, low.classes(), up).map_err(|e| e.to_string())?;
    let same = up
        .data()
        .iter()
        .zip(sample.label.data())
        .filter(|(a, b)| a == b)
        .count();
    Ok(LowResView {
        extent,
        blocks: low.width() as u32,
        pixels: rgba_labels(&up),
        agreement: same as f64 / up.len() as f64,
    })
}
