//! Synthetic figures, label maps, augmentation, corruption, taxonomy merging
//! and dataset files.

mod augment;
mod corrupt;
mod dataset;
mod label;
mod synth;
mod taxonomy;

pub use augment::{augment, flip_sample, AugmentConfig, FlipSwap};
pub use corrupt::{corrupt_map, Corruption};
pub use dataset::{
    image_tensor, load_dataset, read_manifest, write_dataset, MANIFEST_NAME, MEAN_PIXEL,
};
pub use label::{
    load_label_image, low_res_target, save_label_image, DownsampleRule, GroundTruth, LabelMap,
};
pub use synth::{
    part, render, synth_figure, synth_set, FigureSpec, Limb, Sample, SampleMeta, FIGURE_CLASSES,
    MIN_CANVAS,
};
pub use taxonomy::{merge_taxonomy, TaxonomyMap, DEFAULT_FLIP, DEFAULT_MERGE};

#[cfg(test)]
mod tests;
