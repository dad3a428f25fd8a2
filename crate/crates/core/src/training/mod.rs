//! Alternating generator/discriminator optimization, Adam, the learning-rate
//! schedule, checkpoints and multi-scale inference.

mod adam;
pub mod checkpoint;
mod config;
mod infer;
mod trainer;

pub use adam::{adam_step, adam_update, AdamParams, AdamState};
pub use config::{hex, lr_at, Precision, Profile, TrainConfig};
pub use infer::{evaluate, multi_scale_infer, predict, segment, snap_extent, ScoreMaps};
pub use trainer::{area_downsample, epoch_order, train_alternating, DiscPhase, Prepared, Trainer};

impl<T: crate::tensor::Real> Trainer<T> {
    pub fn save(&self, path: &std::path::Path) -> crate::Result<()> {
        checkpoint::save(self, path)
    }

    pub fn load(path: &std::path::Path) -> crate::Result<Self> {
        checkpoint::load(path)
    }
}

#[cfg(test)]
mod tests;
