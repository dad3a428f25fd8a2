//! Macro-micro adversarial training for semantic part segmentation.
//!
//! A dual-output segmentation generator is trained with pixel-wise
//! cross-entropy at two resolutions plus two adversaries: a macro
//! discriminator with a global view of the low-resolution label map and a
//! micro discriminator that scores small patches of the full-resolution map.
//! Everything, including the differentiation engine, is implemented here.

pub mod config;
pub mod data;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod report;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use tensor::{Graph, Real, Tensor, Var};
