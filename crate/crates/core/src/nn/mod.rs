//! Layer-stack descriptions, parameter storage, and realized sequential nets.

mod params;
mod sequential;
mod spec;

pub use params::{Bound, Param, ParamId, ParamStore};
pub use sequential::{ForwardCtx, Sequential, INSTANCE_NORM_EPS};
pub use spec::{build_block, BlockKind, LayerSpec, LayerStack, DROPOUT_RATE, LEAKY_SLOPE};
