use rand::Rng;

use super::params::{Bound, ParamId, ParamStore};
use super::spec::{LayerSpec, LayerStack};
use crate::error::{Error, Result};
use crate::tensor::{Conv2dParams, Graph, Real, Tensor, Var};

pub const INSTANCE_NORM_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug)]
enum Slot {
    None,
    Kernel {
        weight: ParamId,
        bias: Option<ParamId>,
    },
    Norm {
        gamma: ParamId,
        beta: ParamId,
    },
}

/// A [`LayerStack`] with allocated parameters.
#[derive(Clone, Debug)]
pub struct Sequential {
    stack: LayerStack,
    slots: Vec<Slot>,
}

/// Per-forward switches: dropout is active only in training mode.
pub struct ForwardCtx<'a, R: Rng + ?Sized> {
    pub training: bool,
    pub rng: &'a mut R,
}

impl Sequential {
    /// Allocates the stack's parameters in `store`: kernels ~ N(0, init_std),
    /// biases 0, norm scale 1 and shift 0.
    pub fn realize<T: Real, R: Rng + ?Sized>(
        stack: LayerStack,
        store: &mut ParamStore<T>,
        init_std: f64,
        rng: &mut R,
    ) -> Self {
        let prefix = stack.name().to_string();
        let slots = stack
            .layers()
            .iter()
            .enumerate()
            .map(|(i, layer)| match *layer {
                LayerSpec::Conv {
                    in_ch,
                    out_ch,
                    kernel,
                    bias,
                    ..
                } => {
                    let weight = store.add_normal(
                        format!("{prefix}.{i}.weight"),
                        &[out_ch, in_ch, kernel, kernel],
                        init_std,
                        rng,
                    );
                    let bias = bias.then(|| {
                        store.add(
                            format!("{prefix}.{i}.bias"),
                            Tensor::zeros(&[out_ch]),
                            false,
                        )
                    });
                    Slot::Kernel { weight, bias }
                }
                LayerSpec::Deconv {
                    in_ch,
                    out_ch,
                    kernel,
                    bias,
                    ..
                } => {
                    let weight = store.add_normal(
                        format!("{prefix}.{i}.weight"),
                        &[in_ch, out_ch, kernel, kernel],
                        init_std,
                        rng,
                    );
                    let bias = bias.then(|| {
                        store.add(
                            format!("{prefix}.{i}.bias"),
                            Tensor::zeros(&[out_ch]),
                            false,
                        )
                    });
                    Slot::Kernel { weight, bias }
                }
                LayerSpec::InstanceNorm { channels } => Slot::Norm {
                    gamma: store.add(
                        format!("{prefix}.{i}.gamma"),
                        Tensor::full(&[channels], T::one()),
                        false,
                    ),
                    beta: store.add(
                        format!("{prefix}.{i}.beta"),
                        Tensor::zeros(&[channels]),
                        false,
                    ),
                },
                _ => Slot::None,
            })
            .collect();
        Self { stack, slots }
    }

    pub fn stack(&self) -> &LayerStack {
        &self.stack
    }

    pub fn forward<T: Real, R: Rng + ?Sized>(
        &self,
        g: &mut Graph<T>,
        bound: &Bound,
        x: Var,
        ctx: &mut ForwardCtx<'_, R>,
    ) -> Result<Var> {
        self.forward_with_skip(g, bound, x, None, ctx)
    }

    /// Runs the stack; a `ConcatMarker` consumes `skip`.
    pub fn forward_with_skip<T: Real, R: Rng + ?Sized>(
        &self,
        g: &mut Graph<T>,
        bound: &Bound,
        mut x: Var,
        mut skip: Option<Var>,
        ctx: &mut ForwardCtx<'_, R>,
    ) -> Result<Var> {
        for (layer, slot) in self.stack.layers().iter().zip(&self.slots) {
            x = match (*layer, *slot) {
                (
                    LayerSpec::Conv {
                        stride,
                        padding,
                        dilation,
                        ..
                    },
                    Slot::Kernel { weight, bias },
                ) => g.conv2d(
                    x,
                    bound.var(weight),
                    bias.map(|b| bound.var(b)),
                    Conv2dParams {
                        stride,
                        padding,
                        dilation,
                    },
                )?,
                (
                    LayerSpec::Deconv {
                        stride, padding, ..
                    },
                    Slot::Kernel { weight, bias },
                ) => g.deconv2d(
                    x,
                    bound.var(weight),
                    bias.map(|b| bound.var(b)),
                    Conv2dParams::new(stride, padding),
                )?,
                (LayerSpec::InstanceNorm { .. }, Slot::Norm { gamma, beta }) => {
                    g.instance_norm(x, bound.var(gamma), bound.var(beta), INSTANCE_NORM_EPS)?
                }
                (LayerSpec::LeakyRelu { slope }, _) => g.leaky_relu(x, slope)?,
                (LayerSpec::Sigmoid, _) => g.sigmoid(x)?,
                (LayerSpec::Softmax, _) => g.softmax_channels(x)?,
                (LayerSpec::Dropout { rate }, _) => g.dropout(x, rate, ctx.training, ctx.rng)?,
                (LayerSpec::ConcatMarker { channels }, _) => {
                    let s = skip.take().ok_or_else(|| {
                        Error::InvalidArgument(format!(
                            "stack `{}` needs a skip tensor",
                            self.stack.name()
                        ))
                    })?;
                    let got = g.value(s).shape().get(1).copied().unwrap_or(0);
                    if got != channels {
                        return Err(Error::shape(
                            "concat_marker",
                            format!(
                                "stack `{}` expects a {channels}-channel skip, got {got}",
                                self.stack.name()
                            ),
                        ));
                    }
                    g.concat_channels(x, s)?
                }
                (layer, _) => unreachable!("layer {layer} realized without its parameters"),
            };
        }
        Ok(x)
    }
}
