use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{Bound, ForwardCtx, LayerSpec, LayerStack, ParamStore, Sequential, LEAKY_SLOPE};
use crate::tensor::{Graph, Real, Var};

const MAX_WIDTH: usize = 256;
/// Number of stride-2 stages in the micro discriminator.
pub const MICRO_DEPTH: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiscMode {
    /// Reduces the whole map to one score.
    Macro,
    /// Scores overlapping patches and averages them.
    Micro,
}

fn conv_stages(name: &str, in_ch: usize, depth: usize) -> Result<LayerStack> {
    let mut layers = Vec::new();
    let mut ch = in_ch;
    for i in 0..depth {
        let last = i + 1 == depth;
        let out = if last { 1 } else { (64 << i).min(MAX_WIDTH) };
        layers.push(LayerSpec::conv(ch, out, 4, 2, 1));
        if last {
            layers.push(LayerSpec::Sigmoid);
        } else {
            layers.push(LayerSpec::InstanceNorm { channels: out });
            layers.push(LayerSpec::LeakyRelu { slope: LEAKY_SLOPE });
        }
        ch = out;
    }
    LayerStack::new(name, layers)
}

/// Global discriminator for a square `extent×extent` map: `log2(extent)`
/// stride-2 convs down to a single sigmoid score. With a 16×16 input this is
/// `(C+3)→64→128→256→1`.
pub fn macro_stack(in_ch: usize, extent: usize) -> Result<LayerStack> {
    if extent < 2 || !extent.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "macro discriminator needs a power-of-two extent >= 2, got {extent}"
        )));
    }
    conv_stages("macro_d", in_ch, extent.trailing_zeros() as usize)
}

/// Patch discriminator `(C+3)→64→128→1`, 22×22 receptive field, stride 8.
pub fn micro_stack(in_ch: usize) -> Result<LayerStack> {
    conv_stages("micro_d", in_ch, MICRO_DEPTH)
}

#[derive(Clone, Debug)]
pub struct Discriminator<T> {
    mode: DiscMode,
    net: Sequential,
    store: ParamStore<T>,
}

pub struct DiscOutput {
    /// Scalar in (0, 1).
    pub score: Var,
    /// Per-patch scores (micro mode only).
    pub grid: Option<Var>,
}

impl<T: Real> Discriminator<T> {
    pub fn from_stack<R: Rng + ?Sized>(
        stack: LayerStack,
        mode: DiscMode,
        init_std: f64,
        rng: &mut R,
    ) -> Self {
        let mut store = ParamStore::new();
        let net = Sequential::realize(stack, &mut store, init_std, rng);
        Self { mode, net, store }
    }

    pub fn new_macro<R: Rng + ?Sized>(
        classes: usize,
        extent: usize,
        init_std: f64,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self::from_stack(
            macro_stack(classes + 3, extent)?,
            DiscMode::Macro,
            init_std,
            rng,
        ))
    }

    pub fn new_micro<R: Rng + ?Sized>(classes: usize, init_std: f64, rng: &mut R) -> Result<Self> {
        Ok(Self::from_stack(
            micro_stack(classes + 3)?,
            DiscMode::Micro,
            init_std,
            rng,
        ))
    }

    pub fn mode(&self) -> DiscMode {
        self.mode
    }

    pub fn stack(&self) -> &LayerStack {
        self.net.stack()
    }

    pub fn store(&self) -> &ParamStore<T> {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    pub fn receptive_field(&self) -> usize {
        self.stack()
            .receptive_field()
            .expect("discriminators are conv-only")
    }

    /// Scores the pair `label ⊕ image`; both at the same resolution.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        g: &mut Graph<T>,
        bound: &Bound,
        label: Var,
        image: Var,
        ctx: &mut ForwardCtx<'_, R>,
    ) -> Result<DiscOutput> {
        let (_, c, h, w) = g.value(label).dims4()?;
        let expected = self.stack().in_channels().unwrap_or(0);
        if c + 3 != expected {
            return Err(Error::shape(
                "discriminator",
                format!(
                    "{} expects {} label channels, got {c}",
                    self.stack().name(),
                    expected - 3
                ),
            ));
        }
        match self.mode {
            DiscMode::Macro => {
                let trace = self.stack().shape_trace([expected, h, w])?;
                if trace.last().map(|s| (s[1], s[2])) != Some((1, 1)) {
                    return Err(Error::shape(
                        "macro discriminator",
                        format!(
                            "{h}×{w} input does not reduce to 1×1 through {}",
                            self.stack().name()
                        ),
                    ));
                }
            }
            DiscMode::Micro => {
                let fov = self.receptive_field();
                if h < fov || w < fov {
                    return Err(Error::shape(
                        "micro discriminator",
                        format!("{h}×{w} input is smaller than one {fov}×{fov} patch"),
                    ));
                }
            }
        }
        let x = g.concat_channels(label, image)?;
        let out = self.net.forward(g, bound, x, ctx)?;
        let score = g.mean(out)?;
        Ok(DiscOutput {
            score,
            grid: (self.mode == DiscMode::Micro).then_some(out),
        })
    }
}
