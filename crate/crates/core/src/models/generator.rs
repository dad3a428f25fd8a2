use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{
    build_block, BlockKind, Bound, ForwardCtx, LayerSpec, LayerStack, ParamStore, Sequential,
    LEAKY_SLOPE,
};
use crate::tensor::{Graph, Real, Var};

/// Downsampling factor between the image and the low-resolution head.
pub const LOW_RES_FACTOR: usize = 16;
/// Downsampling factor of the auxiliary head after the third deconvolution.
pub const MID_RES_FACTOR: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub classes: usize,
    /// Encoder widths of the four stride-2 down blocks.
    pub widths: [usize; 4],
    pub bridge_dilations: [usize; 3],
    pub dropout: f64,
    pub init_std: f64,
    /// Adds a label head after the third up block.
    pub mid_head: bool,
}

impl GeneratorConfig {
    pub fn desk(classes: usize) -> Self {
        Self {
            classes,
            widths: [32, 64, 128, 256],
            bridge_dilations: [1, 2, 4],
            dropout: crate::nn::DROPOUT_RATE,
            init_std: 0.001,
            mid_head: false,
        }
    }
}

/// Encoder / ASPP-lite bridge / decoder with U-net skips, emitting a label
/// distribution at 1/16 resolution (from the bridge) and at full resolution.
#[derive(Clone, Debug)]
pub struct DualOutputGenerator<T> {
    config: GeneratorConfig,
    store: ParamStore<T>,
    encoder: Vec<Sequential>,
    bridge: Vec<Sequential>,
    bridge_post: Sequential,
    low_head: Sequential,
    decoder: Vec<Sequential>,
    mid_head: Option<Sequential>,
    high_head: Sequential,
}

pub struct GeneratorOutput {
    pub low: Var,
    pub mid: Option<Var>,
    pub high: Var,
}

impl<T: Real> DualOutputGenerator<T> {
    pub fn new<R: Rng + ?Sized>(config: GeneratorConfig, rng: &mut R) -> Result<Self> {
        if config.classes < 2 {
            return Err(Error::InvalidArgument(
                "generator needs at least 2 classes".into(),
            ));
        }
        let mut store = ParamStore::new();
        let std = config.init_std;
        let [w1, w2, w3, w4] = config.widths;
        let c = config.classes;
        let drop = Some(config.dropout);

        let mut encoder = Vec::new();
        for (i, (cin, cout)) in [(3, w1), (w1, w2), (w2, w3), (w3, w4)]
            .into_iter()
            .enumerate()
        {
            let stack = build_block(format!("enc{}", i + 1), cin, cout, BlockKind::Down)?;
            encoder.push(Sequential::realize(stack, &mut store, std, rng));
        }

        let mut bridge = Vec::new();
        for &d in &config.bridge_dilations {
            let stack = LayerStack::new(
                format!("aspp_d{d}"),
                vec![LayerSpec::Conv {
                    in_ch: w4,
                    out_ch: w4,
                    kernel: 3,
                    stride: 1,
                    padding: d,
                    dilation: d,
                    bias: true,
                }],
            )?;
            bridge.push(Sequential::realize(stack, &mut store, std, rng));
        }
        let bridge_post = Sequential::realize(
            LayerStack::new(
                "aspp_post",
                vec![
                    LayerSpec::InstanceNorm { channels: w4 },
                    LayerSpec::LeakyRelu { slope: LEAKY_SLOPE },
                ],
            )?,
            &mut store,
            std,
            rng,
        );
        let low_head = Sequential::realize(
            LayerStack::new(
                "low_head",
                vec![LayerSpec::conv(w4, c, 1, 1, 0), LayerSpec::Softmax],
            )?,
            &mut store,
            std,
            rng,
        );

        // (in, out, skip channels, dropout)
        let plan = [
            (w4, w3, Some(w3), drop),
            (2 * w3, w2, Some(w2), drop),
            (2 * w2, w1, Some(w1), None),
            (2 * w1, w1, None, None),
        ];
        let mut decoder = Vec::new();
        for (i, (cin, cout, skip, dropout)) in plan.into_iter().enumerate() {
            let mut stack = build_block(
                format!("dec{}", i + 1),
                cin,
                cout,
                BlockKind::Up { dropout },
            )?;
            if let Some(s) = skip {
                stack = stack.then(LayerStack::new(
                    "skip",
                    vec![LayerSpec::ConcatMarker { channels: s }],
                )?)?;
            }
            decoder.push(Sequential::realize(stack, &mut store, std, rng));
        }
        let mid_head = if config.mid_head {
            Some(Sequential::realize(
                LayerStack::new(
                    "mid_head",
                    vec![LayerSpec::conv(2 * w1, c, 1, 1, 0), LayerSpec::Softmax],
                )?,
                &mut store,
                std,
                rng,
            ))
        } else {
            None
        };
        let high_head = Sequential::realize(
            LayerStack::new(
                "high_head",
                vec![LayerSpec::conv(w1, c, 3, 1, 1), LayerSpec::Softmax],
            )?,
            &mut store,
            std,
            rng,
        );
        Ok(Self {
            config,
            store,
            encoder,
            bridge,
            bridge_post,
            low_head,
            decoder,
            mid_head,
            high_head,
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn classes(&self) -> usize {
        self.config.classes
    }

    pub fn store(&self) -> &ParamStore<T> {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    /// Every layer stack in forward order.
    pub fn stacks(&self) -> Vec<&LayerStack> {
        let mut out: Vec<&LayerStack> = self.encoder.iter().map(Sequential::stack).collect();
        out.extend(self.bridge.iter().map(Sequential::stack));
        out.push(self.bridge_post.stack());
        out.push(self.low_head.stack());
        out.extend(self.decoder.iter().map(Sequential::stack));
        out.extend(self.mid_head.iter().map(Sequential::stack));
        out.push(self.high_head.stack());
        out
    }

    pub fn manifest(&self) -> String {
        self.stacks().iter().map(|s| s.manifest()).collect()
    }

    /// Closed-form parameter count over all stacks.
    pub fn param_count(&self) -> usize {
        self.stacks().iter().map(|s| s.param_count()).sum()
    }

    /// `image` is `N×3×H×W` with `H` and `W` divisible by 16.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        g: &mut Graph<T>,
        bound: &Bound,
        image: Var,
        ctx: &mut ForwardCtx<'_, R>,
    ) -> Result<GeneratorOutput> {
        let (_, c, h, w) = g.value(image).dims4()?;
        if c != 3 {
            return Err(Error::shape(
                "generator",
                format!("expected a 3-channel image, got {c}"),
            ));
        }
        if h == 0 || w == 0 || h % LOW_RES_FACTOR != 0 || w % LOW_RES_FACTOR != 0 {
            return Err(Error::shape(
                "generator",
                format!("input {h}×{w} is not divisible by {LOW_RES_FACTOR}"),
            ));
        }
        let mut skips = Vec::with_capacity(4);
        let mut x = image;
        for block in &self.encoder {
            x = block.forward(g, bound, x, ctx)?;
            skips.push(x);
        }
        let mut sum: Option<Var> = None;
        for branch in &self.bridge {
            let b = branch.forward(g, bound, x, ctx)?;
            sum = Some(match sum {
                Some(s) => g.add(s, b)?,
                None => b,
            });
        }
        let bottleneck =
            self.bridge_post
                .forward(g, bound, sum.expect("three bridge branches"), ctx)?;
        let low = self.low_head.forward(g, bound, bottleneck, ctx)?;

        let mut y = bottleneck;
        let mut mid = None;
        for (i, block) in self.decoder.iter().enumerate() {
            // dec1 pairs with enc3, dec2 with enc2, dec3 with enc1
            let skip = (i < 3).then(|| skips[2 - i]);
            y = block.forward_with_skip(g, bound, y, skip, ctx)?;
            if i == 2 {
                if let Some(head) = &self.mid_head {
                    mid = Some(head.forward(g, bound, y, ctx)?);
                }
            }
        }
        let high = self.high_head.forward(g, bound, y, ctx)?;
        Ok(GeneratorOutput { low, mid, high })
    }
}
