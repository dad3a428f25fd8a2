//! Declarative layer stacks and the shape / receptive-field / parameter
//! calculus over them.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const LEAKY_SLOPE: f64 = 0.2;
pub const DROPOUT_RATE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LayerSpec {
    Conv {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        dilation: usize,
        bias: bool,
    },
    Deconv {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        bias: bool,
    },
    InstanceNorm {
        channels: usize,
    },
    LeakyRelu {
        slope: f64,
    },
    Sigmoid,
    Softmax,
    Dropout {
        rate: f64,
    },
    /// A skip tensor with `channels` channels is concatenated here.
    ConcatMarker {
        channels: usize,
    },
}

impl LayerSpec {
    pub fn conv(in_ch: usize, out_ch: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        LayerSpec::Conv {
            in_ch,
            out_ch,
            kernel,
            stride,
            padding,
            dilation: 1,
            bias: true,
        }
    }

    pub fn deconv(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Self {
        LayerSpec::Deconv {
            in_ch,
            out_ch,
            kernel,
            stride,
            padding,
            bias: true,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::Deconv { .. } => "deconv",
            LayerSpec::InstanceNorm { .. } => "instance_norm",
            LayerSpec::LeakyRelu { .. } => "leaky_relu",
            LayerSpec::Sigmoid => "sigmoid",
            LayerSpec::Softmax => "softmax",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::ConcatMarker { .. } => "concat_marker",
        }
    }

    /// Parameters this layer allocates.
    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Conv {
                in_ch,
                out_ch,
                kernel,
                bias,
                ..
            }
            | LayerSpec::Deconv {
                in_ch,
                out_ch,
                kernel,
                bias,
                ..
            } => in_ch * out_ch * kernel * kernel + if bias { out_ch } else { 0 },
            LayerSpec::InstanceNorm { channels } => 2 * channels,
            _ => 0,
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LayerSpec::Conv {
                in_ch,
                out_ch,
                kernel,
                stride,
                padding,
                dilation,
                bias,
            } => write!(
                f,
                "conv in={in_ch} out={out_ch} k={kernel} s={stride} p={padding} d={dilation} bias={}",
                u8::from(bias)
            ),
            LayerSpec::Deconv {
                in_ch,
                out_ch,
                kernel,
                stride,
                padding,
                bias,
            } => write!(
                f,
                "deconv in={in_ch} out={out_ch} k={kernel} s={stride} p={padding} bias={}",
                u8::from(bias)
            ),
            LayerSpec::InstanceNorm { channels } => write!(f, "instance_norm c={channels}"),
            LayerSpec::LeakyRelu { slope } => write!(f, "leaky_relu slope={slope}"),
            LayerSpec::Sigmoid => write!(f, "sigmoid"),
            LayerSpec::Softmax => write!(f, "softmax"),
            LayerSpec::Dropout { rate } => write!(f, "dropout rate={rate}"),
            LayerSpec::ConcatMarker { channels } => write!(f, "concat_marker c={channels}"),
        }
    }
}

impl FromStr for LayerSpec {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let mut parts = line.split_whitespace();
        let kind = parts
            .next()
            .ok_or_else(|| Error::InvalidArgument("empty layer line".into()))?;
        let mut fields = std::collections::HashMap::new();
        for p in parts {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("malformed layer field `{p}`")))?;
            fields.insert(k, v);
        }
        let int = |k: &str| -> Result<usize> {
            fields
                .get(k)
                .ok_or_else(|| Error::InvalidArgument(format!("`{kind}` missing `{k}`")))?
                .parse()
                .map_err(|_| {
                    Error::InvalidArgument(format!("`{kind}` field `{k}` is not an integer"))
                })
        };
        let real = |k: &str| -> Result<f64> {
            fields
                .get(k)
                .ok_or_else(|| Error::InvalidArgument(format!("`{kind}` missing `{k}`")))?
                .parse()
                .map_err(|_| {
                    Error::InvalidArgument(format!("`{kind}` field `{k}` is not a number"))
                })
        };
        Ok(match kind {
            "conv" => LayerSpec::Conv {
                in_ch: int("in")?,
                out_ch: int("out")?,
                kernel: int("k")?,
                stride: int("s")?,
                padding: int("p")?,
                dilation: int("d")?,
                bias: int("bias")? != 0,
            },
            "deconv" => LayerSpec::Deconv {
                in_ch: int("in")?,
                out_ch: int("out")?,
                kernel: int("k")?,
                stride: int("s")?,
                padding: int("p")?,
                bias: int("bias")? != 0,
            },
            "instance_norm" => LayerSpec::InstanceNorm {
                channels: int("c")?,
            },
            "leaky_relu" => LayerSpec::LeakyRelu {
                slope: real("slope")?,
            },
            "sigmoid" => LayerSpec::Sigmoid,
            "softmax" => LayerSpec::Softmax,
            "dropout" => LayerSpec::Dropout {
                rate: real("rate")?,
            },
            "concat_marker" => LayerSpec::ConcatMarker {
                channels: int("c")?,
            },
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown layer kind `{other}`"
                )))
            }
        })
    }
}

/// An ordered, channel-consistent list of layers.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerStack {
    name: String,
    layers: Vec<LayerSpec>,
}

impl LayerStack {
    pub fn new(name: impl Into<String>, layers: Vec<LayerSpec>) -> Result<Self> {
        let name = name.into();
        if layers.is_empty() {
            return Err(Error::InvalidArgument(format!("stack `{name}` is empty")));
        }
        let mut channels: Option<usize> = None;
        for (i, layer) in layers.iter().enumerate() {
            let (expect, next) = match *layer {
                LayerSpec::Conv { in_ch, out_ch, .. } | LayerSpec::Deconv { in_ch, out_ch, .. } => {
                    (Some(in_ch), Some(out_ch))
                }
                LayerSpec::InstanceNorm { channels: c } => (Some(c), Some(c)),
                LayerSpec::ConcatMarker { channels: c } => (None, channels.map(|cur| cur + c)),
                _ => (None, channels),
            };
            if let (Some(e), Some(cur)) = (expect, channels) {
                if e != cur {
                    return Err(Error::InvalidArgument(format!(
                        "stack `{name}` layer {i} ({layer}) expects {e} channels, chain carries {cur}"
                    )));
                }
            }
            channels = next;
        }
        Ok(Self { name, layers })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn in_channels(&self) -> Option<usize> {
        self.layers.iter().find_map(|l| match *l {
            LayerSpec::Conv { in_ch, .. } | LayerSpec::Deconv { in_ch, .. } => Some(in_ch),
            LayerSpec::InstanceNorm { channels } => Some(channels),
            _ => None,
        })
    }

    /// Concatenates two fragments into one stack.
    pub fn then(mut self, other: LayerStack) -> Result<Self> {
        self.layers.extend(other.layers);
        Self::new(self.name, self.layers)
    }

    /// Output shape `[C, H, W]` after every layer, for an input of `input`.
    pub fn shape_trace(&self, input: [usize; 3]) -> Result<Vec<[usize; 3]>> {
        let [mut c, mut h, mut w] = input;
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let underflow = || Error::ExtentUnderflow {
                stack: self.name.clone(),
                index: i,
                layer: layer.to_string(),
                input: [c, h, w],
            };
            match *layer {
                LayerSpec::Conv {
                    in_ch,
                    out_ch,
                    kernel,
                    stride,
                    padding,
                    dilation,
                    ..
                } => {
                    check_channels(&self.name, i, layer, in_ch, c)?;
                    let span = dilation * (kernel - 1) + 1;
                    let conv =
                        |e: usize| (e + 2 * padding).checked_sub(span).map(|r| r / stride + 1);
                    let (Some(nh), Some(nw)) = (conv(h), conv(w)) else {
                        return Err(underflow());
                    };
                    if nh == 0 || nw == 0 {
                        return Err(underflow());
                    }
                    (c, h, w) = (out_ch, nh, nw);
                }
                LayerSpec::Deconv {
                    in_ch,
                    out_ch,
                    kernel,
                    stride,
                    padding,
                    ..
                } => {
                    check_channels(&self.name, i, layer, in_ch, c)?;
                    let up = |e: usize| ((e.max(1) - 1) * stride + kernel).checked_sub(2 * padding);
                    let (Some(nh), Some(nw)) = (up(h), up(w)) else {
                        return Err(underflow());
                    };
                    if nh == 0 || nw == 0 || h == 0 || w == 0 {
                        return Err(underflow());
                    }
                    (c, h, w) = (out_ch, nh, nw);
                }
                LayerSpec::InstanceNorm { channels } => {
                    check_channels(&self.name, i, layer, channels, c)?
                }
                LayerSpec::ConcatMarker { channels } => c += channels,
                _ => {}
            }
            out.push([c, h, w]);
        }
        Ok(out)
    }

    /// Side of the square input region seen by one output unit.
    pub fn receptive_field(&self) -> Result<usize> {
        let mut rf = 1;
        let mut jump = 1;
        for layer in &self.layers {
            match *layer {
                LayerSpec::Conv {
                    kernel,
                    stride,
                    dilation,
                    ..
                } => {
                    rf += (kernel - 1) * dilation * jump;
                    jump *= stride;
                }
                LayerSpec::Deconv { .. } => {
                    return Err(Error::InvalidArgument(format!(
                        "stack `{}`: receptive field is defined for correlation stacks only",
                        self.name
                    )))
                }
                _ => {}
            }
        }
        Ok(rf)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }

    /// Product of conv strides over the stack.
    pub fn total_stride(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match *l {
                LayerSpec::Conv { stride, .. } => stride,
                _ => 1,
            })
            .product()
    }

    /// Human-readable manifest: a `stack <name>` header and one line per layer.
    pub fn manifest(&self) -> String {
        let mut s = format!("stack {}\n", self.name);
        for l in &self.layers {
            s.push_str("  ");
            s.push_str(&l.to_string());
            s.push('\n');
        }
        s
    }

    /// Parses every stack out of a manifest produced by [`LayerStack::manifest`].
    pub fn parse_manifest(text: &str) -> Result<Vec<LayerStack>> {
        let mut stacks = Vec::new();
        let mut current: Option<(String, Vec<LayerSpec>)> = None;
        for line in text.lines() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if let Some(name) = trimmed.strip_prefix("stack ") {
                if let Some((n, l)) = current.take() {
                    stacks.push(LayerStack::new(n, l)?);
                }
                current = Some((name.trim().to_string(), Vec::new()));
            } else {
                let (_, layers) = current.as_mut().ok_or_else(|| {
                    Error::InvalidArgument("layer line before any `stack` header".into())
                })?;
                layers.push(trimmed.parse()?);
            }
        }
        if let Some((n, l)) = current {
            stacks.push(LayerStack::new(n, l)?);
        }
        Ok(stacks)
    }
}

fn check_channels(
    stack: &str,
    index: usize,
    layer: &LayerSpec,
    expect: usize,
    got: usize,
) -> Result<()> {
    if expect != got {
        return Err(Error::shape(
            "shape_trace",
            format!("stack `{stack}` layer {index} ({layer}) expects {expect} channels, input has {got}"),
        ));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BlockKind {
    /// 4×4 stride-2 conv, instance norm, leaky ReLU.
    Down,
    /// 4×4 stride-2 deconv, instance norm, leaky ReLU, optional dropout.
    Up { dropout: Option<f64> },
}

pub fn build_block(
    name: impl Into<String>,
    in_ch: usize,
    out_ch: usize,
    kind: BlockKind,
) -> Result<LayerStack> {
    if in_ch == 0 || out_ch == 0 {
        return Err(Error::InvalidArgument("block channels must be >= 1".into()));
    }
    let mut layers = match kind {
        BlockKind::Down => vec![LayerSpec::conv(in_ch, out_ch, 4, 2, 1)],
        BlockKind::Up { .. } => vec![LayerSpec::deconv(in_ch, out_ch, 4, 2, 1)],
    };
    layers.push(LayerSpec::InstanceNorm { channels: out_ch });
    layers.push(LayerSpec::LeakyRelu { slope: LEAKY_SLOPE });
    if let BlockKind::Up {
        dropout: Some(rate),
    } = kind
    {
        layers.push(LayerSpec::Dropout { rate });
    }
    LayerStack::new(name, layers)
}
