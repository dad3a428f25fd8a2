use rand::Rng;

use super::kernels::{self, ConvGeom};
use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Handle to a node of a [`Graph`]. Only meaningful for the graph that
/// produced it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv2dParams {
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
}

impl Conv2dParams {
    pub const fn new(stride: usize, padding: usize) -> Self {
        Self {
            stride,
            padding,
            dilation: 1,
        }
    }

    pub const fn dilated(padding: usize, dilation: usize) -> Self {
        Self {
            stride: 1,
            padding,
            dilation,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ActivationKind {
    LeakyRelu(f64),
    Sigmoid,
    /// Normalises across the channel axis of an `N×C×H×W` tensor.
    SoftmaxChannels,
}

enum Op<T> {
    Leaf,
    Conv2d {
        input: Var,
        weight: Var,
        bias: Option<Var>,
        geom: ConvGeom,
    },
    Deconv2d {
        input: Var,
        weight: Var,
        bias: Option<Var>,
        geom: ConvGeom,
    },
    InstanceNorm {
        input: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<T>,
        inv_std: Vec<T>,
    },
    Activation {
        input: Var,
        kind: ActivationKind,
    },
    Concat {
        a: Var,
        b: Var,
    },
    Resize {
        input: Var,
    },
    Dropout {
        input: Var,
        mask: Vec<T>,
    },
    Add {
        a: Var,
        b: Var,
    },
    Mul {
        a: Var,
        b: Var,
    },
    Affine {
        input: Var,
        scale: T,
    },
    LnClamped {
        input: Var,
        floor: T,
    },
    Sum {
        input: Var,
    },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Records operations in creation order, which is also a topological order,
/// so the reverse pass is a single backwards sweep over the node list.
pub struct Graph<T: Real> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Leaf gradients produced by [`Graph::backward`].
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn dims4<T: Real>(op: &'static str, t: &Tensor<T>) -> Result<(usize, usize, usize, usize)> {
    t.dims4()
        .map_err(|_| Error::shape(op, format!("expected N×C×H×W, got {:?}", t.shape())))
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A differentiable leaf.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Copies the value of `v` into a new constant, cutting the graph.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.nodes[v.0].value.clone();
        self.constant(value)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn conv2d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Option<Var>,
        p: Conv2dParams,
    ) -> Result<Var> {
        let (n, cin, h, w) = dims4("conv2d", self.value(input))?;
        let (cout, wcin, kh, kw) = dims4("conv2d", self.value(weight))?;
        if wcin != cin || kh != kw {
            return Err(Error::shape(
                "conv2d",
                format!(
                    "input {:?} is incompatible with weight {:?}",
                    self.value(input).shape(),
                    self.value(weight).shape()
                ),
            ));
        }
        if kh == 0 || p.stride == 0 || p.dilation == 0 {
            return Err(Error::InvalidArgument(
                "conv2d needs kernel, stride and dilation >= 1".into(),
            ));
        }
        if let Some(b) = bias {
            if self.value(b).shape() != [cout] {
                return Err(Error::shape(
                    "conv2d",
                    format!(
                        "bias {:?} for {cout} output channels",
                        self.value(b).shape()
                    ),
                ));
            }
        }
        let geom =
            ConvGeom::new(cin, h, w, kh, p.stride, p.padding, p.dilation).ok_or_else(|| {
                Error::shape(
                    "conv2d",
                    format!(
                        "padded input {h}×{w} (pad {}) smaller than kernel {kh}",
                        p.padding
                    ),
                )
            })?;
        let out = kernels::conv_forward(
            self.value(input).data(),
            n,
            &geom,
            self.value(weight).data(),
            cout,
            bias.map(|b| self.value(b).data()),
        );
        let value = Tensor::new(&[n, cout, geom.out_h, geom.out_w], out)?;
        let needs = self.needs(input) || self.needs(weight) || bias.is_some_and(|b| self.needs(b));
        Ok(self.push(
            value,
            Op::Conv2d {
                input,
                weight,
                bias,
                geom,
            },
            needs,
        ))
    }

    /// Transposed convolution with a `Cin×Cout×k×k` weight; the exact adjoint
    /// of [`Graph::conv2d`] under the same weight tensor.
    pub fn deconv2d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Option<Var>,
        p: Conv2dParams,
    ) -> Result<Var> {
        let (n, cin, h, w) = dims4("deconv2d", self.value(input))?;
        let (wcin, cout, kh, kw) = dims4("deconv2d", self.value(weight))?;
        if wcin != cin || kh != kw {
            return Err(Error::shape(
                "deconv2d",
                format!(
                    "input {:?} is incompatible with weight {:?}",
                    self.value(input).shape(),
                    self.value(weight).shape()
                ),
            ));
        }
        if kh == 0 || p.stride == 0 || p.dilation == 0 {
            return Err(Error::InvalidArgument(
                "deconv2d needs kernel, stride and dilation >= 1".into(),
            ));
        }
        if let Some(b) = bias {
            if self.value(b).shape() != [cout] {
                return Err(Error::shape(
                    "deconv2d",
                    format!(
                        "bias {:?} for {cout} output channels",
                        self.value(b).shape()
                    ),
                ));
            }
        }
        let span = p.dilation * (kh - 1) + 1;
        let full_h = (h - 1) * p.stride + span;
        let full_w = (w - 1) * p.stride + span;
        if full_h <= 2 * p.padding || full_w <= 2 * p.padding {
            return Err(Error::shape(
                "deconv2d",
                format!(
                    "padding {} consumes the whole {full_h}×{full_w} output",
                    p.padding
                ),
            ));
        }
        let (oh, ow) = (full_h - 2 * p.padding, full_w - 2 * p.padding);
        let geom = ConvGeom::new(cout, oh, ow, kh, p.stride, p.padding, p.dilation)
            .filter(|g| g.out_h == h && g.out_w == w)
            .ok_or_else(|| Error::shape("deconv2d", "inconsistent transposed geometry"))?;
        let out = kernels::deconv_forward(
            self.value(input).data(),
            n,
            cin,
            &geom,
            self.value(weight).data(),
            bias.map(|b| self.value(b).data()),
        );
        let value = Tensor::new(&[n, cout, oh, ow], out)?;
        let needs = self.needs(input) || self.needs(weight) || bias.is_some_and(|b| self.needs(b));
        Ok(self.push(
            value,
            Op::Deconv2d {
                input,
                weight,
                bias,
                geom,
            },
            needs,
        ))
    }

    pub fn instance_norm(&mut self, input: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let (n, c, h, w) = dims4("instance_norm", self.value(input))?;
        if self.value(gamma).shape() != [c] || self.value(beta).shape() != [c] {
            return Err(Error::shape(
                "instance_norm",
                format!(
                    "gamma {:?} / beta {:?} for {c} channels",
                    self.value(gamma).shape(),
                    self.value(beta).shape()
                ),
            ));
        }
        let hw = h * w;
        if hw == 0 {
            return Err(Error::shape("instance_norm", "empty spatial plane"));
        }
        let x = self.value(input).data();
        let gv = self.value(gamma).data();
        let bv = self.value(beta).data();
        let eps = T::from_f64(eps);
        let count = T::from_f64(hw as f64);
        let mut xhat = vec![T::zero(); x.len()];
        let mut inv_std = vec![T::zero(); n * c];
        let mut out = vec![T::zero(); x.len()];
        for plane in 0..n * c {
            let ch = plane % c;
            let xs = &x[plane * hw..(plane + 1) * hw];
            let mean = xs.iter().copied().sum::<T>() / count;
            let var = xs.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / count;
            let is = T::one() / (var + eps).sqrt();
            inv_std[plane] = is;
            for i in 0..hw {
                let xh = (xs[i] - mean) * is;
                xhat[plane * hw + i] = xh;
                out[plane * hw + i] = xh * gv[ch] + bv[ch];
            }
        }
        let value = Tensor::new(&[n, c, h, w], out)?;
        let needs = self.needs(input) || self.needs(gamma) || self.needs(beta);
        Ok(self.push(
            value,
            Op::InstanceNorm {
                input,
                gamma,
                beta,
                xhat,
                inv_std,
            },
            needs,
        ))
    }

    pub fn activation(&mut self, input: Var, kind: ActivationKind) -> Result<Var> {
        let x = self.value(input);
        let value = match kind {
            ActivationKind::LeakyRelu(slope) => {
                let s = T::from_f64(slope);
                x.map(|v| if v > T::zero() { v } else { v * s })
            }
            ActivationKind::Sigmoid => x.map(sigmoid),
            ActivationKind::SoftmaxChannels => {
                let (n, c, h, w) = dims4("softmax_channels", x)?;
                let hw = h * w;
                let xs = x.data();
                let mut out = vec![T::zero(); xs.len()];
                for b in 0..n {
                    let base = b * c * hw;
                    for p in 0..hw {
                        let mut m = T::neg_infinity();
                        for ch in 0..c {
                            m = m.max(xs[base + ch * hw + p]);
                        }
                        let mut z = T::zero();
                        for ch in 0..c {
                            let e = (xs[base + ch * hw + p] - m).exp();
                            out[base + ch * hw + p] = e;
                            z += e;
                        }
                        for ch in 0..c {
                            out[base + ch * hw + p] /= z;
                        }
                    }
                }
                Tensor::new(x.shape(), out)?
            }
        };
        let needs = self.needs(input);
        Ok(self.push(value, Op::Activation { input, kind }, needs))
    }

    pub fn leaky_relu(&mut self, input: Var, slope: f64) -> Result<Var> {
        self.activation(input, ActivationKind::LeakyRelu(slope))
    }

    pub fn sigmoid(&mut self, input: Var) -> Result<Var> {
        self.activation(input, ActivationKind::Sigmoid)
    }

    pub fn softmax_channels(&mut self, input: Var) -> Result<Var> {
        self.activation(input, ActivationKind::SoftmaxChannels)
    }

    /// Stacks `a` then `b` along the channel axis.
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let (na, ca, ha, wa) = dims4("concat_channels", self.value(a))?;
        let (nb, cb, hb, wb) = dims4("concat_channels", self.value(b))?;
        if (na, ha, wa) != (nb, hb, wb) {
            return Err(Error::shape(
                "concat_channels",
                format!(
                    "{:?} and {:?} differ outside the channel axis",
                    self.value(a).shape(),
                    self.value(b).shape()
                ),
            ));
        }
        let hw = ha * wa;
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let mut out = Vec::with_capacity(na * (ca + cb) * hw);
        for n in 0..na {
            out.extend_from_slice(&da[n * ca * hw..(n + 1) * ca * hw]);
            out.extend_from_slice(&db[n * cb * hw..(n + 1) * cb * hw]);
        }
        let value = Tensor::new(&[na, ca + cb, ha, wa], out)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Concat { a, b }, needs))
    }

    /// Bilinear resampling to an explicit extent, half-pixel centres.
    pub fn resize_bilinear(&mut self, input: Var, out_h: usize, out_w: usize) -> Result<Var> {
        let (n, c, h, w) = dims4("resize_bilinear", self.value(input))?;
        if out_h == 0 || out_w == 0 || h == 0 || w == 0 {
            return Err(Error::InvalidArgument(format!(
                "resize {h}×{w} -> {out_h}×{out_w}: extents must be positive"
            )));
        }
        let out = kernels::resize_forward(self.value(input).data(), n * c, (h, w), (out_h, out_w));
        let value = Tensor::new(&[n, c, out_h, out_w], out)?;
        let needs = self.needs(input);
        Ok(self.push(value, Op::Resize { input }, needs))
    }

    /// Bilinear resampling by a scale factor; target extent is `round(extent·scale)`.
    pub fn resize_scale(&mut self, input: Var, scale: f64) -> Result<Var> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "resize scale {scale} must be > 0"
            )));
        }
        let (_, _, h, w) = dims4("resize_bilinear", self.value(input))?;
        let (oh, ow) = (scaled_extent(h, scale), scaled_extent(w, scale));
        self.resize_bilinear(input, oh, ow)
    }

    /// Inverted dropout: survivors are scaled by `1/(1-rate)` during training,
    /// identity otherwise.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        input: Var,
        rate: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate {rate} not in [0, 1)"
            )));
        }
        if !training || rate == 0.0 {
            return Ok(input);
        }
        let keep = T::from_f64(1.0 / (1.0 - rate));
        let numel = self.value(input).numel();
        let mask: Vec<T> = (0..numel)
            .map(|_| {
                if rng.random::<f64>() < rate {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect();
        let x = self.value(input);
        let out = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        let value = Tensor::new(x.shape(), out)?;
        let needs = self.needs(input);
        Ok(self.push(value, Op::Dropout { input, mask }, needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x + y)
            .collect();
        let value = Tensor::new(self.value(a).shape(), out)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add { a, b }, needs))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x * y)
            .collect();
        let value = Tensor::new(self.value(a).shape(), out)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Mul { a, b }, needs))
    }

    /// `scale·x + shift`, elementwise.
    pub fn affine(&mut self, input: Var, scale: f64, shift: f64) -> Result<Var> {
        let (s, t) = (T::from_f64(scale), T::from_f64(shift));
        let value = self.value(input).map(|v| v * s + t);
        let needs = self.needs(input);
        Ok(self.push(value, Op::Affine { input, scale: s }, needs))
    }

    pub fn scale(&mut self, input: Var, k: f64) -> Result<Var> {
        self.affine(input, k, 0.0)
    }

    /// `ln(max(x, floor))`; the gradient is zero where the floor is active.
    pub fn ln_clamped(&mut self, input: Var, floor: f64) -> Result<Var> {
        let f = T::from_f64(floor);
        let value = self.value(input).map(|v| v.max(f).ln());
        let needs = self.needs(input);
        Ok(self.push(value, Op::LnClamped { input, floor: f }, needs))
    }

    pub fn sum(&mut self, input: Var) -> Result<Var> {
        let value = Tensor::scalar(self.value(input).sum());
        let needs = self.needs(input);
        Ok(self.push(value, Op::Sum { input }, needs))
    }

    pub fn mean(&mut self, input: Var) -> Result<Var> {
        let n = self.value(input).numel();
        if n == 0 {
            return Err(Error::shape("mean", "empty tensor"));
        }
        let s = self.sum(input)?;
        self.scale(s, 1.0 / n as f64)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape()),
            ));
        }
        Ok(())
    }

    /// Reverse sweep from a scalar root. Returns gradients for every leaf
    /// created with [`Graph::param`] that the root depends on; leaves the
    /// root does not depend on get an all-zero gradient.
    pub fn backward(&self, root: Var) -> Result<Gradients<T>> {
        let root_value = self.value(root);
        if !root_value.is_scalar() {
            return Err(Error::shape(
                "backward",
                format!("root must be scalar, got shape {:?}", root_value.shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::full(root_value.shape(), T::one()));

        for id in (0..=root.0).rev() {
            let node = &self.nodes[id];
            if !node.needs_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(gy) = grads[id].take() else {
                continue;
            };
            self.backward_node(node, &gy, &mut grads)?;
        }

        for (id, node) in self.nodes.iter().enumerate() {
            if node.needs_grad && matches!(node.op, Op::Leaf) && grads[id].is_none() {
                grads[id] = Some(Tensor::zeros(node.value.shape()));
            }
            if !matches!(node.op, Op::Leaf) {
                grads[id] = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn backward_node(
        &self,
        node: &Node<T>,
        gy: &Tensor<T>,
        grads: &mut [Option<Tensor<T>>],
    ) -> Result<()> {
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d {
                input,
                weight,
                bias,
                geom,
            } => {
                let x = self.value(*input);
                let w = self.value(*weight);
                let (batch, cout) = (x.shape()[0], w.shape()[0]);
                let mut dx = self.needs(*input).then(|| Tensor::zeros(x.shape()));
                let mut dw = self.needs(*weight).then(|| Tensor::zeros(w.shape()));
                let mut db = bias
                    .filter(|b| self.needs(*b))
                    .map(|_| Tensor::zeros(&[cout]));
                kernels::conv_backward(
                    x.data(),
                    batch,
                    geom,
                    w.data(),
                    cout,
                    gy.data(),
                    dx.as_mut().map(|t| t.data_mut()),
                    dw.as_mut().map(|t| t.data_mut()),
                    db.as_mut().map(|t| t.data_mut()),
                );
                accumulate(grads, *input, dx);
                accumulate(grads, *weight, dw);
                if let Some(b) = bias {
                    accumulate(grads, *b, db);
                }
            }
            Op::Deconv2d {
                input,
                weight,
                bias,
                geom,
            } => {
                let x = self.value(*input);
                let w = self.value(*weight);
                let (batch, cin) = (x.shape()[0], x.shape()[1]);
                let mut dx = self.needs(*input).then(|| Tensor::zeros(x.shape()));
                let mut dw = self.needs(*weight).then(|| Tensor::zeros(w.shape()));
                let mut db = bias
                    .filter(|b| self.needs(*b))
                    .map(|_| Tensor::zeros(&[geom.channels]));
                kernels::deconv_backward(
                    x.data(),
                    batch,
                    cin,
                    geom,
                    w.data(),
                    gy.data(),
                    dx.as_mut().map(|t| t.data_mut()),
                    dw.as_mut().map(|t| t.data_mut()),
                    db.as_mut().map(|t| t.data_mut()),
                );
                accumulate(grads, *input, dx);
                accumulate(grads, *weight, dw);
                if let Some(b) = bias {
                    accumulate(grads, *b, db);
                }
            }
            Op::InstanceNorm {
                input,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let (n, c, h, w) = gy.dims4()?;
                let hw = h * w;
                let gv = self.value(*gamma).data();
                let dy = gy.data();
                let mut dgamma = vec![T::zero(); c];
                let mut dbeta = vec![T::zero(); c];
                let mut dx = vec![T::zero(); dy.len()];
                let count = T::from_f64(hw as f64);
                for plane in 0..n * c {
                    let ch = plane % c;
                    let range = plane * hw..(plane + 1) * hw;
                    let (dys, xhs) = (&dy[range.clone()], &xhat[range.clone()]);
                    let mut sum_d = T::zero();
                    let mut sum_dx = T::zero();
                    for (&d, &xh) in dys.iter().zip(xhs) {
                        dgamma[ch] += d * xh;
                        dbeta[ch] += d;
                        sum_d += d * gv[ch];
                        sum_dx += d * gv[ch] * xh;
                    }
                    let scale = inv_std[plane] / count;
                    for (i, (&d, &xh)) in dys.iter().zip(xhs).enumerate() {
                        dx[range.start + i] = scale * (count * d * gv[ch] - sum_d - xh * sum_dx);
                    }
                }
                if self.needs(*input) {
                    accumulate(grads, *input, Some(Tensor::new(gy.shape(), dx)?));
                }
                if self.needs(*gamma) {
                    accumulate(grads, *gamma, Some(Tensor::new(&[c], dgamma)?));
                }
                if self.needs(*beta) {
                    accumulate(grads, *beta, Some(Tensor::new(&[c], dbeta)?));
                }
            }
            Op::Activation { input, kind } => {
                let x = self.value(*input).data();
                let y = node.value.data();
                let dy = gy.data();
                let dx: Vec<T> = match kind {
                    ActivationKind::LeakyRelu(slope) => {
                        let s = T::from_f64(*slope);
                        x.iter()
                            .zip(dy)
                            .map(|(&v, &d)| if v > T::zero() { d } else { d * s })
                            .collect()
                    }
                    ActivationKind::Sigmoid => y
                        .iter()
                        .zip(dy)
                        .map(|(&s, &d)| d * s * (T::one() - s))
                        .collect(),
                    ActivationKind::SoftmaxChannels => {
                        let (n, c, h, w) = node.value.dims4()?;
                        let hw = h * w;
                        let mut dx = vec![T::zero(); y.len()];
                        for b in 0..n {
                            let base = b * c * hw;
                            for p in 0..hw {
                                let mut dot = T::zero();
                                for ch in 0..c {
                                    let i = base + ch * hw + p;
                                    dot += y[i] * dy[i];
                                }
                                for ch in 0..c {
                                    let i = base + ch * hw + p;
                                    dx[i] = y[i] * (dy[i] - dot);
                                }
                            }
                        }
                        dx
                    }
                };
                accumulate(grads, *input, Some(Tensor::new(gy.shape(), dx)?));
            }
            Op::Concat { a, b } => {
                let (n, c, h, w) = gy.dims4()?;
                let ca = self.value(*a).shape()[1];
                let cb = c - ca;
                let hw = h * w;
                let dy = gy.data();
                if self.needs(*a) {
                    let mut da = Vec::with_capacity(n * ca * hw);
                    for i in 0..n {
                        da.extend_from_slice(&dy[i * c * hw..(i * c + ca) * hw]);
                    }
                    accumulate(grads, *a, Some(Tensor::new(&[n, ca, h, w], da)?));
                }
                if self.needs(*b) {
                    let mut db = Vec::with_capacity(n * cb * hw);
                    for i in 0..n {
                        db.extend_from_slice(&dy[(i * c + ca) * hw..(i + 1) * c * hw]);
                    }
                    accumulate(grads, *b, Some(Tensor::new(&[n, cb, h, w], db)?));
                }
            }
            Op::Resize { input } => {
                let x = self.value(*input);
                let (n, c, h, w) = x.dims4()?;
                let (_, _, oh, ow) = gy.dims4()?;
                let mut dx = Tensor::zeros(x.shape());
                kernels::resize_backward(gy.data(), n * c, (h, w), (oh, ow), dx.data_mut());
                accumulate(grads, *input, Some(dx));
            }
            Op::Dropout { input, mask } => {
                let dx = gy.data().iter().zip(mask).map(|(&d, &m)| d * m).collect();
                accumulate(grads, *input, Some(Tensor::new(gy.shape(), dx)?));
            }
            Op::Add { a, b } => {
                if self.needs(*a) {
                    accumulate(grads, *a, Some(gy.clone()));
                }
                if self.needs(*b) {
                    accumulate(grads, *b, Some(gy.clone()));
                }
            }
            Op::Mul { a, b } => {
                if self.needs(*a) {
                    let other = self.value(*b).data();
                    let d = gy.data().iter().zip(other).map(|(&g, &o)| g * o).collect();
                    accumulate(grads, *a, Some(Tensor::new(gy.shape(), d)?));
                }
                if self.needs(*b) {
                    let other = self.value(*a).data();
                    let d = gy.data().iter().zip(other).map(|(&g, &o)| g * o).collect();
                    accumulate(grads, *b, Some(Tensor::new(gy.shape(), d)?));
                }
            }
            Op::Affine { input, scale } => {
                let s = *scale;
                accumulate(grads, *input, Some(gy.map(|d| d * s)));
            }
            Op::LnClamped { input, floor } => {
                let x = self.value(*input).data();
                let d = gy
                    .data()
                    .iter()
                    .zip(x)
                    .map(|(&g, &v)| if v > *floor { g / v } else { T::zero() })
                    .collect();
                accumulate(grads, *input, Some(Tensor::new(gy.shape(), d)?));
            }
            Op::Sum { input } => {
                let g = gy.item();
                accumulate(
                    grads,
                    *input,
                    Some(Tensor::full(self.value(*input).shape(), g)),
                );
            }
        }
        Ok(())
    }
}

fn accumulate<T: Real>(grads: &mut [Option<Tensor<T>>], v: Var, g: Option<Tensor<T>>) {
    let Some(g) = g else { return };
    match &mut grads[v.0] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

#[inline]
pub(crate) fn sigmoid<T: Real>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

/// `round(extent · scale)`, the resize target convention.
pub fn scaled_extent(extent: usize, scale: f64) -> usize {
    (extent as f64 * scale).round() as usize
}
