//! Raw numeric kernels over flat slices. Shapes are validated by the graph
//! layer before anything here runs.

use super::Real;

/// Geometry of one strided, padded, dilated 2-D correlation.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeom {
    pub fn new(
        channels: usize,
        height: usize,
        width: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        dilation: usize,
    ) -> Option<Self> {
        let span = dilation * (kernel - 1) + 1;
        let ph = height + 2 * padding;
        let pw = width + 2 * padding;
        if ph < span || pw < span {
            return None;
        }
        Some(Self {
            channels,
            height,
            width,
            kernel,
            stride,
            padding,
            dilation,
            out_h: (ph - span) / stride + 1,
            out_w: (pw - span) / stride + 1,
        })
    }

    pub fn col_rows(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    pub fn col_cols(&self) -> usize {
        self.out_h * self.out_w
    }

    fn is_pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == 1 && self.padding == 0
    }
}

/// Unfolds one `C×H×W` image into a `(C·k·k) × (Ho·Wo)` patch matrix.
pub(crate) fn im2col<T: Real>(x: &[T], g: &ConvGeom, col: &mut [T]) {
    let (k, s, d) = (g.kernel, g.stride, g.dilation);
    let p = g.padding as isize;
    let cols = g.col_cols();
    for c in 0..g.channels {
        let plane = &x[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ki in 0..k {
            for kj in 0..k {
                let row = (c * k + ki) * k + kj;
                let dst = &mut col[row * cols..(row + 1) * cols];
                for oh in 0..g.out_h {
                    let ih = (oh * s + ki * d) as isize - p;
                    let out_row = &mut dst[oh * g.out_w..(oh + 1) * g.out_w];
                    if ih < 0 || ih >= g.height as isize {
                        out_row.fill(T::zero());
                        continue;
                    }
                    let src = &plane[ih as usize * g.width..(ih as usize + 1) * g.width];
                    for (ow, o) in out_row.iter_mut().enumerate() {
                        let iw = (ow * s + kj * d) as isize - p;
                        *o = if iw < 0 || iw >= g.width as isize {
                            T::zero()
                        } else {
                            src[iw as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates patch-matrix entries back into `x`.
pub(crate) fn col2im<T: Real>(col: &[T], g: &ConvGeom, x: &mut [T]) {
    let (k, s, d) = (g.kernel, g.stride, g.dilation);
    let p = g.padding as isize;
    let cols = g.col_cols();
    for c in 0..g.channels {
        let plane = &mut x[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ki in 0..k {
            for kj in 0..k {
                let row = (c * k + ki) * k + kj;
                let src = &col[row * cols..(row + 1) * cols];
                for oh in 0..g.out_h {
                    let ih = (oh * s + ki * d) as isize - p;
                    if ih < 0 || ih >= g.height as isize {
                        continue;
                    }
                    let dst = &mut plane[ih as usize * g.width..(ih as usize + 1) * g.width];
                    for (ow, &v) in src[oh * g.out_w..(oh + 1) * g.out_w].iter().enumerate() {
                        let iw = (ow * s + kj * d) as isize - p;
                        if iw >= 0 && iw < g.width as isize {
                            dst[iw as usize] += v;
                        }
                    }
                }
            }
        }
    }
}

/// Batched correlation. `x` is `N×Cin×H×W`, `w` is `Cout×Cin×k×k`.
pub(crate) fn conv_forward<T: Real>(
    x: &[T],
    batch: usize,
    g: &ConvGeom,
    w: &[T],
    cout: usize,
    bias: Option<&[T]>,
) -> Vec<T> {
    let in_len = g.channels * g.height * g.width;
    let (rows, cols) = (g.col_rows(), g.col_cols());
    let mut out = vec![T::zero(); batch * cout * cols];
    let mut col = if g.is_pointwise() {
        Vec::new()
    } else {
        vec![T::zero(); rows * cols]
    };
    for n in 0..batch {
        let xn = &x[n * in_len..(n + 1) * in_len];
        let patches: &[T] = if g.is_pointwise() {
            xn
        } else {
            im2col(xn, g, &mut col);
            &col
        };
        let on = &mut out[n * cout * cols..(n + 1) * cout * cols];
        if let Some(b) = bias {
            for (c, &bv) in b.iter().enumerate() {
                on[c * cols..(c + 1) * cols].fill(bv);
            }
        }
        let beta = if bias.is_some() { T::one() } else { T::zero() };
        T::gemm(
            cout,
            rows,
            cols,
            T::one(),
            w,
            rows as isize,
            1,
            patches,
            cols as isize,
            1,
            beta,
            on,
            cols as isize,
            1,
        );
    }
    out
}

/// Gradients of [`conv_forward`] with respect to input, weight and bias.
/// Each `Some` buffer is accumulated into.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_backward<T: Real>(
    x: &[T],
    batch: usize,
    g: &ConvGeom,
    w: &[T],
    cout: usize,
    dy: &[T],
    mut dx: Option<&mut [T]>,
    mut dw: Option<&mut [T]>,
    mut db: Option<&mut [T]>,
) {
    let in_len = g.channels * g.height * g.width;
    let (rows, cols) = (g.col_rows(), g.col_cols());
    let mut col = vec![T::zero(); rows * cols];
    for n in 0..batch {
        let dyn_ = &dy[n * cout * cols..(n + 1) * cout * cols];
        if let Some(db) = db.as_deref_mut() {
            for (c, acc) in db.iter_mut().enumerate() {
                *acc += dyn_[c * cols..(c + 1) * cols].iter().copied().sum::<T>();
            }
        }
        if let Some(dw) = dw.as_deref_mut() {
            let xn = &x[n * in_len..(n + 1) * in_len];
            let patches: &[T] = if g.is_pointwise() {
                xn
            } else {
                im2col(xn, g, &mut col);
                &col
            };
            // dW += dY · colᵀ
            T::gemm(
                cout,
                cols,
                rows,
                T::one(),
                dyn_,
                cols as isize,
                1,
                patches,
                1,
                cols as isize,
                T::one(),
                dw,
                rows as isize,
                1,
            );
        }
        if let Some(dx) = dx.as_deref_mut() {
            let dxn = &mut dx[n * in_len..(n + 1) * in_len];
            if g.is_pointwise() {
                T::gemm(
                    rows,
                    cout,
                    cols,
                    T::one(),
                    w,
                    1,
                    rows as isize,
                    dyn_,
                    cols as isize,
                    1,
                    T::one(),
                    dxn,
                    cols as isize,
                    1,
                );
            } else {
                // dcol = Wᵀ · dY
                T::gemm(
                    rows,
                    cout,
                    cols,
                    T::one(),
                    w,
                    1,
                    rows as isize,
                    dyn_,
                    cols as isize,
                    1,
                    T::zero(),
                    &mut col,
                    cols as isize,
                    1,
                );
                col2im(&col, g, dxn);
            }
        }
    }
}

/// Transposed convolution. `g` is the geometry of the *adjoint* correlation:
/// its input extent is this op's output, its output extent this op's input.
/// `w` is laid out `Cin×Cout×k×k` with `Cin = x` channels, `Cout = g.channels`.
pub(crate) fn deconv_forward<T: Real>(
    x: &[T],
    batch: usize,
    cin: usize,
    g: &ConvGeom,
    w: &[T],
    bias: Option<&[T]>,
) -> Vec<T> {
    let (rows, cols) = (g.col_rows(), g.col_cols());
    let out_len = g.channels * g.height * g.width;
    let mut out = vec![T::zero(); batch * out_len];
    let mut col = vec![T::zero(); rows * cols];
    for n in 0..batch {
        let xn = &x[n * cin * cols..(n + 1) * cin * cols];
        // col = Aᵀ · x, A = w viewed as Cin × (Cout·k·k)
        T::gemm(
            rows,
            cin,
            cols,
            T::one(),
            w,
            1,
            rows as isize,
            xn,
            cols as isize,
            1,
            T::zero(),
            &mut col,
            cols as isize,
            1,
        );
        let on = &mut out[n * out_len..(n + 1) * out_len];
        col2im(&col, g, on);
        if let Some(b) = bias {
            let hw = g.height * g.width;
            for (c, &bv) in b.iter().enumerate() {
                for v in &mut on[c * hw..(c + 1) * hw] {
                    *v += bv;
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn deconv_backward<T: Real>(
    x: &[T],
    batch: usize,
    cin: usize,
    g: &ConvGeom,
    w: &[T],
    dy: &[T],
    mut dx: Option<&mut [T]>,
    mut dw: Option<&mut [T]>,
    mut db: Option<&mut [T]>,
) {
    let (rows, cols) = (g.col_rows(), g.col_cols());
    let out_len = g.channels * g.height * g.width;
    let hw = g.height * g.width;
    let mut col = vec![T::zero(); rows * cols];
    for n in 0..batch {
        let dyn_ = &dy[n * out_len..(n + 1) * out_len];
        if let Some(db) = db.as_deref_mut() {
            for (c, acc) in db.iter_mut().enumerate() {
                *acc += dyn_[c * hw..(c + 1) * hw].iter().copied().sum::<T>();
            }
        }
        if dx.is_none() && dw.is_none() {
            continue;
        }
        im2col(dyn_, g, &mut col);
        if let Some(dx) = dx.as_deref_mut() {
            // dX = A · col
            T::gemm(
                cin,
                rows,
                cols,
                T::one(),
                w,
                rows as isize,
                1,
                &col,
                cols as isize,
                1,
                T::one(),
                &mut dx[n * cin * cols..(n + 1) * cin * cols],
                cols as isize,
                1,
            );
        }
        if let Some(dw) = dw.as_deref_mut() {
            // dA += x · colᵀ
            let xn = &x[n * cin * cols..(n + 1) * cin * cols];
            T::gemm(
                cin,
                cols,
                rows,
                T::one(),
                xn,
                cols as isize,
                1,
                &col,
                1,
                cols as isize,
                T::one(),
                dw,
                rows as isize,
                1,
            );
        }
    }
}

/// Source taps for half-pixel-centre bilinear sampling along one axis.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Tap<T> {
    pub lo: usize,
    pub hi: usize,
    pub frac: T,
}

pub(crate) fn bilinear_taps<T: Real>(src: usize, dst: usize) -> Vec<Tap<T>> {
    let ratio = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let pos = ((o as f64 + 0.5) * ratio - 0.5).max(0.0);
            let lo = (pos.floor() as usize).min(src - 1);
            let hi = (lo + 1).min(src - 1);
            let frac = if lo == hi { 0.0 } else { pos - lo as f64 };
            Tap {
                lo,
                hi,
                frac: T::from_f64(frac),
            }
        })
        .collect()
}

pub(crate) fn resize_forward<T: Real>(
    x: &[T],
    planes: usize,
    (h, w): (usize, usize),
    (oh, ow): (usize, usize),
) -> Vec<T> {
    let ty = bilinear_taps::<T>(h, oh);
    let tx = bilinear_taps::<T>(w, ow);
    let mut out = vec![T::zero(); planes * oh * ow];
    for p in 0..planes {
        let src = &x[p * h * w..(p + 1) * h * w];
        let dst = &mut out[p * oh * ow..(p + 1) * oh * ow];
        for (y, a) in ty.iter().enumerate() {
            let r0 = &src[a.lo * w..(a.lo + 1) * w];
            let r1 = &src[a.hi * w..(a.hi + 1) * w];
            for (xi, b) in tx.iter().enumerate() {
                let top = r0[b.lo] + (r0[b.hi] - r0[b.lo]) * b.frac;
                let bot = r1[b.lo] + (r1[b.hi] - r1[b.lo]) * b.frac;
                dst[y * ow + xi] = top + (bot - top) * a.frac;
            }
        }
    }
    out
}

pub(crate) fn resize_backward<T: Real>(
    dy: &[T],
    planes: usize,
    (h, w): (usize, usize),
    (oh, ow): (usize, usize),
    dx: &mut [T],
) {
    let ty = bilinear_taps::<T>(h, oh);
    let tx = bilinear_taps::<T>(w, ow);
    let one = T::one();
    for p in 0..planes {
        let g = &dy[p * oh * ow..(p + 1) * oh * ow];
        let d = &mut dx[p * h * w..(p + 1) * h * w];
        for (y, a) in ty.iter().enumerate() {
            for (xi, b) in tx.iter().enumerate() {
                let v = g[y * ow + xi];
                let top = v * (one - a.frac);
                let bot = v * a.frac;
                d[a.lo * w + b.lo] += top * (one - b.frac);
                d[a.lo * w + b.hi] += top * b.frac;
                d[a.hi * w + b.lo] += bot * (one - b.frac);
                d[a.hi * w + b.hi] += bot * b.frac;
            }
        }
    }
}
