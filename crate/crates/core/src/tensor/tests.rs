use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gradcheck::{self, FD_TOLERANCE};
use super::*;

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Direct summation, independent of the im2col/GEMM path.
fn naive_conv(
    x: &Tensor<f64>,
    w: &Tensor<f64>,
    b: Option<&Tensor<f64>>,
    s: usize,
    p: usize,
    d: usize,
) -> Tensor<f64> {
    let (n, cin, h, wd) = x.dims4().unwrap();
    let (cout, _, k, _) = w.dims4().unwrap();
    let span = d * (k - 1) + 1;
    let oh = (h + 2 * p - span) / s + 1;
    let ow = (wd + 2 * p - span) / s + 1;
    let mut out = Tensor::zeros(&[n, cout, oh, ow]);
    for bn in 0..n {
        for co in 0..cout {
            for y in 0..oh {
                for xo in 0..ow {
                    let mut acc = b.map_or(0.0, |b| b.data()[co]);
                    for ci in 0..cin {
                        for ki in 0..k {
                            for kj in 0..k {
                                let iy = (y * s + ki * d) as isize - p as isize;
                                let ix = (xo * s + kj * d) as isize - p as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < wd {
                                    acc += x.at4(bn, ci, iy as usize, ix as usize)
                                        * w.at4(co, ci, ki, kj);
                                }
                            }
                        }
                    }
                    out.data_mut()[((bn * cout + co) * oh + y) * ow + xo] = acc;
                }
            }
        }
    }
    out
}

fn forward1(f: impl FnOnce(&mut Graph<f64>) -> Result<Var>) -> Tensor<f64> {
    let mut g = Graph::new();
    let v = f(&mut g).unwrap();
    g.value(v).clone()
}

#[test]
fn conv_identity_kernel() {
    let x = Tensor::from_fn(&[1, 1, 5, 5], |i| i as f64 * 0.5 - 3.0);
    let y = forward1(|g| {
        let xv = g.constant(x.clone());
        let w = g.constant(Tensor::full(&[1, 1, 1, 1], 1.0));
        g.conv2d(xv, w, None, Conv2dParams::new(1, 0))
    });
    assert_eq!(y, x);
}

#[test]
fn conv_output_shape_halves() {
    let mut g = Graph::<f32>::new();
    let x = g.constant(Tensor::zeros(&[1, 3, 256, 256]));
    let w = g.constant(Tensor::zeros(&[64, 3, 4, 4]));
    let y = g.conv2d(x, w, None, Conv2dParams::new(2, 1)).unwrap();
    assert_eq!(g.value(y).shape(), &[1, 64, 128, 128]);
}

#[test]
fn conv_all_ones_sums_to_nine() {
    let y = forward1(|g| {
        let x = g.constant(Tensor::full(&[1, 1, 3, 3], 1.0));
        let w = g.constant(Tensor::full(&[1, 1, 3, 3], 1.0));
        g.conv2d(x, w, None, Conv2dParams::new(1, 0))
    });
    assert_eq!(y.shape(), &[1, 1, 1, 1]);
    assert_eq!(y.item(), 9.0);
}

#[test]
fn conv_rejects_channel_mismatch_naming_shapes() {
    let mut g = Graph::<f64>::new();
    let x = g.constant(Tensor::zeros(&[1, 3, 8, 8]));
    let w = g.constant(Tensor::zeros(&[4, 2, 3, 3]));
    let err = g
        .conv2d(x, w, None, Conv2dParams::new(1, 1))
        .unwrap_err()
        .to_string();
    assert!(
        err.contains("[1, 3, 8, 8]") && err.contains("[4, 2, 3, 3]"),
        "{err}"
    );
}

#[test]
fn conv_rejects_kernel_larger_than_padded_input() {
    let mut g = Graph::<f64>::new();
    let x = g.constant(Tensor::zeros(&[1, 1, 1, 1]));
    let w = g.constant(Tensor::zeros(&[1, 1, 4, 4]));
    assert!(g.conv2d(x, w, None, Conv2dParams::new(2, 1)).is_err());
}

#[test]
fn conv_matches_direct_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for &(k, s, p, d) in &[
        (4, 2, 1, 1),
        (3, 1, 1, 1),
        (3, 1, 2, 2),
        (1, 1, 0, 1),
        (3, 2, 0, 1),
        (3, 1, 4, 4),
    ] {
        let x = random(&[2, 3, 9, 8], &mut rng);
        let w = random(&[4, 3, k, k], &mut rng);
        let b = random(&[4], &mut rng);
        let y = forward1(|g| {
            let (xv, wv, bv) = (
                g.constant(x.clone()),
                g.constant(w.clone()),
                g.constant(b.clone()),
            );
            g.conv2d(
                xv,
                wv,
                Some(bv),
                Conv2dParams {
                    stride: s,
                    padding: p,
                    dilation: d,
                },
            )
        });
        let oracle = naive_conv(&x, &w, Some(&b), s, p, d);
        assert_eq!(y.shape(), oracle.shape());
        assert!(y.max_abs_diff(&oracle) < 1e-12, "k={k} s={s} p={p} d={d}");
    }
}

#[test]
fn deconv_impulse_response_is_kernel_interior() {
    let kernel = Tensor::from_fn(&[1, 1, 4, 4], |i| i as f64 + 1.0);
    let y = forward1(|g| {
        let x = g.constant(Tensor::full(&[1, 1, 1, 1], 1.0));
        let w = g.constant(kernel.clone());
        g.deconv2d(x, w, None, Conv2dParams::new(2, 1))
    });
    assert_eq!(y.shape(), &[1, 1, 2, 2]);
    // interior rows/cols 1..3 of the 4×4 kernel
    assert_eq!(y.data(), &[6.0, 7.0, 10.0, 11.0]);
}

#[test]
fn four_deconvs_take_16_to_256() {
    let mut g = Graph::<f32>::new();
    let mut x = g.constant(Tensor::zeros(&[1, 2, 16, 16]));
    for _ in 0..4 {
        let w = g.constant(Tensor::zeros(&[2, 2, 4, 4]));
        x = g.deconv2d(x, w, None, Conv2dParams::new(2, 1)).unwrap();
    }
    assert_eq!(g.value(x).shape(), &[1, 2, 256, 256]);
}

#[test]
fn deconv_forward_is_conv_backward_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for &(k, s, p) in &[(4, 2, 1), (3, 1, 1), (3, 2, 1), (2, 2, 0)] {
        // conv: 3 -> 5 channels on 10×10
        let w = random(&[5, 3, k, k], &mut rng);
        let x_shape = [1, 3, 10, 10];
        let mut g = Graph::new();
        let xv = g.param(Tensor::zeros(&x_shape));
        let wv = g.constant(w.clone());
        let y = g.conv2d(xv, wv, None, Conv2dParams::new(s, p)).unwrap();
        let out_shape = g.value(y).shape().to_vec();
        let upstream = random(&out_shape, &mut rng);
        let r = g.constant(upstream.clone());
        let prod = g.mul(y, r).unwrap();
        let loss = g.sum(prod).unwrap();
        let grads = g.backward(loss).unwrap();
        let backward_data = grads.get(xv).unwrap().clone();

        let mut g2 = Graph::new();
        let u = g2.constant(upstream);
        let wd = g2.constant(w);
        let d = g2.deconv2d(u, wd, None, Conv2dParams::new(s, p)).unwrap();
        let deconv = g2.value(d);
        // (10 + 2p - k) may not divide evenly by s; only the covered region
        // participates in the conv, so compare on the deconv's extent.
        let (_, _, dh, dw) = deconv.dims4().unwrap();
        for c in 0..3 {
            for yy in 0..dh {
                for xx in 0..dw {
                    let a = deconv.at4(0, c, yy, xx);
                    let b = backward_data.at4(0, c, yy, xx);
                    assert!(
                        (a - b).abs() < 1e-12,
                        "k={k} s={s} p={p} at ({c},{yy},{xx})"
                    );
                }
            }
        }
    }
}

#[test]
fn instance_norm_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let constant = forward1(|g| {
        let x = g.constant(Tensor::full(&[1, 2, 4, 4], 3.5));
        let gm = g.constant(Tensor::full(&[2], 1.0));
        let bt = g.constant(Tensor::zeros(&[2]));
        g.instance_norm(x, gm, bt, 1e-5)
    });
    assert!(constant.data().iter().all(|&v| v == 0.0));

    // With a plane variance far above ε the normalised variance is 1 to 1e-6.
    let x = Tensor::from_fn(&[1, 3, 8, 8], |_| rng.random_range(-40.0..40.0));
    let y = forward1(|g| {
        let xv = g.constant(x.clone());
        let gm = g.constant(Tensor::full(&[3], 1.0));
        let bt = g.constant(Tensor::zeros(&[3]));
        g.instance_norm(xv, gm, bt, 1e-5)
    });
    for c in 0..3 {
        let p = y.plane(0, c);
        let mean = p.iter().sum::<f64>() / p.len() as f64;
        let var = p.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / p.len() as f64;
        assert!(mean.abs() < 1e-6, "{mean}");
        assert!((var - 1.0).abs() < 1e-6, "{var}");
    }

    let beta = Tensor::new(&[3], vec![0.5, -1.0, 2.0]).unwrap();
    let y = forward1(|g| {
        let xv = g.constant(x.clone());
        let gm = g.constant(Tensor::zeros(&[3]));
        let bt = g.constant(beta.clone());
        g.instance_norm(xv, gm, bt, 1e-5)
    });
    for c in 0..3 {
        assert!(y.plane(0, c).iter().all(|&v| v == beta.data()[c]));
    }
}

#[test]
fn activation_examples() {
    let t = |v: f64| Tensor::full(&[1, 1, 1, 1], v);
    let lr = forward1(|g| {
        let x = g.constant(t(-1.0));
        g.leaky_relu(x, 0.2)
    });
    assert!((lr.item() + 0.2).abs() < 1e-15);
    let s = forward1(|g| {
        let x = g.constant(t(0.0));
        g.sigmoid(x)
    });
    assert_eq!(s.item(), 0.5);
    let sm = forward1(|g| {
        let x = g.constant(Tensor::full(&[1, 5, 2, 2], 0.3));
        g.softmax_channels(x)
    });
    for p in 0..4 {
        let total: f64 = (0..5).map(|c| sm.data()[c * 4 + p]).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((0..5).all(|c| (sm.data()[c * 4 + p] - 0.2).abs() < 1e-12));
    }
}

#[test]
fn concat_layout() {
    let a = Tensor::from_fn(&[1, 2, 3, 3], |i| i as f64);
    let b = Tensor::from_fn(&[1, 3, 3, 3], |i| 100.0 + i as f64);
    let mut g = Graph::new();
    let (av, bv) = (g.constant(a.clone()), g.constant(b));
    let c = g.concat_channels(av, bv).unwrap();
    assert_eq!(g.value(c).shape(), &[1, 5, 3, 3]);
    assert_eq!(g.value(c).plane(0, 1), a.plane(0, 1));

    let empty = g.constant(Tensor::zeros(&[1, 0, 3, 3]));
    let same = g.concat_channels(av, empty).unwrap();
    assert_eq!(g.value(same), &a);

    let wrong = g.constant(Tensor::zeros(&[1, 1, 4, 3]));
    assert!(g.concat_channels(av, wrong).is_err());
}

#[test]
fn concat_label_with_rgb() {
    let mut g = Graph::<f32>::new();
    let label = g.constant(Tensor::zeros(&[1, 7, 16, 16]));
    let rgb = g.constant(Tensor::zeros(&[1, 3, 16, 16]));
    let c = g.concat_channels(label, rgb).unwrap();
    assert_eq!(g.value(c).shape(), &[1, 10, 16, 16]);
}

#[test]
fn resize_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = random(&[1, 2, 7, 5], &mut rng);
    let mut g = Graph::new();
    let xv = g.constant(x.clone());
    let same = g.resize_scale(xv, 1.0).unwrap();
    assert_eq!(g.value(same), &x);

    let big = g.constant(Tensor::zeros(&[1, 1, 256, 256]));
    let small = g.resize_scale(big, 0.8).unwrap();
    assert_eq!(g.value(small).shape(), &[1, 1, 205, 205]);

    let c = g.constant(Tensor::full(&[1, 3, 10, 12], 0.37));
    for &s in &[0.3, 0.8, 1.2, 2.7] {
        let r = g.resize_scale(c, s).unwrap();
        assert!(g.value(r).data().iter().all(|&v| (v - 0.37).abs() < 1e-15));
    }

    let tiny = g.constant(Tensor::zeros(&[1, 1, 2, 2]));
    assert!(g.resize_scale(tiny, 0.1).is_err());
    assert!(g.resize_scale(tiny, 0.0).is_err());
}

#[test]
fn dropout_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = Tensor::full(&[1, 1, 1000, 1000], 1.0f32);
    let mut g = Graph::new();
    let xv = g.constant(x);
    assert_eq!(g.dropout(xv, 0.0, true, &mut rng).unwrap(), xv);
    assert_eq!(g.dropout(xv, 0.9, false, &mut rng).unwrap(), xv);
    assert!(g.dropout(xv, 1.0, true, &mut rng).is_err());
    let d = g.dropout(xv, 0.5, true, &mut rng).unwrap();
    let survivors = g.value(d).data().iter().filter(|&&v| v != 0.0).count();
    let frac = survivors as f64 / 1e6;
    assert!((frac - 0.5).abs() < 0.01, "{frac}");
    assert!(g.value(d).data().iter().all(|&v| v == 0.0 || v == 2.0));
}

#[test]
fn dropout_is_deterministic_under_seed() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut g = Graph::<f64>::new();
        let x = g.constant(Tensor::full(&[1, 1, 16, 16], 1.0));
        let d = g.dropout(x, 0.5, true, &mut rng).unwrap();
        g.value(d).clone()
    };
    assert_eq!(run(), run());
}

#[test]
fn backward_basics() {
    let mut g = Graph::new();
    let x = g.param(Tensor::from_fn(&[2, 3], |i| i as f64));
    let unused = g.param(Tensor::full(&[4], 2.0));
    let s = g.sum(x).unwrap();
    let grads = g.backward(s).unwrap();
    assert!(grads.get(x).unwrap().data().iter().all(|&v| v == 1.0));
    assert!(grads.get(unused).unwrap().data().iter().all(|&v| v == 0.0));

    let not_scalar = g.scale(x, 2.0).unwrap();
    assert!(g.backward(not_scalar).is_err());
}

#[test]
fn composite_block_gradcheck() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let x = random(&[1, 2, 6, 6], &mut rng);
    let w = random(&[3, 2, 3, 3], &mut rng);
    let b = random(&[3], &mut rng);
    let gm = Tensor::from_fn(&[3], |_| rng.random_range(0.5..1.5));
    let bt = random(&[3], &mut rng);
    let r = random(&[1, 3, 6, 6], &mut rng);
    let report = gradcheck::check("conv+in+lrelu", &[x, w, b, gm, bt], |g, v| {
        let y = g.conv2d(v[0], v[1], Some(v[2]), Conv2dParams::new(1, 1))?;
        let y = g.instance_norm(y, v[3], v[4], 1e-5)?;
        let y = g.leaky_relu(y, 0.2)?;
        let rv = g.constant(r.clone());
        let y = g.mul(y, rv)?;
        g.sum(y)
    })
    .unwrap();
    assert!(report.passed(), "{report:?}");
    assert_eq!(report.tolerance, FD_TOLERANCE);
}
