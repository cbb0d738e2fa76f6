//! Layer kernels on single samples (`[C, H, W]` images, `[N]` vectors) and their exact
//! gradient rules.

use crate::tensor::Tensor;
use crate::{LearnError, Real};

pub fn conv_out_dim(input: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    (input + 2 * pad >= kernel && stride > 0).then(|| (input + 2 * pad - kernel) / stride + 1)
}

/// Output positions `o` in `[lo, hi)` whose input index `o·s + k − p` lies in `[0, len)`.
fn valid_range(k: usize, pad: usize, stride: usize, len: usize, out: usize) -> (usize, usize) {
    let lo = if pad > k { (pad - k).div_ceil(stride) } else { 0 };
    let hi = if len + pad > k { ((len + pad - k - 1) / stride + 1).min(out) } else { 0 };
    (lo.min(hi), hi)
}

struct ConvDims {
    c: usize,
    h: usize,
    w: usize,
    o: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
}

fn conv_dims(input: &Tensor, kernel: &Tensor, stride: usize, pad: usize) -> Result<ConvDims, LearnError> {
    if input.shape().len() != 3 || kernel.shape().len() != 4 {
        return Err(LearnError::ShapeMismatch(format!(
            "conv2d wants [C,H,W] and [O,C,KH,KW], got {:?} and {:?}",
            input.shape(),
            kernel.shape()
        )));
    }
    let (c, h, w) = (input.dim(0), input.dim(1), input.dim(2));
    let (o, kc, kh, kw) = (kernel.dim(0), kernel.dim(1), kernel.dim(2), kernel.dim(3));
    if kc != c {
        return Err(LearnError::ShapeMismatch(format!("conv2d: input has {c} channels, kernel expects {kc}")));
    }
    let oh = conv_out_dim(h, kh, stride, pad);
    let ow = conv_out_dim(w, kw, stride, pad);
    let (Some(oh), Some(ow)) = (oh, ow) else {
        return Err(LearnError::ShapeMismatch(format!(
            "conv2d: kernel {kh}x{kw} stride {stride} pad {pad} does not fit {h}x{w}"
        )));
    };
    Ok(ConvDims { c, h, w, o, kh, kw, oh, ow })
}

/// Direct-loop cross-correlation; the reference the GEMM path is tested against.
#[cfg(test)]
fn conv2d_direct(input: &Tensor, kernel: &Tensor, bias: Option<&Tensor>, stride: usize, pad: usize) -> Result<Tensor, LearnError> {
    let d = conv_dims(input, kernel, stride, pad)?;
    if let Some(b) = bias {
        if b.len() != d.o {
            return Err(LearnError::ShapeMismatch(format!("conv2d bias has {} entries for {} outputs", b.len(), d.o)));
        }
    }
    let mut out = Tensor::zeros(&[d.o, d.oh, d.ow]);
    let x = input.data();
    let k = kernel.data();
    let y = out.data_mut();
    let plane = d.oh * d.ow;
    for o in 0..d.o {
        let yo = &mut y[o * plane..(o + 1) * plane];
        if let Some(b) = bias {
            yo.fill(b.data()[o]);
        }
        for c in 0..d.c {
            let xc = &x[c * d.h * d.w..(c + 1) * d.h * d.w];
            for ky in 0..d.kh {
                let (y0, y1) = valid_range(ky, pad, stride, d.h, d.oh);
                for kx in 0..d.kw {
                    let (x0, x1) = valid_range(kx, pad, stride, d.w, d.ow);
                    let wv = k[((o * d.c + c) * d.kh + ky) * d.kw + kx];
                    for oy in y0..y1 {
                        let iy = oy * stride + ky - pad;
                        let row = &xc[iy * d.w..(iy + 1) * d.w];
                        let out_row = &mut yo[oy * d.ow..(oy + 1) * d.ow];
                        for ox in x0..x1 {
                            out_row[ox] += wv * row[ox * stride + kx - pad];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
#[allow(clippy::too_many_arguments)]
fn conv2d_backward_direct(
    input: &Tensor,
    kernel: &Tensor,
    grad_out: &Tensor,
    stride: usize,
    pad: usize,
    grad_input: Option<&mut Tensor>,
    grad_kernel: &mut Tensor,
    grad_bias: Option<&mut Tensor>,
) -> Result<(), LearnError> {
    let d = conv_dims(input, kernel, stride, pad)?;
    if grad_out.shape() != [d.o, d.oh, d.ow] {
        return Err(LearnError::ShapeMismatch(format!(
            "conv2d grad {:?} vs output [{}, {}, {}]",
            grad_out.shape(),
            d.o,
            d.oh,
            d.ow
        )));
    }
    let plane = d.oh * d.ow;
    let g = grad_out.data();
    if let Some(gb) = grad_bias {
        for o in 0..d.o {
            gb.data_mut()[o] += g[o * plane..(o + 1) * plane].iter().sum::<Real>();
        }
    }
    let x = input.data();
    let k = kernel.data();
    let gk = grad_kernel.data_mut();
    let mut gx = grad_input;
    for o in 0..d.o {
        let go = &g[o * plane..(o + 1) * plane];
        for c in 0..d.c {
            let xoff = c * d.h * d.w;
            for ky in 0..d.kh {
                let (y0, y1) = valid_range(ky, pad, stride, d.h, d.oh);
                for kx in 0..d.kw {
                    let (x0, x1) = valid_range(kx, pad, stride, d.w, d.ow);
                    let ki = ((o * d.c + c) * d.kh + ky) * d.kw + kx;
                    let wv = k[ki];
                    let mut acc: Real = 0.0;
                    for oy in y0..y1 {
                        let iy = oy * stride + ky - pad;
                        if x0 == x1 {
                            continue;
                        }
                        // input index of output column x0; later columns step by `stride`
                        let base = xoff + iy * d.w + x0 * stride + kx - pad;
                        let grow = &go[oy * d.ow + x0..oy * d.ow + x1];
                        for (j, gv) in grow.iter().enumerate() {
                            acc += gv * x[base + j * stride];
                        }
                        if let Some(gx) = gx.as_deref_mut() {
                            let gxd = gx.data_mut();
                            for (j, gv) in grow.iter().enumerate() {
                                gxd[base + j * stride] += wv * gv;
                            }
                        }
                    }
                    gk[ki] += acc;
                }
            }
        }
    }
    Ok(())
}

/// `C = A·B + beta·C` for strided row/column views (`rs*`, `cs*`) of `m×k`, `k×n`
/// and `m×n` matrices. The blocked kernel's summation order depends only on the shapes,
/// so results are reproducible run to run.
#[allow(clippy::too_many_arguments)]
fn gemm(
    (m, k, n): (usize, usize, usize),
    a: &[Real],
    (rsa, csa): (usize, usize),
    b: &[Real],
    (rsb, csb): (usize, usize),
    beta: Real,
    c: &mut [Real],
    (rsc, csc): (usize, usize),
) {
    let last = |r: usize, cl: usize, rs: usize, cs: usize| if r == 0 || cl == 0 { 0 } else { (r - 1) * rs + (cl - 1) * cs + 1 };
    assert!(a.len() >= last(m, k, rsa, csa) && b.len() >= last(k, n, rsb, csb) && c.len() >= last(m, n, rsc, csc));
    let (rsa, csa, rsb, csb, rsc, csc) = (rsa as isize, csa as isize, rsb as isize, csb as isize, rsc as isize, csc as isize);
    // SAFETY: the assertion above keeps every strided access inside its slice.
    unsafe {
        #[cfg(not(feature = "f64"))]
        matrixmultiply::sgemm(m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), rsc, csc);
        #[cfg(feature = "f64")]
        matrixmultiply::dgemm(m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), rsc, csc);
    }
}

/// Unfolds the receptive fields into a `[C·KH·KW, OH·OW]` matrix (zeros where the
/// window hangs over the padding).
fn im2col(x: &[Real], d: &ConvDims, stride: usize, pad: usize) -> Vec<Real> {
    let p = d.oh * d.ow;
    let mut cols = vec![0.0; d.c * d.kh * d.kw * p];
    for c in 0..d.c {
        let xc = &x[c * d.h * d.w..(c + 1) * d.h * d.w];
        for ky in 0..d.kh {
            let (y0, y1) = valid_range(ky, pad, stride, d.h, d.oh);
            for kx in 0..d.kw {
                let (x0, x1) = valid_range(kx, pad, stride, d.w, d.ow);
                let row = &mut cols[((c * d.kh + ky) * d.kw + kx) * p..][..p];
                for oy in y0..y1 {
                    let src = &xc[(oy * stride + ky - pad) * d.w..];
                    let dst = &mut row[oy * d.ow..(oy + 1) * d.ow];
                    for ox in x0..x1 {
                        dst[ox] = src[ox * stride + kx - pad];
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of `im2col`: scatters column gradients back onto the input.
fn col2im_add(cols: &[Real], d: &ConvDims, stride: usize, pad: usize, gx: &mut [Real]) {
    let p = d.oh * d.ow;
    for c in 0..d.c {
        let gc = &mut gx[c * d.h * d.w..(c + 1) * d.h * d.w];
        for ky in 0..d.kh {
            let (y0, y1) = valid_range(ky, pad, stride, d.h, d.oh);
            for kx in 0..d.kw {
                let (x0, x1) = valid_range(kx, pad, stride, d.w, d.ow);
                let row = &cols[((c * d.kh + ky) * d.kw + kx) * p..][..p];
                for oy in y0..y1 {
                    let base = (oy * stride + ky - pad) * d.w;
                    for ox in x0..x1 {
                        gc[base + ox * stride + kx - pad] += row[oy * d.ow + ox];
                    }
                }
            }
        }
    }
}

/// Cross-correlation with zero padding, as one matrix product over unfolded windows.
pub fn conv2d(input: &Tensor, kernel: &Tensor, bias: Option<&Tensor>, stride: usize, pad: usize) -> Result<Tensor, LearnError> {
    let d = conv_dims(input, kernel, stride, pad)?;
    if let Some(b) = bias {
        if b.len() != d.o {
            return Err(LearnError::ShapeMismatch(format!("conv2d bias has {} entries for {} outputs", b.len(), d.o)));
        }
    }
    let p = d.oh * d.ow;
    let kk = d.c * d.kh * d.kw;
    let mut out = Tensor::zeros(&[d.o, d.oh, d.ow]);
    if let Some(b) = bias {
        for (o, plane) in out.data_mut().chunks_mut(p).enumerate() {
            plane.fill(b.data()[o]);
        }
    }
    let cols = im2col(input.data(), &d, stride, pad);
    gemm((d.o, kk, p), kernel.data(), (kk, 1), &cols, (p, 1), 1.0, out.data_mut(), (p, 1));
    Ok(out)
}

/// Accumulates kernel, bias and (optionally) input gradients of `conv2d`.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward(
    input: &Tensor,
    kernel: &Tensor,
    grad_out: &Tensor,
    stride: usize,
    pad: usize,
    grad_input: Option<&mut Tensor>,
    grad_kernel: &mut Tensor,
    grad_bias: Option<&mut Tensor>,
) -> Result<(), LearnError> {
    let d = conv_dims(input, kernel, stride, pad)?;
    if grad_out.shape() != [d.o, d.oh, d.ow] {
        return Err(LearnError::ShapeMismatch(format!(
            "conv2d grad {:?} vs output [{}, {}, {}]",
            grad_out.shape(),
            d.o,
            d.oh,
            d.ow
        )));
    }
    let p = d.oh * d.ow;
    let kk = d.c * d.kh * d.kw;
    let g = grad_out.data();
    if let Some(gb) = grad_bias {
        for o in 0..d.o {
            gb.data_mut()[o] += g[o * p..(o + 1) * p].iter().sum::<Real>();
        }
    }
    let cols = im2col(input.data(), &d, stride, pad);
    // dK = G · colsᵀ
    gemm((d.o, p, kk), g, (p, 1), &cols, (1, p), 1.0, grad_kernel.data_mut(), (kk, 1));
    if let Some(gx) = grad_input {
        // dcols = Kᵀ · G
        let mut gcols = vec![0.0; kk * p];
        gemm((kk, d.o, p), kernel.data(), (1, kk), g, (p, 1), 0.0, &mut gcols, (p, 1));
        col2im_add(&gcols, &d, stride, pad, gx.data_mut());
    }
    Ok(())
}

/// `W·x + b` with `W` of shape `[out, in]`.
pub fn dense(x: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor, LearnError> {
    let (no, ni) = (weight.dim(0), weight.dim(1));
    if weight.shape().len() != 2 || x.len() != ni || bias.len() != no {
        return Err(LearnError::ShapeMismatch(format!(
            "dense: x {:?}, W {:?}, b {:?}",
            x.shape(),
            weight.shape(),
            bias.shape()
        )));
    }
    let w = weight.data();
    let xd = x.data();
    let out: Vec<Real> = (0..no)
        .map(|o| bias.data()[o] + w[o * ni..(o + 1) * ni].iter().zip(xd).map(|(a, b)| a * b).sum::<Real>())
        .collect();
    Tensor::from_vec(&[no], out)
}

/// Accumulates weight and bias gradients; returns the input gradient.
pub fn dense_backward(
    x: &Tensor,
    weight: &Tensor,
    grad_out: &Tensor,
    grad_weight: &mut Tensor,
    grad_bias: &mut Tensor,
) -> Result<Tensor, LearnError> {
    let (no, ni) = (weight.dim(0), weight.dim(1));
    if grad_out.len() != no || x.len() != ni {
        return Err(LearnError::ShapeMismatch("dense backward".into()));
    }
    let g = grad_out.data();
    let xd = x.data();
    let w = weight.data();
    let gw = grad_weight.data_mut();
    let mut gx = vec![0.0 as Real; ni];
    for o in 0..no {
        grad_bias.data_mut()[o] += g[o];
        let row = &mut gw[o * ni..(o + 1) * ni];
        for i in 0..ni {
            row[i] += g[o] * xd[i];
            gx[i] += w[o * ni + i] * g[o];
        }
    }
    Tensor::from_vec(&[ni], gx)
}

pub fn relu(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    for v in y.data_mut() {
        *v = v.max(0.0);
    }
    y
}

/// Gradient through ReLU given its pre-activation.
pub fn relu_backward(pre: &Tensor, grad_out: &Tensor) -> Tensor {
    let mut g = grad_out.clone();
    for (gv, &p) in g.data_mut().iter_mut().zip(pre.data()) {
        if p <= 0.0 {
            *gv = 0.0;
        }
    }
    g
}

/// `[C, H, W]` → `[C]` channel means.
pub fn global_avg_pool(x: &Tensor) -> Tensor {
    let c = x.dim(0);
    let hw = x.len() / c.max(1);
    let d = x.data();
    let out = (0..c).map(|i| d[i * hw..(i + 1) * hw].iter().sum::<Real>() / hw as Real).collect();
    Tensor::from_vec(&[c], out).expect("consistent")
}

pub fn global_avg_pool_backward(shape: &[usize], grad_out: &Tensor) -> Tensor {
    let mut g = Tensor::zeros(shape);
    let c = shape[0];
    let hw = g.len() / c.max(1);
    for i in 0..c {
        let v = grad_out.data()[i] / hw as Real;
        g.data_mut()[i * hw..(i + 1) * hw].fill(v);
    }
    g
}

pub fn sigmoid(z: Real) -> Real {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Direct summation with explicit bounds checks, in f64.
    fn naive_conv(x: &Tensor, k: &Tensor, b: &Tensor, s: usize, p: usize) -> Vec<f64> {
        let (c, h, w) = (x.dim(0), x.dim(1), x.dim(2));
        let (o, kh, kw) = (k.dim(0), k.dim(2), k.dim(3));
        let oh = (h + 2 * p - kh) / s + 1;
        let ow = (w + 2 * p - kw) / s + 1;
        let mut out = vec![0.0; o * oh * ow];
        for oo in 0..o {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b.data()[oo] as f64;
                    for cc in 0..c {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * s + ky) as isize - p as isize;
                                let ix = (ox * s + kx) as isize - p as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                acc += k.data()[((oo * c + cc) * kh + ky) * kw + kx] as f64
                                    * x.data()[(cc * h + iy as usize) * w + ix as usize] as f64;
                            }
                        }
                    }
                    out[(oo * oh + oy) * ow + ox] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn out_dims() {
        assert_eq!(conv_out_dim(64, 3, 2, 1), Some(32));
        assert_eq!(conv_out_dim(5, 3, 1, 0), Some(3));
        assert_eq!(conv_out_dim(2, 5, 1, 1), None);
    }

    #[test]
    fn dirac_kernel_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(&[3, 5, 4], &mut rng);
        let mut k = Tensor::zeros(&[3, 3, 1, 1]);
        for i in 0..3 {
            k.data_mut()[i * 3 + i] = 1.0;
        }
        assert_eq!(conv2d(&x, &k, None, 1, 0).unwrap(), x);
    }

    #[test]
    fn ones_kernel_sums_neighbourhood() {
        let x = Tensor::filled(&[1, 6, 6], 2.5);
        let k = Tensor::filled(&[1, 1, 3, 3], 1.0);
        let y = conv2d(&x, &k, None, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 4, 4]);
        assert!(y.data().iter().all(|&v| v == 9.0 * 2.5));
    }

    #[test]
    fn matches_naive_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (c, h, w, o, kk, s, p) in [(3, 9, 7, 4, 3, 1, 1), (2, 10, 10, 3, 3, 2, 1), (4, 8, 9, 2, 1, 2, 0), (1, 6, 5, 2, 5, 1, 2)] {
            let x = random(&[c, h, w], &mut rng);
            let k = random(&[o, c, kk, kk], &mut rng);
            let b = random(&[o], &mut rng);
            let y = conv2d(&x, &k, Some(&b), s, p).unwrap();
            let want = naive_conv(&x, &k, &b, s, p);
            assert_eq!(y.len(), want.len());
            for (a, e) in y.data().iter().zip(&want) {
                assert!((*a as f64 - e).abs() <= 1e-5 * e.abs().max(1.0), "{a} vs {e}");
            }
        }
    }

    #[test]
    fn backward_is_adjoint_of_forward() {
        // <conv(x), g> is bilinear, so its x- and k-gradients are the adjoint maps
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (s, p) = (2, 1);
        let x = random(&[2, 7, 8], &mut rng);
        let k = random(&[3, 2, 3, 3], &mut rng);
        let y = conv2d(&x, &k, None, s, p).unwrap();
        let g = random(y.shape(), &mut rng);
        let mut gx = x.zeros_like();
        let mut gk = k.zeros_like();
        conv2d_backward(&x, &k, &g, s, p, Some(&mut gx), &mut gk, None).unwrap();
        let dot = |a: &[Real], b: &[Real]| a.iter().zip(b).map(|(p, q)| *p as f64 * *q as f64).sum::<f64>();
        let lhs = dot(y.data(), g.data());
        assert!((dot(gx.data(), x.data()) - lhs).abs() < 1e-4 * lhs.abs().max(1.0));
        assert!((dot(gk.data(), k.data()) - lhs).abs() < 1e-4 * lhs.abs().max(1.0));
    }

    #[test]
    fn gemm_path_matches_direct_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let close = |a: &Tensor, b: &Tensor| {
            a.data().iter().zip(b.data()).all(|(p, q)| (p - q).abs() <= 1e-4 * q.abs().max(1.0))
        };
        for (c, h, w, o, kk, s, p) in [(3, 9, 7, 4, 3, 1, 1), (2, 10, 10, 3, 3, 2, 1), (4, 8, 9, 2, 1, 2, 0), (1, 6, 5, 2, 5, 1, 2)] {
            let x = random(&[c, h, w], &mut rng);
            let k = random(&[o, c, kk, kk], &mut rng);
            let b = random(&[o], &mut rng);
            let y = conv2d(&x, &k, Some(&b), s, p).unwrap();
            assert!(close(&y, &conv2d_direct(&x, &k, Some(&b), s, p).unwrap()));
            let g = random(y.shape(), &mut rng);
            let (mut gx, mut gk, mut gb) = (random(x.shape(), &mut rng), random(k.shape(), &mut rng), b.zeros_like());
            let (mut gx2, mut gk2, mut gb2) = (gx.clone(), gk.clone(), gb.clone());
            conv2d_backward(&x, &k, &g, s, p, Some(&mut gx), &mut gk, Some(&mut gb)).unwrap();
            conv2d_backward_direct(&x, &k, &g, s, p, Some(&mut gx2), &mut gk2, Some(&mut gb2)).unwrap();
            assert!(close(&gx, &gx2) && close(&gk, &gk2));
            assert_eq!(gb, gb2);
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
        #[test]
        fn conv_matches_naive_on_any_shape(
            c in 1usize..4, h in 1usize..11, w in 1usize..11, o in 1usize..4,
            kk in 1usize..5, s in 1usize..4, p in 0usize..3, seed in 0u64..1000,
        ) {
            let (Some(oh), Some(ow)) = (conv_out_dim(h, kk, s, p), conv_out_dim(w, kk, s, p)) else {
                proptest::prop_assume!(false);
                unreachable!()
            };
            proptest::prop_assert_eq!(oh, (h + 2 * p - kk) / s + 1);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random(&[c, h, w], &mut rng);
            let k = random(&[o, c, kk, kk], &mut rng);
            let b = random(&[o], &mut rng);
            let y = conv2d(&x, &k, Some(&b), s, p).unwrap();
            proptest::prop_assert_eq!(y.shape(), &[o, oh, ow][..]);
            for (a, e) in y.data().iter().zip(naive_conv(&x, &k, &b, s, p)) {
                proptest::prop_assert!((*a as f64 - e).abs() <= 1e-5 * e.abs().max(1.0));
            }
        }
    }

    #[test]
    fn channel_mismatch() {
        let x = Tensor::zeros(&[2, 4, 4]);
        let k = Tensor::zeros(&[1, 3, 3, 3]);
        assert!(matches!(conv2d(&x, &k, None, 1, 1), Err(LearnError::ShapeMismatch(_))));
    }

    #[test]
    fn dense_and_pool() {
        let x = Tensor::from_vec(&[2], vec![1.0, -2.0]).unwrap();
        let w = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::from_vec(&[2], vec![0.5, -0.5]).unwrap();
        assert_eq!(dense(&x, &w, &b).unwrap().data(), &[-2.5, -5.5]);
        let g = Tensor::from_vec(&[2], vec![1.0, 1.0]).unwrap();
        let (mut gw, mut gb) = (w.zeros_like(), b.zeros_like());
        let gx = dense_backward(&x, &w, &g, &mut gw, &mut gb).unwrap();
        assert_eq!(gx.data(), &[4.0, 6.0]);
        assert_eq!(gb.data(), g.data());

        let img = Tensor::from_vec(&[2, 1, 2], vec![1.0, 3.0, -1.0, 5.0]).unwrap();
        assert_eq!(global_avg_pool(&img).data(), &[2.0, 2.0]);
        let back = global_avg_pool_backward(img.shape(), &g);
        assert_eq!(back.data(), &[0.5; 4]);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-200.0) >= 0.0 && sigmoid(200.0) <= 1.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-6);
    }
}
