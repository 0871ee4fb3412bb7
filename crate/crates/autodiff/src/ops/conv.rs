//! 2-d convolution in NCHW layout via im2col + GEMM.
//!
//! Three linear operators close under differentiation: `conv2d`, its
//! adjoint in the input (`conv_transpose2d`) and its adjoint in the weight
//! (`conv2d_weight_grad`). Each one's backward is written in terms of the
//! others, so convolutional graphs support higher-order gradients.

use super::linalg::gemm;
use crate::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Geom {
    c: usize,
    h: usize,
    w: usize,
    o: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
}

impl Geom {
    fn new(c: usize, h: usize, w: usize, wshape: &[usize], stride: usize, pad: usize) -> Self {
        assert_eq!(wshape.len(), 4, "conv weight must be [out, in, kh, kw]");
        assert_eq!(wshape[1], c, "conv weight expects {} input channels, got {c}", wshape[1]);
        assert!(stride >= 1);
        let (kh, kw) = (wshape[2], wshape[3]);
        assert!(h + 2 * pad >= kh && w + 2 * pad >= kw, "kernel larger than padded input");
        Geom {
            c,
            h,
            w,
            o: wshape[0],
            kh,
            kw,
            stride,
            pad,
            ho: (h + 2 * pad - kh) / stride + 1,
            wo: (w + 2 * pad - kw) / stride + 1,
        }
    }

    fn ckk(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn p(&self) -> usize {
        self.ho * self.wo
    }

    fn in_len(&self) -> usize {
        self.c * self.h * self.w
    }

    fn out_len(&self) -> usize {
        self.o * self.p()
    }

    fn wshape(&self) -> [usize; 4] {
        [self.o, self.c, self.kh, self.kw]
    }

    /// Output columns `ox` whose input column `ox*stride + kj - pad` is in
    /// range.
    fn valid_cols(&self, kj: usize) -> (usize, usize) {
        let lo = if self.pad > kj {
            (self.pad - kj).div_ceil(self.stride)
        } else {
            0
        }
        .min(self.wo);
        let hi = if self.w + self.pad > kj {
            ((self.w + self.pad - kj - 1) / self.stride + 1).min(self.wo)
        } else {
            0
        };
        (lo, hi.max(lo))
    }

    fn im2col(&self, x: &[f64], cols: &mut [f64]) {
        let (p, wo) = (self.p(), self.wo);
        for ci in 0..self.c {
            let plane = &x[ci * self.h * self.w..(ci + 1) * self.h * self.w];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = ((ci * self.kh + ki) * self.kw + kj) * p;
                    let dst = &mut cols[row..row + p];
                    let (lo, hi) = self.valid_cols(kj);
                    for oy in 0..self.ho {
                        let line = &mut dst[oy * wo..(oy + 1) * wo];
                        let iy = (oy * self.stride + ki) as isize - self.pad as isize;
                        if iy < 0 || iy >= self.h as isize {
                            line.fill(0.0);
                            continue;
                        }
                        let src = &plane[iy as usize * self.w..(iy as usize + 1) * self.w];
                        line[..lo].fill(0.0);
                        line[hi..].fill(0.0);
                        if self.stride == 1 {
                            let start = lo + kj - self.pad;
                            line[lo..hi].copy_from_slice(&src[start..start + hi - lo]);
                        } else {
                            for (ox, v) in line[lo..hi].iter_mut().enumerate() {
                                *v = src[(ox + lo) * self.stride + kj - self.pad];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Accumulates columns back into an image (adjoint of `im2col`).
    fn col2im(&self, cols: &[f64], x: &mut [f64]) {
        let (p, wo) = (self.p(), self.wo);
        for ci in 0..self.c {
            let plane = &mut x[ci * self.h * self.w..(ci + 1) * self.h * self.w];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = ((ci * self.kh + ki) * self.kw + kj) * p;
                    let src = &cols[row..row + p];
                    let (lo, hi) = self.valid_cols(kj);
                    for oy in 0..self.ho {
                        let iy = (oy * self.stride + ki) as isize - self.pad as isize;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        let line = &src[oy * wo..(oy + 1) * wo];
                        let dst = &mut plane[iy as usize * self.w..(iy as usize + 1) * self.w];
                        for ox in lo..hi {
                            dst[ox * self.stride + kj - self.pad] += line[ox];
                        }
                    }
                }
            }
        }
    }
}

fn conv_forward(x: &[f64], n: usize, w: &[f64], g: &Geom) -> Vec<f64> {
    let (ckk, p) = (g.ckk(), g.p());
    let mut out = vec![0.0; n * g.out_len()];
    let mut cols = vec![0.0; ckk * p];
    for s in 0..n {
        g.im2col(&x[s * g.in_len()..(s + 1) * g.in_len()], &mut cols);
        let dst = &mut out[s * g.out_len()..(s + 1) * g.out_len()];
        gemm(g.o, ckk, p, w, ckk, 1, &cols, p, 1, 0.0, dst);
    }
    out
}

fn conv_adjoint_input(y: &[f64], n: usize, w: &[f64], g: &Geom) -> Vec<f64> {
    let (ckk, p) = (g.ckk(), g.p());
    let mut out = vec![0.0; n * g.in_len()];
    let mut cols = vec![0.0; ckk * p];
    for s in 0..n {
        let ys = &y[s * g.out_len()..(s + 1) * g.out_len()];
        gemm(ckk, g.o, p, w, 1, ckk, ys, p, 1, 0.0, &mut cols);
        g.col2im(&cols, &mut out[s * g.in_len()..(s + 1) * g.in_len()]);
    }
    out
}

fn conv_adjoint_weight(x: &[f64], gy: &[f64], n: usize, g: &Geom) -> Vec<f64> {
    let (ckk, p) = (g.ckk(), g.p());
    let mut out = vec![0.0; g.o * ckk];
    let mut cols = vec![0.0; ckk * p];
    for s in 0..n {
        g.im2col(&x[s * g.in_len()..(s + 1) * g.in_len()], &mut cols);
        let gys = &gy[s * g.out_len()..(s + 1) * g.out_len()];
        gemm(g.o, p, ckk, gys, p, 1, &cols, 1, p, 1.0, &mut out);
    }
    out
}

impl Tensor {
    /// Cross-correlation of `[n, c, h, w]` input with `[o, c, kh, kw]`
    /// weight, zero padding `pad` on every side.
    pub fn conv2d(&self, weight: &Tensor, stride: usize, pad: usize) -> Tensor {
        assert_eq!(self.ndim(), 4, "conv2d input must be NCHW, got {:?}", self.shape());
        let [n, c, h, w] = [self.dim(0), self.dim(1), self.dim(2), self.dim(3)];
        let g = Geom::new(c, h, w, weight.shape(), stride, pad);
        let data = conv_forward(self.data(), n, weight.data(), &g);
        Tensor::from_op(data, vec![n, g.o, g.ho, g.wo], "conv2d", vec![self.clone(), weight.clone()], move |ctx| {
            let (x, wt) = (&ctx.inputs[0], &ctx.inputs[1]);
            vec![
                ctx.needs[0].then(|| ctx.grad.conv_transpose2d(wt, stride, pad, (h, w))),
                ctx.needs[1].then(|| x.conv2d_weight_grad(ctx.grad, &g.wshape(), stride, pad)),
            ]
        })
    }

    /// Adjoint of [`Tensor::conv2d`] in its input: maps `[n, o, ho, wo]`
    /// with an `[o, c, kh, kw]` weight to `[n, c, h, w]`. `out_hw` selects
    /// among the input sizes that produce `(ho, wo)`.
    pub fn conv_transpose2d(&self, weight: &Tensor, stride: usize, pad: usize, out_hw: (usize, usize)) -> Tensor {
        assert_eq!(self.ndim(), 4);
        let (h, w) = out_hw;
        let wshape = weight.shape();
        let g = Geom::new(wshape[1], h, w, wshape, stride, pad);
        let n = self.dim(0);
        assert_eq!(
            [self.dim(1), self.dim(2), self.dim(3)],
            [g.o, g.ho, g.wo],
            "conv_transpose2d input {:?} inconsistent with output {out_hw:?}",
            self.shape()
        );
        let data = conv_adjoint_input(self.data(), n, weight.data(), &g);
        Tensor::from_op(data, vec![n, g.c, h, w], "conv_transpose2d", vec![self.clone(), weight.clone()], move |ctx| {
            let (y, wt) = (&ctx.inputs[0], &ctx.inputs[1]);
            vec![
                ctx.needs[0].then(|| ctx.grad.conv2d(wt, stride, pad)),
                ctx.needs[1].then(|| ctx.grad.conv2d_weight_grad(y, &g.wshape(), stride, pad)),
            ]
        })
    }

    /// Adjoint of [`Tensor::conv2d`] in its weight: given input `self` and
    /// output cotangent `grad_out`, the weight-shaped gradient.
    pub fn conv2d_weight_grad(&self, grad_out: &Tensor, wshape: &[usize], stride: usize, pad: usize) -> Tensor {
        let [n, c, h, w] = [self.dim(0), self.dim(1), self.dim(2), self.dim(3)];
        let g = Geom::new(c, h, w, wshape, stride, pad);
        assert_eq!(grad_out.shape(), &[n, g.o, g.ho, g.wo], "conv2d_weight_grad cotangent shape");
        let data = conv_adjoint_weight(self.data(), grad_out.data(), n, &g);
        Tensor::from_op(
            data,
            wshape.to_vec(),
            "conv2d_weight_grad",
            vec![self.clone(), grad_out.clone()],
            move |ctx| {
                let (x, gy) = (&ctx.inputs[0], &ctx.inputs[1]);
                vec![
                    ctx.needs[0].then(|| gy.conv_transpose2d(ctx.grad, stride, pad, (h, w))),
                    ctx.needs[1].then(|| x.conv2d(ctx.grad, stride, pad)),
                ]
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_conv(x: &[f64], c: usize, h: usize, w: usize, wt: &[f64], o: usize, k: usize, s: usize, p: usize) -> Vec<f64> {
        let ho = (h + 2 * p - k) / s + 1;
        let wo = (w + 2 * p - k) / s + 1;
        let mut out = vec![0.0; o * ho * wo];
        for oc in 0..o {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = 0.0;
                    for ic in 0..c {
                        for ki in 0..k {
                            for kj in 0..k {
                                let iy = (oy * s + ki) as isize - p as isize;
                                let ix = (ox * s + kj) as isize - p as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                    acc += x[(ic * h + iy as usize) * w + ix as usize]
                                        * wt[((oc * c + ic) * k + ki) * k + kj];
                                }
                            }
                        }
                    }
                    out[(oc * ho + oy) * wo + ox] = acc;
                }
            }
        }
        out
    }

    fn seq(n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|i| ((i * 7919 % 97) as f64 / 97.0 - 0.5) * scale).collect()
    }

    #[test]
    fn conv_matches_direct_summation() {
        for &(h, k, s, p) in &[(5, 3, 1, 1), (8, 4, 2, 1), (7, 7, 1, 3), (6, 3, 2, 0), (4, 4, 2, 1)] {
            let (c, o) = (2, 3);
            let x = seq(c * h * h, 2.0);
            let wt = seq(o * c * k * k, 1.0);
            let xt = Tensor::from_vec(x.clone(), &[1, c, h, h]);
            let wtt = Tensor::from_vec(wt.clone(), &[o, c, k, k]);
            let got = xt.conv2d(&wtt, s, p);
            let want = naive_conv(&x, c, h, h, &wt, o, k, s, p);
            for (a, b) in got.data().iter().zip(&want) {
                assert!((a - b).abs() < 1e-12, "h={h} k={k} s={s} p={p}");
            }
        }
    }

    #[test]
    fn adjoints_satisfy_inner_product_identity() {
        // <conv(x, w), y> = <x, convT(y, w)> = <w, wgrad(x, y)>
        let (n, c, h, o, k, s, p) = (2, 3, 8, 2, 4, 2, 1);
        let x = Tensor::from_vec(seq(n * c * h * h, 1.0), &[n, c, h, h]);
        let w = Tensor::from_vec(seq(o * c * k * k, 0.5), &[o, c, k, k]);
        let y_shape = x.conv2d(&w, s, p).shape().to_vec();
        let y = Tensor::from_vec(seq(y_shape.iter().product(), 3.0), &y_shape);
        let dot = |a: &Tensor, b: &Tensor| a.data().iter().zip(b.data()).map(|(u, v)| u * v).sum::<f64>();
        let lhs = dot(&x.conv2d(&w, s, p), &y);
        let mid = dot(&x, &y.conv_transpose2d(&w, s, p, (h, h)));
        let rhs = dot(&w, &x.conv2d_weight_grad(&y, w.shape(), s, p));
        assert!((lhs - mid).abs() < 1e-10);
        assert!((lhs - rhs).abs() < 1e-10);
    }
}
