//! 2-D convolution (cross-correlation), average pooling, and channel
//! concatenation, all over [batch, channel, height, width] tensors.
//!
//! Parallelism is over disjoint output slices only: each output element is
//! reduced by exactly one thread in a fixed loop order, so results are
//! bitwise identical at any thread count.

use super::{Parameter, Tensor};
use crate::rng::Stream;
use crate::{Error, Result};
use rayon::prelude::*;

fn expect_4d(x: &Tensor, what: &str) -> Result<(usize, usize, usize, usize)> {
    match x.shape[..] {
        [b, c, h, w] => Ok((b, c, h, w)),
        _ => Err(Error::Config(format!("{what} expects a [batch, channel, h, w] tensor, got {:?}", x.shape))),
    }
}

/// Cross-correlating convolution layer with zero padding.
pub struct Conv2d {
    /// Kernel stack, [c_out, c_in, k, k].
    pub w: Parameter,
    /// Per-output-channel bias, [c_out].
    pub b: Parameter,
    pub stride: usize,
    pub pad: usize,
}

/// Saved forward input; the backward pass needs it for the kernel gradient.
pub struct Conv2dCache {
    x: Tensor,
}

impl Conv2d {
    pub fn new(name: &str, c_in: usize, c_out: usize, k: usize, stride: usize, pad: usize, rng: &mut Stream) -> Self {
        assert!(c_out >= 1 && k >= 1 && stride >= 1);
        // He-style bound for the relu activations that follow.
        let bound = (6.0 / (c_in * k * k) as f64).sqrt();
        Conv2d {
            w: Parameter::new(format!("{name}.w"), Tensor::uniform_init(&[c_out, c_in, k, k], bound, rng)),
            b: Parameter::new(format!("{name}.b"), Tensor::zeros(&[c_out])),
            stride,
            pad,
        }
    }

    pub fn c_in(&self) -> usize {
        self.w.value.shape[1]
    }

    pub fn c_out(&self) -> usize {
        self.w.value.shape[0]
    }

    pub fn kernel(&self) -> usize {
        self.w.value.shape[2]
    }

    /// Output spatial extents for an input of the given extents.
    pub fn out_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let k = self.kernel();
        if h + 2 * self.pad < k || w + 2 * self.pad < k {
            return Err(Error::Config(format!(
                "kernel {k} does not fit a {h}x{w} input with padding {}",
                self.pad
            )));
        }
        Ok(((h + 2 * self.pad - k) / self.stride + 1, (w + 2 * self.pad - k) / self.stride + 1))
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, Conv2dCache)> {
        let (bs, c_in, h, w) = expect_4d(x, "conv2d")?;
        if c_in != self.c_in() {
            return Err(Error::Config(format!(
                "conv2d expects {} input channels, got {c_in}",
                self.c_in()
            )));
        }
        let (oh, ow) = self.out_hw(h, w)?;
        let (c_out, k, s, p) = (self.c_out(), self.kernel(), self.stride, self.pad);
        let mut y = Tensor::zeros(&[bs, c_out, oh, ow]);
        let wt = &self.w.value.data;
        let bias = &self.b.value.data;
        let xd = &x.data;
        y.data
            .par_chunks_mut(c_out * oh * ow)
            .enumerate()
            .for_each(|(b, yb)| {
                for co in 0..c_out {
                    for i in 0..oh {
                        for j in 0..ow {
                            let mut acc = bias[co];
                            for ci in 0..c_in {
                                for kh in 0..k {
                                    let ih = (i * s + kh) as isize - p as isize;
                                    if ih < 0 || ih >= h as isize {
                                        continue;
                                    }
                                    let xrow = (((b * c_in + ci) * h + ih as usize) * w) as usize;
                                    let wrow = ((co * c_in + ci) * k + kh) * k;
                                    for kw in 0..k {
                                        let iw = (j * s + kw) as isize - p as isize;
                                        if iw < 0 || iw >= w as isize {
                                            continue;
                                        }
                                        acc += xd[xrow + iw as usize] * wt[wrow + kw];
                                    }
                                }
                            }
                            yb[(co * oh + i) * ow + j] = acc;
                        }
                    }
                }
            });
        y.debug_assert_finite("conv2d forward");
        Ok((y, Conv2dCache { x: x.clone() }))
    }

    /// Accumulates kernel and bias gradients, returns the input gradient.
    pub fn backward(&mut self, cache: &Conv2dCache, dy: &Tensor) -> Tensor {
        let x = &cache.x;
        let (bs, c_in, h, w) = match x.shape[..] {
            [a, b, c, d] => (a, b, c, d),
            _ => unreachable!("cache holds a validated input"),
        };
        let (c_out, k, s, p) = (self.c_out(), self.kernel(), self.stride, self.pad);
        let (oh, ow) = (dy.shape[2], dy.shape[3]);
        assert_eq!(dy.shape, vec![bs, c_out, oh, ow], "conv2d backward shape mismatch");

        // Kernel and bias gradients: one thread owns one output channel.
        let xd = &x.data;
        let dyd = &dy.data;
        let kk = c_in * k * k;
        self.w
            .grad
            .data
            .par_chunks_mut(kk)
            .zip(self.b.grad.data.par_iter_mut())
            .enumerate()
            .for_each(|(co, (dwc, dbc))| {
                for b in 0..bs {
                    for i in 0..oh {
                        for j in 0..ow {
                            let g = dyd[((b * c_out + co) * oh + i) * ow + j];
                            if g == 0.0 {
                                continue;
                            }
                            *dbc += g;
                            for ci in 0..c_in {
                                for kh in 0..k {
                                    let ih = (i * s + kh) as isize - p as isize;
                                    if ih < 0 || ih >= h as isize {
                                        continue;
                                    }
                                    let xrow = ((b * c_in + ci) * h + ih as usize) * w;
                                    let wrow = (ci * k + kh) * k;
                                    for kw in 0..k {
                                        let iw = (j * s + kw) as isize - p as isize;
                                        if iw < 0 || iw >= w as isize {
                                            continue;
                                        }
                                        dwc[wrow + kw] += g * xd[xrow + iw as usize];
                                    }
                                }
                            }
                        }
                    }
                }
            });

        // Input gradient: one thread owns one batch element.
        let mut dx = Tensor::zeros(&[bs, c_in, h, w]);
        let wt = &self.w.value.data;
        dx.data
            .par_chunks_mut(c_in * h * w)
            .enumerate()
            .for_each(|(b, dxb)| {
                for co in 0..c_out {
                    for i in 0..oh {
                        for j in 0..ow {
                            let g = dyd[((b * c_out + co) * oh + i) * ow + j];
                            if g == 0.0 {
                                continue;
                            }
                            for ci in 0..c_in {
                                for kh in 0..k {
                                    let ih = (i * s + kh) as isize - p as isize;
                                    if ih < 0 || ih >= h as isize {
                                        continue;
                                    }
                                    let xrow = (ci * h + ih as usize) * w;
                                    let wrow = ((co * c_in + ci) * k + kh) * k;
                                    for kw in 0..k {
                                        let iw = (j * s + kw) as isize - p as isize;
                                        if iw < 0 || iw >= w as isize {
                                            continue;
                                        }
                                        dxb[xrow + iw as usize] += g * wt[wrow + kw];
                                    }
                                }
                            }
                        }
                    }
                }
            });
        dx.debug_assert_finite("conv2d backward");
        dx
    }
}

/// Average pooling. With `adaptive` set, a window extent larger than the
/// input extent clamps to it (and so does the stride), so narrow maps
/// degrade gracefully instead of erroring.
pub struct AvgPool2d {
    pub window: (usize, usize),
    pub stride: (usize, usize),
    pub adaptive: bool,
}

pub struct AvgPoolCache {
    in_shape: Vec<usize>,
    eff_window: (usize, usize),
    eff_stride: (usize, usize),
}

impl AvgPool2d {
    pub fn new(window: (usize, usize), adaptive: bool) -> Self {
        assert!(window.0 >= 1 && window.1 >= 1);
        AvgPool2d { window, stride: window, adaptive }
    }

    fn effective(&self, h: usize, w: usize) -> Result<((usize, usize), (usize, usize))> {
        let (mut wh, mut ww) = self.window;
        let (mut sh, mut sw) = self.stride;
        if wh > h || ww > w {
            if !self.adaptive {
                return Err(Error::Config(format!(
                    "pool window {}x{} exceeds input {h}x{w}",
                    self.window.0, self.window.1
                )));
            }
            wh = wh.min(h);
            ww = ww.min(w);
            sh = sh.min(wh);
            sw = sw.min(ww);
        }
        Ok(((wh, ww), (sh, sw)))
    }

    pub fn out_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let ((wh, ww), (sh, sw)) = self.effective(h, w)?;
        Ok(((h - wh) / sh + 1, (w - ww) / sw + 1))
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, AvgPoolCache)> {
        let (bs, c, h, w) = expect_4d(x, "avg_pool")?;
        let ((wh, ww), (sh, sw)) = self.effective(h, w)?;
        let (oh, ow) = ((h - wh) / sh + 1, (w - ww) / sw + 1);
        let mut y = Tensor::zeros(&[bs, c, oh, ow]);
        let inv = 1.0 / (wh * ww) as f64;
        let xd = &x.data;
        y.data
            .par_chunks_mut(c * oh * ow)
            .enumerate()
            .for_each(|(b, yb)| {
                for ci in 0..c {
                    let plane = (b * c + ci) * h * w;
                    for i in 0..oh {
                        for j in 0..ow {
                            let mut acc = 0.0;
                            for kh in 0..wh {
                                let row = plane + (i * sh + kh) * w + j * sw;
                                for kw in 0..ww {
                                    acc += xd[row + kw];
                                }
                            }
                            yb[(ci * oh + i) * ow + j] = acc * inv;
                        }
                    }
                }
            });
        y.debug_assert_finite("avg_pool forward");
        Ok((
            y,
            AvgPoolCache {
                in_shape: x.shape.clone(),
                eff_window: (wh, ww),
                eff_stride: (sh, sw),
            },
        ))
    }

    pub fn backward(&self, cache: &AvgPoolCache, dy: &Tensor) -> Tensor {
        let (bs, c, h, w) = (cache.in_shape[0], cache.in_shape[1], cache.in_shape[2], cache.in_shape[3]);
        let (wh, ww) = cache.eff_window;
        let (sh, sw) = cache.eff_stride;
        let (oh, ow) = (dy.shape[2], dy.shape[3]);
        let inv = 1.0 / (wh * ww) as f64;
        let mut dx = Tensor::zeros(&cache.in_shape);
        let dyd = &dy.data;
        dx.data
            .par_chunks_mut(c * h * w)
            .enumerate()
            .for_each(|(b, dxb)| {
                for ci in 0..c {
                    for i in 0..oh {
                        for j in 0..ow {
                            let g = dyd[((b * c + ci) * oh + i) * ow + j] * inv;
                            for kh in 0..wh {
                                let row = (ci * h + i * sh + kh) * w + j * sw;
                                for kw in 0..ww {
                                    dxb[row + kw] += g;
                                }
                            }
                        }
                    }
                }
            });
        let _ = bs;
        dx.debug_assert_finite("avg_pool backward");
        dx
    }
}

/// Stack tensors along the channel axis.
///
/// # Example
/// ```
/// # use amclab::autodiff::{concat_channels, Tensor};
/// let a = Tensor::zeros(&[1, 2, 4, 4]);
/// let b = Tensor::zeros(&[1, 3, 4, 4]);
/// assert_eq!(concat_channels(&[&a, &b]).unwrap().shape, vec![1, 5, 4, 4]);
/// ```
pub fn concat_channels(xs: &[&Tensor]) -> Result<Tensor> {
    assert!(!xs.is_empty());
    let (bs, _, h, w) = expect_4d(xs[0], "concat")?;
    let mut c_total = 0;
    for x in xs {
        let (b2, c2, h2, w2) = expect_4d(x, "concat")?;
        if (b2, h2, w2) != (bs, h, w) {
            return Err(Error::Config(format!(
                "concat extents disagree: {:?} vs {:?}",
                xs[0].shape, x.shape
            )));
        }
        c_total += c2;
    }
    let mut y = Tensor::zeros(&[bs, c_total, h, w]);
    let plane = h * w;
    for b in 0..bs {
        let mut co = 0;
        for x in xs {
            let c = x.shape[1];
            let src = &x.data[b * c * plane..(b + 1) * c * plane];
            let dst = &mut y.data[(b * c_total + co) * plane..(b * c_total + co + c) * plane];
            dst.copy_from_slice(src);
            co += c;
        }
    }
    Ok(y)
}

/// Inverse of `concat_channels`: split a channel-stacked gradient back into
/// per-input gradients with the given channel counts.
pub fn split_channels(dy: &Tensor, channels: &[usize]) -> Vec<Tensor> {
    let (bs, c_total, h, w) = match dy.shape[..] {
        [a, b, c, d] => (a, b, c, d),
        _ => panic!("split_channels expects 4 extents, got {:?}", dy.shape),
    };
    assert_eq!(channels.iter().sum::<usize>(), c_total, "channel split does not cover the input");
    let plane = h * w;
    let mut outs: Vec<Tensor> = channels.iter().map(|&c| Tensor::zeros(&[bs, c, h, w])).collect();
    for b in 0..bs {
        let mut co = 0;
        for (out, &c) in outs.iter_mut().zip(channels) {
            let src = &dy.data[(b * c_total + co) * plane..(b * c_total + co + c) * plane];
            out.data[b * c * plane..(b + 1) * c * plane].copy_from_slice(src);
            co += c;
        }
    }
    outs
}
