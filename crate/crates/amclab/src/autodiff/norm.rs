//! Per-channel batch normalization over [batch, channel, h, w] tensors.

use super::{Parameter, Tensor};
use crate::{Error, Result};

const EPS: f64 = 1e-5;

/// Batch normalization with learned scale and shift.
///
/// Training statistics come from the batch alone; running estimates are
/// updated on the side and used only by the inference path, so a training
/// forward never depends on what was seen before it.
pub struct BatchNorm2d {
    pub gamma: Parameter,
    pub beta: Parameter,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub momentum: f64,
}

pub struct BatchNormCache {
    xhat: Tensor,
    inv_std: Vec<f64>,
}

impl BatchNorm2d {
    pub fn new(name: &str, channels: usize) -> Self {
        assert!(channels >= 1);
        BatchNorm2d {
            gamma: Parameter::new(format!("{name}.gamma"), Tensor::filled(&[channels], 1.0)),
            beta: Parameter::new(format!("{name}.beta"), Tensor::zeros(&[channels])),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::filled(&[channels], 1.0),
            momentum: 0.1,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.value.shape[0]
    }

    fn expect_input(&self, x: &Tensor) -> Result<(usize, usize, usize, usize)> {
        match x.shape[..] {
            [b, c, h, w] if c == self.channels() => Ok((b, c, h, w)),
            _ => Err(Error::Config(format!(
                "batch norm over {} channels got input {:?}",
                self.channels(),
                x.shape
            ))),
        }
    }

    /// Training-mode forward: normalize by batch statistics (biased
    /// variance), then fold the batch into the running estimates.
    pub fn forward_train(&mut self, x: &Tensor) -> Result<(Tensor, BatchNormCache)> {
        let (bs, c, h, w) = self.expect_input(x)?;
        if bs < 2 {
            return Err(Error::Config(format!(
                "batch norm needs at least 2 samples to estimate statistics, got {bs}"
            )));
        }
        let plane = h * w;
        let n = (bs * plane) as f64;
        let mut y = Tensor::zeros(&x.shape[..]);
        let mut xhat = Tensor::zeros(&x.shape[..]);
        let mut inv_std = vec![0.0; c];
        for ci in 0..c {
            let mut mean = 0.0;
            for b in 0..bs {
                let base = (b * c + ci) * plane;
                for v in &x.data[base..base + plane] {
                    mean += v;
                }
            }
            mean /= n;
            let mut var = 0.0;
            for b in 0..bs {
                let base = (b * c + ci) * plane;
                for v in &x.data[base..base + plane] {
                    let d = v - mean;
                    var += d * d;
                }
            }
            var /= n;
            let istd = 1.0 / (var + EPS).sqrt();
            inv_std[ci] = istd;
            let (g, be) = (self.gamma.value.data[ci], self.beta.value.data[ci]);
            for b in 0..bs {
                let base = (b * c + ci) * plane;
                for i in base..base + plane {
                    let xh = (x.data[i] - mean) * istd;
                    xhat.data[i] = xh;
                    y.data[i] = g * xh + be;
                }
            }
            let m = self.momentum;
            self.running_mean.data[ci] = (1.0 - m) * self.running_mean.data[ci] + m * mean;
            self.running_var.data[ci] = (1.0 - m) * self.running_var.data[ci] + m * var;
        }
        y.debug_assert_finite("batch norm forward");
        Ok((y, BatchNormCache { xhat, inv_std }))
    }

    /// Inference-mode forward: normalize by the running estimates.
    pub fn forward_eval(&self, x: &Tensor) -> Result<Tensor> {
        let (bs, c, h, w) = self.expect_input(x)?;
        let plane = h * w;
        let mut y = Tensor::zeros(&x.shape[..]);
        for ci in 0..c {
            let istd = 1.0 / (self.running_var.data[ci] + EPS).sqrt();
            let mean = self.running_mean.data[ci];
            let (g, be) = (self.gamma.value.data[ci], self.beta.value.data[ci]);
            for b in 0..bs {
                let base = (b * c + ci) * plane;
                for i in base..base + plane {
                    y.data[i] = g * (x.data[i] - mean) * istd + be;
                }
            }
        }
        y.debug_assert_finite("batch norm eval forward");
        Ok(y)
    }

    pub fn backward(&mut self, cache: &BatchNormCache, dy: &Tensor) -> Tensor {
        let (bs, c, h, w) = (dy.shape[0], dy.shape[1], dy.shape[2], dy.shape[3]);
        assert_eq!(cache.xhat.shape, dy.shape, "batch norm backward shape mismatch");
        let plane = h * w;
        let n = (bs * plane) as f64;
        let mut dx = Tensor::zeros(&dy.shape[..]);
        for ci in 0..c {
            let mut sum_dy = 0.0;
            let mut sum_dy_xhat = 0.0;
            for b in 0..bs {
                let base = (b * c + ci) * plane;
                for i in base..base + plane {
                    sum_dy += dy.data[i];
                    sum_dy_xhat += dy.data[i] * cache.xhat.data[i];
                }
            }
            self.gamma.grad.data[ci] += sum_dy_xhat;
            self.beta.grad.data[ci] += sum_dy;
            let g = self.gamma.value.data[ci];
            let istd = cache.inv_std[ci];
            for b in 0..bs {
                let base = (b * c + ci) * plane;
                for i in base..base + plane {
                    dx.data[i] = g * istd / n * (n * dy.data[i] - sum_dy - cache.xhat.data[i] * sum_dy_xhat);
                }
            }
        }
        dx.debug_assert_finite("batch norm backward");
        dx
    }
}
