//! Fully connected layer over [batch, features] tensors, plus the relu
//! nonlinearity used between layers.

use super::{Parameter, Tensor};
use crate::rng::Stream;
use crate::{Error, Result};
use rayon::prelude::*;

/// Affine layer y = x Wᵀ + b with W stored [out, in].
pub struct Dense {
    pub w: Parameter,
    pub b: Parameter,
}

pub struct DenseCache {
    x: Tensor,
}

impl Dense {
    pub fn new(name: &str, d_in: usize, d_out: usize, rng: &mut Stream) -> Self {
        assert!(d_in >= 1 && d_out >= 1);
        let bound = (6.0 / d_in as f64).sqrt();
        Dense {
            w: Parameter::new(format!("{name}.w"), Tensor::uniform_init(&[d_out, d_in], bound, rng)),
            b: Parameter::new(format!("{name}.b"), Tensor::zeros(&[d_out])),
        }
    }

    pub fn d_in(&self) -> usize {
        self.w.value.shape[1]
    }

    pub fn d_out(&self) -> usize {
        self.w.value.shape[0]
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, DenseCache)> {
        let (bs, d_in) = match x.shape[..] {
            [b, d] => (b, d),
            _ => return Err(Error::Config(format!("dense expects [batch, features], got {:?}", x.shape))),
        };
        if d_in != self.d_in() {
            return Err(Error::Config(format!("dense expects {} features, got {d_in}", self.d_in())));
        }
        let d_out = self.d_out();
        let mut y = Tensor::zeros(&[bs, d_out]);
        let wt = &self.w.value.data;
        let bias = &self.b.value.data;
        let xd = &x.data;
        y.data.par_chunks_mut(d_out).enumerate().for_each(|(b, yb)| {
            let xr = &xd[b * d_in..(b + 1) * d_in];
            for (o, out) in yb.iter_mut().enumerate() {
                let wr = &wt[o * d_in..(o + 1) * d_in];
                let mut acc = bias[o];
                for (xi, wi) in xr.iter().zip(wr) {
                    acc += xi * wi;
                }
                *out = acc;
            }
        });
        y.debug_assert_finite("dense forward");
        Ok((y, DenseCache { x: x.clone() }))
    }

    pub fn backward(&mut self, cache: &DenseCache, dy: &Tensor) -> Tensor {
        let x = &cache.x;
        let (bs, d_in) = (x.shape[0], x.shape[1]);
        let d_out = self.d_out();
        assert_eq!(dy.shape, vec![bs, d_out], "dense backward shape mismatch");
        let xd = &x.data;
        let dyd = &dy.data;
        // dW[o, i] = sum_b dy[b, o] x[b, i]; one thread owns one output row.
        self.w
            .grad
            .data
            .par_chunks_mut(d_in)
            .zip(self.b.grad.data.par_iter_mut())
            .enumerate()
            .for_each(|(o, (dwr, dbo))| {
                for b in 0..bs {
                    let g = dyd[b * d_out + o];
                    if g == 0.0 {
                        continue;
                    }
                    *dbo += g;
                    let xr = &xd[b * d_in..(b + 1) * d_in];
                    for (dwi, xi) in dwr.iter_mut().zip(xr) {
                        *dwi += g * xi;
                    }
                }
            });
        // dx[b, i] = sum_o dy[b, o] W[o, i]; one thread owns one batch row.
        let mut dx = Tensor::zeros(&[bs, d_in]);
        let wt = &self.w.value.data;
        dx.data.par_chunks_mut(d_in).enumerate().for_each(|(b, dxb)| {
            for o in 0..d_out {
                let g = dyd[b * d_out + o];
                if g == 0.0 {
                    continue;
                }
                let wr = &wt[o * d_in..(o + 1) * d_in];
                for (dxi, wi) in dxb.iter_mut().zip(wr) {
                    *dxi += g * wi;
                }
            }
        });
        dx.debug_assert_finite("dense backward");
        dx
    }
}

/// Elementwise max(0, x). Returns the output; the output itself is the
/// backward cache (the mask is recoverable from it).
pub fn relu(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    for v in &mut y.data {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    y
}

/// Gradient of relu given its own output: passes dy where y > 0.
pub fn relu_backward(y: &Tensor, dy: &Tensor) -> Tensor {
    assert_eq!(y.shape, dy.shape, "relu backward shape mismatch");
    let mut dx = dy.clone();
    for (d, &out) in dx.data.iter_mut().zip(y.data.iter()) {
        if out <= 0.0 {
            *d = 0.0;
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::tag;

    fn seeded(k: u64) -> Stream {
        Stream::new(9, &[tag::INIT, k])
    }

    #[test]
    fn identity_weights_pass_input_through() {
        let mut rng = seeded(0);
        let mut d = Dense::new("d", 3, 3, &mut rng);
        d.w.value = Tensor::from_vec(&[3, 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let x = Tensor::from_vec(&[2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.0, -0.5]);
        let (y, _) = d.forward(&x).unwrap();
        assert_eq!(y.data, x.data);
    }

    #[test]
    fn bias_offsets_every_row() {
        let mut rng = seeded(1);
        let mut d = Dense::new("d", 2, 2, &mut rng);
        d.w.value.data.fill(0.0);
        d.b.value = Tensor::from_vec(&[2], vec![1.5, -0.5]);
        let x = Tensor::zeros(&[3, 2]);
        let (y, _) = d.forward(&x).unwrap();
        for b in 0..3 {
            assert_eq!(&y.data[b * 2..b * 2 + 2], &[1.5, -0.5]);
        }
    }

    #[test]
    fn rejects_feature_mismatch() {
        let mut rng = seeded(2);
        let d = Dense::new("d", 4, 2, &mut rng);
        assert!(matches!(d.forward(&Tensor::zeros(&[1, 5])), Err(Error::Config(_))));
        assert!(matches!(d.forward(&Tensor::zeros(&[4])), Err(Error::Config(_))));
    }

    #[test]
    fn backward_matches_hand_computed_gradients() {
        let mut rng = seeded(3);
        let mut d = Dense::new("d", 2, 1, &mut rng);
        d.w.value = Tensor::from_vec(&[1, 2], vec![3.0, -1.0]);
        let x = Tensor::from_vec(&[1, 2], vec![2.0, 5.0]);
        let (_, cache) = d.forward(&x).unwrap();
        let dy = Tensor::from_vec(&[1, 1], vec![1.0]);
        let dx = d.backward(&cache, &dy);
        assert_eq!(dx.data, vec![3.0, -1.0]);
        assert_eq!(d.w.grad.data, vec![2.0, 5.0]);
        assert_eq!(d.b.grad.data, vec![1.0]);
    }

    #[test]
    fn relu_clamps_and_masks() {
        let x = Tensor::from_vec(&[1, 4], vec![-1.0, 0.0, 2.0, -0.5]);
        let y = relu(&x);
        assert_eq!(y.data, vec![0.0, 0.0, 2.0, 0.0]);
        let dy = Tensor::filled(&[1, 4], 1.0);
        let dx = relu_backward(&y, &dy);
        assert_eq!(dx.data, vec![0.0, 0.0, 1.0, 0.0]);
    }
}
