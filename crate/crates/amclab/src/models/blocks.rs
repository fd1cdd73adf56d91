//! The convolutional trunk shared by both network variants: three densely
//! connected blocks interleaved with two average pools, then a flatten.

use crate::autodiff::conv::{AvgPoolCache, Conv2dCache};
use crate::autodiff::dense::DenseCache;
use crate::autodiff::norm::BatchNormCache;
use crate::autodiff::{
    concat_channels, relu, relu_backward, split_channels, AvgPool2d, BatchNorm2d, Conv2d, Dense, Parameter, Tensor,
};
use crate::rng::Stream;
use crate::Result;

/// Four 3x3 convolutions with two concatenation skips and a closing batch
/// norm. Input of c channels leaves with c + 2*growth channels at the same
/// spatial extent.
pub struct DenseBlock {
    name: String,
    conv1: Conv2d,
    conv2: Conv2d,
    conv3: Conv2d,
    conv4: Conv2d,
    bn: BatchNorm2d,
    c_in: usize,
    growth: usize,
}

pub struct DenseBlockCache {
    r1: Tensor,
    r2: Tensor,
    r3: Tensor,
    r4: Tensor,
    c1: Conv2dCache,
    c2: Conv2dCache,
    c3: Conv2dCache,
    c4: Conv2dCache,
    bn: BatchNormCache,
}

fn add_into(dst: &mut Tensor, src: &Tensor) {
    debug_assert_eq!(dst.shape, src.shape);
    for (d, s) in dst.data.iter_mut().zip(&src.data) {
        *d += s;
    }
}

impl DenseBlock {
    pub fn new(name: &str, c_in: usize, growth: usize, rng: &mut Stream) -> Self {
        DenseBlock {
            name: name.to_string(),
            conv1: Conv2d::new(&format!("{name}.conv1"), c_in, growth, 3, 1, 1, rng),
            conv2: Conv2d::new(&format!("{name}.conv2"), growth, growth, 3, 1, 1, rng),
            conv3: Conv2d::new(&format!("{name}.conv3"), c_in + growth, growth, 3, 1, 1, rng),
            conv4: Conv2d::new(&format!("{name}.conv4"), growth, growth, 3, 1, 1, rng),
            bn: BatchNorm2d::new(&format!("{name}.bn"), c_in + 2 * growth),
            c_in,
            growth,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.c_in + 2 * self.growth
    }

    fn stem(&self, x: &Tensor) -> Result<(Tensor, Tensor, Tensor, Tensor, Tensor, Conv2dCache, Conv2dCache, Conv2dCache, Conv2dCache)> {
        let (a1, c1) = self.conv1.forward(x)?;
        let r1 = relu(&a1);
        let (a2, c2) = self.conv2.forward(&r1)?;
        let r2 = relu(&a2);
        let cat1 = concat_channels(&[x, &r2])?;
        let (a3, c3) = self.conv3.forward(&cat1)?;
        let r3 = relu(&a3);
        let (a4, c4) = self.conv4.forward(&r3)?;
        let r4 = relu(&a4);
        Ok((r1, r2, cat1, r3, r4, c1, c2, c3, c4))
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Result<(Tensor, DenseBlockCache)> {
        let (r1, r2, cat1, r3, r4, c1, c2, c3, c4) = self.stem(x)?;
        let cat2 = concat_channels(&[&cat1, &r4])?;
        let (y, bn) = self.bn.forward_train(&cat2)?;
        Ok((y, DenseBlockCache { r1, r2, r3, r4, c1, c2, c3, c4, bn }))
    }

    pub fn forward_eval(&self, x: &Tensor) -> Result<Tensor> {
        let (_, _, cat1, _, r4, _, _, _, _) = self.stem(x)?;
        let cat2 = concat_channels(&[&cat1, &r4])?;
        self.bn.forward_eval(&cat2)
    }

    pub fn backward(&mut self, cache: &DenseBlockCache, dy: &Tensor) -> Tensor {
        let d_cat2 = self.bn.backward(&cache.bn, dy);
        let mut parts = split_channels(&d_cat2, &[self.c_in + self.growth, self.growth]).into_iter();
        let mut d_cat1 = parts.next().expect("two split parts");
        let d_r4 = parts.next().expect("two split parts");
        let d_a4 = relu_backward(&cache.r4, &d_r4);
        let d_r3 = self.conv4.backward(&cache.c4, &d_a4);
        let d_a3 = relu_backward(&cache.r3, &d_r3);
        add_into(&mut d_cat1, &self.conv3.backward(&cache.c3, &d_a3));
        let mut parts = split_channels(&d_cat1, &[self.c_in, self.growth]).into_iter();
        let mut dx = parts.next().expect("two split parts");
        let d_r2 = parts.next().expect("two split parts");
        let d_a2 = relu_backward(&cache.r2, &d_r2);
        let d_r1 = self.conv2.backward(&cache.c2, &d_a2);
        let d_a1 = relu_backward(&cache.r1, &d_r1);
        add_into(&mut dx, &self.conv1.backward(&cache.c1, &d_a1));
        dx
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![
            &mut self.conv1.w,
            &mut self.conv1.b,
            &mut self.conv2.w,
            &mut self.conv2.b,
            &mut self.conv3.w,
            &mut self.conv3.b,
            &mut self.conv4.w,
            &mut self.conv4.b,
            &mut self.bn.gamma,
            &mut self.bn.beta,
        ]
    }

    pub fn params(&self) -> Vec<&Parameter> {
        vec![
            &self.conv1.w,
            &self.conv1.b,
            &self.conv2.w,
            &self.conv2.b,
            &self.conv3.w,
            &self.conv3.b,
            &self.conv4.w,
            &self.conv4.b,
            &self.bn.gamma,
            &self.bn.beta,
        ]
    }

    /// Every tensor that defines the block's behavior, running statistics
    /// included, keyed by stable names.
    pub fn named_tensors(&self) -> Vec<(String, Tensor)> {
        let mut out: Vec<(String, Tensor)> =
            self.params().into_iter().map(|p| (p.name.clone(), p.value.clone())).collect();
        out.push((format!("{}.bn.running_mean", self.name), self.bn.running_mean.clone()));
        out.push((format!("{}.bn.running_var", self.name), self.bn.running_var.clone()));
        out
    }

    pub fn load_named(&mut self, lookup: &dyn Fn(&str, &[usize]) -> Result<Tensor>) -> Result<()> {
        let name = self.name.clone();
        for p in self.params_mut() {
            p.value = lookup(&p.name.clone(), &p.value.shape.clone())?;
        }
        self.bn.running_mean = lookup(&format!("{name}.bn.running_mean"), &self.bn.running_mean.shape.clone())?;
        self.bn.running_var = lookup(&format!("{name}.bn.running_var"), &self.bn.running_var.shape.clone())?;
        Ok(())
    }
}

/// block1 -> pool -> block2 -> pool -> block3 -> flatten.
pub struct Trunk {
    pub block1: DenseBlock,
    pub block2: DenseBlock,
    pub block3: DenseBlock,
    pool: AvgPool2d,
}

pub struct TrunkCache {
    b1: DenseBlockCache,
    p1: AvgPoolCache,
    b2: DenseBlockCache,
    p2: AvgPoolCache,
    b3: DenseBlockCache,
    out_shape: Vec<usize>,
}

impl Trunk {
    pub fn new(name: &str, c_in: usize, growth: usize, rng: &mut Stream) -> Self {
        let block1 = DenseBlock::new(&format!("{name}.block1"), c_in, growth, rng);
        let block2 = DenseBlock::new(&format!("{name}.block2"), block1.out_channels(), growth, rng);
        let block3 = DenseBlock::new(&format!("{name}.block3"), block2.out_channels(), growth, rng);
        Trunk { block1, block2, block3, pool: AvgPool2d::new((2, 2), true) }
    }

    /// Flattened feature width for an input of the given spatial extents.
    pub fn feature_len(&self, h: usize, w: usize) -> Result<usize> {
        let (h1, w1) = self.pool.out_hw(h, w)?;
        let (h2, w2) = self.pool.out_hw(h1, w1)?;
        Ok(self.block3.out_channels() * h2 * w2)
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Result<(Tensor, TrunkCache)> {
        let (y1, b1) = self.block1.forward_train(x)?;
        let (y1p, p1) = self.pool.forward(&y1)?;
        let (y2, b2) = self.block2.forward_train(&y1p)?;
        let (y2p, p2) = self.pool.forward(&y2)?;
        let (y3, b3) = self.block3.forward_train(&y2p)?;
        let out_shape = y3.shape.clone();
        let batch = out_shape[0];
        let feat = y3.numel() / batch;
        Ok((y3.reshape(&[batch, feat]), TrunkCache { b1, p1, b2, p2, b3, out_shape }))
    }

    pub fn forward_eval(&self, x: &Tensor) -> Result<Tensor> {
        let y1 = self.block1.forward_eval(x)?;
        let (y1p, _) = self.pool.forward(&y1)?;
        let y2 = self.block2.forward_eval(&y1p)?;
        let (y2p, _) = self.pool.forward(&y2)?;
        let y3 = self.block3.forward_eval(&y2p)?;
        let batch = y3.shape[0];
        let feat = y3.numel() / batch;
        Ok(y3.reshape(&[batch, feat]))
    }

    pub fn backward(&mut self, cache: &TrunkCache, dflat: &Tensor) -> Tensor {
        let dy3 = dflat.clone().reshape(&cache.out_shape);
        let dy2p = self.block3.backward(&cache.b3, &dy3);
        let dy2 = self.pool.backward(&cache.p2, &dy2p);
        let dy1p = self.block2.backward(&cache.b2, &dy2);
        let dy1 = self.pool.backward(&cache.p1, &dy1p);
        self.block1.backward(&cache.b1, &dy1)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut v = self.block1.params_mut();
        v.extend(self.block2.params_mut());
        v.extend(self.block3.params_mut());
        v
    }

    pub fn params(&self) -> Vec<&Parameter> {
        let mut v = self.block1.params();
        v.extend(self.block2.params());
        v.extend(self.block3.params());
        v
    }

    pub fn named_tensors(&self) -> Vec<(String, Tensor)> {
        let mut v = self.block1.named_tensors();
        v.extend(self.block2.named_tensors());
        v.extend(self.block3.named_tensors());
        v
    }

    pub fn load_named(&mut self, lookup: &dyn Fn(&str, &[usize]) -> Result<Tensor>) -> Result<()> {
        self.block1.load_named(lookup)?;
        self.block2.load_named(lookup)?;
        self.block3.load_named(lookup)
    }
}

/// The classifier head: three fully connected layers, relu between the
/// first two, linear logits out.
pub struct Head {
    d1: Dense,
    d2: Dense,
    d3: Dense,
}

pub struct HeadCache {
    c1: DenseCache,
    r1: Tensor,
    c2: DenseCache,
    r2: Tensor,
    c3: DenseCache,
}

impl Head {
    pub fn new(name: &str, d_in: usize, widths: &[usize; 3], rng: &mut Stream) -> Self {
        Head {
            d1: Dense::new(&format!("{name}.fc1"), d_in, widths[0], rng),
            d2: Dense::new(&format!("{name}.fc2"), widths[0], widths[1], rng),
            d3: Dense::new(&format!("{name}.fc3"), widths[1], widths[2], rng),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, HeadCache)> {
        let (a1, c1) = self.d1.forward(x)?;
        let r1 = relu(&a1);
        let (a2, c2) = self.d2.forward(&r1)?;
        let r2 = relu(&a2);
        let (logits, c3) = self.d3.forward(&r2)?;
        Ok((logits, HeadCache { c1, r1, c2, r2, c3 }))
    }

    pub fn backward(&mut self, cache: &HeadCache, dlogits: &Tensor) -> Tensor {
        let d_r2 = self.d3.backward(&cache.c3, dlogits);
        let d_a2 = relu_backward(&cache.r2, &d_r2);
        let d_r1 = self.d2.backward(&cache.c2, &d_a2);
        let d_a1 = relu_backward(&cache.r1, &d_r1);
        self.d1.backward(&cache.c1, &d_a1)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.d1.w, &mut self.d1.b, &mut self.d2.w, &mut self.d2.b, &mut self.d3.w, &mut self.d3.b]
    }

    pub fn params(&self) -> Vec<&Parameter> {
        vec![&self.d1.w, &self.d1.b, &self.d2.w, &self.d2.b, &self.d3.w, &self.d3.b]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::tag;
    use crate::Error;

    fn rng() -> Stream {
        Stream::new(5, &[tag::INIT])
    }

    #[test]
    fn block_grows_channels_and_keeps_extent() {
        let mut block = DenseBlock::new("b", 2, 8, &mut rng());
        assert_eq!(block.out_channels(), 18);
        let x = Tensor::uniform_init(&[2, 2, 32, 4], 1.0, &mut rng());
        let (y, _) = block.forward_train(&x).unwrap();
        assert_eq!(y.shape, vec![2, 18, 32, 4]);
    }

    #[test]
    fn trunk_feature_len_on_default_geometry() {
        let trunk = Trunk::new("t", 2, 8, &mut rng());
        assert_eq!(trunk.block3.out_channels(), 50);
        assert_eq!(trunk.feature_len(32, 4).unwrap(), 400);
        let x = Tensor::uniform_init(&[2, 2, 32, 4], 1.0, &mut rng());
        let mut t = trunk;
        let (y, _) = t.forward_train(&x).unwrap();
        assert_eq!(y.shape, vec![2, 400]);
    }

    #[test]
    fn trunk_handles_narrow_inputs_via_adaptive_pooling() {
        let mut trunk = Trunk::new("t", 2, 8, &mut rng());
        assert_eq!(trunk.feature_len(8, 2).unwrap(), 50 * 2 * 1);
        let x = Tensor::uniform_init(&[2, 2, 8, 2], 1.0, &mut rng());
        let (y, _) = trunk.forward_train(&x).unwrap();
        assert_eq!(y.shape, vec![2, 100]);
    }

    #[test]
    fn block_gradient_matches_finite_difference() {
        let mut block = DenseBlock::new("b", 2, 3, &mut rng());
        let x = Tensor::uniform_init(&[2, 2, 4, 2], 1.0, &mut rng());
        let (y, cache) = block.forward_train(&x).unwrap();
        // A flat sum would be blind to the input: batch norm centres each
        // channel, so weight the output elements unevenly instead.
        let mut dy = Tensor::zeros(&y.shape);
        for (j, g) in dy.data.iter_mut().enumerate() {
            *g = (0.37 * j as f64).sin() + 0.25;
        }
        let dx = block.backward(&cache, &dy);
        let h = 1e-6;
        let weighted = |t: &Tensor| -> f64 {
            t.data.iter().zip(&dy.data).map(|(v, g)| v * g).sum()
        };
        // Training batch norm re-estimates per call, so the finite
        // difference probes the same function the backward pass used.
        for k in [0usize, 7, 19, 31] {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp.data[k] += h;
            xm.data[k] -= h;
            let lp = weighted(&block.forward_train(&xp).unwrap().0);
            let lm = weighted(&block.forward_train(&xm).unwrap().0);
            let num = (lp - lm) / (2.0 * h);
            assert!(
                (num - dx.data[k]).abs() / num.abs().max(dx.data[k].abs()).max(1e-8) < 1e-4,
                "dx[{k}] numeric {num} vs analytic {}",
                dx.data[k]
            );
        }
    }

    #[test]
    fn eval_path_differs_from_train_until_stats_settle() {
        let mut block = DenseBlock::new("b", 1, 2, &mut rng());
        let x = Tensor::uniform_init(&[2, 1, 3, 3], 1.0, &mut rng());
        let (train_y, _) = block.forward_train(&x).unwrap();
        let eval_y = block.forward_eval(&x).unwrap();
        let diff: f64 = train_y.data.iter().zip(&eval_y.data).map(|(a, b)| (a - b).abs()).sum();
        assert!(diff > 1e-6, "fresh running stats should not match batch stats");
    }

    #[test]
    fn named_tensors_round_trip_through_lookup() {
        let mut a = Trunk::new("t", 2, 2, &mut rng());
        let b = Trunk::new("t", 2, 2, &mut Stream::new(99, &[tag::INIT]));
        let saved = b.named_tensors();
        a.load_named(&|name, shape| {
            let t = saved
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t.clone())
                .ok_or_else(|| Error::Data(format!("missing tensor {name}")))?;
            if t.shape != shape {
                return Err(Error::Data(format!("shape mismatch for {name}")));
            }
            Ok(t)
        })
        .unwrap();
        let x = Tensor::uniform_init(&[1, 2, 8, 2], 1.0, &mut rng());
        let ya = a.forward_eval(&x).unwrap();
        let yb = b.forward_eval(&x).unwrap();
        assert_eq!(ya.data, yb.data);
    }
}
