//! Single LSTM cell stepped over batches. Stacking and time unrolling are
//! the caller's job; the cell only maps (x, h, c) -> (h', c') and back.

use super::{Parameter, Tensor};
use crate::rng::Stream;
use crate::{Error, Result};
use rayon::prelude::*;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// LSTM cell with a single stacked weight matrix over [x; h].
///
/// `w` is [4*hidden, input + hidden] and `b` is [4*hidden]; gate rows are
/// grouped in the order forget, input, candidate, output. The forget-gate
/// bias starts at 1.0 so early training does not wipe cell state.
pub struct LstmCell {
    pub w: Parameter,
    pub b: Parameter,
    input: usize,
    hidden: usize,
}

pub struct LstmCache {
    x: Tensor,
    h_prev: Tensor,
    c_prev: Tensor,
    gates: Tensor,
    tanh_c: Tensor,
}

impl LstmCell {
    pub fn new(name: &str, input: usize, hidden: usize, rng: &mut Stream) -> Self {
        assert!(input >= 1 && hidden >= 1);
        let bound = 1.0 / ((input + hidden) as f64).sqrt();
        let w = Tensor::uniform_init(&[4 * hidden, input + hidden], bound, rng);
        let mut b = Tensor::zeros(&[4 * hidden]);
        for v in &mut b.data[..hidden] {
            *v = 1.0;
        }
        LstmCell {
            w: Parameter::new(format!("{name}.w"), w),
            b: Parameter::new(format!("{name}.b"), b),
            input,
            hidden,
        }
    }

    pub fn input_size(&self) -> usize {
        self.input
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn zero_state(&self, batch: usize) -> (Tensor, Tensor) {
        (Tensor::zeros(&[batch, self.hidden]), Tensor::zeros(&[batch, self.hidden]))
    }

    pub fn forward(&self, x: &Tensor, h_prev: &Tensor, c_prev: &Tensor) -> Result<(Tensor, Tensor, LstmCache)> {
        let (bs, d) = match x.shape[..] {
            [b, d] => (b, d),
            _ => return Err(Error::Config(format!("lstm expects [batch, features], got {:?}", x.shape))),
        };
        if d != self.input {
            return Err(Error::Config(format!("lstm expects {} input features, got {d}", self.input)));
        }
        let hs = self.hidden;
        if h_prev.shape != [bs, hs] || c_prev.shape != [bs, hs] {
            return Err(Error::Config(format!(
                "lstm state must be [{bs}, {hs}], got {:?} and {:?}",
                h_prev.shape, c_prev.shape
            )));
        }
        let cols = self.input + hs;
        let wt = &self.w.value.data;
        let bias = &self.b.value.data;
        // Post-activation gate values, [batch, 4*hidden], rows f|i|g|o.
        let mut gates = Tensor::zeros(&[bs, 4 * hs]);
        gates
            .data
            .par_chunks_mut(4 * hs)
            .enumerate()
            .for_each(|(b, gb)| {
                let xr = &x.data[b * d..(b + 1) * d];
                let hr = &h_prev.data[b * hs..(b + 1) * hs];
                for (r, slot) in gb.iter_mut().enumerate() {
                    let wr = &wt[r * cols..(r + 1) * cols];
                    let mut z = bias[r];
                    for (xi, wi) in xr.iter().zip(&wr[..d]) {
                        z += xi * wi;
                    }
                    for (hi, wi) in hr.iter().zip(&wr[d..]) {
                        z += hi * wi;
                    }
                    *slot = if r < 3 * hs && r >= 2 * hs { z.tanh() } else { sigmoid(z) };
                }
            });
        let mut c = Tensor::zeros(&[bs, hs]);
        let mut h = Tensor::zeros(&[bs, hs]);
        let mut tanh_c = Tensor::zeros(&[bs, hs]);
        for b in 0..bs {
            let g = &gates.data[b * 4 * hs..(b + 1) * 4 * hs];
            for u in 0..hs {
                let cv = g[u] * c_prev.data[b * hs + u] + g[hs + u] * g[2 * hs + u];
                let tc = cv.tanh();
                c.data[b * hs + u] = cv;
                tanh_c.data[b * hs + u] = tc;
                h.data[b * hs + u] = g[3 * hs + u] * tc;
            }
        }
        h.debug_assert_finite("lstm forward");
        Ok((
            h,
            c.clone(),
            LstmCache {
                x: x.clone(),
                h_prev: h_prev.clone(),
                c_prev: c_prev.clone(),
                gates,
                tanh_c,
            },
        ))
    }

    /// Accumulates weight gradients; returns (dx, dh_prev, dc_prev).
    pub fn backward(&mut self, cache: &LstmCache, dh: &Tensor, dc: &Tensor) -> (Tensor, Tensor, Tensor) {
        let bs = cache.x.shape[0];
        let d = self.input;
        let hs = self.hidden;
        assert_eq!(dh.shape, vec![bs, hs], "lstm backward shape mismatch");
        assert_eq!(dc.shape, vec![bs, hs], "lstm backward shape mismatch");
        let cols = d + hs;
        // Pre-activation gate gradients, [batch, 4*hidden].
        let mut dz = Tensor::zeros(&[bs, 4 * hs]);
        let mut dc_prev = Tensor::zeros(&[bs, hs]);
        for b in 0..bs {
            let g = &cache.gates.data[b * 4 * hs..(b + 1) * 4 * hs];
            for u in 0..hs {
                let (f, i, gg, o) = (g[u], g[hs + u], g[2 * hs + u], g[3 * hs + u]);
                let tc = cache.tanh_c.data[b * hs + u];
                let dhv = dh.data[b * hs + u];
                let dct = dc.data[b * hs + u] + dhv * o * (1.0 - tc * tc);
                let row = b * 4 * hs;
                dz.data[row + u] = dct * cache.c_prev.data[b * hs + u] * f * (1.0 - f);
                dz.data[row + hs + u] = dct * gg * i * (1.0 - i);
                dz.data[row + 2 * hs + u] = dct * i * (1.0 - gg * gg);
                dz.data[row + 3 * hs + u] = dhv * tc * o * (1.0 - o);
                dc_prev.data[b * hs + u] = dct * f;
            }
        }
        // dW[r, :] = sum_b dz[b, r] [x_b; h_b]; one thread owns one row.
        let dzd = &dz.data;
        let xd = &cache.x.data;
        let hd = &cache.h_prev.data;
        self.w
            .grad
            .data
            .par_chunks_mut(cols)
            .zip(self.b.grad.data.par_iter_mut())
            .enumerate()
            .for_each(|(r, (dwr, dbr))| {
                for b in 0..bs {
                    let g = dzd[b * 4 * hs + r];
                    if g == 0.0 {
                        continue;
                    }
                    *dbr += g;
                    let xr = &xd[b * d..(b + 1) * d];
                    for (dwi, xi) in dwr[..d].iter_mut().zip(xr) {
                        *dwi += g * xi;
                    }
                    let hr = &hd[b * hs..(b + 1) * hs];
                    for (dwi, hi) in dwr[d..].iter_mut().zip(hr) {
                        *dwi += g * hi;
                    }
                }
            });
        // d[x; h] = W^T dz; one thread owns one batch row.
        let mut dx = Tensor::zeros(&[bs, d]);
        let mut dh_prev = Tensor::zeros(&[bs, hs]);
        let wt = &self.w.value.data;
        dx.data
            .par_chunks_mut(d)
            .zip(dh_prev.data.par_chunks_mut(hs))
            .enumerate()
            .for_each(|(b, (dxb, dhb))| {
                for r in 0..4 * hs {
                    let g = dzd[b * 4 * hs + r];
                    if g == 0.0 {
                        continue;
                    }
                    let wr = &wt[r * cols..(r + 1) * cols];
                    for (dxi, wi) in dxb.iter_mut().zip(&wr[..d]) {
                        *dxi += g * wi;
                    }
                    for (dhi, wi) in dhb.iter_mut().zip(&wr[d..]) {
                        *dhi += g * wi;
                    }
                }
            });
        dx.debug_assert_finite("lstm backward");
        (dx, dh_prev, dc_prev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::tag;

    #[test]
    fn zero_weights_give_closed_form_state() {
        let mut rng = Stream::new(1, &[tag::INIT]);
        let mut cell = LstmCell::new("l", 3, 2, &mut rng);
        cell.w.value.data.fill(0.0);
        cell.b.value.data.fill(0.0);
        let x = Tensor::filled(&[1, 3], 0.7);
        let h0 = Tensor::zeros(&[1, 2]);
        let c0 = Tensor::filled(&[1, 2], 1.0);
        let (h, c, _) = cell.forward(&x, &h0, &c0).unwrap();
        // All gates sit at their zero-input values: f = i = o = 0.5, g = 0.
        for u in 0..2 {
            assert!((c.data[u] - 0.5).abs() < 1e-12);
            assert!((h.data[u] - 0.5 * 0.5f64.tanh()).abs() < 1e-12);
            assert!((h.data[u] - 0.2310585786300049).abs() < 1e-10);
        }
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let mut rng = Stream::new(2, &[tag::INIT]);
        let cell = LstmCell::new("l", 4, 3, &mut rng);
        assert_eq!(&cell.b.value.data[..3], &[1.0, 1.0, 1.0]);
        assert!(cell.b.value.data[3..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_forget_gate_carries_state_through() {
        let mut rng = Stream::new(3, &[tag::INIT]);
        let mut cell = LstmCell::new("l", 2, 1, &mut rng);
        cell.w.value.data.fill(0.0);
        cell.b.value.data = vec![30.0, -30.0, 0.0, -30.0];
        let x = Tensor::filled(&[1, 2], 1.0);
        let h0 = Tensor::zeros(&[1, 1]);
        let c0 = Tensor::filled(&[1, 1], 0.8);
        let (h, c, _) = cell.forward(&x, &h0, &c0).unwrap();
        assert!((c.data[0] - 0.8).abs() < 1e-9);
        assert!(h.data[0].abs() < 1e-9);
    }

    #[test]
    fn state_shape_mismatch_is_rejected() {
        let mut rng = Stream::new(4, &[tag::INIT]);
        let cell = LstmCell::new("l", 2, 3, &mut rng);
        let x = Tensor::zeros(&[2, 2]);
        let (h0, c0) = cell.zero_state(1);
        assert!(matches!(cell.forward(&x, &h0, &c0), Err(Error::Config(_))));
    }

    #[test]
    fn backward_matches_finite_difference_on_cell_sum() {
        let mut rng = Stream::new(5, &[tag::INIT]);
        let mut cell = LstmCell::new("l", 3, 2, &mut rng);
        let x = Tensor::uniform_init(&[2, 3], 0.8, &mut rng);
        let h0 = Tensor::uniform_init(&[2, 2], 0.5, &mut rng);
        let c0 = Tensor::uniform_init(&[2, 2], 0.5, &mut rng);
        let loss = |cell: &LstmCell, x: &Tensor| {
            let (h, _, _) = cell.forward(x, &h0, &c0).unwrap();
            h.data.iter().sum::<f64>()
        };
        let (_, _, cache) = cell.forward(&x, &h0, &c0).unwrap();
        let dh = Tensor::filled(&[2, 2], 1.0);
        let dc = Tensor::zeros(&[2, 2]);
        let (dx, _, _) = cell.backward(&cache, &dh, &dc);
        let h = 1e-6;
        for k in 0..x.numel() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp.data[k] += h;
            xm.data[k] -= h;
            let num = (loss(&cell, &xp) - loss(&cell, &xm)) / (2.0 * h);
            assert!(
                (num - dx.data[k]).abs() / num.abs().max(dx.data[k].abs()).max(1e-8) < 1e-5,
                "dx[{k}]: numeric {num} vs analytic {}",
                dx.data[k]
            );
        }
        // Weight gradient spot check on the first few coordinates.
        for k in 0..6 {
            let mut plus = LstmCell::new("l", 3, 2, &mut Stream::new(5, &[tag::INIT]));
            plus.w.value = cell.w.value.clone();
            plus.b.value = cell.b.value.clone();
            plus.w.value.data[k] += h;
            let mut minus = LstmCell::new("l", 3, 2, &mut Stream::new(5, &[tag::INIT]));
            minus.w.value = cell.w.value.clone();
            minus.b.value = cell.b.value.clone();
            minus.w.value.data[k] -= h;
            let num = (loss(&plus, &x) - loss(&minus, &x)) / (2.0 * h);
            let ana = cell.w.grad.data[k];
            assert!(
                (num - ana).abs() / num.abs().max(ana.abs()).max(1e-8) < 1e-5,
                "dw[{k}]: numeric {num} vs analytic {ana}"
            );
        }
    }
}
