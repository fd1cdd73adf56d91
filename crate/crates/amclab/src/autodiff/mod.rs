//! Minimal reverse-mode differentiation kernel.
//!
//! Layers are plain structs owning their `Parameter`s. A forward pass
//! returns the output plus an explicit cache; the matching backward pass
//! consumes the cache, accumulates parameter gradients in place, and
//! returns the input gradient. There is no tape: composite models wire
//! forward and backward calls by hand, which keeps the execution order (and
//! therefore every floating-point reduction) fixed and reproducible.
//!
//! Everything is `f64`. Debug builds assert finiteness of every layer
//! output so a NaN is caught where it is born, not three layers later.

pub mod checkpoint;
pub mod conv;
pub mod dense;
pub mod gradcheck;
pub mod loss;
pub mod lstm;
pub mod norm;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use conv::{concat_channels, split_channels, AvgPool2d, Conv2d};
pub use dense::{relu, relu_backward, Dense, DenseCache};
pub use gradcheck::{grad_check, GradReport};
pub use loss::softmax_ce;
pub use lstm::LstmCell;
pub use norm::BatchNorm2d;

use crate::rng::Stream;
use crate::{Error, Result};

/// Dense row-major array of up to four extents.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        assert!(shape.len() <= 4, "tensors carry at most 4 extents, got {shape:?}");
        let n: usize = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![0.0; n] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Self {
        assert!(shape.len() <= 4, "tensors carry at most 4 extents, got {shape:?}");
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape {shape:?} does not match {} values",
            data.len()
        );
        Tensor { shape: shape.to_vec(), data }
    }

    pub fn filled(shape: &[usize], v: f64) -> Self {
        let mut t = Tensor::zeros(shape);
        t.data.fill(v);
        t
    }

    /// Seeded fan-in-scaled uniform draw in (-bound, bound).
    pub fn uniform_init(shape: &[usize], bound: f64, rng: &mut Stream) -> Self {
        let mut t = Tensor::zeros(shape);
        for v in t.data.iter_mut() {
            *v = rng.range(-bound, bound);
        }
        t
    }

    #[inline]
    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Root-mean-square of all entries.
    pub fn rms(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        (self.data.iter().map(|v| v * v).sum::<f64>() / self.data.len() as f64).sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for v in self.data.iter_mut() {
            *v *= s;
        }
    }

    /// Reinterpret the row-major layout under new extents of equal size.
    pub fn reshape(mut self, shape: &[usize]) -> Tensor {
        assert!(shape.len() <= 4, "tensors carry at most 4 extents, got {shape:?}");
        assert_eq!(
            shape.iter().product::<usize>(),
            self.data.len(),
            "reshape to {shape:?} does not preserve element count"
        );
        self.shape = shape.to_vec();
        self
    }

    /// Debug-mode guard: every value must be finite after a forward or
    /// backward pass.
    #[inline]
    pub fn debug_assert_finite(&self, what: &str) {
        if cfg!(debug_assertions) {
            for (i, v) in self.data.iter().enumerate() {
                assert!(v.is_finite(), "{what}: non-finite value {v} at flat index {i}");
            }
        }
    }

    /// Strict finiteness check for release-mode call sites that must not
    /// let a NaN escape (e.g. before serialization).
    pub fn check_finite(&self, what: &str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Numeric(format!("{what}: non-finite tensor value")))
        }
    }
}

/// A learnable tensor paired with its gradient accumulator.
#[derive(Clone, Debug)]
pub struct Parameter {
    pub value: Tensor,
    pub grad: Tensor,
    pub name: String,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let grad = Tensor::zeros(&value.shape);
        Parameter { value, grad, name: name.into() }
    }

    pub fn zero_grad(&mut self) {
        self.grad.data.fill(0.0);
    }
}

/// Plain stochastic gradient descent: w <- w - lr * g, then gradients are
/// cleared so the next step starts from zero accumulators.
///
/// # Example
/// ```
/// # use amclab::autodiff::{sgd_step, Parameter, Tensor};
/// let mut p = Parameter::new("w", Tensor::from_vec(&[1], vec![1.0]));
/// p.grad.data[0] = 0.5;
/// sgd_step(&mut [&mut p], 0.1);
/// assert!((p.value.data[0] - 0.95).abs() < 1e-15);
/// assert_eq!(p.grad.data[0], 0.0);
/// ```
pub fn sgd_step(params: &mut [&mut Parameter], lr: f64) {
    for p in params.iter_mut() {
        for (w, g) in p.value.data.iter_mut().zip(p.grad.data.iter()) {
            *w -= lr * g;
        }
        p.zero_grad();
        p.value.debug_assert_finite(&format!("sgd update of {}", p.name));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::tag;

    #[test]
    fn tensor_shape_and_fill_invariants() {
        let t = Tensor::zeros(&[2, 3, 4]);
        assert_eq!(t.numel(), 24);
        let u = Tensor::from_vec(&[2, 2], vec![1.0, -1.0, 2.0, -2.0]);
        assert!((u.rms() - (2.5f64).sqrt()).abs() < 1e-15);
        let empty = Tensor::zeros(&[2, 0, 3]);
        assert_eq!(empty.numel(), 0);
        assert_eq!(empty.rms(), 0.0);
    }

    #[test]
    #[should_panic(expected = "does not match")]
    fn tensor_rejects_mismatched_data_length() {
        let _ = Tensor::from_vec(&[2, 2], vec![0.0; 3]);
    }

    #[test]
    fn uniform_init_respects_bound_and_seed() {
        let mut a = Stream::new(9, &[tag::INIT]);
        let mut b = Stream::new(9, &[tag::INIT]);
        let t1 = Tensor::uniform_init(&[64], 0.25, &mut a);
        let t2 = Tensor::uniform_init(&[64], 0.25, &mut b);
        assert_eq!(t1.data, t2.data);
        assert!(t1.data.iter().all(|v| v.abs() < 0.25));
        assert!(t1.data.iter().any(|v| v.abs() > 0.01));
    }

    #[test]
    fn sgd_zero_gradient_leaves_weights_untouched() {
        let mut p = Parameter::new("w", Tensor::from_vec(&[2], vec![3.0, -4.0]));
        let before = p.value.data.clone();
        sgd_step(&mut [&mut p], 0.5);
        assert_eq!(p.value.data, before);
    }

    #[test]
    fn sgd_two_half_steps_equal_one_full_step_for_fixed_gradient() {
        let mut a = Parameter::new("a", Tensor::from_vec(&[1], vec![1.0]));
        let mut b = Parameter::new("b", Tensor::from_vec(&[1], vec![1.0]));
        a.grad.data[0] = 0.3;
        sgd_step(&mut [&mut a], 0.2);
        b.grad.data[0] = 0.3;
        sgd_step(&mut [&mut b], 0.1);
        b.grad.data[0] = 0.3;
        sgd_step(&mut [&mut b], 0.1);
        assert!((a.value.data[0] - b.value.data[0]).abs() < 1e-15);
    }
}
