//! Softmax cross-entropy over [batch, classes] logits.

use super::Tensor;
use crate::{Error, Result};

/// Mean cross-entropy of softmax(logits) against integer labels, plus the
/// logit gradient of that mean. Stabilized by the row max, so large logits
/// do not overflow.
pub fn softmax_ce(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let (bs, k) = match logits.shape[..] {
        [b, k] => (b, k),
        _ => return Err(Error::Config(format!("loss expects [batch, classes], got {:?}", logits.shape))),
    };
    if labels.len() != bs {
        return Err(Error::Config(format!("{} labels for a batch of {bs}", labels.len())));
    }
    if bs == 0 {
        return Err(Error::Config("empty batch".into()));
    }
    let mut dlogits = Tensor::zeros(&[bs, k]);
    let mut total = 0.0;
    let inv_b = 1.0 / bs as f64;
    for b in 0..bs {
        let label = labels[b];
        if label >= k {
            return Err(Error::Config(format!("label {label} out of range for {k} classes")));
        }
        let row = &logits.data[b * k..(b + 1) * k];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for &v in row {
            denom += (v - max).exp();
        }
        let log_denom = denom.ln();
        total += log_denom - (row[label] - max);
        let drow = &mut dlogits.data[b * k..(b + 1) * k];
        for (j, &v) in row.iter().enumerate() {
            let p = (v - max).exp() / denom;
            drow[j] = (p - if j == label { 1.0 } else { 0.0 }) * inv_b;
        }
    }
    let loss = total * inv_b;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("cross entropy diverged: {loss}")));
    }
    Ok((loss, dlogits))
}
