//! Learned MCS-selection policies: network assembly, sample preparation,
//! supervised training, prediction, and checkpointing.

pub mod blocks;
mod cnn_lstm;
mod cnn_only;

pub use cnn_lstm::{build_cnn_lstm, CnnLstm};
pub use cnn_only::{build_cnn_only, CnnOnly};

use crate::autodiff::{save_checkpoint, sgd_step, softmax_ce, load_checkpoint, Parameter, Tensor};
use crate::channel::ChannelFrame;
use crate::phy::{McsTable, N_CLASSES};
use crate::rng::{tag, Stream};
use crate::{Error, Result};
use std::cell::RefCell;
use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

/// Network geometry and widths. Block count (3), convolutions per block
/// (4), LSTM depth (3), and FCL count (3) are architecture constants; only
/// the widths here vary.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnLstmConfig {
    pub n_bs: usize,
    pub n_ue: usize,
    /// Frames per sample window.
    pub seq_len: usize,
    /// Channels added by each convolution inside a dense block.
    pub growth: usize,
    pub lstm_hidden: usize,
    /// Widths of the three classifier layers; the last is the class count.
    pub fcl_sizes: [usize; 3],
    pub classes: usize,
    pub init_seed: u64,
}

impl Default for CnnLstmConfig {
    fn default() -> Self {
        CnnLstmConfig {
            n_bs: 32,
            n_ue: 4,
            seq_len: 3,
            growth: 8,
            lstm_hidden: 64,
            fcl_sizes: [128, 64, 15],
            classes: N_CLASSES,
            init_seed: 1,
        }
    }
}

impl CnnLstmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_bs == 0 || self.n_ue == 0 || self.seq_len == 0 || self.growth == 0 || self.lstm_hidden == 0 {
            return Err(Error::Config("model widths must be positive".into()));
        }
        if self.classes != N_CLASSES {
            return Err(Error::Config(format!(
                "class count {} does not match the {}-entry MCS table",
                self.classes, N_CLASSES
            )));
        }
        if self.fcl_sizes.iter().any(|&w| w == 0) {
            return Err(Error::Config("classifier widths must be positive".into()));
        }
        if self.fcl_sizes[2] != self.classes {
            return Err(Error::Config(format!(
                "final classifier width {} must equal the class count {}",
                self.fcl_sizes[2], self.classes
            )));
        }
        Ok(())
    }
}

/// One training/evaluation unit: a normalized channel window with the
/// target user's column rotated to position 0, and its oracle label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// [seq_len, 2, n_bs, n_ue], unit RMS.
    pub x: Tensor,
    /// Class index 0..14 (MCS index minus 10) for the final frame.
    pub y: u8,
    pub user_id: u8,
    pub scenario: u16,
    /// Index of the final (labeled) frame within its scenario sequence.
    pub frame: u32,
    /// Final-frame post-precoding SINR of the target user, dB.
    pub sinr_db: f64,
    /// RMS removed from the raw window during normalization.
    pub scale: f64,
}

/// Stack the trailing `t_len` frames into a [t_len, 2, n_bs, n_ue] tensor
/// (real plane then imaginary plane) and scale the whole window to unit
/// RMS. Returns the tensor and the scale that was removed.
pub fn normalize_sample(frames: &[ChannelFrame], t_len: usize) -> Result<(Tensor, f64)> {
    if t_len == 0 || frames.len() < t_len {
        return Err(Error::Config(format!(
            "window of {t_len} frames requested from {} available",
            frames.len()
        )));
    }
    let tail = &frames[frames.len() - t_len..];
    let (n_bs, n_ue) = (tail[0].n_bs, tail[0].n_ue);
    let mut x = Tensor::zeros(&[t_len, 2, n_bs, n_ue]);
    let plane = n_bs * n_ue;
    for (t, f) in tail.iter().enumerate() {
        if f.n_bs != n_bs || f.n_ue != n_ue {
            return Err(Error::Config("frames in one window must share dimensions".into()));
        }
        let base = t * 2 * plane;
        x.data[base..base + plane].copy_from_slice(&f.re);
        x.data[base + plane..base + 2 * plane].copy_from_slice(&f.im);
    }
    let rms = x.rms();
    if !(rms > 0.0) {
        return Err(Error::Numeric("cannot normalize an all-zero channel window".into()));
    }
    x.scale(1.0 / rms);
    x.check_finite("normalized sample")?;
    Ok((x, rms))
}

/// Cyclically rotate user columns so the target user sits at column 0
/// (column j of the result is column (user + j) mod n_ue of the input).
/// One shared network then always predicts for "its" column 0.
pub fn rotate_target_user(x: &Tensor, user: usize) -> Tensor {
    let (t_len, planes, n_bs, n_ue) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
    assert!(user < n_ue, "user {user} out of range for {n_ue} columns");
    if user == 0 {
        return x.clone();
    }
    let mut out = Tensor::zeros(&x.shape[..]);
    for row in 0..t_len * planes * n_bs {
        let base = row * n_ue;
        for j in 0..n_ue {
            out.data[base + j] = x.data[base + (user + j) % n_ue];
        }
    }
    out
}

/// Assemble a Sample for one user from raw frames plus its label and SINR.
pub fn make_sample(
    frames: &[ChannelFrame],
    t_len: usize,
    user: usize,
    label: u8,
    scenario: u16,
    sinr_db: f64,
) -> Result<Sample> {
    let (x, scale) = normalize_sample(frames, t_len)?;
    let x = rotate_target_user(&x, user);
    let frame = frames[frames.len() - 1].frame_index;
    Ok(Sample {
        x,
        y: McsTable::class_of(label) as u8,
        user_id: user as u8,
        scenario,
        frame,
        sinr_db,
        scale,
    })
}

/// Collect frame `t` of every sample into one [batch, 2, n_bs, n_ue]
/// tensor, validating shapes against the model config.
fn gather_frame(batch: &[&Sample], t: usize, cfg: &CnnLstmConfig) -> Result<Tensor> {
    let expected = vec![cfg.seq_len, 2, cfg.n_bs, cfg.n_ue];
    let block = 2 * cfg.n_bs * cfg.n_ue;
    let mut out = Tensor::zeros(&[batch.len(), 2, cfg.n_bs, cfg.n_ue]);
    for (b, s) in batch.iter().enumerate() {
        if s.x.shape != expected {
            return Err(Error::Config(format!(
                "sample tensor {:?} does not match model input {expected:?}",
                s.x.shape
            )));
        }
        out.data[b * block..(b + 1) * block].copy_from_slice(&s.x.data[t * block..(t + 1) * block]);
    }
    Ok(out)
}

/// Name-indexed tensor lookup for checkpoint loading: `lookup` fetches and
/// shape-checks one tensor, `check` verifies afterwards that every stored
/// tensor was consumed.
#[allow(clippy::type_complexity)]
fn named_lookup(
    entries: &[(String, Tensor)],
) -> (impl Fn(&str, &[usize]) -> Result<Tensor> + '_, impl FnOnce() -> Result<()> + '_) {
    let shared = std::rc::Rc::new(RefCell::new(HashSet::new()));
    let shared2 = shared.clone();
    let lookup = move |name: &str, shape: &[usize]| -> Result<Tensor> {
        let (_, t) = entries
            .iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| Error::Data(format!("checkpoint is missing tensor '{name}'")))?;
        if t.shape != shape {
            return Err(Error::Data(format!(
                "tensor '{name}' has shape {:?}, expected {shape:?}",
                t.shape
            )));
        }
        shared.borrow_mut().insert(name.to_string());
        Ok(t.clone())
    };
    let check = move || -> Result<()> {
        let used = shared2.borrow();
        if used.len() != entries.len() {
            let extra: Vec<&str> = entries
                .iter()
                .map(|(n, _)| n.as_str())
                .filter(|n| !used.contains(*n))
                .collect();
            return Err(Error::Data(format!("checkpoint holds unexpected tensors: {}", extra.join(", "))));
        }
        Ok(())
    };
    (lookup, check)
}

/// Common surface of the trainable networks.
pub trait SequenceModel {
    type Cache;
    /// Training-mode forward over a batch; returns [batch, classes] logits.
    fn forward_train(&mut self, batch: &[&Sample]) -> Result<(Tensor, Self::Cache)>;
    /// Accumulate parameter gradients from the logit gradient.
    fn backward(&mut self, cache: Self::Cache, dlogits: &Tensor);
    /// Inference-mode logits for one sample.
    fn logits_eval(&self, sample: &Sample) -> Result<Vec<f64>>;
    fn params_mut(&mut self) -> Vec<&mut Parameter>;
    fn params(&self) -> Vec<&Parameter>;
    /// Everything a checkpoint must persist (weights and running stats).
    fn named_tensors(&self) -> Vec<(String, Tensor)>;
    fn load_named(&mut self, tensors: &[(String, Tensor)]) -> Result<()>;
    /// Structured-text architecture descriptor (the checkpoint sidecar).
    fn descriptor(&self) -> String;
    fn param_count(&self) -> usize;
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Evaluate on the test split every this many epochs (and always on the
    /// final one). 0 means only at the end.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { batch_size: 64, learning_rate: 1e-3, epochs: 300, seed: 1, eval_every: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config("batch size must be at least 2 (batch statistics)".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("need at least one epoch".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::Config(format!("bad learning rate {}", self.learning_rate)));
        }
        Ok(())
    }
}

/// Per-epoch training metrics. All vectors have length `epochs`; test
/// accuracy entries between evaluations repeat the latest measurement and
/// are NaN before the first one.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub train_acc: Vec<f64>,
    pub test_acc: Vec<f64>,
    pub checkpoint: Option<String>,
}

impl TrainReport {
    /// CSV: epoch,loss,train_acc,test_acc (test blank where unmeasured).
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "epoch,loss,train_acc,test_acc")?;
        for e in 0..self.train_loss.len() {
            let t = self.test_acc[e];
            if t.is_nan() {
                writeln!(w, "{},{},{},", e + 1, self.train_loss[e], self.train_acc[e])?;
            } else {
                writeln!(w, "{},{},{},{}", e + 1, self.train_loss[e], self.train_acc[e], t)?;
            }
        }
        Ok(())
    }
}

/// Mini-batch SGD with softmax cross-entropy. Deterministic for fixed
/// seeds: the per-epoch shuffle is keyed by (seed, epoch) alone.
pub fn train_supervised<M: SequenceModel>(
    model: &mut M,
    train: &[Sample],
    test: &[Sample],
    tc: &TrainConfig,
) -> Result<TrainReport> {
    tc.validate()?;
    if train.len() < 2 || test.is_empty() {
        return Err(Error::Config(format!(
            "training needs >= 2 train and >= 1 test samples, got {}/{}",
            train.len(),
            test.len()
        )));
    }
    let eval_every = if tc.eval_every == 0 { tc.epochs } else { tc.eval_every };
    let mut report = TrainReport {
        train_loss: Vec::with_capacity(tc.epochs),
        train_acc: Vec::with_capacity(tc.epochs),
        test_acc: Vec::with_capacity(tc.epochs),
        checkpoint: None,
    };
    let mut last_test = f64::NAN;
    for epoch in 0..tc.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        Stream::new(tc.seed, &[tag::SHUFFLE, epoch as u64]).shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut counted = 0usize;
        for chunk in order.chunks(tc.batch_size) {
            if chunk.len() < 2 {
                // A trailing singleton cannot provide batch statistics; it
                // rejoins the pool at the next epoch's shuffle.
                continue;
            }
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train[i]).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| train[i].y as usize).collect();
            let (logits, cache) = model.forward_train(&batch)?;
            for (b, &label) in labels.iter().enumerate() {
                if argmax_class(&logits.data[b * N_CLASSES..(b + 1) * N_CLASSES]) == label {
                    correct += 1;
                }
            }
            let (loss, dlogits) = softmax_ce(&logits, &labels)?;
            loss_sum += loss * chunk.len() as f64;
            counted += chunk.len();
            model.backward(cache, &dlogits);
            let mut params = model.params_mut();
            sgd_step(&mut params, tc.learning_rate);
        }
        if counted == 0 {
            return Err(Error::Config("every batch was smaller than 2 samples".into()));
        }
        report.train_loss.push(loss_sum / counted as f64);
        report.train_acc.push(correct as f64 / counted as f64);
        if (epoch + 1) % eval_every == 0 || epoch + 1 == tc.epochs {
            last_test = accuracy(model, test)?;
        }
        report.test_acc.push(last_test);
    }
    Ok(report)
}

/// Index of the largest logit; ties go to the lower index.
pub fn argmax_class(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

/// The model's MCS choice for one sample. Ties break toward the lower
/// index, the safer scheme.
pub fn predict<M: SequenceModel>(model: &M, sample: &Sample) -> Result<u8> {
    let logits = model.logits_eval(sample)?;
    Ok(McsTable::index_of(argmax_class(&logits)))
}

/// Fraction of samples whose prediction matches the stored label.
pub fn accuracy<M: SequenceModel>(model: &M, set: &[Sample]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::Config("cannot score an empty sample set".into()));
    }
    let mut correct = 0usize;
    for s in set {
        let logits = model.logits_eval(s)?;
        if argmax_class(&logits) == s.y as usize {
            correct += 1;
        }
    }
    Ok(correct as f64 / set.len() as f64)
}

/// Anything that maps a sample to an MCS index; the evaluation harness
/// compares implementations of this.
pub trait Policy {
    fn name(&self) -> &str;
    fn choose(&self, sample: &Sample) -> Result<u8>;
}

impl Policy for CnnLstm {
    fn name(&self) -> &str {
        "cnn_lstm"
    }

    fn choose(&self, sample: &Sample) -> Result<u8> {
        predict(self, sample)
    }
}

impl Policy for CnnOnly {
    fn name(&self) -> &str {
        "cnn_only"
    }

    fn choose(&self, sample: &Sample) -> Result<u8> {
        predict(self, sample)
    }
}

/// Write the model's weights plus its architecture descriptor sidecar
/// (same path with extension `.arch`).
pub fn save_model<M: SequenceModel>(model: &M, path: &Path) -> Result<()> {
    let named = model.named_tensors();
    let refs: Vec<(&str, &Tensor)> = named.iter().map(|(n, t)| (n.as_str(), t)).collect();
    save_checkpoint(path, &refs)?;
    std::fs::write(path.with_extension("arch"), model.descriptor())?;
    Ok(())
}

/// Load weights saved by `save_model` into a freshly built model of the
/// same configuration. A present-but-different descriptor sidecar is a
/// configuration error; weight shapes are checked regardless.
pub fn load_model<M: SequenceModel>(model: &mut M, path: &Path) -> Result<()> {
    let arch = path.with_extension("arch");
    if arch.exists() {
        let stored = std::fs::read_to_string(&arch)?;
        if stored != model.descriptor() {
            return Err(Error::Config(format!(
                "checkpoint {} was written by a different architecture",
                path.display()
            )));
        }
    }
    let entries = load_checkpoint(path)?;
    model.load_named(&entries)
}
