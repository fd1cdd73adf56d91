//! Deep Q-learning over the labeled dataset treated as a replay environment.
//!
//! Each labeled sample becomes a one-step episode: the agent picks a class,
//! earns 100 on an exact match with the oracle label and 0 otherwise, and the
//! episode ends. The discount therefore defaults to zero and training reduces
//! to regressing the chosen action's value toward its reward.

use std::path::Path;

use crate::autodiff::{
    load_checkpoint, relu, relu_backward, save_checkpoint, sgd_step, Dense, Parameter, Tensor,
};
use crate::models::{argmax_class, Policy, Sample};
use crate::phy::{McsTable, N_CLASSES};
use crate::rng::{tag, Stream};
use crate::{Error, Result};

const HIDDEN_LAYERS: usize = 5;
const HIDDEN_WIDTH: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct DqnConfig {
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Steps over which epsilon falls linearly from start to end.
    pub epsilon_decay_steps: usize,
    pub gamma: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Online weights are copied into the target network every this many
    /// optimization steps.
    pub target_sync: usize,
    pub learning_rate: f64,
    /// Global gradient-norm ceiling applied before each step; 0 disables it.
    /// Plain SGD toward targets of magnitude 100 must limit step size or the
    /// value net runs away once its curvature grows.
    pub max_grad_norm: f64,
    pub train_steps: usize,
    pub seed: u64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 10_000,
            gamma: 0.0,
            replay_capacity: 5_000,
            batch_size: 64,
            target_sync: 250,
            learning_rate: 1e-3,
            max_grad_norm: 10.0,
            train_steps: 30_000,
            seed: 1,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        let eps_ok = |e: f64| (0.0..=1.0).contains(&e);
        if !eps_ok(self.epsilon_start) || !eps_ok(self.epsilon_end) {
            return Err(Error::Config("epsilon must lie in [0, 1]".into()));
        }
        if self.epsilon_end > self.epsilon_start {
            return Err(Error::Config("epsilon must not grow over time".into()));
        }
        if self.epsilon_decay_steps == 0 {
            return Err(Error::Config("epsilon decay needs at least one step".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config("gamma must lie in [0, 1]".into()));
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return Err(Error::Config(
                "replay capacity must hold at least one batch".into(),
            ));
        }
        if self.target_sync == 0 {
            return Err(Error::Config("target sync period must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config("learning rate must be finite and nonnegative".into()));
        }
        if self.train_steps == 0 {
            return Err(Error::Config("training needs at least one step".into()));
        }
        Ok(())
    }

    /// Exploration probability at a given step: linear decay, then flat.
    pub fn epsilon_at(&self, step: usize) -> f64 {
        let frac = (step as f64 / self.epsilon_decay_steps as f64).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

/// One interaction with the dataset environment.
#[derive(Debug, Clone)]
pub struct Transition {
    pub state: Tensor,
    /// Class index 0..14.
    pub action: u8,
    /// 100 iff the action matched the oracle label, else 0.
    pub reward: f64,
    pub next_state: Tensor,
    pub done: bool,
}

/// Fixed-capacity ring buffer; pushing past capacity evicts the oldest entry.
#[derive(Debug)]
pub struct Replay {
    buf: Vec<Transition>,
    cap: usize,
    next: usize,
}

impl Replay {
    pub fn new(cap: usize) -> Replay {
        assert!(cap > 0, "replay capacity must be positive");
        Replay { buf: Vec::with_capacity(cap), cap, next: 0 }
    }

    pub fn push(&mut self, t: Transition) {
        debug_assert!(t.reward == 0.0 || t.reward == 100.0);
        if self.buf.len() < self.cap {
            self.buf.push(t);
        } else {
            self.buf[self.next] = t;
            self.next = (self.next + 1) % self.cap;
        }
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn as_slice(&self) -> &[Transition] {
        &self.buf
    }

    /// Uniform index draw; sampling is with replacement across calls.
    pub fn draw(&self, rng: &mut Stream) -> usize {
        assert!(!self.buf.is_empty());
        rng.below(self.buf.len() as u64) as usize
    }
}

/// Q network: five 64-wide hidden layers on the flattened sample window,
/// one linear output per MCS class.
pub struct QNet {
    hidden: Vec<Dense>,
    out: Dense,
    state_len: usize,
}

pub struct QNetCache {
    dense: Vec<crate::autodiff::DenseCache>,
    acts: Vec<Tensor>,
    out: crate::autodiff::DenseCache,
}

impl QNet {
    pub fn new(state_len: usize, rng: &mut Stream) -> QNet {
        let mut hidden = Vec::with_capacity(HIDDEN_LAYERS);
        let mut d_in = state_len;
        for i in 0..HIDDEN_LAYERS {
            hidden.push(Dense::new(&format!("q.h{i}"), d_in, HIDDEN_WIDTH, rng));
            d_in = HIDDEN_WIDTH;
        }
        let out = Dense::new("q.out", d_in, N_CLASSES, rng);
        QNet { hidden, out, state_len }
    }

    pub fn state_len(&self) -> usize {
        self.state_len
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, QNetCache)> {
        let mut dense = Vec::with_capacity(HIDDEN_LAYERS);
        let mut acts = Vec::with_capacity(HIDDEN_LAYERS);
        let mut cur = x.clone();
        for layer in &self.hidden {
            let (z, c) = layer.forward(&cur)?;
            cur = relu(&z);
            dense.push(c);
            acts.push(cur.clone());
        }
        let (q, out) = self.out.forward(&cur)?;
        Ok((q, QNetCache { dense, acts, out }))
    }

    pub fn backward(&mut self, cache: &QNetCache, dq: &Tensor) -> Tensor {
        let mut grad = self.out.backward(&cache.out, dq);
        for i in (0..HIDDEN_LAYERS).rev() {
            let dz = relu_backward(&cache.acts[i], &grad);
            grad = self.hidden[i].backward(&cache.dense[i], &dz);
        }
        grad
    }

    /// Q values for a single flattened state.
    pub fn q_row(&self, state: &Tensor) -> Result<Vec<f64>> {
        let x = Tensor::from_vec(&[1, state.data.len()], state.data.clone());
        let (q, _) = self.forward(&x)?;
        Ok(q.data)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut ps = Vec::new();
        for l in &mut self.hidden {
            ps.push(&mut l.w);
            ps.push(&mut l.b);
        }
        ps.push(&mut self.out.w);
        ps.push(&mut self.out.b);
        ps
    }

    pub fn params(&self) -> Vec<&Parameter> {
        let mut ps = Vec::new();
        for l in &self.hidden {
            ps.push(&l.w);
            ps.push(&l.b);
        }
        ps.push(&self.out.w);
        ps.push(&self.out.b);
        ps
    }

    /// Copy another network's weights into this one. Shapes must match.
    pub fn copy_from(&mut self, src: &QNet) {
        let theirs = src.params();
        for (dst, s) in self.params_mut().into_iter().zip(theirs) {
            debug_assert_eq!(dst.value.shape, s.value.shape);
            dst.value.data.copy_from_slice(&s.value.data);
        }
    }

    fn named(&self) -> Vec<(String, &Tensor)> {
        self.params().into_iter().map(|p| (p.name.clone(), &p.value)).collect()
    }

    pub fn descriptor(&self) -> String {
        format!(
            "model=dqn state_len={} hidden={}x{} classes={} params={}",
            self.state_len,
            HIDDEN_LAYERS,
            HIDDEN_WIDTH,
            N_CLASSES,
            self.params().iter().map(|p| p.value.data.len()).sum::<usize>()
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let named = self.named();
        let refs: Vec<(&str, &Tensor)> = named.iter().map(|(n, t)| (n.as_str(), *t)).collect();
        save_checkpoint(path, &refs)?;
        std::fs::write(path.with_extension("arch"), format!("{}\n", self.descriptor()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<QNet> {
        let arch = path.with_extension("arch");
        let tensors = load_checkpoint(path)?;
        let state_len = tensors
            .iter()
            .find(|(n, _)| n == "q.h0.w")
            .map(|(_, t)| t.shape[1])
            .ok_or_else(|| Error::Data("checkpoint lacks the first hidden layer".into()))?;
        let mut net = QNet::new(state_len, &mut Stream::new(0, &[tag::INIT]));
        if arch.exists() {
            let text = std::fs::read_to_string(&arch)?;
            if text.trim() != net.descriptor() {
                return Err(Error::Config(format!(
                    "architecture mismatch: file says {:?}, expected {:?}",
                    text.trim(),
                    net.descriptor()
                )));
            }
        }
        let mut remaining: std::collections::HashMap<String, Tensor> = tensors.into_iter().collect();
        for p in net.params_mut() {
            let t = remaining
                .remove(&p.name)
                .ok_or_else(|| Error::Data(format!("checkpoint lacks tensor {}", p.name)))?;
            if t.shape != p.value.shape {
                return Err(Error::Data(format!(
                    "tensor {} has extents {:?}, expected {:?}",
                    p.name, t.shape, p.value.shape
                )));
            }
            p.value = t;
        }
        if let Some(extra) = remaining.keys().next() {
            return Err(Error::Data(format!("checkpoint has unexpected tensor {extra}")));
        }
        Ok(net)
    }
}

impl Policy for QNet {
    fn name(&self) -> &str {
        "dqn"
    }

    /// Greedy action, reported as an MCS index.
    fn choose(&self, sample: &Sample) -> Result<u8> {
        let q = self.q_row(&sample.x)?;
        Ok(McsTable::index_of(argmax_class(&q)))
    }
}

/// Epsilon-greedy action: explore uniformly with probability `epsilon`,
/// otherwise take the argmax Q with ties broken toward the lower class.
pub fn dqn_act(net: &QNet, state: &Tensor, epsilon: f64, rng: &mut Stream) -> Result<usize> {
    if rng.uniform() < epsilon {
        return Ok(rng.below(N_CLASSES as u64) as usize);
    }
    Ok(argmax_class(&net.q_row(state)?))
}

/// One point of the learning curve, recorded every few optimization steps.
#[derive(Debug, Clone, PartialEq)]
pub struct DqnCurvePoint {
    pub step: usize,
    pub epsilon: f64,
    pub loss: f64,
    pub mean_reward: f64,
}

/// Bellman target per batch row: reward for terminal transitions, otherwise
/// reward + gamma times the target network's best next-state value.
fn batch_targets(target: &QNet, batch: &[&Transition], gamma: f64) -> Result<Vec<f64>> {
    let mut ys = Vec::with_capacity(batch.len());
    for t in batch {
        let y = if t.done || gamma == 0.0 {
            t.reward
        } else {
            let q = target.q_row(&t.next_state)?;
            let best = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            t.reward + gamma * best
        };
        if t.done {
            debug_assert_eq!(y, t.reward);
        }
        ys.push(y);
    }
    Ok(ys)
}

/// Train a Q network against the labeled dataset. Deterministic for a fixed
/// config. Returns the online network and its learning curve.
/// Scale all gradients so their joint Euclidean norm is at most `ceiling`.
fn clip_grad_norm(params: &mut [&mut Parameter], ceiling: f64) {
    let norm = params
        .iter()
        .map(|p| p.grad.data.iter().map(|g| g * g).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if norm > ceiling {
        let scale = ceiling / norm;
        for p in params.iter_mut() {
            for g in p.grad.data.iter_mut() {
                *g *= scale;
            }
        }
    }
}

pub fn dqn_train(samples: &[Sample], cfg: &DqnConfig) -> Result<(QNet, Vec<DqnCurvePoint>)> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Config("training set must not be empty".into()));
    }
    let state_len = samples[0].x.data.len();
    if samples.iter().any(|s| s.x.data.len() != state_len) {
        return Err(Error::Config("samples must share one window geometry".into()));
    }

    let mut net = QNet::new(state_len, &mut Stream::new(cfg.seed, &[tag::INIT, tag::AGENT]));
    let mut target = QNet::new(state_len, &mut Stream::new(cfg.seed, &[tag::INIT, tag::AGENT]));
    target.copy_from(&net);

    let mut act_rng = Stream::new(cfg.seed, &[tag::AGENT, 0]);
    let mut replay_rng = Stream::new(cfg.seed, &[tag::AGENT, 1]);
    let mut replay = Replay::new(cfg.replay_capacity);
    let mut curve = Vec::new();
    let curve_every = (cfg.train_steps / 200).max(1);

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut pos = 0usize;
    let mut pass = 0u64;
    Stream::new(cfg.seed, &[tag::AGENT, 2, pass]).shuffle(&mut order);

    for step in 0..cfg.train_steps {
        let idx = order[pos];
        let next_idx = order[(pos + 1) % order.len()];
        pos += 1;
        if pos == order.len() {
            pos = 0;
            pass += 1;
            Stream::new(cfg.seed, &[tag::AGENT, 2, pass]).shuffle(&mut order);
        }

        let s = &samples[idx];
        let action = dqn_act(&net, &s.x, cfg.epsilon_at(step), &mut act_rng)?;
        let reward = if action == s.y as usize { 100.0 } else { 0.0 };
        replay.push(Transition {
            state: s.x.clone(),
            action: action as u8,
            reward,
            next_state: samples[next_idx].x.clone(),
            done: true,
        });

        if replay.len() < cfg.batch_size {
            continue;
        }
        let rows: Vec<usize> = (0..cfg.batch_size).map(|_| replay.draw(&mut replay_rng)).collect();
        let batch: Vec<&Transition> = rows.iter().map(|&r| &replay.as_slice()[r]).collect();

        let mut x = Tensor::zeros(&[batch.len(), state_len]);
        for (j, t) in batch.iter().enumerate() {
            x.data[j * state_len..(j + 1) * state_len].copy_from_slice(&t.state.data);
        }
        let (q, cache) = net.forward(&x)?;
        let ys = batch_targets(&target, &batch, cfg.gamma)?;

        let mut dq = Tensor::zeros(&q.shape);
        let mut loss = 0.0;
        let mut reward_sum = 0.0;
        let inv_b = 1.0 / batch.len() as f64;
        for (j, (t, y)) in batch.iter().zip(&ys).enumerate() {
            let a = t.action as usize;
            let err = q.data[j * N_CLASSES + a] - y;
            loss += err * err * inv_b;
            dq.data[j * N_CLASSES + a] = 2.0 * err * inv_b;
            reward_sum += t.reward;
        }
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("loss diverged at step {step}")));
        }
        for p in net.params_mut() {
            p.zero_grad();
        }
        net.backward(&cache, &dq);
        let mut params = net.params_mut();
        if cfg.max_grad_norm > 0.0 {
            clip_grad_norm(&mut params, cfg.max_grad_norm);
        }
        sgd_step(&mut params, cfg.learning_rate);
        if (step + 1) % cfg.target_sync == 0 {
            target.copy_from(&net);
        }
        if step % curve_every == 0 || step + 1 == cfg.train_steps {
            curve.push(DqnCurvePoint {
                step,
                epsilon: cfg.epsilon_at(step),
                loss,
                mean_reward: reward_sum * inv_b,
            });
        }
    }
    Ok((net, curve))
}

/// Learning-curve CSV: one row per recorded point.
pub fn write_dqn_curve(path: &Path, curve: &[DqnCurvePoint]) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "step,epsilon,loss,mean_reward")?;
    for p in curve {
        writeln!(f, "{},{},{},{}", p.step, p.epsilon, p.loss, p.mean_reward)?;
    }
    Ok(())
}
