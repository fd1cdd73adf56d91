//! The sequence predictor: shared convolutional trunk per timestep, three
//! stacked LSTM cells across time, classifier head on the final hidden
//! state.

use super::blocks::{Head, HeadCache, Trunk, TrunkCache};
use super::{gather_frame, named_lookup, CnnLstmConfig, Sample, SequenceModel};
use crate::autodiff::lstm::LstmCache;
use crate::autodiff::{LstmCell, Parameter, Tensor};
use crate::rng::{tag, Stream};
use crate::Result;

pub struct CnnLstm {
    cfg: CnnLstmConfig,
    trunk: Trunk,
    cells: Vec<LstmCell>,
    head: Head,
    feat_len: usize,
}

pub struct CnnLstmCache {
    trunk: Vec<TrunkCache>,
    lstm: Vec<Vec<LstmCache>>,
    head: HeadCache,
}

pub fn build_cnn_lstm(cfg: &CnnLstmConfig) -> Result<CnnLstm> {
    cfg.validate()?;
    let mut rng = Stream::new(cfg.init_seed, &[tag::INIT]);
    let trunk = Trunk::new("trunk", 2, cfg.growth, &mut rng);
    let feat_len = trunk.feature_len(cfg.n_bs, cfg.n_ue)?;
    let cells = vec![
        LstmCell::new("lstm1", feat_len, cfg.lstm_hidden, &mut rng),
        LstmCell::new("lstm2", cfg.lstm_hidden, cfg.lstm_hidden, &mut rng),
        LstmCell::new("lstm3", cfg.lstm_hidden, cfg.lstm_hidden, &mut rng),
    ];
    let head = Head::new("head", cfg.lstm_hidden, &cfg.fcl_sizes, &mut rng);
    Ok(CnnLstm { cfg: cfg.clone(), trunk, cells, head, feat_len })
}

impl CnnLstm {
    pub fn config(&self) -> &CnnLstmConfig {
        &self.cfg
    }
}

impl SequenceModel for CnnLstm {
    type Cache = CnnLstmCache;

    fn forward_train(&mut self, batch: &[&Sample]) -> Result<(Tensor, Self::Cache)> {
        let bs = batch.len();
        let t_len = self.cfg.seq_len;
        let (mut h, mut c): (Vec<Tensor>, Vec<Tensor>) =
            self.cells.iter().map(|cell| cell.zero_state(bs)).unzip();
        let mut trunk_caches = Vec::with_capacity(t_len);
        let mut lstm_caches: Vec<Vec<LstmCache>> = (0..self.cells.len()).map(|_| Vec::with_capacity(t_len)).collect();
        for t in 0..t_len {
            let xt = gather_frame(batch, t, &self.cfg)?;
            let (feat, tc) = self.trunk.forward_train(&xt)?;
            trunk_caches.push(tc);
            let mut input = feat;
            for (l, cell) in self.cells.iter().enumerate() {
                let (h_new, c_new, cache) = cell.forward(&input, &h[l], &c[l])?;
                lstm_caches[l].push(cache);
                h[l] = h_new.clone();
                c[l] = c_new;
                input = h_new;
            }
        }
        let (logits, head_cache) = self.head.forward(&h[self.cells.len() - 1])?;
        Ok((logits, CnnLstmCache { trunk: trunk_caches, lstm: lstm_caches, head: head_cache }))
    }

    fn backward(&mut self, cache: Self::Cache, dlogits: &Tensor) {
        let bs = dlogits.shape[0];
        let t_len = self.cfg.seq_len;
        let n_layers = self.cells.len();
        let mut dh: Vec<Tensor> = (0..n_layers).map(|_| Tensor::zeros(&[bs, self.cfg.lstm_hidden])).collect();
        let mut dc = dh.clone();
        dh[n_layers - 1] = self.head.backward(&cache.head, dlogits);
        for t in (0..t_len).rev() {
            for l in (0..n_layers).rev() {
                let (dx, dh_prev, dc_prev) = self.cells[l].backward(&cache.lstm[l][t], &dh[l], &dc[l]);
                dh[l] = dh_prev;
                dc[l] = dc_prev;
                if l > 0 {
                    for (a, b) in dh[l - 1].data.iter_mut().zip(&dx.data) {
                        *a += b;
                    }
                } else {
                    self.trunk.backward(&cache.trunk[t], &dx);
                }
            }
        }
    }

    fn logits_eval(&self, sample: &Sample) -> Result<Vec<f64>> {
        let batch = [sample];
        let bs = 1;
        let (mut h, mut c): (Vec<Tensor>, Vec<Tensor>) =
            self.cells.iter().map(|cell| cell.zero_state(bs)).unzip();
        for t in 0..self.cfg.seq_len {
            let xt = gather_frame(&batch, t, &self.cfg)?;
            let mut input = self.trunk.forward_eval(&xt)?;
            for (l, cell) in self.cells.iter().enumerate() {
                let (h_new, c_new, _) = cell.forward(&input, &h[l], &c[l])?;
                h[l] = h_new.clone();
                c[l] = c_new;
                input = h_new;
            }
        }
        let (logits, _) = self.head.forward(&h[self.cells.len() - 1])?;
        Ok(logits.data)
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut v = self.trunk.params_mut();
        for cell in &mut self.cells {
            v.push(&mut cell.w);
            v.push(&mut cell.b);
        }
        v.extend(self.head.params_mut());
        v
    }

    fn params(&self) -> Vec<&Parameter> {
        let mut v = self.trunk.params();
        for cell in &self.cells {
            v.push(&cell.w);
            v.push(&cell.b);
        }
        v.extend(self.head.params());
        v
    }

    fn named_tensors(&self) -> Vec<(String, Tensor)> {
        let mut v = self.trunk.named_tensors();
        for cell in &self.cells {
            v.push((cell.w.name.clone(), cell.w.value.clone()));
            v.push((cell.b.name.clone(), cell.b.value.clone()));
        }
        for p in self.head.params() {
            v.push((p.name.clone(), p.value.clone()));
        }
        v
    }

    fn load_named(&mut self, tensors: &[(String, Tensor)]) -> Result<()> {
        let (lookup, check) = named_lookup(tensors);
        self.trunk.load_named(&lookup)?;
        for cell in &mut self.cells {
            cell.w.value = lookup(&cell.w.name.clone(), &cell.w.value.shape.clone())?;
            cell.b.value = lookup(&cell.b.name.clone(), &cell.b.value.shape.clone())?;
        }
        for p in self.head.params_mut() {
            p.value = lookup(&p.name.clone(), &p.value.shape.clone())?;
        }
        check()
    }

    fn descriptor(&self) -> String {
        format!(
            "model = cnn_lstm\nn_bs = {}\nn_ue = {}\nseq_len = {}\ngrowth = {}\nlstm_hidden = {}\nfcl = {},{},{}\nclasses = {}\nfeatures = {}\nparams = {}\n",
            self.cfg.n_bs,
            self.cfg.n_ue,
            self.cfg.seq_len,
            self.cfg.growth,
            self.cfg.lstm_hidden,
            self.cfg.fcl_sizes[0],
            self.cfg.fcl_sizes[1],
            self.cfg.fcl_sizes[2],
            self.cfg.classes,
            self.feat_len,
            self.param_count(),
        )
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.numel()).sum()
    }
}
