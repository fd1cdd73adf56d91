//! Ablation variant: the same convolutional trunk applied to the final
//! frame only, classifier head directly on the flattened features. No
//! temporal pathway.

use super::blocks::{Head, HeadCache, Trunk, TrunkCache};
use super::{gather_frame, named_lookup, CnnLstmConfig, Sample, SequenceModel};
use crate::autodiff::{Parameter, Tensor};
use crate::rng::{tag, Stream};
use crate::Result;

pub struct CnnOnly {
    cfg: CnnLstmConfig,
    trunk: Trunk,
    head: Head,
    feat_len: usize,
}

pub struct CnnOnlyCache {
    trunk: TrunkCache,
    head: HeadCache,
}

pub fn build_cnn_only(cfg: &CnnLstmConfig) -> Result<CnnOnly> {
    cfg.validate()?;
    let mut rng = Stream::new(cfg.init_seed, &[tag::INIT]);
    let trunk = Trunk::new("trunk", 2, cfg.growth, &mut rng);
    let feat_len = trunk.feature_len(cfg.n_bs, cfg.n_ue)?;
    let head = Head::new("head", feat_len, &cfg.fcl_sizes, &mut rng);
    Ok(CnnOnly { cfg: cfg.clone(), trunk, head, feat_len })
}

impl CnnOnly {
    pub fn config(&self) -> &CnnLstmConfig {
        &self.cfg
    }
}

impl SequenceModel for CnnOnly {
    type Cache = CnnOnlyCache;

    fn forward_train(&mut self, batch: &[&Sample]) -> Result<(Tensor, Self::Cache)> {
        let xt = gather_frame(batch, self.cfg.seq_len - 1, &self.cfg)?;
        let (feat, trunk_cache) = self.trunk.forward_train(&xt)?;
        let (logits, head_cache) = self.head.forward(&feat)?;
        Ok((logits, CnnOnlyCache { trunk: trunk_cache, head: head_cache }))
    }

    fn backward(&mut self, cache: Self::Cache, dlogits: &Tensor) {
        let dfeat = self.head.backward(&cache.head, dlogits);
        self.trunk.backward(&cache.trunk, &dfeat);
    }

    fn logits_eval(&self, sample: &Sample) -> Result<Vec<f64>> {
        let batch = [sample];
        let xt = gather_frame(&batch, self.cfg.seq_len - 1, &self.cfg)?;
        let feat = self.trunk.forward_eval(&xt)?;
        let (logits, _) = self.head.forward(&feat)?;
        Ok(logits.data)
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut v = self.trunk.params_mut();
        v.extend(self.head.params_mut());
        v
    }

    fn params(&self) -> Vec<&Parameter> {
        let mut v = self.trunk.params();
        v.extend(self.head.params());
        v
    }

    fn named_tensors(&self) -> Vec<(String, Tensor)> {
        let mut v = self.trunk.named_tensors();
        for p in self.head.params() {
            v.push((p.name.clone(), p.value.clone()));
        }
        v
    }

    fn load_named(&mut self, tensors: &[(String, Tensor)]) -> Result<()> {
        let (lookup, check) = named_lookup(tensors);
        self.trunk.load_named(&lookup)?;
        for p in self.head.params_mut() {
            p.value = lookup(&p.name.clone(), &p.value.shape.clone())?;
        }
        check()
    }

    fn descriptor(&self) -> String {
        format!(
            "model = cnn_only\nn_bs = {}\nn_ue = {}\nseq_len = {}\ngrowth = {}\nfcl = {},{},{}\nclasses = {}\nfeatures = {}\nparams = {}\n",
            self.cfg.n_bs,
            self.cfg.n_ue,
            self.cfg.seq_len,
            self.cfg.growth,
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
