//! Flat key=value run configuration shared by every command.
//!
//! Keys are grouped by prefix: `channel.` (scenario template), `phy.` (link
//! constants), `model.` (network shape), `train.` (supervised loop), `dqn.`
//! (agent), and `data.` (catalog, window, split, paths). Unknown or repeated
//! keys are rejected so a typo cannot silently fall back to a default.

use std::path::Path;

use crate::baselines::DqnConfig;
use crate::channel::ScenarioConfig;
use crate::datastore::{catalog_from_template, mini_catalog_from_template, CatalogEntry};
use crate::models::{CnnLstmConfig, TrainConfig};
use crate::phy::{LinkConfig, N_CLASSES};
use crate::{Error, Result};

/// Which scenario sweep to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CatalogKind {
    /// Twelve scenarios at full length (336 frames each).
    Paper,
    /// Twelve scenarios sized for a desk run (62 static / 132 mobile frames).
    Desk,
    /// Two scenarios for smoke tests.
    Mini,
}

impl CatalogKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CatalogKind::Paper => "paper",
            CatalogKind::Desk => "desk",
            CatalogKind::Mini => "mini",
        }
    }

    pub fn parse(s: &str) -> Result<CatalogKind> {
        match s {
            "paper" => Ok(CatalogKind::Paper),
            "desk" => Ok(CatalogKind::Desk),
            "mini" => Ok(CatalogKind::Mini),
            other => Err(Error::Config(format!(
                "unknown catalog {other:?}, expected paper|desk|mini"
            ))),
        }
    }

    /// Preset (static, mobile) frame counts.
    fn default_frames(&self) -> (u32, u32) {
        match self {
            CatalogKind::Paper => (336, 336),
            CatalogKind::Desk | CatalogKind::Mini => (62, 132),
        }
    }
}

/// Dataset-level knobs: what to simulate and how to split it.
#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub catalog: CatalogKind,
    /// Master seed the per-scenario channel seeds are derived from.
    pub base_seed: u64,
    /// Frames per sample window.
    pub window: usize,
    /// 0 means the catalog preset count.
    pub static_frames: u32,
    /// 0 means the catalog preset count.
    pub mobile_frames: u32,
    pub train_fraction: f64,
    pub split_seed: u64,
    /// Default dataset path; commands override it with --data.
    pub dataset: String,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            catalog: CatalogKind::Desk,
            base_seed: 1,
            window: 3,
            static_frames: 0,
            mobile_frames: 0,
            train_fraction: 0.84375,
            split_seed: 1,
            dataset: String::new(),
        }
    }
}

/// Network-shape knobs that are not pinned by the dataset geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelKnobs {
    pub growth: usize,
    pub lstm_hidden: usize,
    pub fcl1: usize,
    pub fcl2: usize,
    pub init_seed: u64,
}

impl Default for ModelKnobs {
    fn default() -> Self {
        ModelKnobs { growth: 8, lstm_hidden: 64, fcl1: 128, fcl2: 64, init_seed: 1 }
    }
}

/// Everything a command needs, parsed from one structured-text file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Scenario template; the catalog sweeps placement, sight, and mobility
    /// over it, and `speed_mps` applies to the mobile scenarios.
    pub channel: ScenarioConfig,
    pub link: LinkConfig,
    pub model: ModelKnobs,
    pub train: TrainConfig,
    pub dqn: DqnConfig,
    pub data: DataConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            channel: ScenarioConfig { speed_mps: 3.0, ..ScenarioConfig::default() },
            link: LinkConfig::default(),
            model: ModelKnobs::default(),
            train: TrainConfig::default(),
            dqn: DqnConfig::default(),
            data: DataConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parse a config file body. Every key is optional (defaults apply);
    /// unknown and repeated keys are errors.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("config line {}: expected key=value, got {raw:?}", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("config repeats key {key}")));
            }
            cfg.apply(key, value).map_err(|e| {
                // Keep the location prefix but avoid stacking class prefixes.
                let msg = match e {
                    Error::Config(m) => m,
                    other => other.to_string(),
                };
                Error::Config(format!("config line {}: {msg}", lineno + 1))
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        fn p<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            value.parse().map_err(|e| Error::Config(format!("key {key}: {e}")))
        }
        match key {
            "channel.n_bs" => self.channel.n_bs = p(key, value)?,
            "channel.n_ue" => self.channel.n_ue = p(key, value)?,
            "channel.n_scatterers" => self.channel.n_scatterers = p(key, value)?,
            "channel.cluster_spread_rad" => self.channel.cluster_spread_rad = p(key, value)?,
            "channel.rician_k_db" => self.channel.rician_k_db = p(key, value)?,
            "channel.speed_mps" => self.channel.speed_mps = p(key, value)?,
            "channel.carrier_hz" => self.channel.carrier_hz = p(key, value)?,
            "channel.frame_s" => self.channel.frame_s = p(key, value)?,
            "channel.cell_radius_m" => self.channel.cell_radius_m = p(key, value)?,
            "phy.tx_power_w" => self.link.tx_power_w = p(key, value)?,
            "phy.noise_power_w" => self.link.noise_power = p(key, value)?,
            "phy.ber_threshold" => self.link.ber_threshold = p(key, value)?,
            "phy.coding_gain_coeff_db" => self.link.coding_gain_coeff_db = p(key, value)?,
            "model.growth" => self.model.growth = p(key, value)?,
            "model.lstm_hidden" => self.model.lstm_hidden = p(key, value)?,
            "model.fcl1" => self.model.fcl1 = p(key, value)?,
            "model.fcl2" => self.model.fcl2 = p(key, value)?,
            "model.init_seed" => self.model.init_seed = p(key, value)?,
            "train.batch_size" => self.train.batch_size = p(key, value)?,
            "train.learning_rate" => self.train.learning_rate = p(key, value)?,
            "train.epochs" => self.train.epochs = p(key, value)?,
            "train.seed" => self.train.seed = p(key, value)?,
            "train.eval_every" => self.train.eval_every = p(key, value)?,
            "dqn.epsilon_start" => self.dqn.epsilon_start = p(key, value)?,
            "dqn.epsilon_end" => self.dqn.epsilon_end = p(key, value)?,
            "dqn.epsilon_decay_steps" => self.dqn.epsilon_decay_steps = p(key, value)?,
            "dqn.gamma" => self.dqn.gamma = p(key, value)?,
            "dqn.replay_capacity" => self.dqn.replay_capacity = p(key, value)?,
            "dqn.batch_size" => self.dqn.batch_size = p(key, value)?,
            "dqn.target_sync" => self.dqn.target_sync = p(key, value)?,
            "dqn.learning_rate" => self.dqn.learning_rate = p(key, value)?,
            "dqn.max_grad_norm" => self.dqn.max_grad_norm = p(key, value)?,
            "dqn.train_steps" => self.dqn.train_steps = p(key, value)?,
            "dqn.seed" => self.dqn.seed = p(key, value)?,
            "data.catalog" => self.data.catalog = CatalogKind::parse(value)?,
            "data.base_seed" => self.data.base_seed = p(key, value)?,
            "data.window" => self.data.window = p(key, value)?,
            "data.static_frames" => self.data.static_frames = p(key, value)?,
            "data.mobile_frames" => self.data.mobile_frames = p(key, value)?,
            "data.train_fraction" => self.data.train_fraction = p(key, value)?,
            "data.split_seed" => self.data.split_seed = p(key, value)?,
            "data.dataset" => self.data.dataset = value.to_string(),
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Canonical text form listing every effective value; parse(render()) is
    /// the identity, and the render is what commands echo into output dirs.
    pub fn render(&self) -> String {
        let c = &self.channel;
        let l = &self.link;
        let m = &self.model;
        let t = &self.train;
        let q = &self.dqn;
        let d = &self.data;
        let mut s = String::new();
        for (k, v) in [
            ("channel.n_bs", c.n_bs.to_string()),
            ("channel.n_ue", c.n_ue.to_string()),
            ("channel.n_scatterers", c.n_scatterers.to_string()),
            ("channel.cluster_spread_rad", c.cluster_spread_rad.to_string()),
            ("channel.rician_k_db", c.rician_k_db.to_string()),
            ("channel.speed_mps", c.speed_mps.to_string()),
            ("channel.carrier_hz", c.carrier_hz.to_string()),
            ("channel.frame_s", c.frame_s.to_string()),
            ("channel.cell_radius_m", c.cell_radius_m.to_string()),
            ("phy.tx_power_w", l.tx_power_w.to_string()),
            ("phy.noise_power_w", l.noise_power.to_string()),
            ("phy.ber_threshold", l.ber_threshold.to_string()),
            ("phy.coding_gain_coeff_db", l.coding_gain_coeff_db.to_string()),
            ("model.growth", m.growth.to_string()),
            ("model.lstm_hidden", m.lstm_hidden.to_string()),
            ("model.fcl1", m.fcl1.to_string()),
            ("model.fcl2", m.fcl2.to_string()),
            ("model.init_seed", m.init_seed.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.learning_rate", t.learning_rate.to_string()),
            ("train.epochs", t.epochs.to_string()),
            ("train.seed", t.seed.to_string()),
            ("train.eval_every", t.eval_every.to_string()),
            ("dqn.epsilon_start", q.epsilon_start.to_string()),
            ("dqn.epsilon_end", q.epsilon_end.to_string()),
            ("dqn.epsilon_decay_steps", q.epsilon_decay_steps.to_string()),
            ("dqn.gamma", q.gamma.to_string()),
            ("dqn.replay_capacity", q.replay_capacity.to_string()),
            ("dqn.batch_size", q.batch_size.to_string()),
            ("dqn.target_sync", q.target_sync.to_string()),
            ("dqn.learning_rate", q.learning_rate.to_string()),
            ("dqn.max_grad_norm", q.max_grad_norm.to_string()),
            ("dqn.train_steps", q.train_steps.to_string()),
            ("dqn.seed", q.seed.to_string()),
            ("data.catalog", d.catalog.as_str().to_string()),
            ("data.base_seed", d.base_seed.to_string()),
            ("data.window", d.window.to_string()),
            ("data.static_frames", d.static_frames.to_string()),
            ("data.mobile_frames", d.mobile_frames.to_string()),
            ("data.train_fraction", d.train_fraction.to_string()),
            ("data.split_seed", d.split_seed.to_string()),
            ("data.dataset", d.dataset.clone()),
        ] {
            s.push_str(&format!("{k}={v}\n"));
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        // The scenario template is checked with mobility applied, since the
        // raw template carries the mobile speed.
        ScenarioConfig {
            mobility: crate::channel::Mobility::Mobile,
            ..self.channel.clone()
        }
        .validate()?;
        self.link.validate()?;
        self.train.validate()?;
        self.dqn.validate()?;
        if self.model.growth == 0 || self.model.lstm_hidden == 0 || self.model.fcl1 == 0 || self.model.fcl2 == 0 {
            return Err(Error::Config("model widths must be positive".into()));
        }
        if self.data.window < 1 {
            return Err(Error::Config("data.window must be at least 1".into()));
        }
        if !(self.data.train_fraction > 0.0 && self.data.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "data.train_fraction must lie in (0, 1), got {}",
                self.data.train_fraction
            )));
        }
        Ok(())
    }

    /// The scenario list this config simulates.
    pub fn catalog(&self) -> Vec<CatalogEntry> {
        let (static_default, mobile_default) = self.data.catalog.default_frames();
        let static_frames = if self.data.static_frames > 0 { self.data.static_frames } else { static_default };
        let mobile_frames = if self.data.mobile_frames > 0 { self.data.mobile_frames } else { mobile_default };
        match self.data.catalog {
            CatalogKind::Paper | CatalogKind::Desk => {
                catalog_from_template(&self.channel, self.data.base_seed, static_frames, mobile_frames)
            }
            CatalogKind::Mini => {
                mini_catalog_from_template(&self.channel, self.data.base_seed, static_frames, mobile_frames)
            }
        }
    }

    /// Network shape implied by the channel geometry plus the model knobs.
    pub fn model_config(&self) -> CnnLstmConfig {
        CnnLstmConfig {
            n_bs: self.channel.n_bs,
            n_ue: self.channel.n_ue,
            seq_len: self.data.window,
            growth: self.model.growth,
            lstm_hidden: self.model.lstm_hidden,
            fcl_sizes: [self.model.fcl1, self.model.fcl2, N_CLASSES],
            classes: N_CLASSES,
            init_seed: self.model.init_seed,
        }
    }

    /// Flattened sample length the agent's value network consumes.
    pub fn dqn_state_len(&self) -> usize {
        self.data.window * 2 * self.channel.n_bs * self.channel.n_ue
    }

    /// Replace every seed-bearing knob; used by --seed-override.
    pub fn override_seeds(&mut self, seed: u64) {
        self.data.base_seed = seed;
        self.data.split_seed = seed;
        self.train.seed = seed;
        self.dqn.seed = seed;
        self.model.init_seed = seed;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_render_and_parse_back_identically() {
        let cfg = RunConfig::default();
        let text = cfg.render();
        let parsed = RunConfig::parse(&text).unwrap();
        assert_eq!(parsed, cfg);
        assert_eq!(parsed.render(), text);
    }

    #[test]
    fn empty_config_is_all_defaults() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let commented = RunConfig::parse("# nothing but remarks\n\n# more\n").unwrap();
        assert_eq!(commented, RunConfig::default());
    }

    #[test]
    fn unknown_and_repeated_keys_are_rejected() {
        assert!(matches!(RunConfig::parse("channel.n_b=8\n"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("trian.epochs=5\n"), Err(Error::Config(_))));
        let twice = "train.epochs=5\ntrain.epochs=6\n";
        assert!(matches!(RunConfig::parse(twice), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("just a line\n"), Err(Error::Config(_))));
    }

    #[test]
    fn values_land_in_the_right_struct() {
        let text = "channel.n_bs=16\nphy.ber_threshold=0.01\nmodel.growth=4\n\
                    train.epochs=7\ndqn.train_steps=123\ndata.catalog=mini\ndata.window=2\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.channel.n_bs, 16);
        assert_eq!(cfg.link.ber_threshold, 0.01);
        assert_eq!(cfg.model.growth, 4);
        assert_eq!(cfg.train.epochs, 7);
        assert_eq!(cfg.dqn.train_steps, 123);
        assert_eq!(cfg.data.catalog, CatalogKind::Mini);
        assert_eq!(cfg.data.window, 2);
        // Derived model shape follows the channel geometry.
        let mc = cfg.model_config();
        assert_eq!(mc.n_bs, 16);
        assert_eq!(mc.seq_len, 2);
        assert_eq!(mc.fcl_sizes, [128, 64, 15]);
        assert_eq!(cfg.dqn_state_len(), 2 * 2 * 16 * 4);
    }

    #[test]
    fn invalid_values_fail_validation() {
        assert!(RunConfig::parse("data.train_fraction=1.0\n").is_err());
        assert!(RunConfig::parse("data.window=0\n").is_err());
        assert!(RunConfig::parse("channel.n_ue=40\n").is_err());
        assert!(RunConfig::parse("train.batch_size=1\n").is_err());
        assert!(RunConfig::parse("dqn.epsilon_start=2.0\n").is_err());
    }

    #[test]
    fn catalog_presets_and_overrides() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.catalog().len(), 12);
        assert_eq!(cfg.catalog()[0].frames, 62);

        let mini = RunConfig::parse(
            "data.catalog=mini\ndata.static_frames=10\ndata.mobile_frames=10\n",
        )
        .unwrap();
        let catalog = mini.catalog();
        assert_eq!(catalog.len(), 2);
        assert!(catalog.iter().all(|e| e.frames == 10));

        let paper = RunConfig::parse("data.catalog=paper\n").unwrap();
        assert_eq!(paper.catalog()[0].frames, 336);
        // Template geometry propagates into every entry.
        let wide = RunConfig::parse("channel.n_bs=64\ndata.catalog=paper\n").unwrap();
        assert!(wide.catalog().iter().all(|e| e.cfg.n_bs == 64));
    }

    #[test]
    fn seed_override_touches_every_seed() {
        let mut cfg = RunConfig::default();
        cfg.override_seeds(99);
        assert_eq!(cfg.data.base_seed, 99);
        assert_eq!(cfg.data.split_seed, 99);
        assert_eq!(cfg.train.seed, 99);
        assert_eq!(cfg.dqn.seed, 99);
        assert_eq!(cfg.model.init_seed, 99);
    }
}
