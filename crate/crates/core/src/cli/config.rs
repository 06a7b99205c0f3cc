//! Flat `key = value` configuration layered over built-in defaults.

use std::collections::BTreeMap;
use std::path::Path;

use crate::base_learner::TrainConfig;
use crate::cleaning::CleanConfig;
use crate::stacker::{GbdtConfig, SplitProtocol};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub base_fraction: f64,
    pub stack_folds: usize,
    pub clean: CleanConfig,
    pub base: TrainConfig,
    pub gbdt: GbdtConfig,
    /// Width of the hashed bag-of-words vector used when no input vectors
    /// are supplied to the base learner.
    pub hash_dim: usize,
    pub threshold: f64,
    pub page_size: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let split = SplitProtocol::default();
        PipelineConfig {
            seed: 0,
            base_fraction: split.base_fraction,
            stack_folds: split.stack_folds,
            clean: CleanConfig::default(),
            base: TrainConfig::default(),
            gbdt: GbdtConfig::default(),
            hash_dim: 512,
            threshold: 0.5,
            page_size: crate::ingest::MAX_PAGE_SIZE,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

impl PipelineConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "seed" => self.seed = parse(key, v)?,
            "base_fraction" => self.base_fraction = parse(key, v)?,
            "stack_folds" => self.stack_folds = parse(key, v)?,
            "min_words" => self.clean.min_words = parse(key, v)?,
            "max_words" => self.clean.max_words = parse(key, v)?,
            "english_stopword_ratio_threshold" => {
                self.clean.english_stopword_ratio_threshold = parse(key, v)?
            }
            "base.learning_rate" => self.base.learning_rate = parse(key, v)?,
            "base.epochs" => self.base.epochs = parse(key, v)?,
            "base.batch_size" => self.base.batch_size = parse(key, v)?,
            "base.l2" => self.base.l2 = parse(key, v)?,
            "base.use_bias" => self.base.use_bias = parse(key, v)?,
            "gbdt.num_rounds" => self.gbdt.num_rounds = parse(key, v)?,
            "gbdt.learning_rate" => self.gbdt.learning_rate = parse(key, v)?,
            "gbdt.max_depth" => self.gbdt.max_depth = parse(key, v)?,
            "gbdt.max_bins" => self.gbdt.max_bins = parse(key, v)?,
            "gbdt.lambda" => self.gbdt.lambda = parse(key, v)?,
            "gbdt.min_gain" => self.gbdt.min_gain = parse(key, v)?,
            "gbdt.max_leaves" => self.gbdt.max_leaves = parse(key, v)?,
            "gbdt.min_child_hessian" => self.gbdt.min_child_hessian = parse(key, v)?,
            "hash_dim" => self.hash_dim = parse(key, v)?,
            "threshold" => self.threshold = parse(key, v)?,
            "page_size" => self.page_size = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Apply `key = value` lines; `#` starts a comment line.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let at = format!("{}:{}", origin.display(), i + 1);
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("{at}: expected key = value")))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("{at}: {e}")))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text, path)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.clean.validate().map_err(Error::Config)?;
        self.base.validate()?;
        self.gbdt.validate()?;
        if !(self.base_fraction > 0.0 && self.base_fraction < 1.0) {
            return Err(Error::Config(format!(
                "base_fraction must be in (0, 1), got {}",
                self.base_fraction
            )));
        }
        if self.stack_folds < 2 {
            return Err(Error::Config("stack_folds must be at least 2".into()));
        }
        if self.page_size == 0 {
            return Err(Error::Config("page_size must be positive".into()));
        }
        if self.hash_dim == 0 {
            return Err(Error::Config("hash_dim must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config("threshold must be in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn split_protocol(&self) -> SplitProtocol {
        SplitProtocol {
            base_fraction: self.base_fraction,
            stack_folds: self.stack_folds,
            seed: self.seed,
        }
    }

    pub fn base_train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.base.clone()
        }
    }

    /// Every key with its effective value, for manifests.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let c = &self.clean;
        let b = &self.base;
        let g = &self.gbdt;
        [
            ("seed", self.seed.to_string()),
            ("base_fraction", self.base_fraction.to_string()),
            ("stack_folds", self.stack_folds.to_string()),
            ("min_words", c.min_words.to_string()),
            ("max_words", c.max_words.to_string()),
            (
                "english_stopword_ratio_threshold",
                c.english_stopword_ratio_threshold.to_string(),
            ),
            ("base.learning_rate", b.learning_rate.to_string()),
            ("base.epochs", b.epochs.to_string()),
            ("base.batch_size", b.batch_size.to_string()),
            ("base.l2", b.l2.to_string()),
            ("base.use_bias", b.use_bias.to_string()),
            ("gbdt.num_rounds", g.num_rounds.to_string()),
            ("gbdt.learning_rate", g.learning_rate.to_string()),
            ("gbdt.max_depth", g.max_depth.to_string()),
            ("gbdt.max_bins", g.max_bins.to_string()),
            ("gbdt.lambda", g.lambda.to_string()),
            ("gbdt.min_gain", g.min_gain.to_string()),
            ("gbdt.max_leaves", g.max_leaves.to_string()),
            ("gbdt.min_child_hessian", g.min_child_hessian.to_string()),
            ("hash_dim", self.hash_dim.to_string()),
            ("threshold", self.threshold.to_string()),
            ("page_size", self.page_size.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}
