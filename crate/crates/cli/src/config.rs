//! Declarative run configuration, read from a single TOML file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use affectline_core::emoclass::{MlpHyperParams, DEFAULT_THRESHOLD};
use affectline_core::retrieval::{BootstrapConfig, ExpansionConfig, DEFAULT_ROUNDS, DEFAULT_SAMPLE_SIZE, STOPWORD_DF_RANK};
use affectline_core::textfeat::{FeatureConfig, DEFAULT_DIM, DEFAULT_TOP_K};
use affectline_core::topics::{GibbsConfig, DEFAULT_ITERATIONS, DEFAULT_TOPICS, DEFAULT_TOP_M};
use affectline_core::trigger::{CrfFeatureConfig, CrfHyperParams};
use affectline_annosvc::DEFAULT_LEASE_SECS;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Raw post file read by `ingest` when `--input` is not given.
    pub corpus: Option<PathBuf>,
    pub features: FeaturesSection,
    pub bootstrap: BootstrapSection,
    pub relevance: MlpSection,
    pub emotion: EmotionSection,
    pub trigger: TriggerSection,
    pub topics: TopicsSection,
    pub trends: TrendsSection,
    pub serve: ServeSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSection {
    pub max_n: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapSection {
    pub rounds: u32,
    pub sample: usize,
    pub top_k: usize,
    pub replace_keywords: bool,
    pub stopword_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpSection {
    pub hidden: usize,
    pub l2: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmotionSection {
    pub hidden: usize,
    pub l2: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TriggerSection {
    pub dim: usize,
    pub l2: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub emotion_features: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicsSection {
    pub k: usize,
    pub iters: usize,
    pub alpha: Option<f64>,
    pub beta: f64,
    pub gamma: f64,
    pub average_last: usize,
    pub top_m: usize,
    /// Sweeps between checkpoint writes.
    pub checkpoint_every: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrendsSection {
    pub smooth: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSection {
    pub addr: String,
    pub lease_secs: i64,
    /// Bearer token to annotator id.
    pub tokens: BTreeMap<String, String>,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        let f = FeatureConfig::default();
        Self { max_n: f.max_n, dim: f.dim }
    }
}

impl Default for BootstrapSection {
    fn default() -> Self {
        Self {
            rounds: DEFAULT_ROUNDS as u32,
            sample: DEFAULT_SAMPLE_SIZE,
            top_k: DEFAULT_TOP_K,
            replace_keywords: false,
            stopword_rank: STOPWORD_DF_RANK,
        }
    }
}

impl Default for MlpSection {
    fn default() -> Self {
        let h = MlpHyperParams::default();
        Self {
            hidden: h.hidden,
            l2: h.l2,
            learning_rate: h.learning_rate,
            epochs: h.epochs,
            batch_size: h.batch_size,
        }
    }
}

impl Default for EmotionSection {
    fn default() -> Self {
        let m = MlpSection::default();
        Self {
            hidden: m.hidden,
            l2: m.l2,
            learning_rate: m.learning_rate,
            epochs: m.epochs,
            batch_size: m.batch_size,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl Default for TriggerSection {
    fn default() -> Self {
        let h = CrfHyperParams::default();
        Self {
            dim: DEFAULT_DIM,
            l2: h.l2,
            learning_rate: h.learning_rate,
            epochs: h.epochs,
            emotion_features: true,
        }
    }
}

impl Default for TopicsSection {
    fn default() -> Self {
        let g = GibbsConfig::default();
        Self {
            k: DEFAULT_TOPICS,
            iters: DEFAULT_ITERATIONS,
            alpha: None,
            beta: g.beta,
            gamma: g.gamma,
            average_last: 0,
            top_m: DEFAULT_TOP_M,
            checkpoint_every: 100,
        }
    }
}

impl Default for ServeSection {
    fn default() -> Self {
        Self {
            addr: "127.0.0.1:8750".into(),
            lease_secs: DEFAULT_LEASE_SECS,
            tokens: BTreeMap::new(),
        }
    }
}

fn positive(what: &str, v: f64) -> CliResult<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(config_err(format!("{what} must be positive, got {v}")))
    }
}

fn non_negative(what: &str, v: f64) -> CliResult<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(config_err(format!("{what} must be non-negative, got {v}")))
    }
}

fn at_least_one(what: &str, v: usize) -> CliResult<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(config_err(format!("{what} must be at least 1")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = affectline_core::rundir::read_text(path)?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        at_least_one("features.max_n", self.features.max_n)?;
        at_least_one("features.dim", self.features.dim)?;
        if self.features.dim > u32::MAX as usize {
            return Err(config_err("features.dim exceeds the 32-bit index space"));
        }
        at_least_one("bootstrap.rounds", self.bootstrap.rounds as usize)?;
        at_least_one("bootstrap.sample", self.bootstrap.sample)?;
        at_least_one("bootstrap.top_k", self.bootstrap.top_k)?;
        for (name, m) in [("relevance", &self.relevance), ("emotion", &self.emotion.as_mlp())] {
            at_least_one(&format!("{name}.hidden"), m.hidden)?;
            at_least_one(&format!("{name}.epochs"), m.epochs)?;
            at_least_one(&format!("{name}.batch_size"), m.batch_size)?;
            positive(&format!("{name}.learning_rate"), m.learning_rate)?;
            non_negative(&format!("{name}.l2"), m.l2)?;
        }
        let t = self.emotion.threshold;
        if !(t > 0.0 && t < 1.0) {
            return Err(config_err(format!("emotion.threshold must lie in (0, 1), got {t}")));
        }
        at_least_one("trigger.dim", self.trigger.dim)?;
        positive("trigger.learning_rate", self.trigger.learning_rate)?;
        non_negative("trigger.l2", self.trigger.l2)?;
        at_least_one("topics.k", self.topics.k)?;
        if let Some(a) = self.topics.alpha {
            positive("topics.alpha", a)?;
        }
        positive("topics.beta", self.topics.beta)?;
        positive("topics.gamma", self.topics.gamma)?;
        if self.topics.average_last > self.topics.iters {
            return Err(config_err("topics.average_last exceeds topics.iters"));
        }
        at_least_one("topics.top_m", self.topics.top_m)?;
        at_least_one("topics.checkpoint_every", self.topics.checkpoint_every)?;
        if let Some(w) = self.trends.smooth {
            at_least_one("trends.smooth", w)?;
        }
        positive("serve.lease_secs", self.serve.lease_secs as f64)?;
        Ok(())
    }

    pub fn features(&self) -> FeatureConfig {
        FeatureConfig {
            max_n: self.features.max_n,
            dim: self.features.dim,
        }
    }

    pub fn bootstrap(&self) -> BootstrapConfig {
        BootstrapConfig {
            sample_size: self.bootstrap.sample,
            seed: self.seed,
            features: self.features(),
            mlp: self.relevance.hyper(self.seed),
            expansion: ExpansionConfig {
                top_k: self.bootstrap.top_k,
                replace: self.bootstrap.replace_keywords,
            },
            stopword_rank: self.bootstrap.stopword_rank,
        }
    }

    pub fn crf(&self, dense_width: usize) -> (CrfFeatureConfig, CrfHyperParams) {
        (
            CrfFeatureConfig {
                dim: self.trigger.dim,
                dense_width,
                emotion_features: self.trigger.emotion_features,
            },
            CrfHyperParams {
                l2: self.trigger.l2,
                learning_rate: self.trigger.learning_rate,
                epochs: self.trigger.epochs,
                seed: self.seed,
            },
        )
    }

    pub fn gibbs(&self, seed: u64) -> GibbsConfig {
        GibbsConfig {
            topics: self.topics.k,
            iterations: self.topics.iters,
            alpha: self.topics.alpha,
            beta: self.topics.beta,
            gamma: self.topics.gamma,
            seed,
            average_last: self.topics.average_last,
        }
    }
}

impl MlpSection {
    pub fn hyper(&self, seed: u64) -> MlpHyperParams {
        MlpHyperParams {
            hidden: self.hidden,
            l2: self.l2,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
        }
    }
}

impl EmotionSection {
    pub fn as_mlp(&self) -> MlpSection {
        MlpSection {
            hidden: self.hidden,
            l2: self.l2,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
        }
    }
}
