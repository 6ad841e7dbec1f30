//! TOML run configuration. Every field has a default matching the owning
//! module's constant, every section is optional, and unknown keys are
//! rejected so typos fail loudly instead of silently running defaults.
//! Command-line flags override whatever the file says.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::ackb::EmbedderSpec;
use crate::error::{Error, Result};
use crate::motion::{
    MdTrainConfig, DEFAULT_D_LAT, DEFAULT_EULER_STEPS, DEFAULT_N_FRAMES, DEFAULT_RANK,
    DEFAULT_SCALE,
};
use crate::policy::TrainConfig;
use crate::scgat::{DEFAULT_INIT_EPS, DEFAULT_K};
use crate::script::{HttpLlm, LlmClient, MockLlm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedderConfig {
    pub dim: usize,
    pub ngram_size: usize,
    pub hash_seed: u64,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        let spec = EmbedderSpec::default();
        Self {
            dim: spec.dim,
            ngram_size: spec.ngram_size,
            hash_seed: spec.hash_seed,
        }
    }
}

impl EmbedderConfig {
    pub fn spec(&self) -> EmbedderSpec {
        EmbedderSpec {
            dim: self.dim,
            ngram_size: self.ngram_size,
            hash_seed: self.hash_seed,
            ..EmbedderSpec::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    pub k: usize,
    pub init_eps: f64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            init_eps: DEFAULT_INIT_EPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlConfig {
    pub steps: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
}

impl Default for RlConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        Self {
            steps: train.steps,
            lr: train.learning_rate,
            batch: train.batch,
            seed: train.rng_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionConfig {
    pub d_lat: usize,
    pub n: usize,
    pub rank: usize,
    pub scale: f64,
    pub steps: usize,
    pub lr: f64,
    pub t_samples: usize,
    pub euler_steps: usize,
    pub seed: u64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        let train = MdTrainConfig::default();
        Self {
            d_lat: DEFAULT_D_LAT,
            n: DEFAULT_N_FRAMES,
            rank: DEFAULT_RANK,
            scale: DEFAULT_SCALE,
            steps: train.steps,
            lr: train.learning_rate,
            t_samples: train.t_samples,
            euler_steps: DEFAULT_EULER_STEPS,
            seed: train.rng_seed,
        }
    }
}

impl MotionConfig {
    pub fn train_config(&self) -> MdTrainConfig {
        MdTrainConfig {
            steps: self.steps,
            learning_rate: self.lr,
            t_samples: self.t_samples,
            rng_seed: self.seed,
            ..MdTrainConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LlmMode {
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    pub mode: LlmMode,
    pub endpoint: Option<String>,
    pub timeout_ms: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            mode: LlmMode::Mock,
            endpoint: None,
            timeout_ms: 5_000,
        }
    }
}

impl LlmConfig {
    /// Instantiates the configured client. The http mode requires an
    /// endpoint.
    pub fn client(&self) -> Result<Box<dyn LlmClient>> {
        match self.mode {
            LlmMode::Mock => Ok(Box::new(MockLlm)),
            LlmMode::Http => {
                let endpoint = self.endpoint.as_deref().ok_or_else(|| {
                    Error::Config("llm.mode = \"http\" requires llm.endpoint".into())
                })?;
                Ok(Box::new(HttpLlm::new(
                    endpoint,
                    Duration::from_millis(self.timeout_ms),
                )))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub kb: PathBuf,
    pub models: PathBuf,
    pub reports: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            kb: PathBuf::from("kb.json"),
            models: PathBuf::from("models"),
            reports: PathBuf::from("reports"),
        }
    }
}

/// Top-level run configuration; see the section types for the knobs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub embedder: EmbedderConfig,
    pub retrieval: RetrievalConfig,
    pub rl: RlConfig,
    pub motion: MotionConfig,
    pub llm: LlmConfig,
    pub paths: PathsConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    /// The policy-training knobs as the trainer's config (retrieval k and
    /// init_eps ride along because sampling happens during training).
    pub fn rl_train_config(&self) -> TrainConfig {
        TrainConfig {
            steps: self.rl.steps,
            learning_rate: self.rl.lr,
            batch: self.rl.batch,
            rng_seed: self.rl.seed,
            k: self.retrieval.k,
            init_eps: self.retrieval.init_eps,
            ..TrainConfig::default()
        }
    }
}
