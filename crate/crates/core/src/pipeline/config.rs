//! Structured run configuration (TOML on disk) and its fingerprint.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::{ExtractionLossWeights, ExtractorConfig};
use crate::fuse::BlmConfig;
use crate::knowledge::ClassifierConfig;
use crate::metrics::TupleMatchConfig;
use crate::num::{sc, Scalar};
use crate::rng::fnv1a64;
use crate::select::{BaselineMode, PolicyConfig, PolicyTrainConfig, RewardWeights, RsSampling};

/// Environment variable overriding `train.seed`.
pub const SEED_ENV_VAR: &str = "NUTRIBULLET_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsSection {
    pub corpus: String,
    pub checkpoints: String,
    /// Optional pretrained embedding file (`word v1 … vd`). When unset, a
    /// seeded table over the corpus vocabulary is derived and saved next to
    /// the checkpoints.
    pub embeddings: Option<String>,
    /// Optional entity lexicon TSV; the default lexicon is collected from
    /// the corpus annotations.
    pub lexicon: Option<String>,
    /// Optional category vocabulary JSON for fusion blanks.
    pub category_vocab: Option<String>,
}

impl Default for PathsSection {
    fn default() -> Self {
        PathsSection {
            corpus: "corpus.jsonl".into(),
            checkpoints: "checkpoints".into(),
            embeddings: None,
            lexicon: None,
            category_vocab: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedSection {
    pub dim: usize,
}

impl Default for EmbedSection {
    fn default() -> Self {
        EmbedSection { dim: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractSection {
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub holdout_fraction: f64,
    pub entropy_weight: f64,
    pub warmup_epochs: usize,
    pub lambda_len: f64,
    pub lambda_disc: f64,
    pub lambda_anchor: f64,
}

impl Default for ExtractSection {
    fn default() -> Self {
        ExtractSection {
            hidden: 200,
            lr: 0.02,
            epochs: 20,
            holdout_fraction: 0.2,
            entropy_weight: 0.02,
            warmup_epochs: 3,
            lambda_len: 0.1,
            lambda_disc: 0.2,
            lambda_anchor: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnowledgeSection {
    pub theta_rel: f64,
    pub epochs: usize,
    pub lr: f64,
    pub holdout_fraction: f64,
}

impl Default for KnowledgeSection {
    fn default() -> Self {
        KnowledgeSection {
            theta_rel: 0.5,
            epochs: 40,
            lr: 0.05,
            holdout_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardSection {
    pub w_e: f64,
    pub w_d: f64,
    pub w_s: f64,
    pub w_m: f64,
    pub r_p: f64,
    pub delta: f64,
    pub rs_sampling: RsSampling,
}

impl Default for RewardSection {
    fn default() -> Self {
        RewardSection {
            w_e: 1.0,
            w_d: 1.0,
            w_s: 1.0,
            w_m: 0.75,
            r_p: 0.02,
            delta: 0.99,
            rs_sampling: RsSampling::PerC,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicySection {
    pub hidden_sizes: Vec<usize>,
}

impl Default for PolicySection {
    fn default() -> Self {
        PolicySection {
            hidden_sizes: vec![64, 32],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub episodes: usize,
    pub seed: u64,
    pub lr: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            episodes: 2000,
            seed: 42,
            lr: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FuseSection {
    pub blm_dim: usize,
    pub blm_hidden: usize,
    pub blm_lr: f64,
    pub blm_epochs: usize,
    pub min_sentences: usize,
    /// Decode budget: `max_steps = blanks * max_steps_per_blank`.
    pub max_steps_per_blank: usize,
}

impl Default for FuseSection {
    fn default() -> Self {
        FuseSection {
            blm_dim: 32,
            blm_hidden: 64,
            blm_lr: 0.01,
            blm_epochs: 60,
            min_sentences: 100,
            max_steps_per_blank: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsSection {
    pub tau: f64,
    pub require_relation_equality: bool,
}

impl Default for MetricsSection {
    fn default() -> Self {
        MetricsSection {
            tau: 0.7,
            require_relation_equality: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub paths: PathsSection,
    pub embed: EmbedSection,
    pub extract: ExtractSection,
    pub knowledge: KnowledgeSection,
    pub reward: RewardSection,
    pub policy: PolicySection,
    pub train: TrainSection,
    pub fuse: FuseSection,
    pub metrics: MetricsSection,
}

impl PipelineConfig {
    /// Parse a TOML config file and apply the seed env override.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let mut cfg: PipelineConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.as_ref().display())))?;
        cfg.apply_env_override()?;
        Ok(cfg)
    }

    pub fn apply_env_override(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV_VAR) {
            self.train.seed = v.parse().map_err(|_| {
                Error::Config(format!("{SEED_ENV_VAR} must be an unsigned integer, got `{v}`"))
            })?;
        }
        Ok(())
    }

    /// Stable fingerprint of every config field.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a64(canonical.as_bytes()))
    }

    pub fn checkpoint_path(&self, name: &str) -> PathBuf {
        Path::new(&self.paths.checkpoints).join(name)
    }

    pub fn extractor_config(&self) -> ExtractorConfig {
        ExtractorConfig {
            hidden: self.extract.hidden,
            lr: self.extract.lr,
            epochs: self.extract.epochs,
            seed: self.train.seed,
            holdout_fraction: self.extract.holdout_fraction,
            baseline_decay: 0.95,
            entropy_weight: self.extract.entropy_weight,
            warmup_epochs: self.extract.warmup_epochs,
            batch_size: 16,
        }
    }

    pub fn loss_weights<S: Scalar>(&self) -> ExtractionLossWeights<S> {
        ExtractionLossWeights {
            len: sc(self.extract.lambda_len),
            disc: sc(self.extract.lambda_disc),
            anchor: sc(self.extract.lambda_anchor),
        }
    }

    pub fn classifier_config(&self) -> ClassifierConfig {
        ClassifierConfig {
            seed: self.train.seed,
            epochs: self.knowledge.epochs,
            lr: self.knowledge.lr,
            holdout_fraction: self.knowledge.holdout_fraction,
        }
    }

    pub fn reward_weights<S: Scalar>(&self) -> RewardWeights<S> {
        RewardWeights {
            w_e: sc(self.reward.w_e),
            w_d: sc(self.reward.w_d),
            w_s: sc(self.reward.w_s),
            w_m: sc(self.reward.w_m),
            r_p: sc(self.reward.r_p),
            delta: sc(self.reward.delta),
        }
    }

    pub fn policy_config(&self) -> Result<PolicyConfig> {
        if self.policy.hidden_sizes.len() != 2 {
            return Err(Error::Config(
                "policy.hidden_sizes must list exactly two layer sizes".into(),
            ));
        }
        Ok(PolicyConfig {
            hidden_sizes: [self.policy.hidden_sizes[0], self.policy.hidden_sizes[1]],
        })
    }

    pub fn policy_train_config(&self) -> PolicyTrainConfig {
        PolicyTrainConfig {
            episodes: self.train.episodes,
            lr: self.train.lr,
            seed: self.train.seed,
            baseline_decay: 0.95,
            entropy_weight: 0.01,
            episodes_per_step: 1,
            exploration: 0.1,
            stop_exploration: 0.2,
            baseline: BaselineMode::StateRollout,
            warmup_episodes: self.train.episodes * 3 / 10,
            warmup_length: 2,
        }
    }

    pub fn blm_config(&self) -> BlmConfig {
        BlmConfig {
            dim: self.fuse.blm_dim,
            hidden: self.fuse.blm_hidden,
            lr: self.fuse.blm_lr,
            epochs: self.fuse.blm_epochs,
            seed: self.train.seed,
            holdout_fraction: 0.2,
            min_sentences: self.fuse.min_sentences,
            max_gap: 4,
        }
    }

    pub fn tuple_match_config<S: Scalar>(&self) -> TupleMatchConfig<S> {
        TupleMatchConfig {
            tau: sc(self.metrics.tau),
            require_relation_equality: self.metrics.require_relation_equality,
        }
    }
}
