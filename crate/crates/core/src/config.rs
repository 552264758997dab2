//! Engine configuration.
//!
//! A flat key/value document (TOML) carrying every tunable of construction,
//! topic maintenance, search and the LLM gateway. Missing keys fall back to
//! the defaults below.

use std::path::Path;

use serde::{Deserialize, Serialize};

/// What to emit when a prompt binding is empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmptyBindingPolicy {
    /// Substitute the literal marker `(none)`.
    #[default]
    NoneMarker,
    /// Refuse to render.
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Cosine prefilter above which a new event is checked for coreference.
    pub merge_threshold: f64,
    /// Minimum cosine to an existing topic centroid for an online join.
    pub topic_threshold: f64,
    /// Re-cluster every `recluster_period` construction steps.
    pub recluster_period: u64,
    pub kmeans_seed: u64,
    pub top_k: usize,
    pub top_p_topics: usize,
    pub num_explorers: usize,
    pub max_refinement_rounds: u32,
    pub subgoal_min: usize,
    pub subgoal_max: usize,
    pub path_step_cap: usize,
    /// Dimension of the offline hashing embedder.
    pub embedding_dim: usize,
    pub embedding_seed: u64,
    pub temperature: f64,
    pub max_tokens: u32,
    pub empty_binding: EmptyBindingPolicy,
    /// Concurrent questions during a benchmark run.
    pub bench_workers: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            merge_threshold: 0.9,
            topic_threshold: 0.9,
            recluster_period: 4,
            kmeans_seed: 42,
            top_k: 5,
            top_p_topics: 5,
            num_explorers: 3,
            max_refinement_rounds: 1,
            subgoal_min: 2,
            subgoal_max: 5,
            path_step_cap: 32,
            embedding_dim: 64,
            embedding_seed: 0x5eed,
            temperature: 0.0,
            max_tokens: 1024,
            empty_binding: EmptyBindingPolicy::NoneMarker,
            bench_workers: 1,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config value for `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

impl Config {
    /// Profile for long documents: wider initial retrieval, everything else unchanged.
    pub fn long_document() -> Self {
        Self {
            top_k: 10,
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let unit = |key, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(ConfigError::Invalid {
                    key,
                    reason: format!("{v} not in (0, 1]"),
                })
            }
        };
        unit("merge_threshold", self.merge_threshold)?;
        unit("topic_threshold", self.topic_threshold)?;
        let positive = |key, v: usize| {
            if v >= 1 {
                Ok(())
            } else {
                Err(ConfigError::Invalid {
                    key,
                    reason: "must be at least 1".into(),
                })
            }
        };
        positive("recluster_period", self.recluster_period as usize)?;
        positive("top_k", self.top_k)?;
        positive("num_explorers", self.num_explorers)?;
        positive("path_step_cap", self.path_step_cap)?;
        positive("embedding_dim", self.embedding_dim)?;
        positive("bench_workers", self.bench_workers)?;
        if self.subgoal_min < 1 || self.subgoal_min > self.subgoal_max {
            return Err(ConfigError::Invalid {
                key: "subgoal_min",
                reason: format!(
                    "need 1 <= subgoal_min ({}) <= subgoal_max ({})",
                    self.subgoal_min, self.subgoal_max
                ),
            });
        }
        Ok(())
    }
}
