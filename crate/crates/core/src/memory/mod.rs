//! Event graph storage: events, typed relations, the topic layer and
//! point-in-time snapshots.

mod embed;
mod graph;
mod similarity;
mod snapshot;

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub use embed::{EmbedError, Embedder, HashEmbedder, HttpEmbedder};
pub use graph::{Direction, EventGraph, Neighbor};
pub use similarity::{cosine_similarity, l2_normalize, mean_vector, squared_distance, SimilarityError};
pub use snapshot::{GraphSnapshot, MemoryStore, SCHEMA_VERSION};

pub const MAX_PARTICIPANTS: usize = 3;

/// One observation: a dialogue turn or a narrative sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    #[serde(rename = "utterance_id")]
    pub id: String,
    pub session_id: String,
    #[serde(default)]
    pub speaker: String,
    #[serde(default)]
    pub timestamp: String,
    pub text: String,
}

/// A coherent unit of experience and the node type of the graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub id: String,
    /// Utterance ids, in observation order.
    pub span: Vec<String>,
    pub time_info: String,
    pub summary: String,
    pub participants: Vec<String>,
    pub embedding: Vec<f64>,
    pub session_ids: BTreeSet<String>,
}

/// A typed, directed edge between two events.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub src: String,
    pub dst: String,
    pub label: String,
    #[serde(default)]
    pub evidence: Vec<String>,
}

/// A semantic cluster of events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub id: String,
    pub centroid: Vec<f64>,
    pub members: BTreeSet<String>,
    pub member_count: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MemoryError {
    #[error("unknown event `{0}`")]
    UnknownEvent(String),
    #[error("relation {src} -> {dst} references a missing endpoint")]
    DanglingEndpoint { src: String, dst: String },
    #[error("invalid event `{id}`: {reason}")]
    InvalidEvent { id: String, reason: String },
    #[error("invalid relation {src} -> {dst}: {reason}")]
    InvalidRelation {
        src: String,
        dst: String,
        reason: String,
    },
    #[error("embedding dimension {got} does not match store dimension {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("malformed snapshot: {0}")]
    MalformedSnapshot(String),
    #[error("snapshot schema version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("referential integrity violated: {0}")]
    Integrity(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Event {
    pub fn validate(&self) -> Result<(), MemoryError> {
        let fail = |reason: &str| {
            Err(MemoryError::InvalidEvent {
                id: self.id.clone(),
                reason: reason.to_string(),
            })
        };
        if self.span.is_empty() {
            return fail("empty span");
        }
        if self.summary.trim().is_empty() {
            return fail("empty summary");
        }
        if self.participants.len() > MAX_PARTICIPANTS {
            return fail("more than 3 participants");
        }
        if self.embedding.is_empty() {
            return fail("missing embedding");
        }
        Ok(())
    }
}

fn label_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[a-z0-9]+(_[a-z0-9]+)*$").unwrap())
}

pub fn is_valid_label(label: &str) -> bool {
    label_pattern().is_match(label)
}

/// Folds a free-form relation type ("Temporal Before", "part-of") into a
/// lowercase snake-case token. `None` if nothing usable remains.
pub fn normalize_label(raw: &str) -> Option<String> {
    let words: Vec<String> = raw
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_ascii_lowercase)
        .collect();
    if words.is_empty() {
        None
    } else {
        Some(words.join("_"))
    }
}

impl Relation {
    pub fn new(src: impl Into<String>, dst: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            src: src.into(),
            dst: dst.into(),
            label: label.into(),
            evidence: Vec::new(),
        }
    }

    pub fn with_evidence(mut self, evidence: Vec<String>) -> Self {
        self.evidence = evidence;
        self
    }

    pub fn validate(&self) -> Result<(), MemoryError> {
        let fail = |reason: &str| {
            Err(MemoryError::InvalidRelation {
                src: self.src.clone(),
                dst: self.dst.clone(),
                reason: reason.to_string(),
            })
        };
        if self.src == self.dst {
            return fail("self-loop");
        }
        if !is_valid_label(&self.label) {
            return fail("label must be a lowercase snake-case token");
        }
        Ok(())
    }
}
