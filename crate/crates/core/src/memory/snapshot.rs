//! The memory store and its JSON snapshot format.
//!
//! A snapshot is one UTF-8 JSON document with the top-level keys
//! `schema_version`, `events`, `relations`, `topics` and `config_echo`.
//! Serialization is deterministic: events, relations and topics are written
//! in id order and floats use shortest round-trip formatting, so two
//! snapshots of the same store are byte-identical and `load` restores every
//! vector exactly.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Event, EventGraph, MemoryError, Relation, Topic};
use crate::config::Config;
use crate::topics::TopicState;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSnapshot {
    pub schema_version: u32,
    pub events: Vec<Event>,
    pub relations: Vec<Relation>,
    pub topics: Vec<Topic>,
    pub config_echo: Config,
}

/// Event graph plus topic layer plus the configuration they were built with.
#[derive(Debug, Clone)]
pub struct MemoryStore {
    pub graph: EventGraph,
    pub topics: TopicState,
    pub config: Config,
}

impl MemoryStore {
    pub fn new(config: Config) -> Self {
        Self {
            graph: EventGraph::new(),
            topics: TopicState::from_config(&config),
            config,
        }
    }

    pub fn to_snapshot(&self) -> GraphSnapshot {
        GraphSnapshot {
            schema_version: SCHEMA_VERSION,
            events: self.graph.events().cloned().collect(),
            relations: self.graph.relations().collect(),
            topics: self.topics.topics().cloned().collect(),
            config_echo: self.config.clone(),
        }
    }

    pub fn snapshot_bytes(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(&self.to_snapshot()).expect("snapshot serializes");
        bytes.push(b'\n');
        bytes
    }

    pub fn from_snapshot(snapshot: GraphSnapshot) -> Result<Self, MemoryError> {
        if snapshot.schema_version != SCHEMA_VERSION {
            return Err(MemoryError::VersionMismatch {
                found: snapshot.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        snapshot
            .config_echo
            .validate()
            .map_err(|e| MemoryError::MalformedSnapshot(e.to_string()))?;
        let mut graph = EventGraph::new();
        for event in snapshot.events {
            graph.insert_with_id(event)?;
        }
        for relation in snapshot.relations {
            graph.add_relation(relation).map_err(|e| match e {
                MemoryError::DanglingEndpoint { src, dst } => MemoryError::Integrity(format!(
                    "relation {src} -> {dst} references a missing event"
                )),
                other => other,
            })?;
        }
        // one ingested session is one construction step
        let sessions: BTreeSet<&String> = graph.events().flat_map(|e| &e.session_ids).collect();
        let steps = sessions.len() as u64;
        let mut topics = TopicState::from_config(&snapshot.config_echo);
        topics
            .restore(snapshot.topics, steps, &graph)
            .map_err(|e| MemoryError::Integrity(e.to_string()))?;
        Ok(Self {
            graph,
            topics,
            config: snapshot.config_echo,
        })
    }

    pub fn from_snapshot_bytes(bytes: &[u8]) -> Result<Self, MemoryError> {
        // peek at the version first so old/new documents report a version
        // error rather than a field error
        let value: serde_json::Value =
            serde_json::from_slice(bytes).map_err(|e| MemoryError::MalformedSnapshot(e.to_string()))?;
        if let Some(found) = value.get("schema_version").and_then(|v| v.as_u64()) {
            if found != u64::from(SCHEMA_VERSION) {
                return Err(MemoryError::VersionMismatch {
                    found: found as u32,
                    expected: SCHEMA_VERSION,
                });
            }
        }
        let snapshot: GraphSnapshot =
            serde_json::from_value(value).map_err(|e| MemoryError::MalformedSnapshot(e.to_string()))?;
        Self::from_snapshot(snapshot)
    }

    pub fn save(&self, path: &Path) -> Result<(), MemoryError> {
        let io = |e: std::io::Error| MemoryError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.snapshot_bytes()).map_err(io)?;
        std::fs::rename(&tmp, path).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, MemoryError> {
        let bytes = std::fs::read(path).map_err(|e| MemoryError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_snapshot_bytes(&bytes)
    }

    /// Graph integrity plus the topic partition.
    pub fn check_integrity(&self) -> Result<(), MemoryError> {
        self.graph.check_integrity()?;
        self.topics
            .check_partition(&self.graph)
            .map_err(|e| MemoryError::Integrity(e.to_string()))
    }
}
