use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Event, MemoryError, Relation};

/// Edge direction relative to the queried node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Out,
    In,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Out => "out",
            Direction::In => "in",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Neighbor<'a> {
    pub event: &'a Event,
    pub label: &'a str,
    pub direction: Direction,
}

type EdgeKey = (String, String, String);

/// Events and typed relations with a bidirectional adjacency index.
///
/// Event ids are assigned by the graph (`ev-000001`, ...), sort in insertion
/// order and are never reused.
#[derive(Debug, Clone, Default)]
pub struct EventGraph {
    events: BTreeMap<String, Event>,
    relations: BTreeMap<EdgeKey, Vec<String>>,
    adjacency: BTreeMap<String, BTreeSet<(String, String, Direction)>>,
    dimension: Option<usize>,
    next_seq: u64,
}

pub(crate) fn event_id(seq: u64) -> String {
    format!("ev-{seq:06}")
}

fn parse_event_seq(id: &str) -> Option<u64> {
    id.strip_prefix("ev-")?.parse().ok()
}

impl EventGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn dimension(&self) -> Option<usize> {
        self.dimension
    }

    pub fn get(&self, id: &str) -> Option<&Event> {
        self.events.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.events.contains_key(id)
    }

    /// Events in id order.
    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.events.values()
    }

    pub fn relations(&self) -> impl Iterator<Item = Relation> + '_ {
        self.relations
            .iter()
            .map(|((src, dst, label), evidence)| Relation {
                src: src.clone(),
                dst: dst.clone(),
                label: label.clone(),
                evidence: evidence.clone(),
            })
    }

    fn check_dimension(&self, event: &Event) -> Result<(), MemoryError> {
        match self.dimension {
            Some(d) if d != event.embedding.len() => Err(MemoryError::Dimension {
                expected: d,
                got: event.embedding.len(),
            }),
            _ => Ok(()),
        }
    }

    /// Inserts `event` under a freshly assigned id and returns that id.
    pub fn add_event(&mut self, mut event: Event) -> Result<String, MemoryError> {
        event.id = event_id(self.next_seq + 1);
        self.insert_with_id(event)
    }

    /// Inserts an event keeping its id. Used when restoring snapshots.
    pub(crate) fn insert_with_id(&mut self, event: Event) -> Result<String, MemoryError> {
        event.validate()?;
        self.check_dimension(&event)?;
        if self.events.contains_key(&event.id) {
            return Err(MemoryError::InvalidEvent {
                id: event.id.clone(),
                reason: "duplicate id".into(),
            });
        }
        if let Some(seq) = parse_event_seq(&event.id) {
            self.next_seq = self.next_seq.max(seq);
        }
        self.dimension.get_or_insert(event.embedding.len());
        let id = event.id.clone();
        self.adjacency.entry(id.clone()).or_default();
        self.events.insert(id.clone(), event);
        Ok(id)
    }

    /// Replaces the stored event with the same id (node fusion keeps ids).
    pub fn replace_event(&mut self, event: Event) -> Result<(), MemoryError> {
        event.validate()?;
        self.check_dimension(&event)?;
        match self.events.get_mut(&event.id) {
            Some(slot) => {
                *slot = event;
                Ok(())
            }
            None => Err(MemoryError::UnknownEvent(event.id)),
        }
    }

    /// Adds a relation. Re-adding an existing (src, dst, label) edge only
    /// unions its evidence; the edge count is unchanged.
    pub fn add_relation(&mut self, relation: Relation) -> Result<(), MemoryError> {
        if !self.events.contains_key(&relation.src) || !self.events.contains_key(&relation.dst) {
            return Err(MemoryError::DanglingEndpoint {
                src: relation.src,
                dst: relation.dst,
            });
        }
        relation.validate()?;
        let Relation {
            src,
            dst,
            label,
            evidence,
        } = relation;
        let slot = self
            .relations
            .entry((src.clone(), dst.clone(), label.clone()))
            .or_default();
        for e in evidence {
            if !slot.contains(&e) {
                slot.push(e);
            }
        }
        self.adjacency
            .entry(src.clone())
            .or_default()
            .insert((dst.clone(), label.clone(), Direction::Out));
        self.adjacency
            .entry(dst)
            .or_default()
            .insert((src, label, Direction::In));
        Ok(())
    }

    /// Incoming and outgoing typed edges of `id`, ordered by neighbor id,
    /// then label, then direction.
    pub fn neighbors(&self, id: &str) -> Result<Vec<Neighbor<'_>>, MemoryError> {
        let adj = self
            .adjacency
            .get(id)
            .ok_or_else(|| MemoryError::UnknownEvent(id.to_string()))?;
        Ok(adj
            .iter()
            .map(|(other, label, direction)| Neighbor {
                event: &self.events[other],
                label,
                direction: *direction,
            })
            .collect())
    }

    /// Checks every edge endpoint resolves and the adjacency index agrees
    /// with the relation table.
    pub fn check_integrity(&self) -> Result<(), MemoryError> {
        for (src, dst, label) in self.relations.keys() {
            if !self.events.contains_key(src) || !self.events.contains_key(dst) {
                return Err(MemoryError::Integrity(format!(
                    "edge {src} -[{label}]-> {dst} has a missing endpoint"
                )));
            }
        }
        let indexed: usize = self.adjacency.values().map(BTreeSet::len).sum();
        if indexed != 2 * self.relations.len() {
            return Err(MemoryError::Integrity("adjacency index out of sync".into()));
        }
        Ok(())
    }
}
