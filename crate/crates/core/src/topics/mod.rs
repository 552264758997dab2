//! Topic layer: a coarse partition of events by embedding clustering.
//!
//! The layer is initialized with k-means over the first batch of events,
//! grows online (an event joins its most similar topic when the cosine to
//! the centroid is at least the threshold, otherwise it founds a new one)
//! and is rebuilt from scratch every `recluster_period` construction steps.

mod kmeans;

use std::collections::{BTreeMap, HashMap};

pub use kmeans::{cluster_count, kmeans, KMeans, MAX_ITERATIONS};

use crate::config::Config;
use crate::memory::{cosine_similarity, mean_vector, Event, EventGraph, Topic};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TopicError {
    #[error("no events to cluster")]
    EmptyInput,
    #[error("k must be positive, got {0}")]
    InvalidK(usize),
    #[error("cannot form {k} clusters from {n} points")]
    TooFewPoints { k: usize, n: usize },
    #[error("vector dimension {got} differs from {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("topic layer is not initialized")]
    Uninitialized,
    #[error("event `{0}` is not in the graph")]
    UnknownEvent(String),
    #[error("invalid topic layer: {0}")]
    Invalid(String),
}

fn topic_id(seq: u64) -> String {
    format!("tp-{seq:06}")
}

/// Topics, event-to-topic associations and the step counter driving
/// periodic re-clustering.
#[derive(Debug, Clone)]
pub struct TopicState {
    topics: BTreeMap<String, Topic>,
    membership: HashMap<String, String>,
    step_counter: u64,
    recluster_period: u64,
    assign_threshold: f64,
    seed: u64,
    next_seq: u64,
}

impl TopicState {
    pub fn new(recluster_period: u64, assign_threshold: f64, seed: u64) -> Self {
        assert!(recluster_period >= 1, "recluster period must be >= 1");
        assert!(
            assign_threshold > 0.0 && assign_threshold <= 1.0,
            "threshold must be in (0, 1]"
        );
        Self {
            topics: BTreeMap::new(),
            membership: HashMap::new(),
            step_counter: 0,
            recluster_period,
            assign_threshold,
            seed,
            next_seq: 0,
        }
    }

    pub fn from_config(config: &Config) -> Self {
        Self::new(config.recluster_period, config.topic_threshold, config.kmeans_seed)
    }

    pub fn is_initialized(&self) -> bool {
        !self.topics.is_empty()
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    pub fn step_counter(&self) -> u64 {
        self.step_counter
    }

    pub fn recluster_period(&self) -> u64 {
        self.recluster_period
    }

    pub fn assign_threshold(&self) -> f64 {
        self.assign_threshold
    }

    /// Topics in id order.
    pub fn topics(&self) -> impl Iterator<Item = &Topic> {
        self.topics.values()
    }

    pub fn get(&self, id: &str) -> Option<&Topic> {
        self.topics.get(id)
    }

    pub fn topic_of(&self, event_id: &str) -> Option<&str> {
        self.membership.get(event_id).map(String::as_str)
    }

    fn fresh_id(&mut self) -> String {
        self.next_seq += 1;
        topic_id(self.next_seq)
    }

    /// Replaces the topic set with a k-means clustering of `events`, using
    /// `k = min(cluster_count(n), n)`.
    pub fn init_topics<'a, I>(&mut self, events: I) -> Result<(), TopicError>
    where
        I: IntoIterator<Item = &'a Event>,
    {
        let mut events: Vec<&Event> = events.into_iter().collect();
        if events.is_empty() {
            return Err(TopicError::EmptyInput);
        }
        events.sort_by(|a, b| a.id.cmp(&b.id));
        let k = cluster_count(events.len())?.min(events.len());
        let points: Vec<Vec<f64>> = events.iter().map(|e| e.embedding.clone()).collect();
        let km = kmeans(&points, k, self.seed)?;

        self.topics.clear();
        self.membership.clear();
        let ids: Vec<String> = (0..k).map(|_| self.fresh_id()).collect();
        for (c, centroid) in km.centroids.into_iter().enumerate() {
            self.topics.insert(
                ids[c].clone(),
                Topic {
                    id: ids[c].clone(),
                    centroid,
                    members: Default::default(),
                    member_count: 0,
                },
            );
        }
        for (event, c) in events.iter().zip(km.assignments) {
            let topic = self.topics.get_mut(&ids[c]).unwrap();
            topic.members.insert(event.id.clone());
            topic.member_count += 1;
            self.membership.insert(event.id.clone(), ids[c].clone());
        }
        Ok(())
    }

    fn best_topic(&self, embedding: &[f64]) -> Option<(&str, f64)> {
        let mut best: Option<(&str, f64)> = None;
        for topic in self.topics.values() {
            let Ok(sim) = cosine_similarity(embedding, &topic.centroid) else {
                continue;
            };
            // ids iterate ascending, so strict `>` keeps the smallest id on ties
            if best.is_none_or(|(_, b)| sim > b) {
                best = Some((&topic.id, sim));
            }
        }
        best
    }

    /// Online assignment of one event. Joins the most similar topic when its
    /// centroid cosine is `>= threshold` (centroid becomes the running mean),
    /// otherwise founds a singleton topic. Returns `(topic_id, created)`.
    pub fn assign_event(&mut self, event: &Event) -> Result<(String, bool), TopicError> {
        if !self.is_initialized() {
            return Err(TopicError::Uninitialized);
        }
        if self.membership.contains_key(&event.id) {
            return Err(TopicError::Invalid(format!(
                "event `{}` already belongs to a topic",
                event.id
            )));
        }
        let joined = self
            .best_topic(&event.embedding)
            .filter(|(_, sim)| *sim >= self.assign_threshold)
            .map(|(id, _)| id.to_string());
        let (id, created) = match joined {
            Some(id) => {
                let topic = self.topics.get_mut(&id).unwrap();
                let n = topic.member_count as f64;
                for (c, x) in topic.centroid.iter_mut().zip(&event.embedding) {
                    *c += (x - *c) / (n + 1.0);
                }
                topic.members.insert(event.id.clone());
                topic.member_count += 1;
                (id, false)
            }
            None => {
                let id = self.fresh_id();
                let mut members = std::collections::BTreeSet::new();
                members.insert(event.id.clone());
                self.topics.insert(
                    id.clone(),
                    Topic {
                        id: id.clone(),
                        centroid: event.embedding.clone(),
                        members,
                        member_count: 1,
                    },
                );
                (id, true)
            }
        };
        self.membership.insert(event.id.clone(), id.clone());
        Ok((id, created))
    }

    /// Removes an event from its topic (dropping the topic if it empties and
    /// recomputing the centroid from the remaining members otherwise), then
    /// assigns it again. Used after node fusion changes an embedding.
    pub fn reassign_event(
        &mut self,
        event: &Event,
        graph: &EventGraph,
    ) -> Result<(String, bool), TopicError> {
        if let Some(old) = self.membership.remove(&event.id) {
            let topic = self.topics.get_mut(&old).unwrap();
            topic.members.remove(&event.id);
            topic.member_count -= 1;
            if topic.members.is_empty() {
                self.topics.remove(&old);
            } else {
                let embeddings: Vec<&[f64]> = topic
                    .members
                    .iter()
                    .map(|m| {
                        graph
                            .get(m)
                            .map(|e| e.embedding.as_slice())
                            .ok_or_else(|| TopicError::UnknownEvent(m.clone()))
                    })
                    .collect::<Result<_, _>>()?;
                topic.centroid = mean_vector(embeddings).unwrap();
            }
        }
        if !self.is_initialized() {
            // the only topic just emptied; restart the layer around this event
            self.init_topics(std::iter::once(event))?;
            return Ok((self.membership[&event.id].clone(), true));
        }
        self.assign_event(event)
    }

    /// Marks one construction step as complete.
    pub fn complete_step(&mut self) {
        self.step_counter += 1;
    }

    /// Rebuilds the layer from every event in `graph` when the step counter
    /// is a multiple of the period. Returns whether a rebuild happened.
    pub fn recluster_if_due(&mut self, graph: &EventGraph) -> Result<bool, TopicError> {
        if self.step_counter == 0 || self.step_counter % self.recluster_period != 0 || graph.is_empty()
        {
            return Ok(false);
        }
        self.init_topics(graph.events())?;
        Ok(true)
    }

    /// Restores persisted topics, validating them against `graph`.
    pub(crate) fn restore(
        &mut self,
        topics: Vec<Topic>,
        step_counter: u64,
        graph: &EventGraph,
    ) -> Result<(), TopicError> {
        self.topics.clear();
        self.membership.clear();
        for topic in topics {
            if let Some(seq) = topic.id.strip_prefix("tp-").and_then(|s| s.parse().ok()) {
                self.next_seq = self.next_seq.max(seq);
            }
            for m in &topic.members {
                if self.membership.insert(m.clone(), topic.id.clone()).is_some() {
                    return Err(TopicError::Invalid(format!("event `{m}` is in two topics")));
                }
            }
            if self.topics.insert(topic.id.clone(), topic).is_some() {
                return Err(TopicError::Invalid("duplicate topic id".into()));
            }
        }
        self.step_counter = step_counter;
        self.check_partition(graph)
    }

    /// Every event belongs to exactly one non-empty topic, member counts
    /// agree and all members exist.
    pub fn check_partition(&self, graph: &EventGraph) -> Result<(), TopicError> {
        if !self.is_initialized() {
            return if self.membership.is_empty() {
                Ok(())
            } else {
                Err(TopicError::Invalid("memberships without topics".into()))
            };
        }
        let mut seen = 0usize;
        for topic in self.topics.values() {
            if topic.members.is_empty() || topic.member_count != topic.members.len() {
                return Err(TopicError::Invalid(format!(
                    "topic `{}` has member_count {} for {} members",
                    topic.id,
                    topic.member_count,
                    topic.members.len()
                )));
            }
            if let Some(d) = graph.dimension() {
                if topic.centroid.len() != d {
                    return Err(TopicError::Dimension {
                        expected: d,
                        got: topic.centroid.len(),
                    });
                }
            }
            for m in &topic.members {
                if !graph.contains(m) {
                    return Err(TopicError::UnknownEvent(m.clone()));
                }
            }
            seen += topic.members.len();
        }
        if seen != graph.len() || self.membership.len() != graph.len() {
            return Err(TopicError::Invalid(format!(
                "{seen} assignments for {} events",
                graph.len()
            )));
        }
        Ok(())
    }
}
