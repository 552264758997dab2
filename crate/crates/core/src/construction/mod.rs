//! Turning observation batches into graph updates: event segmentation,
//! relation extraction, and node fusion against the existing memory.
//!
//! One batch is one session and one construction step. Integration is
//! transactional: it runs against a staged copy of the store and commits
//! only when every stage succeeded.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::llm::{
    bindings, parse_coreference, parse_event_extraction, parse_relation_extraction, CoreferenceVerdict,
    Gateway, GatewayError, Parsed, TemplateId,
};
use crate::memory::{
    cosine_similarity, normalize_label, EmbedError, Embedder, Event, EventGraph, MemoryError, MemoryStore,
    Relation, Utterance, MAX_PARTICIPANTS,
};
use crate::topics::TopicError;

#[derive(Debug, thiserror::Error)]
pub enum ConstructionError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("batch mixes sessions `{0}` and `{1}`")]
    MixedSessions(String, String),
    #[error("batch for session `{session}` failed: {source}")]
    BatchFailed {
        session: String,
        #[source]
        source: GatewayError,
    },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Topic(#[from] TopicError),
    #[error("line {line}: {message}")]
    Input { line: usize, message: String },
}

/// Events and relations extracted from one batch, under provisional ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SubMemory {
    pub events: Vec<Event>,
    pub relations: Vec<Relation>,
}

/// Outcome of integrating one sub-memory.
///
/// Every provisional id is in exactly one of `merged` and `inserted` (by
/// way of `id_remap`), and `id_remap` covers every provisional id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegrationReport {
    pub session_id: String,
    /// `(provisional id, existing id it was fused into)`.
    pub merged: Vec<(String, String)>,
    /// Overlap edges from new events to existing ones.
    pub linked: Vec<Relation>,
    /// Final ids of newly inserted events.
    pub inserted: Vec<String>,
    pub id_remap: BTreeMap<String, String>,
    /// Batch-internal relations added after remapping.
    pub relations_added: usize,
    pub reclustered: bool,
    pub warnings: Vec<String>,
}

/// Dialog lines as shown to the extraction prompt.
pub fn render_dialog(batch: &[Utterance]) -> String {
    batch
        .iter()
        .map(|u| {
            let ts = if u.timestamp.is_empty() {
                String::new()
            } else {
                format!(" ({})", u.timestamp)
            };
            let speaker = if u.speaker.is_empty() { "narrator" } else { &u.speaker };
            format!("[{}]{ts} {speaker}: {}", u.id, u.text)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// One event per line as shown to the relation prompt.
pub fn render_events(events: &[Event]) -> String {
    events
        .iter()
        .map(|e| {
            format!(
                "{}: {} (time: {}; people: {}; utterances: {})",
                e.id,
                e.summary,
                or_unknown(&e.time_info),
                or_unknown(&e.participants.join(", ")),
                e.span.join(", ")
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Event description used by the coreference prompt.
pub fn describe_event(event: &Event) -> String {
    format!(
        "Summary: {}\nTime: {}\nPeople: {}",
        event.summary,
        or_unknown(&event.time_info),
        or_unknown(&event.participants.join(", "))
    )
}

fn or_unknown(s: &str) -> &str {
    if s.trim().is_empty() {
        "unknown"
    } else {
        s
    }
}

fn check_batch(batch: &[Utterance]) -> Result<&str, ConstructionError> {
    let first = batch.first().ok_or(ConstructionError::EmptyBatch)?;
    if let Some(other) = batch.iter().find(|u| u.session_id != first.session_id) {
        return Err(ConstructionError::MixedSessions(
            first.session_id.clone(),
            other.session_id.clone(),
        ));
    }
    Ok(&first.session_id)
}

/// Extracts events from one batch. Returned events carry provisional ids
/// from the model (`E1`, `E2`, ...), are ordered by their first utterance,
/// and are embedded from their summaries.
pub fn segment_events(
    batch: &[Utterance],
    gateway: &Gateway<'_>,
    embedder: &dyn Embedder,
) -> Result<Parsed<Vec<Event>>, ConstructionError> {
    let session = check_batch(batch)?;
    let b = bindings([("dialog", render_dialog(batch))]);
    let parsed = gateway
        .call(TemplateId::EventExtraction, &b, parse_event_extraction)
        .map_err(|source| ConstructionError::BatchFailed {
            session: session.to_string(),
            source,
        })?;
    let mut warnings = parsed.warnings;
    let position: HashMap<&str, usize> = batch.iter().enumerate().map(|(i, u)| (u.id.as_str(), i)).collect();

    let mut seen = BTreeSet::new();
    let mut events = Vec::new();
    for raw in parsed.value {
        if raw.summary.trim().is_empty() {
            warnings.push(format!("event {} has an empty summary; dropped", raw.id));
            continue;
        }
        if !seen.insert(raw.id.clone()) {
            warnings.push(format!("duplicate event id {}; dropped", raw.id));
            continue;
        }
        let mut span: Vec<usize> = Vec::new();
        for uid in &raw.utterance_ids {
            match position.get(uid.as_str()) {
                Some(&p) if !span.contains(&p) => span.push(p),
                Some(_) => {}
                None => warnings.push(format!("event {} cites unknown utterance {uid}; dropped from span", raw.id)),
            }
        }
        span.sort_unstable();
        let Some(&first) = span.first() else {
            warnings.push(format!("event {} has no valid utterances; dropped", raw.id));
            continue;
        };
        let stamp = &batch[first].timestamp;
        let time_info = match (raw.time.trim(), stamp.trim()) {
            ("", s) => s.to_string(),
            (t, "") => t.to_string(),
            (t, s) => format!("{t} (as of {s})"),
        };
        let mut participants: Vec<String> = Vec::new();
        for p in raw.people.iter().map(|p| p.trim()).filter(|p| !p.is_empty()) {
            if !participants.iter().any(|q| q == p) {
                participants.push(p.to_string());
            }
        }
        let summary = raw.summary.trim().to_string();
        events.push((
            first,
            Event {
                id: raw.id,
                span: span.iter().map(|&i| batch[i].id.clone()).collect(),
                time_info,
                embedding: embedder.embed(&summary)?,
                summary,
                participants,
                session_ids: [session.to_string()].into(),
            },
        ));
    }
    // stable: events sharing a first utterance keep model order
    events.sort_by_key(|(first, _)| *first);
    Ok(Parsed {
        value: events.into_iter().map(|(_, e)| e).collect(),
        warnings,
    })
}

/// Extracts relations among `events` (provisional ids) of one batch.
/// Relations with unknown endpoints, self-loops or unusable labels are
/// dropped; evidence is restricted to batch utterances.
pub fn extract_relations(
    batch: &[Utterance],
    events: &[Event],
    gateway: &Gateway<'_>,
) -> Result<Parsed<Vec<Relation>>, ConstructionError> {
    let session = check_batch(batch)?;
    if events.len() < 2 {
        return Ok(Parsed {
            value: Vec::new(),
            warnings: Vec::new(),
        });
    }
    let b = bindings([("events", render_events(events))]);
    let parsed = gateway
        .call(TemplateId::RelationExtraction, &b, parse_relation_extraction)
        .map_err(|source| ConstructionError::BatchFailed {
            session: session.to_string(),
            source,
        })?;
    let mut warnings = parsed.warnings;
    let known: BTreeSet<&str> = events.iter().map(|e| e.id.as_str()).collect();
    let utterances: BTreeSet<&str> = batch.iter().map(|u| u.id.as_str()).collect();
    let mut out: Vec<Relation> = Vec::new();
    for raw in parsed.value {
        if !known.contains(raw.source.as_str()) || !known.contains(raw.target.as_str()) {
            warnings.push(format!("relation {} -> {} has an unknown endpoint; dropped", raw.source, raw.target));
            continue;
        }
        if raw.source == raw.target {
            warnings.push(format!("self-loop on {}; dropped", raw.source));
            continue;
        }
        let Some(label) = normalize_label(&raw.kind) else {
            warnings.push(format!("relation label `{}` is unusable; dropped", raw.kind));
            continue;
        };
        let evidence: Vec<String> = raw
            .evidence
            .into_iter()
            .filter(|u| {
                let ok = utterances.contains(u.as_str());
                if !ok {
                    warnings.push(format!("evidence `{u}` is not in the batch; dropped"));
                }
                ok
            })
            .collect();
        out.push(Relation::new(raw.source, raw.target, label).with_evidence(evidence));
    }
    Ok(Parsed { value: out, warnings })
}

/// The stored event most similar to `embedding`, with its cosine
/// similarity. Ties go to the smallest id.
pub fn find_merge_candidate<'g>(graph: &'g EventGraph, embedding: &[f64]) -> Option<(&'g Event, f64)> {
    let mut best: Option<(&Event, f64)> = None;
    for event in graph.events() {
        let Ok(sim) = cosine_similarity(&event.embedding, embedding) else {
            continue;
        };
        // events() is id-ordered, so strict > keeps the smallest id on ties
        if best.is_none_or(|(_, b)| sim > b) {
            best = Some((event, sim));
        }
    }
    best
}

/// Fuses `incoming` into `existing`. The result keeps `existing.id`.
pub fn merge_events(
    existing: &Event,
    incoming: &Event,
    embedder: &dyn Embedder,
) -> Result<Parsed<Event>, EmbedError> {
    let mut warnings = Vec::new();
    let mut span = existing.span.clone();
    for u in &incoming.span {
        if !span.contains(u) {
            span.push(u.clone());
        }
    }
    let mut participants = existing.participants.clone();
    for p in &incoming.participants {
        if !participants.contains(p) {
            participants.push(p.clone());
        }
    }
    if participants.len() > MAX_PARTICIPANTS {
        warnings.push(format!(
            "merged event {} has {} participants; kept the first {MAX_PARTICIPANTS}",
            existing.id,
            participants.len()
        ));
        participants.truncate(MAX_PARTICIPANTS);
    }
    let summary = if incoming.summary == existing.summary {
        existing.summary.clone()
    } else {
        format!("{} | {}", existing.summary, incoming.summary)
    };
    let time_info = if existing.time_info.is_empty() {
        incoming.time_info.clone()
    } else {
        existing.time_info.clone()
    };
    let embedding = if summary == existing.summary {
        existing.embedding.clone()
    } else {
        embedder.embed(&summary)?
    };
    Ok(Parsed {
        value: Event {
            id: existing.id.clone(),
            span,
            time_info,
            summary,
            participants,
            embedding,
            session_ids: existing.session_ids.union(&incoming.session_ids).cloned().collect(),
        },
        warnings,
    })
}

fn coreference(
    gateway: &Gateway<'_>,
    existing: &Event,
    incoming: &Event,
    warnings: &mut Vec<String>,
) -> Option<CoreferenceVerdict> {
    let b = bindings([
        ("event_a", describe_event(existing)),
        ("event_b", describe_event(incoming)),
    ]);
    match gateway.call(TemplateId::Coreference, &b, parse_coreference) {
        Ok(parsed) => {
            warnings.extend(parsed.warnings);
            Some(parsed.value)
        }
        Err(e) => {
            tracing::warn!(existing = %existing.id, incoming = %incoming.id, error = %e, "coreference failed; inserting");
            warnings.push(format!(
                "coreference for {} vs {} failed ({e}); inserted",
                incoming.id, existing.id
            ));
            None
        }
    }
}

/// Integrates one sub-memory into `store` as one construction step.
///
/// For each new event in batch order, the most similar stored event `e*`
/// is found. At or above the merge threshold the coreference verdict
/// decides: same event merges into `e*`; overlap with a relation type
/// inserts the event plus an edge to `e*`; anything else inserts. Below
/// the threshold the event is inserted without a coreference call.
/// Batch relations are then added under the id remap, the topic layer is
/// updated and the step is completed.
///
/// On error `store` is unchanged.
pub fn integrate_submemory(
    store: &mut MemoryStore,
    sub: SubMemory,
    gateway: &Gateway<'_>,
    embedder: &dyn Embedder,
) -> Result<IntegrationReport, ConstructionError> {
    let mut staged = store.clone();
    let threshold = staged.config.merge_threshold;
    let mut report = IntegrationReport {
        session_id: sub
            .events
            .first()
            .and_then(|e| e.session_ids.iter().next().cloned())
            .unwrap_or_default(),
        ..Default::default()
    };
    if sub.events.is_empty() {
        report.warnings.push("batch produced no events; store unchanged".into());
        return Ok(report);
    }
    let topics_ready = staged.topics.is_initialized();

    for event in sub.events {
        let provisional = event.id.clone();
        let candidate = find_merge_candidate(&staged.graph, &event.embedding)
            .filter(|(_, sim)| *sim >= threshold)
            .map(|(e, _)| e.clone());
        let verdict = candidate
            .as_ref()
            .and_then(|existing| coreference(gateway, existing, &event, &mut report.warnings));

        match (candidate, verdict) {
            (Some(existing), Some(v)) if v.same_event => {
                let merged = merge_events(&existing, &event, embedder)?;
                report.warnings.extend(merged.warnings);
                let merged = merged.value;
                staged.graph.replace_event(merged.clone())?;
                if topics_ready {
                    staged.topics.reassign_event(&merged, &staged.graph)?;
                }
                report.merged.push((provisional.clone(), existing.id.clone()));
                report.id_remap.insert(provisional, existing.id);
            }
            (candidate, verdict) => {
                let id = staged.graph.add_event(event)?;
                if topics_ready {
                    let stored = staged.graph.get(&id).expect("just inserted");
                    staged.topics.assign_event(stored)?;
                }
                let link = candidate.zip(verdict).and_then(|(existing, v)| {
                    let label = v.relation_type.as_deref().and_then(normalize_label)?;
                    v.has_overlap.then(|| Relation::new(&id, &existing.id, label))
                });
                if let Some(rel) = link {
                    staged.graph.add_relation(rel.clone())?;
                    report.linked.push(rel);
                }
                report.inserted.push(id.clone());
                report.id_remap.insert(provisional, id);
            }
        }
    }

    for rel in sub.relations {
        let (Some(src), Some(dst)) = (report.id_remap.get(&rel.src), report.id_remap.get(&rel.dst)) else {
            report
                .warnings
                .push(format!("relation {} -> {} has an unmapped endpoint; dropped", rel.src, rel.dst));
            continue;
        };
        if src == dst {
            report
                .warnings
                .push(format!("relation {} -> {} collapsed by a merge; dropped", rel.src, rel.dst));
            continue;
        }
        staged
            .graph
            .add_relation(Relation::new(src, dst, rel.label).with_evidence(rel.evidence))?;
        report.relations_added += 1;
    }

    if !topics_ready {
        staged.topics.init_topics(staged.graph.events())?;
    }
    staged.topics.complete_step();
    report.reclustered = staged.topics.recluster_if_due(&staged.graph)?;

    *store = staged;
    Ok(report)
}

/// Segments, extracts relations and integrates one session.
pub fn ingest_session(
    store: &mut MemoryStore,
    batch: &[Utterance],
    gateway: &Gateway<'_>,
    embedder: &dyn Embedder,
) -> Result<IntegrationReport, ConstructionError> {
    let session = check_batch(batch)?.to_string();
    let events = segment_events(batch, gateway, embedder)?;
    let relations = extract_relations(batch, &events.value, gateway)?;
    let mut warnings = events.warnings;
    warnings.extend(relations.warnings);
    let mut report = integrate_submemory(
        store,
        SubMemory {
            events: events.value,
            relations: relations.value,
        },
        gateway,
        embedder,
    )?;
    report.session_id = session;
    warnings.append(&mut report.warnings);
    report.warnings = warnings;
    for w in &report.warnings {
        tracing::debug!(session = %report.session_id, warning = %w, "ingestion");
    }
    Ok(report)
}

/// Parses utterance JSON Lines and groups them into sessions in order of
/// first appearance. Blank lines are skipped; any other bad line is an
/// error.
pub fn read_sessions_jsonl(text: &str) -> Result<Vec<Vec<Utterance>>, ConstructionError> {
    let mut order: Vec<String> = Vec::new();
    let mut sessions: HashMap<String, Vec<Utterance>> = HashMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let u: Utterance = serde_json::from_str(line).map_err(|e| ConstructionError::Input {
            line: n + 1,
            message: e.to_string(),
        })?;
        if u.text.trim().is_empty() {
            return Err(ConstructionError::Input {
                line: n + 1,
                message: "empty text".into(),
            });
        }
        if !sessions.contains_key(&u.session_id) {
            order.push(u.session_id.clone());
        }
        sessions.entry(u.session_id.clone()).or_default().push(u);
    }
    Ok(order
        .into_iter()
        .map(|s| sessions.remove(&s).expect("session recorded"))
        .collect())
}
