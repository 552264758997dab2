//! Goal-directed search over the event graph.
//!
//! A planner splits the question into sub-goals, localization picks start
//! events from the top-ranked candidates across several topics, explorers
//! walk the graph deciding SKIP / EXPAND / ANSWER at each node, and a
//! responder answers from the retained evidence. Explorers share one
//! frontier ordered by each node's best similarity to an unsatisfied
//! sub-goal. When the frontier drains with sub-goals still open, the query
//! is refined once and the search restarts from fresh start events.

mod queue;
mod stats;

pub use queue::GlobalQueue;
pub use stats::{ActionCounts, SearchStats};

use std::collections::{BTreeSet, HashSet};
use std::sync::{Condvar, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::llm::parse::{parse_subgoals_bounded, CLUSTER_CAP, LOCALIZATION_CAP};
use crate::llm::{
    bindings, parse_action_decision, parse_node_selection, parse_refined_query, Action, ActionKind,
    Gateway, GatewayError, Parsed, TemplateId,
};
use crate::memory::{cosine_similarity, EmbedError, Embedder, Event, MemoryStore, SimilarityError};

pub const NO_KEPT_INFO: &str = "(No information kept yet)";
pub const FALLBACK_START_NODES: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("question is empty")]
    EmptyQuery,
    #[error("memory is empty")]
    EmptyStore,
    #[error("planning failed: {0}")]
    Planning(#[source] GatewayError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("priority is undefined once every sub-goal is satisfied")]
    AllSatisfied,
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error("no evidence to answer from")]
    EmptyEvidence,
    #[error("answer generation failed: {0}")]
    Respond(#[source] GatewayError),
}

/// Sub-goals for a question and which of them current evidence supports.
///
/// Invariants: `satisfaction.len() == subgoals.len()`, and bits only ever
/// go from unsatisfied to satisfied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgoalPlan {
    /// Current query; differs from `original_query` after refinement.
    pub query: String,
    pub original_query: String,
    pub subgoals: Vec<String>,
    pub satisfaction: Vec<bool>,
    #[serde(skip)]
    pub subgoal_embeddings: Vec<Vec<f64>>,
}

impl SubgoalPlan {
    pub fn new(query: &str, subgoals: Vec<String>, embedder: &dyn Embedder) -> Result<Self, EmbedError> {
        let subgoal_embeddings = subgoals.iter().map(|g| embedder.embed(g)).collect::<Result<_, _>>()?;
        Ok(Self {
            query: query.to_string(),
            original_query: query.to_string(),
            satisfaction: vec![false; subgoals.len()],
            subgoals,
            subgoal_embeddings,
        })
    }

    pub fn all_satisfied(&self) -> bool {
        self.satisfaction.iter().all(|s| *s)
    }

    pub fn satisfied_count(&self) -> usize {
        self.satisfaction.iter().filter(|s| **s).count()
    }

    /// Sets the bits for 1-based `indices`; out-of-range indices are ignored.
    pub fn satisfy(&mut self, indices: &[usize]) {
        for &i in indices {
            if let Some(bit) = i.checked_sub(1).and_then(|j| self.satisfaction.get_mut(j)) {
                *bit = true;
            }
        }
    }

    /// Satisfaction as 0/1 values.
    pub fn bits(&self) -> Vec<u8> {
        self.satisfaction.iter().map(|s| u8::from(*s)).collect()
    }
}

/// A retained event and the 1-based sub-goals it was credited with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub id: String,
    pub summary: String,
    pub time_info: String,
    pub subgoals: Vec<usize>,
    pub round: u32,
}

impl EvidenceItem {
    fn from_event(event: &Event, subgoals: Vec<usize>, round: u32) -> Self {
        Self {
            id: event.id.clone(),
            summary: event.summary.clone(),
            time_info: event.time_info.clone(),
            subgoals,
            round,
        }
    }
}

/// One explorer decision, for tracing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub round: u32,
    pub path: usize,
    pub node: String,
    pub priority: f64,
    pub action: ActionKind,
    pub next_nodes: Vec<String>,
    pub satisfied_subgoals: Vec<usize>,
    pub enqueued: Vec<String>,
}

/// Mutable state shared by the explorers of one search.
///
/// Invariants: evidence ids are visited, no id is visited twice, and the
/// queue hands out each id at most once.
#[derive(Debug, Clone, Default)]
pub struct SearchState {
    pub visited: HashSet<String>,
    /// Visited ids in pop order.
    pub visit_order: Vec<String>,
    pub evidence: Vec<EvidenceItem>,
    pub queue: GlobalQueue,
    pub round: u32,
    /// First-round top-k, the responder's fallback context.
    pub initial_candidates: Vec<String>,
    pub stats: SearchStats,
    pub trace: Vec<TraceStep>,
    pub warnings: Vec<String>,
}

impl SearchState {
    /// Pops the best unvisited node and marks it visited.
    pub fn pop_next(&mut self) -> Option<(String, f64)> {
        let (id, priority) = self.queue.pop(&self.visited)?;
        self.visited.insert(id.clone());
        self.visit_order.push(id.clone());
        Some((id, priority))
    }

    fn note_queue_size(&mut self) {
        let live = self.queue.live_len(&self.visited);
        self.stats.max_queue_size = self.stats.max_queue_size.max(live);
    }

    /// Enqueues `id` unless it is visited or was enqueued before.
    fn offer(&mut self, id: &str, event: &Event, plan: &SubgoalPlan) -> bool {
        if self.visited.contains(id) || self.queue.was_enqueued(id) {
            return false;
        }
        let p = match priority(event, plan) {
            Ok(p) => p,
            Err(e) => {
                self.warnings.push(format!("priority for {id}: {e}; queued last"));
                -1.0
            }
        };
        self.queue.push(id, p)
    }
}

/// Best similarity between the node and any unsatisfied sub-goal.
pub fn priority(node: &Event, plan: &SubgoalPlan) -> Result<f64, SearchError> {
    let mut best: Option<f64> = None;
    for (j, goal) in plan.subgoal_embeddings.iter().enumerate() {
        if plan.satisfaction[j] {
            continue;
        }
        let sim = cosine_similarity(&node.embedding, goal)?;
        best = Some(best.map_or(sim, |b: f64| b.max(sim)));
    }
    best.ok_or(SearchError::AllSatisfied)
}

/// Decomposes the question into sub-goals. The gateway retries once.
pub fn plan(
    query: &str,
    gateway: &Gateway<'_>,
    embedder: &dyn Embedder,
    config: &Config,
) -> Result<Parsed<SubgoalPlan>, SearchError> {
    if query.trim().is_empty() {
        return Err(SearchError::EmptyQuery);
    }
    let parsed = gateway
        .call(TemplateId::Planner, &bindings([("question", query)]), |t| {
            parse_subgoals_bounded(t, config.subgoal_min, config.subgoal_max)
        })
        .map_err(SearchError::Planning)?;
    Ok(Parsed {
        value: SubgoalPlan::new(query, parsed.value, embedder)?,
        warnings: parsed.warnings,
    })
}

/// Sub-goal list with status markers, as shown to the model.
pub fn subgoals_text(plan: &SubgoalPlan) -> String {
    let mut out = String::from("SUB-GOALS:");
    for (i, (goal, done)) in plan.subgoals.iter().zip(&plan.satisfaction).enumerate() {
        let mark = if *done { "SATISFIED" } else { "UNSATISFIED" };
        out.push_str(&format!("\n{}. [{mark}] {goal}", i + 1));
    }
    out
}

fn time_or_unknown(t: &str) -> &str {
    if t.trim().is_empty() {
        "unknown"
    } else {
        t
    }
}

/// Node description; depends on the node alone.
pub fn node_info(event: &Event) -> String {
    format!(
        "ID: {}\nSummary: {}\nTime: {}\nPeople: {}",
        event.id,
        event.summary,
        time_or_unknown(&event.time_info),
        if event.participants.is_empty() {
            "unknown".to_string()
        } else {
            event.participants.join(", ")
        }
    )
}

fn evidence_lines(evidence: &[EvidenceItem]) -> String {
    evidence
        .iter()
        .map(|e| format!("- {}: {} (time: {})", e.id, e.summary, time_or_unknown(&e.time_info)))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Neighbors with relation label and direction.
pub fn neighbor_info(store: &MemoryStore, id: &str) -> String {
    let Ok(neighbors) = store.graph.neighbors(id) else {
        return String::new();
    };
    neighbors
        .iter()
        .map(|n| {
            let dir = match n.direction {
                crate::memory::Direction::Out => "outgoing",
                crate::memory::Direction::In => "incoming",
            };
            format!(
                "- {} [{}, {dir}]: {} (time: {})",
                n.event.id,
                n.label,
                n.event.summary,
                time_or_unknown(&n.event.time_info)
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Start-node selection for one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Localization {
    /// Top-k events by query similarity, with scores.
    pub top_k: Vec<(String, f64)>,
    /// Top-k plus the best event of each of the first `p` topics met in
    /// rank order, deduplicated.
    pub candidates: Vec<String>,
    pub selected: Vec<String>,
    pub fell_back: bool,
    pub warnings: Vec<String>,
}

/// Events ranked by similarity to `query_embedding`; ties by id.
pub fn rank_events(store: &MemoryStore, query_embedding: &[f64]) -> Vec<(String, f64)> {
    let mut ranked: Vec<(String, f64)> = store
        .graph
        .events()
        .map(|e| {
            let sim = cosine_similarity(&e.embedding, query_embedding).unwrap_or(-1.0);
            (e.id.clone(), sim)
        })
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked
}

/// Direct top-k plus topic-diverse picks, in that order.
pub fn candidate_set(store: &MemoryStore, ranked: &[(String, f64)], k: usize, p: usize) -> Vec<String> {
    let mut out: Vec<String> = ranked.iter().take(k).map(|(id, _)| id.clone()).collect();
    let mut topics_seen = BTreeSet::new();
    for (id, _) in ranked {
        if topics_seen.len() >= p {
            break;
        }
        let Some(topic) = store.topics.topic_of(id) else { continue };
        if topics_seen.insert(topic.to_string()) && !out.contains(id) {
            out.push(id.clone());
        }
    }
    out
}

fn nodes_text(store: &MemoryStore, ids: &[String], sims: &dyn Fn(&str) -> Option<f64>) -> String {
    ids.iter()
        .filter_map(|id| store.graph.get(id))
        .map(|e| {
            let sim = sims(&e.id).map(|s| format!(" (similarity: {s:.3})")).unwrap_or_default();
            format!(
                "- {}{sim}: {} | time: {} | people: {}",
                e.id,
                e.summary,
                time_or_unknown(&e.time_info),
                if e.participants.is_empty() {
                    "unknown".to_string()
                } else {
                    e.participants.join(", ")
                }
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Picks start events for `plan.query`. An empty or failed selection
/// falls back to the three best-ranked events.
pub fn localize(
    plan: &SubgoalPlan,
    store: &MemoryStore,
    k: usize,
    p: usize,
    gateway: &Gateway<'_>,
    embedder: &dyn Embedder,
) -> Result<Localization, SearchError> {
    if store.graph.is_empty() {
        return Err(SearchError::EmptyStore);
    }
    let query_embedding = embedder.embed(&plan.query)?;
    let ranked = rank_events(store, &query_embedding);
    let candidates = candidate_set(store, &ranked, k.max(1), p);
    let sim_of = |id: &str| ranked.iter().find(|(r, _)| r == id).map(|(_, s)| *s);
    let b = bindings([
        ("question", plan.query.clone()),
        ("subgoals_text", subgoals_text(plan)),
        ("nodes_text", nodes_text(store, &candidates, &sim_of)),
    ]);
    let mut warnings = Vec::new();
    let selection = gateway.call(TemplateId::NodeSelection, &b, |t| {
        parse_node_selection(t, &candidates, LOCALIZATION_CAP)
    });
    let selected = match selection {
        Ok(parsed) => {
            warnings.extend(parsed.warnings);
            parsed.value
        }
        Err(e) => {
            warnings.push(format!("start-node selection failed: {e}"));
            Vec::new()
        }
    };
    let fell_back = selected.is_empty();
    let selected = if fell_back {
        ranked.iter().take(FALLBACK_START_NODES).map(|(id, _)| id.clone()).collect()
    } else {
        selected
    };
    Ok(Localization {
        top_k: ranked.into_iter().take(k.max(1)).collect(),
        candidates,
        selected,
        fell_back,
        warnings,
    })
}

/// Picks at most three events from one topic cluster.
pub fn select_from_cluster(
    question: &str,
    members: &[String],
    store: &MemoryStore,
    gateway: &Gateway<'_>,
) -> Result<Parsed<Vec<String>>, GatewayError> {
    let b = bindings([
        ("question", question.to_string()),
        ("nodes_text", nodes_text(store, members, &|_| None)),
    ]);
    gateway.call(TemplateId::ClusterSelection, &b, |t| {
        parse_node_selection(t, members, CLUSTER_CAP)
    })
}

/// Asks the model what to do at `node`. A failed call becomes a SKIP with
/// no next nodes.
pub fn step(
    node: &Event,
    plan: &SubgoalPlan,
    evidence: &[EvidenceItem],
    store: &MemoryStore,
    gateway: &Gateway<'_>,
) -> Parsed<Action> {
    let kept = evidence_lines(evidence);
    let b = bindings([
        ("question", plan.query.clone()),
        ("subgoals_text", subgoals_text(plan)),
        ("kept_nodes_info", if kept.is_empty() { NO_KEPT_INFO.to_string() } else { kept }),
        ("current_info", node_info(node)),
        ("neighbor_info", neighbor_info(store, &node.id)),
    ]);
    let valid: Vec<String> = store
        .graph
        .neighbors(&node.id)
        .map(|ns| ns.iter().map(|n| n.event.id.clone()).collect())
        .unwrap_or_default();
    match gateway.call(TemplateId::ActionDecision, &b, |t| {
        parse_action_decision(t, &valid, plan.subgoals.len())
    }) {
        Ok(parsed) => parsed,
        Err(e) => Parsed {
            value: Action::skip(),
            warnings: vec![format!("decision at {} failed ({e}); skipped", node.id)],
        },
    }
}

/// Effect of one decision on the shared state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ApplyOutcome {
    pub enqueued: Vec<String>,
    pub path_done: bool,
}

/// Records `action` taken at `node`: retains the node on EXPAND/ANSWER,
/// ORs in satisfied sub-goals, and enqueues suggested neighbors while any
/// sub-goal is open.
pub fn apply_action(
    state: &mut SearchState,
    plan: &mut SubgoalPlan,
    store: &MemoryStore,
    node: &str,
    action: &Action,
) -> ApplyOutcome {
    state.stats.actions.record(action.kind);
    state.stats.total_steps += 1;
    if action.kind != ActionKind::Skip {
        if let Some(event) = store.graph.get(node) {
            state
                .evidence
                .push(EvidenceItem::from_event(event, action.satisfied_subgoals.clone(), state.round));
        }
        plan.satisfy(&action.satisfied_subgoals);
    }
    let mut enqueued = Vec::new();
    if !plan.all_satisfied() {
        for next in &action.next_nodes {
            let Some(event) = store.graph.get(next) else { continue };
            if state.offer(next, event, plan) {
                enqueued.push(next.clone());
            }
        }
    }
    if !enqueued.is_empty() {
        state.note_queue_size();
    }
    ApplyOutcome {
        path_done: action.kind == ActionKind::Answer,
        enqueued,
    }
}

/// Rewrites the query toward the open sub-goals. `None` when the model's
/// reply is unusable.
pub fn refine(plan: &SubgoalPlan, evidence: &[EvidenceItem], gateway: &Gateway<'_>) -> Parsed<Option<SubgoalPlan>> {
    let list = |want: bool| {
        let lines: Vec<String> = plan
            .subgoals
            .iter()
            .zip(&plan.satisfaction)
            .enumerate()
            .filter(|(_, (_, s))| **s == want)
            .map(|(i, (g, _))| format!("{}. {g}", i + 1))
            .collect();
        if lines.is_empty() {
            "(none)".to_string()
        } else {
            lines.join("\n")
        }
    };
    let context = evidence_lines(evidence);
    let b = bindings([
        ("original_question", plan.original_query.clone()),
        ("satisfied_text", list(true)),
        ("unsatisfied_text", list(false)),
        ("context_so_far", if context.is_empty() { NO_KEPT_INFO.to_string() } else { context }),
    ]);
    match gateway.call(TemplateId::QueryRefinement, &b, parse_refined_query) {
        Ok(parsed) => {
            let mut next = plan.clone();
            next.query = parsed.value.query;
            Parsed {
                value: Some(next),
                warnings: parsed.warnings,
            }
        }
        Err(e) => Parsed {
            value: None,
            warnings: vec![format!("refinement failed ({e}); stopping with partial evidence")],
        },
    }
}

/// Evidence as timestamped summaries, oldest event first.
pub fn evidence_context(evidence: &[EvidenceItem]) -> String {
    let mut items: Vec<&EvidenceItem> = evidence.iter().collect();
    // ids are issued in ingestion order
    items.sort_by(|a, b| a.id.cmp(&b.id));
    items.dedup_by(|a, b| a.id == b.id);
    items
        .iter()
        .map(|e| {
            if e.time_info.trim().is_empty() {
                format!("- {}", e.summary)
            } else {
                format!("- [{}] {}", e.time_info, e.summary)
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Answers `question` from `evidence`.
pub fn respond(question: &str, evidence: &[EvidenceItem], gateway: &Gateway<'_>) -> Result<String, SearchError> {
    if evidence.is_empty() {
        return Err(SearchError::EmptyEvidence);
    }
    let b = bindings([("context", evidence_context(evidence)), ("question", question.to_string())]);
    gateway
        .call(TemplateId::ResponseGeneration, &b, |t| {
            Ok(Parsed {
                value: crate::llm::parse_response(t),
                warnings: Vec::new(),
            })
        })
        .map(|p| p.value)
        .map_err(SearchError::Respond)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub question: String,
    pub answer: String,
    pub plan: SubgoalPlan,
    pub evidence: Vec<EvidenceItem>,
    pub used_fallback: bool,
    /// Start nodes per round.
    pub start_nodes: Vec<Vec<String>>,
    pub stats: SearchStats,
    pub trace: Vec<TraceStep>,
    pub warnings: Vec<String>,
}

impl SearchResult {
    /// Ids visited, in visit order.
    pub fn explored(&self) -> Vec<&str> {
        self.trace.iter().map(|t| t.node.as_str()).collect()
    }
}

struct Frontier {
    state: SearchState,
    plan: SubgoalPlan,
    in_flight: usize,
    next_path: usize,
}

struct Explorer<'a> {
    store: &'a MemoryStore,
    gateway: &'a Gateway<'a>,
    step_cap: usize,
    frontier: &'a Mutex<Frontier>,
    wake: &'a Condvar,
}

impl Explorer<'_> {
    fn lock(&self) -> std::sync::MutexGuard<'_, Frontier> {
        self.frontier.lock().expect("frontier lock poisoned")
    }

    /// Runs paths until the frontier is empty and no explorer is mid-path.
    fn run(&self) {
        loop {
            let (mut node, mut prio, path) = {
                let mut f = self.lock();
                loop {
                    if let Some((n, p)) = f.state.pop_next() {
                        f.in_flight += 1;
                        f.next_path += 1;
                        let path = f.next_path - 1;
                        break (n, p, path);
                    }
                    if f.in_flight == 0 {
                        self.wake.notify_all();
                        return;
                    }
                    f = self.wake.wait(f).expect("frontier lock poisoned");
                }
            };
            let mut len = 0;
            loop {
                len += 1;
                let (plan, evidence) = {
                    let f = self.lock();
                    (f.plan.clone(), f.state.evidence.clone())
                };
                let event = self.store.graph.get(&node).expect("queued ids exist");
                let decision = step(event, &plan, &evidence, self.store, self.gateway);

                let mut guard = self.lock();
                let f = &mut *guard;
                let outcome = apply_action(&mut f.state, &mut f.plan, self.store, &node, &decision.value);
                f.state.warnings.extend(decision.warnings);
                f.state.trace.push(TraceStep {
                    round: f.state.round,
                    path,
                    node: node.clone(),
                    priority: prio,
                    action: decision.value.kind,
                    next_nodes: decision.value.next_nodes.clone(),
                    satisfied_subgoals: decision.value.satisfied_subgoals.clone(),
                    enqueued: outcome.enqueued.clone(),
                });
                if !outcome.enqueued.is_empty() {
                    self.wake.notify_all();
                }
                let go_on = !outcome.path_done && !outcome.enqueued.is_empty() && len < self.step_cap;
                if go_on {
                    if let Some((n, p)) = f.state.pop_next() {
                        node = n;
                        prio = p;
                        continue;
                    }
                }
                f.state.stats.path_lengths.push(len);
                f.state.stats.paths += 1;
                f.in_flight -= 1;
                self.wake.notify_all();
                break;
            }
        }
    }
}

fn explore(frontier: &Mutex<Frontier>, store: &MemoryStore, gateway: &Gateway<'_>, config: &Config) {
    let wake = Condvar::new();
    let explorer = Explorer {
        store,
        gateway,
        step_cap: config.path_step_cap.max(1),
        frontier,
        wake: &wake,
    };
    let workers = config.num_explorers.max(1);
    if workers == 1 {
        explorer.run();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| explorer.run());
            }
        });
    }
}

fn seed(f: &mut Frontier, store: &MemoryStore, ids: &[String]) -> usize {
    let mut n = 0;
    for id in ids {
        if let Some(event) = store.graph.get(id) {
            if f.state.offer(id, event, &f.plan) {
                n += 1;
            }
        }
    }
    f.state.note_queue_size();
    n
}

/// Full search: plan, localize, explore, refine at most
/// `max_refinement_rounds` times, and answer.
///
/// With one explorer and a scripted provider the result is deterministic.
pub fn run_search(
    question: &str,
    store: &MemoryStore,
    gateway: &Gateway<'_>,
    embedder: &dyn Embedder,
    config: &Config,
) -> Result<SearchResult, SearchError> {
    let started = Instant::now();
    if store.graph.is_empty() {
        return Err(SearchError::EmptyStore);
    }
    let planned = plan(question, gateway, embedder, config)?;
    let mut warnings = planned.warnings;

    let loc = localize(&planned.value, store, config.top_k, config.top_p_topics, gateway, embedder)?;
    let mut state = SearchState {
        initial_candidates: loc.top_k.iter().map(|(id, _)| id.clone()).collect(),
        ..Default::default()
    };
    state.stats.subgoal_count = planned.value.subgoals.len();
    state.stats.retrieved_nodes = loc.candidates.len();
    state.stats.avg_similarity = if loc.top_k.is_empty() {
        0.0
    } else {
        loc.top_k.iter().map(|(_, s)| s).sum::<f64>() / loc.top_k.len() as f64
    };
    warnings.extend(loc.warnings);
    let mut start_nodes = vec![loc.selected.clone()];

    let frontier = Mutex::new(Frontier {
        state,
        plan: planned.value,
        in_flight: 0,
        next_path: 0,
    });
    {
        let mut f = frontier.lock().expect("frontier lock poisoned");
        let n = seed(&mut f, store, &loc.selected);
        f.state.stats.initial_nodes = n;
        f.state.stats.initial_queue_size = n;
    }
    explore(&frontier, store, gateway, config);

    loop {
        let mut f = frontier.lock().expect("frontier lock poisoned");
        if f.plan.all_satisfied() || f.state.round >= config.max_refinement_rounds {
            break;
        }
        let refined = refine(&f.plan, &f.state.evidence, gateway);
        warnings.extend(refined.warnings);
        let Some(next_plan) = refined.value else { break };
        f.plan = next_plan;
        f.state.round += 1;
        f.state.stats.refined = true;
        let loc = localize(&f.plan, store, config.top_k, config.top_p_topics, gateway, embedder)?;
        warnings.extend(loc.warnings);
        f.state.stats.retrieved_nodes += loc.candidates.len();
        start_nodes.push(loc.selected.clone());
        let seeded = seed(&mut f, store, &loc.selected);
        drop(f);
        if seeded == 0 {
            break;
        }
        explore(&frontier, store, gateway, config);
    }

    let Frontier { mut state, plan, .. } = frontier.into_inner().expect("frontier lock poisoned");
    state.stats.exploration_rounds = state.round + 1;
    state.stats.kept_nodes = state.evidence.len();
    state.stats.satisfied_count = plan.satisfied_count();
    let used_fallback = state.evidence.is_empty();
    let evidence = if used_fallback {
        state
            .initial_candidates
            .iter()
            .filter_map(|id| store.graph.get(id))
            .map(|e| EvidenceItem::from_event(e, Vec::new(), 0))
            .collect()
    } else {
        state.evidence.clone()
    };
    state.stats.used_fallback = used_fallback;
    let answer = respond(&plan.original_query, &evidence, gateway)?;
    state.stats.elapsed_secs = started.elapsed().as_secs_f64();
    warnings.extend(state.warnings);
    for w in &warnings {
        tracing::debug!(warning = %w, "search");
    }
    Ok(SearchResult {
        question: question.to_string(),
        answer,
        plan,
        evidence,
        used_fallback,
        start_nodes,
        stats: state.stats,
        trace: state.trace,
        warnings,
    })
}
