//! Prompt templates and rendering.
//!
//! Placeholders are written `{name}`; `{{` and `}}` produce literal braces.
//! Rendering fails on an unknown template placeholder left unbound, so a
//! prompt never reaches a model with a dangling brace in it.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::EmptyBindingPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    EventExtraction,
    RelationExtraction,
    Coreference,
    ActionDecision,
    ResponseGeneration,
    QueryRefinement,
    NodeSelection,
    ClusterSelection,
    Planner,
}

impl TemplateId {
    pub const ALL: [TemplateId; 9] = [
        TemplateId::EventExtraction,
        TemplateId::RelationExtraction,
        TemplateId::Coreference,
        TemplateId::ActionDecision,
        TemplateId::ResponseGeneration,
        TemplateId::QueryRefinement,
        TemplateId::NodeSelection,
        TemplateId::ClusterSelection,
        TemplateId::Planner,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::EventExtraction => "event_extraction",
            TemplateId::RelationExtraction => "relation_extraction",
            TemplateId::Coreference => "coreference",
            TemplateId::ActionDecision => "action_decision",
            TemplateId::ResponseGeneration => "response_generation",
            TemplateId::QueryRefinement => "query_refinement",
            TemplateId::NodeSelection => "node_selection",
            TemplateId::ClusterSelection => "cluster_selection",
            TemplateId::Planner => "planner",
        }
    }

    pub fn template(self) -> &'static str {
        match self {
            TemplateId::EventExtraction => EVENT_EXTRACTION,
            TemplateId::RelationExtraction => RELATION_EXTRACTION,
            TemplateId::Coreference => COREFERENCE,
            TemplateId::ActionDecision => ACTION_DECISION,
            TemplateId::ResponseGeneration => RESPONSE_GENERATION,
            TemplateId::QueryRefinement => QUERY_REFINEMENT,
            TemplateId::NodeSelection => NODE_SELECTION,
            TemplateId::ClusterSelection => CLUSTER_SELECTION,
            TemplateId::Planner => PLANNER,
        }
    }

    /// Bindings that identify a call for replay purposes. Cosmetic template
    /// edits do not change replay keys.
    pub fn salient_bindings(self) -> &'static [&'static str] {
        match self {
            TemplateId::EventExtraction => &["dialog"],
            TemplateId::RelationExtraction => &["events"],
            TemplateId::Coreference => &["event_a", "event_b"],
            TemplateId::ActionDecision => &["question", "current_info"],
            TemplateId::ResponseGeneration => &["question"],
            TemplateId::QueryRefinement => &["original_question", "unsatisfied_text"],
            TemplateId::NodeSelection => &["question"],
            TemplateId::ClusterSelection => &["question", "nodes_text"],
            TemplateId::Planner => &["question"],
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = RenderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| RenderError::UnknownTemplate(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RenderError {
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("template `{template}` has no binding for `{name}`")]
    Unbound { template: TemplateId, name: String },
    #[error("template `{template}` got an empty binding for `{name}`")]
    EmptyBinding { template: TemplateId, name: String },
    #[error("template `{template}` has an unterminated placeholder")]
    Unterminated { template: TemplateId },
}

pub type Bindings = BTreeMap<String, String>;

/// Builds a binding map from `(name, value)` pairs.
pub fn bindings<I, K, V>(pairs: I) -> Bindings
where
    I: IntoIterator<Item = (K, V)>,
    K: Into<String>,
    V: Into<String>,
{
    pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect()
}

pub const NONE_MARKER: &str = "(none)";

/// Placeholder names in order of first appearance.
pub fn placeholders(template: TemplateId) -> Vec<&'static str> {
    let text = template.template();
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(pos) = rest.find(['{', '}']) {
        let tail = &rest[pos..];
        if tail.starts_with("{{") || tail.starts_with("}}") {
            rest = &tail[2..];
            continue;
        }
        if tail.starts_with('{') {
            if let Some(end) = tail.find('}') {
                let name = &tail[1..end];
                if !out.contains(&name) {
                    out.push(name);
                }
                rest = &tail[end + 1..];
                continue;
            }
        }
        rest = &tail[1..];
    }
    out
}

/// Renders `template` with `bindings`. Empty values follow `policy`.
pub fn render_prompt_with(
    template: TemplateId,
    bindings: &Bindings,
    policy: EmptyBindingPolicy,
) -> Result<String, RenderError> {
    let text = template.template();
    let mut out = String::with_capacity(text.len() + 256);
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        match c {
            '{' if matches!(chars.peek(), Some((_, '{'))) => {
                chars.next();
                out.push('{');
            }
            '}' if matches!(chars.peek(), Some((_, '}'))) => {
                chars.next();
                out.push('}');
            }
            '{' => {
                let end = text[i..]
                    .find('}')
                    .ok_or(RenderError::Unterminated { template })?;
                let name = &text[i + 1..i + end];
                let value = bindings.get(name).ok_or_else(|| RenderError::Unbound {
                    template,
                    name: name.to_string(),
                })?;
                if value.trim().is_empty() {
                    match policy {
                        EmptyBindingPolicy::NoneMarker => out.push_str(NONE_MARKER),
                        EmptyBindingPolicy::Error => {
                            return Err(RenderError::EmptyBinding {
                                template,
                                name: name.to_string(),
                            })
                        }
                    }
                } else {
                    out.push_str(value);
                }
                while let Some((j, _)) = chars.peek() {
                    if *j > i + end {
                        break;
                    }
                    chars.next();
                }
            }
            other => out.push(other),
        }
    }
    Ok(out)
}

/// Renders with the default empty-binding policy (`(none)` marker).
pub fn render_prompt(template: TemplateId, bindings: &Bindings) -> Result<String, RenderError> {
    render_prompt_with(template, bindings, EmptyBindingPolicy::default())
}

/// `template_id:<16 hex digits of sha256 over the salient bindings>`.
pub fn replay_key(template: TemplateId, bindings: &Bindings) -> String {
    let mut hasher = Sha256::new();
    for name in template.salient_bindings() {
        hasher.update(name.as_bytes());
        hasher.update([0x1f]);
        hasher.update(bindings.get(*name).map(String::as_str).unwrap_or("").as_bytes());
        hasher.update([0x1e]);
    }
    let digest = hasher.finalize();
    let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    format!("{}:{hex}", template.as_str())
}

/// A rendered prompt together with its replay key.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedPrompt {
    pub template: TemplateId,
    pub text: String,
    pub replay_key: String,
}

impl RenderedPrompt {
    pub fn new(
        template: TemplateId,
        bindings: &Bindings,
        policy: EmptyBindingPolicy,
    ) -> Result<Self, RenderError> {
        Ok(Self {
            template,
            text: render_prompt_with(template, bindings, policy)?,
            replay_key: replay_key(template, bindings),
        })
    }
}

const EVENT_EXTRACTION: &str = r#"You are an expert information extraction system. Given a multi-turn dialog, extract meaningful events and output ONE strict JSON object.

Goals:
- Extract logically coherent events (E1, E2, ...) in chronological order. Each event represents a complete logical unit.
- AGGRESSIVELY COMBINE related micro-events into comprehensive summaries to avoid fragmentation. Merge events that:
  -- Involve same participants discussing the same topic.
  -- Form a logical sequence (decision + action + completion).
  -- Are temporally close and thematically related (within 3-5 utterances).
  -- Represent different aspects of the same situation/problem.
  -- Include follow-up questions, clarifications, or elaborations.
- PRESERVE ALL important details within each merged event summary. Include:
  -- Complete context and all key outcomes, results, and conclusions.
  -- Specific facts, numbers, dates, locations, and concrete details.
  -- Emotional states, reactions, and interpersonal dynamics.
  -- Technical details, requirements, and specifications.
  -- Any conditions, constraints, or limitations discussed.
  -- IMPORTANT: Include visual content descriptions for shared images.
- Constraints: List people involved as an array `people` (max 3). Do not output other entity types or attributes.
- Event Count: Extract 6-10 comprehensive events. Prioritize fewer, more detailed events over many fragmented ones.

DIALOG (one utterance per line, as [utterance_id] (timestamp) speaker: text):
{dialog}

RESPONSE FORMAT:
{{"events": [{{"id": "E1", "summary": "...", "utterance_ids": ["..."], "time": "...", "people": ["..."]}}]}}
Output JSON only, no additional commentary."#;

const RELATION_EXTRACTION: &str = r#"You are an expert information extraction system. Given a list of extracted events from a dialog, identify meaningful pairwise relations between them and output ONE strict JSON object.

Goals:
- Consider ALL unordered pairs of events within the same session (not only adjacent events).
- Extract pairwise event relations with a SHORT, free-form label in `type` that best characterizes the link.
- Relation types can include: causal, motivation, enablement, follow_up, temporal_before, temporal_after, contrast, part_of, parallel, elaboration. These are examples, not a closed set.
- Add relations only when meaningful. Prefer specific semantic links over trivial temporal ordering.
- It is acceptable to have no temporal edges if they add no insight.

CRITICAL GUIDELINES:
- IMPORTANT: For temporal relations (follow_up, temporal_before, temporal_after), base them on the ACTUAL TIME when events occurred in the real world, NOT on when they are described in the dialog. Focus on the chronological sequence of reality.
- For each relation, cite minimal `evidence` utterance ids that support the linkage between the two events.

EVENTS:
{events}

RESPONSE FORMAT:
{{"relations": [{{"source": "E1", "target": "E2", "type": "causal", "evidence": ["..."]}}]}}
Output JSON only, no additional commentary."#;

const COREFERENCE: &str = r#"You are an expert at analyzing events and determining if they refer to the same real-world occurrence or have significant overlap.

Given two event descriptions extracted from different dialog sessions, determine:
- 1. Whether they describe the SAME event (same occurrence at the same time).
- 2. Whether they have SIGNIFICANT OVERLAP (mention or relate to the same real-world situation/topic).

Consider these factors:
- Do they involve the same people/participants?
- Do they describe the same actions, situations, or topics?
- Do they have compatible time references?
- Would merging their information create a more complete picture of ONE event?

EVENT A:
{event_a}

EVENT B:
{event_b}

Output a JSON object with these exact keys:
{{
  "same_event": boolean,          // true if they are the same event
  "has_overlap": boolean,         // true if they refer to the same situation
  "relation_type": string | null, // suggest relation type if overlap
  "reasoning": string             // brief explanation
}}"#;

const ACTION_DECISION: &str = r#"You are an expert information evaluator. Your task is to decide which action to take for the current node based on how relevant and sufficient it is for answering the given question. You have THREE possible actions:

1. SKIP: The current node is NOT helpful for answering the question or satisfying any sub-goals.
- Use SKIP when the current node contains completely irrelevant information.
- The current node will be DISCARDED, not used in final answer.
- You should specify which neighbor node(s) to explore next, OR specify NONE if ALL neighbors are irrelevant.
- Multi-node selection rules: Maximum 3 nodes, only select HIGHLY relevant ones.

2. EXPAND: The current node IS helpful and helps satisfy some sub-goals, but NOT all sub-goals are satisfied yet.
- Use EXPAND when the current node contains useful information for one or more sub-goals.
- The current node will be KEPT and used in the final answer.
- Specify neighbor node(s) to explore next to satisfy remaining sub-goals, OR specify NONE if no neighbors are relevant.
- CRITICAL: You MUST indicate which sub-goals are now satisfied by this node + previously kept information. Only mark a sub-goal as satisfied if you have DIRECT evidence.

3. ANSWER: Use ONLY when ALL sub-goals are SATISFIED (or nearly all).
- Use ANSWER when the previously kept information + current node together satisfy ALL sub-goals.
- The current node will be KEPT and exploration will STOP.
- CRITICAL: You MUST list ALL satisfied sub-goals to confirm completeness.
- Be conservative: If ANY sub-goal remains unsatisfied, use EXPAND instead.

CRITICAL GUIDELINES:
-- Check sub-goals systematically: For each action, explicitly evaluate which sub-goals are satisfied.
-- ANSWER only when complete: Use ANSWER only when ALL (or all critical) sub-goals are satisfied.
-- Navigate strategically: Choose next nodes that are likely to help satisfy remaining unsatisfied sub-goals.
-- Be explicit about progress: Always indicate which sub-goals your current decision addresses.

RESPONSE FORMAT (follow strictly):
ACTION: [SKIP/EXPAND/ANSWER]
NEXT_NODES: [NODE_ID1, NODE_ID2, ...] (or NONE)
SATISFIED_SUBGOALS: [1, 3, 4] (REQUIRED for EXPAND/ANSWER; [] for SKIP)
REASONING: [Brief explanation: (1) info provided, (2) sub-goals satisfied, (3) sub-goals remaining, (4) why chosen next nodes target remaining sub-goals]

IMPORTANT: (1) For SKIP, SATISFIED_SUBGOALS must be []; (2) For EXPAND/ANSWER: provide list even if empty; (3) Only include sub-goals with DIRECT evidence; (4) Do NOT speculate.

QUESTION: {question}
{subgoals_text}

PREVIOUSLY KEPT INFORMATION:
{kept_nodes_info}

CURRENT NODE INFORMATION:
{current_info}

NEIGHBOR NODES (available for exploration):
{neighbor_info}

Now, make your decision:"#;

const RESPONSE_GENERATION: &str = r#"Your task is to answer the QUESTION based on the provided CONTEXT.

Requirements:
- Be concise and direct: Provide ONLY the answer in the form of a short phrase, not a sentence. No explanations or additional commentary.
- Original wording: If the context contains direct statements that answer the question, use the original wording from the context.
- Inference: If the context doesn't have direct statements, you may summarize and infer the answer from the relevant information.
- Time Reference Calculation: If there is a question about time references (like "last year", "two months ago", etc.), calculate the actual date based on the memory timestamp.
  Example: If a memory from 4 May 2022 mentions "went to India last year," then the trip occurred in 2021.
- Specific Dates: Always convert relative time references to specific dates, months, or years. For example, convert "last year" to "2022" or "two months ago" to "March, 2023" based on the memory timestamp.
- Reasonable Justification: If you are uncertain or lack sufficient information, do not state that the information is insufficient. Instead, provide a reasonable and well-justified answer based on general knowledge.
- Keep it brief: Keep your answer brief and to the point.

CONTEXT:
{context}

QUESTION:
{question}

ANSWER:"#;

const QUERY_REFINEMENT: &str = r#"You are an assistant whose role is to generate a refined search query to find missing information.

ORIGINAL QUESTION:
{original_question}

SUB-GOALS STATUS:
Satisfied sub-goals:
{satisfied_text}
Unsatisfied sub-goals:
{unsatisfied_text}

INFORMATION COLLECTED SO FAR:
{context_so_far}

TASK:
Generate a NEW search query that specifically targets the UNSATISFIED sub-goals.

Your new query should:
- 1. Focus on the specific unsatisfied sub-goals.
- 2. Be clear and specific.
- 3. Use different keywords or phrases than the original question.
- 4. Target information that would help satisfy the remaining sub-goals.
- 5. NOT repeat the original question.

RESPONSE FORMAT:
New Query: [Your refined search query - single clear question or search phrase targeting unsatisfied sub-goals]
Target Sub-goals: [List which sub-goal numbers this query aims to satisfy]

Generate your response:"#;

const NODE_SELECTION: &str = r#"You are selecting the most promising memory nodes to explore for answering a question.

QUESTION: {question}
{subgoals_text}

CANDIDATE NODES (retrieved by semantic similarity):
{nodes_text}

INSTRUCTIONS:
Select the nodes that are HIGHLY LIKELY to contain information relevant to one or more sub-goals.
- Be selective: Only choose nodes whose summaries clearly indicate relevance to specific sub-goals.
- Maximum 5 nodes: Select at most 5 nodes to explore.
- Diversity: Try to select nodes that address different sub-goals if possible.
- Quality over quantity: It's better to select 2 highly relevant nodes than 5 marginally relevant ones.
- If a node's summary is vague or doesn't clearly relate to any sub-goal, DON'T select it.
- Consider both the summary content and the similarity score.

RESPONSE FORMAT:
Selected Nodes: [NODE_ID1, NODE_ID2, ...]
Reasoning: [Brief explanation of why each selected node is likely relevant to specific sub-goals]

Now make your selection:"#;

const CLUSTER_SELECTION: &str = r#"You are selecting the most relevant memory node(s) to answer a question.

QUESTION: {question}

AVAILABLE NODES:
{nodes_text}

INSTRUCTIONS:
Select the node(s) that are HIGHLY relevant to answering the question.
- Be selective: Only choose nodes that are HIGHLY relevant to the question.
- Maximum 3 nodes: Select at most 3 nodes per cluster.
- If ONLY ONE node is clearly the most relevant, select just that one.
- Select multiple nodes (2-3) ONLY when they are ALL highly relevant AND provide complementary information:
  * Information is distributed across multiple memories about the SAME topic.
  * The question has multiple specific aspects that DIFFERENT nodes address.
  * Multiple nodes provide different pieces of the SAME answer.
- Consider the summary content, people involved, and time information.
- Do NOT select nodes that are only tangentially related or vaguely relevant.

RESPONSE FORMAT:
Selected Nodes: [NODE_ID1, NODE_ID2, ...]
Reason: [Brief explanation of why these specific nodes are HIGHLY relevant]"#;

const PLANNER: &str = r#"You are a strategic planning assistant. Your task is to analyze a question and break it down into 2-5 specific sub-goals that need to be satisfied to fully answer the question.

QUESTION: {question}

INSTRUCTIONS:
- 1. Analyze what information components are needed to fully answer this question.
- 2. Break down the question into 2-5 specific, concrete sub-goals.
- 3. Each sub-goal should represent a distinct piece of information needed.
- 4. Sub-goals should be:
  -- Specific and clear (not vague)
  -- Independently verifiable (can determine if it's satisfied)
  -- Collectively sufficient (together they fully answer the question)
  -- Atomic (each sub-goal addresses ONE aspect)

RESPONSE FORMAT (follow strictly):
Sub-goal 1: [First specific information need]
Sub-goal 2: [Second specific information need]
Sub-goal 3: [Third specific information need]
...

Now analyze the question and generate sub-goals:"#;
