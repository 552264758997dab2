//! Response parsers, one per prompt family.
//!
//! Every parser is total: arbitrary input yields either a well-formed value
//! or a [`ParseError`]. Recoverable deviations are repaired and reported in
//! [`Parsed::warnings`].

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::memory::MAX_PARTICIPANTS;

pub const MAX_NEXT_NODES: usize = 3;
pub const LOCALIZATION_CAP: usize = 5;
pub const CLUSTER_CAP: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("missing key `{0}`")]
    MissingKey(String),
    #[error("missing `{0}` line")]
    MissingLine(&'static str),
    #[error("unrecognized action `{0}`")]
    UnknownAction(String),
    #[error("expected at least {min} sub-goals, found {found}")]
    TooFewSubgoals { found: usize, min: usize },
    #[error("refined query is empty")]
    EmptyQuery,
}

/// A parsed value plus the repairs applied to reach it.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

impl<T> Parsed<T> {
    fn clean(value: T) -> Self {
        Self {
            value,
            warnings: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ActionKind {
    Skip,
    Expand,
    Answer,
}

impl ActionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Skip => "SKIP",
            ActionKind::Expand => "EXPAND",
            ActionKind::Answer => "ANSWER",
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A navigator decision.
///
/// Invariants: `Skip` has no satisfied sub-goals, `Answer` has no next
/// nodes, and there are at most [`MAX_NEXT_NODES`] next nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    pub next_nodes: Vec<String>,
    /// 1-based sub-goal indices, ascending, no duplicates.
    pub satisfied_subgoals: Vec<usize>,
    pub reasoning: String,
}

impl Action {
    pub fn skip() -> Self {
        Self {
            kind: ActionKind::Skip,
            next_nodes: Vec::new(),
            satisfied_subgoals: Vec::new(),
            reasoning: String::new(),
        }
    }

    /// Renders in the navigator response grammar.
    pub fn to_response_text(&self) -> String {
        let next = if self.next_nodes.is_empty() {
            "NONE".to_string()
        } else {
            format!("[{}]", self.next_nodes.join(", "))
        };
        let sat: Vec<String> = self.satisfied_subgoals.iter().map(usize::to_string).collect();
        format!(
            "ACTION: {}\nNEXT_NODES: {next}\nSATISFIED_SUBGOALS: [{}]\nREASONING: {}",
            self.kind,
            sat.join(", "),
            self.reasoning
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreferenceVerdict {
    pub same_event: bool,
    pub has_overlap: bool,
    pub relation_type: Option<String>,
    pub reasoning: String,
}

/// One event as emitted by the extraction prompt, before id assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawEvent {
    pub id: String,
    pub summary: String,
    #[serde(alias = "span", alias = "utterances")]
    pub utterance_ids: Vec<String>,
    #[serde(default, alias = "time_info")]
    pub time: String,
    #[serde(default, alias = "participants")]
    pub people: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRelation {
    #[serde(alias = "src", alias = "from", alias = "head")]
    pub source: String,
    #[serde(alias = "dst", alias = "to", alias = "tail")]
    pub target: String,
    #[serde(rename = "type", alias = "label", alias = "relation")]
    pub kind: String,
    #[serde(default)]
    pub evidence: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinedQuery {
    pub query: String,
    pub target_subgoals: Vec<usize>,
}

/// Extraction asks for 6 to 10 events; outside this range is a warning only.
pub const EVENT_COUNT_HINT: (usize, usize) = (6, 10);

/// Strips one enclosing markdown code fence, if present.
fn unfence(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let Some(body_start) = rest.find('\n') else {
        return t;
    };
    let info = &rest[..body_start];
    if info.contains('`') {
        return t;
    }
    let body = &rest[body_start + 1..];
    match body.trim_end().strip_suffix("```") {
        Some(inner) if !inner.contains("```") => inner.trim(),
        _ => t,
    }
}

/// Exactly one JSON object, optionally fenced, with nothing around it.
fn strict_object(text: &str) -> Result<serde_json::Map<String, Value>, ParseError> {
    let body = unfence(text);
    let value: Value = serde_json::from_str(body).map_err(|e| ParseError::MalformedJson(e.to_string()))?;
    match value {
        Value::Object(map) => Ok(map),
        other => Err(ParseError::MalformedJson(format!(
            "expected an object, found {}",
            json_kind(&other)
        ))),
    }
}

fn json_kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

fn take_array<T: serde::de::DeserializeOwned>(
    map: &mut serde_json::Map<String, Value>,
    key: &str,
) -> Result<Vec<T>, ParseError> {
    let value = map.remove(key).ok_or_else(|| ParseError::MissingKey(key.into()))?;
    let Value::Array(items) = value else {
        return Err(ParseError::MalformedJson(format!("`{key}` must be an array")));
    };
    items
        .into_iter()
        .enumerate()
        .map(|(i, item)| {
            serde_json::from_value(item).map_err(|e| {
                let msg = e.to_string();
                match msg.strip_prefix("missing field `") {
                    Some(rest) => ParseError::MissingKey(format!("{key}[{i}].{}", rest.trim_end_matches('`'))),
                    None => ParseError::MalformedJson(format!("{key}[{i}]: {msg}")),
                }
            })
        })
        .collect()
}

pub fn parse_event_extraction(text: &str) -> Result<Parsed<Vec<RawEvent>>, ParseError> {
    let mut map = strict_object(text)?;
    let mut events: Vec<RawEvent> = take_array(&mut map, "events")?;
    let mut warnings = Vec::new();
    for e in &mut events {
        if e.people.len() > MAX_PARTICIPANTS {
            warnings.push(format!(
                "event {} lists {} people; kept the first {MAX_PARTICIPANTS}",
                e.id,
                e.people.len()
            ));
            e.people.truncate(MAX_PARTICIPANTS);
        }
    }
    let (lo, hi) = EVENT_COUNT_HINT;
    if !(lo..=hi).contains(&events.len()) {
        warnings.push(format!("extracted {} events, outside {lo}-{hi}", events.len()));
    }
    Ok(Parsed { value: events, warnings })
}

pub fn parse_relation_extraction(text: &str) -> Result<Parsed<Vec<RawRelation>>, ParseError> {
    let mut map = strict_object(text)?;
    let relations = take_array(&mut map, "relations")?;
    Ok(Parsed::clean(relations))
}

pub fn parse_coreference(text: &str) -> Result<Parsed<CoreferenceVerdict>, ParseError> {
    let map = strict_object(text)?;
    let field = |key: &str| map.get(key).ok_or_else(|| ParseError::MissingKey(key.into()));
    let boolean = |key: &str| {
        field(key)?
            .as_bool()
            .ok_or_else(|| ParseError::MalformedJson(format!("`{key}` must be a boolean")))
    };
    let same_event = boolean("same_event")?;
    let mut has_overlap = boolean("has_overlap")?;
    let relation_type = match field("relation_type")? {
        Value::Null => None,
        Value::String(s) if s.trim().is_empty() => None,
        Value::String(s) => Some(s.trim().to_string()),
        _ => {
            return Err(ParseError::MalformedJson(
                "`relation_type` must be a string or null".into(),
            ))
        }
    };
    let reasoning = match field("reasoning")? {
        Value::String(s) => s.clone(),
        _ => return Err(ParseError::MalformedJson("`reasoning` must be a string".into())),
    };
    let mut warnings = Vec::new();
    if same_event && !has_overlap {
        has_overlap = true;
        warnings.push("same_event without has_overlap; set has_overlap".into());
    }
    Ok(Parsed {
        value: CoreferenceVerdict {
            same_event,
            has_overlap,
            relation_type,
            reasoning,
        },
        warnings,
    })
}

/// Removes markdown emphasis and list markers around a response line.
fn clean_line(line: &str) -> String {
    let stripped = line.replace("**", "").replace("__", "");
    stripped
        .trim()
        .trim_start_matches(['-', '*', '#', '>', ' '])
        .trim()
        .to_string()
}

/// Value of the first `NAME:` line (case-insensitive; `_`, `-` and space
/// in the name are interchangeable).
fn field_value(text: &str, name: &str) -> Option<(usize, String)> {
    let want: String = name.chars().filter(|c| c.is_ascii_alphanumeric()).collect();
    for (i, line) in text.lines().enumerate() {
        let line = clean_line(line);
        let Some(colon) = line.find(':') else { continue };
        let key: String = line[..colon]
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect();
        if key.eq_ignore_ascii_case(&want) {
            return Some((i, line[colon + 1..].trim().to_string()));
        }
    }
    None
}

fn list_tokens(value: &str) -> Vec<String> {
    value
        .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
        .map(|t| {
            t.trim_matches(|c: char| {
                matches!(c, '[' | ']' | '(' | ')' | '"' | '\'' | '`' | '.' | '*' | '{' | '}')
            })
        })
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn is_none_list(value: &str) -> bool {
    let v = value.trim().trim_matches(|c: char| matches!(c, '[' | ']' | '(' | ')' | '"' | '\'' | '`' | '.' | ' '));
    v.is_empty() || v.eq_ignore_ascii_case("none")
}

/// Node ids from a list value, filtered to `valid` and deduplicated, in
/// response order.
fn id_list(value: &str, valid: &dyn Fn(&str) -> bool, warnings: &mut Vec<String>) -> Vec<String> {
    if is_none_list(value) {
        return Vec::new();
    }
    let mut out: Vec<String> = Vec::new();
    for token in list_tokens(value) {
        if token.eq_ignore_ascii_case("none") {
            continue;
        }
        if !valid(&token) {
            warnings.push(format!("dropped unknown node id `{token}`"));
        } else if !out.contains(&token) {
            out.push(token);
        }
    }
    out
}

fn index_list(value: &str, n: usize, warnings: &mut Vec<String>) -> Vec<usize> {
    let mut out = Vec::new();
    for token in list_tokens(value) {
        let digits: String = token.chars().filter(char::is_ascii_digit).collect();
        match digits.parse::<usize>() {
            Ok(i) if (1..=n).contains(&i) => out.push(i),
            Ok(i) => warnings.push(format!("dropped out-of-range sub-goal index {i}")),
            Err(_) if token.eq_ignore_ascii_case("none") => {}
            Err(_) => warnings.push(format!("dropped non-numeric sub-goal `{token}`")),
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

const ACTION_FIELDS: [&str; 4] = ["ACTION", "NEXT_NODES", "SATISFIED_SUBGOALS", "REASONING"];

pub fn parse_action_decision(
    text: &str,
    valid_node_ids: &[String],
    n_subgoals: usize,
) -> Result<Parsed<Action>, ParseError> {
    let mut warnings = Vec::new();
    let (_, raw_action) = field_value(text, "ACTION").ok_or(ParseError::MissingLine("ACTION"))?;
    let token = list_tokens(&raw_action)
        .into_iter()
        .next()
        .unwrap_or_default()
        .to_ascii_uppercase();
    let kind = match token.as_str() {
        "SKIP" => ActionKind::Skip,
        "EXPAND" => ActionKind::Expand,
        "ANSWER" => ActionKind::Answer,
        _ => return Err(ParseError::UnknownAction(raw_action)),
    };

    let valid = |id: &str| valid_node_ids.iter().any(|v| v == id);
    let mut next_nodes = match field_value(text, "NEXT_NODES") {
        Some((_, v)) => id_list(&v, &valid, &mut warnings),
        None => {
            warnings.push("no NEXT_NODES line; treated as NONE".into());
            Vec::new()
        }
    };
    let mut satisfied = match field_value(text, "SATISFIED_SUBGOALS") {
        Some((_, v)) => index_list(&v, n_subgoals, &mut warnings),
        None => Vec::new(),
    };
    let reasoning = match field_value(text, "REASONING") {
        Some((line_no, first)) => {
            let mut parts = vec![first];
            for line in text.lines().skip(line_no + 1) {
                if ACTION_FIELDS.iter().any(|f| field_value(line, f).is_some()) {
                    break;
                }
                parts.push(line.trim_end().to_string());
            }
            parts.join("\n").trim().to_string()
        }
        None => String::new(),
    };

    if next_nodes.len() > MAX_NEXT_NODES {
        warnings.push(format!(
            "{} next nodes; kept the first {MAX_NEXT_NODES}",
            next_nodes.len()
        ));
        next_nodes.truncate(MAX_NEXT_NODES);
    }
    match kind {
        ActionKind::Skip if !satisfied.is_empty() => {
            warnings.push("SKIP listed satisfied sub-goals; cleared".into());
            satisfied.clear();
        }
        ActionKind::Answer if !next_nodes.is_empty() => {
            warnings.push("ANSWER listed next nodes; cleared".into());
            next_nodes.clear();
        }
        _ => {}
    }
    Ok(Parsed {
        value: Action {
            kind,
            next_nodes,
            satisfied_subgoals: satisfied,
            reasoning,
        },
        warnings,
    })
}

fn subgoal_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)^sub[\s_-]*goal\s*#?\s*(\d+)\s*[:.)\-]\s*(.*)$").expect("valid regex")
    })
}

fn unbracket(s: &str) -> &str {
    let t = s.trim();
    t.strip_prefix('[')
        .and_then(|x| x.strip_suffix(']'))
        .map(str::trim)
        .unwrap_or(t)
}

pub const SUBGOAL_BOUNDS: (usize, usize) = (2, 5);

/// Collects `Sub-goal N:` lines in order and keeps at most five.
pub fn parse_subgoals(text: &str) -> Result<Parsed<Vec<String>>, ParseError> {
    parse_subgoals_bounded(text, SUBGOAL_BOUNDS.0, SUBGOAL_BOUNDS.1)
}

pub fn parse_subgoals_bounded(text: &str, min: usize, max: usize) -> Result<Parsed<Vec<String>>, ParseError> {
    let mut goals = Vec::new();
    for line in text.lines() {
        let line = clean_line(line);
        if let Some(caps) = subgoal_line().captures(&line) {
            let goal = unbracket(&caps[2]);
            if !goal.is_empty() {
                goals.push(goal.to_string());
            }
        }
    }
    let mut warnings = Vec::new();
    if goals.len() < min {
        return Err(ParseError::TooFewSubgoals { found: goals.len(), min });
    }
    if goals.len() > max {
        warnings.push(format!("{} sub-goals; kept the first {max}", goals.len()));
        goals.truncate(max);
    }
    Ok(Parsed { value: goals, warnings })
}

pub fn parse_node_selection(text: &str, valid_ids: &[String], cap: usize) -> Result<Parsed<Vec<String>>, ParseError> {
    let (_, value) = field_value(text, "Selected Nodes").ok_or(ParseError::MissingLine("Selected Nodes"))?;
    let mut warnings = Vec::new();
    let valid = |id: &str| valid_ids.iter().any(|v| v == id);
    let mut ids = id_list(&value, &valid, &mut warnings);
    if ids.len() > cap {
        warnings.push(format!("{} nodes selected; kept the first {cap}", ids.len()));
        ids.truncate(cap);
    }
    Ok(Parsed { value: ids, warnings })
}

pub fn parse_refined_query(text: &str) -> Result<Parsed<RefinedQuery>, ParseError> {
    let (_, raw) = field_value(text, "New Query").ok_or(ParseError::MissingLine("New Query"))?;
    let query = unbracket(&raw).trim_matches(|c| c == '"' || c == '\'').trim().to_string();
    if query.is_empty() {
        return Err(ParseError::EmptyQuery);
    }
    let mut warnings = Vec::new();
    let target_subgoals = match field_value(text, "Target Sub-goals") {
        Some((_, v)) => index_list(&v, usize::MAX, &mut warnings),
        None => {
            warnings.push("no Target Sub-goals line".into());
            Vec::new()
        }
    };
    Ok(Parsed {
        value: RefinedQuery { query, target_subgoals },
        warnings,
    })
}

/// Strips a leading `ANSWER:` label from a responder completion.
pub fn parse_response(text: &str) -> String {
    let t = text.trim();
    let lower_prefix = t.get(..7).map(str::to_ascii_lowercase);
    let body = if lower_prefix.as_deref() == Some("answer:") { &t[7..] } else { t };
    body.trim().to_string()
}
