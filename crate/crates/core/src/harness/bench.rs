//! Question-answering benchmark runner.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::aggregate::{aggregate_stats, render_table, AggregateStats};
use super::metrics::{bleu1, token_f1};
use crate::config::Config;
use crate::llm::Gateway;
use crate::memory::{Embedder, MemoryStore};
use crate::search::{run_search, SearchStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    SingleHop,
    MultiHop,
    OpenDomain,
    Temporal,
    Unknown,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::SingleHop => "single_hop",
            Category::MultiHop => "multi_hop",
            Category::OpenDomain => "open_domain",
            Category::Temporal => "temporal",
            Category::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = std::convert::Infallible;

    /// Case and separator insensitive; anything unrecognized is `Unknown`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Ok(match key.as_str() {
            "singlehop" => Category::SingleHop,
            "multihop" => Category::MultiHop,
            "opendomain" => Category::OpenDomain,
            "temporal" => Category::Temporal,
            _ => Category::Unknown,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaRecord {
    pub question: String,
    pub gold_answer: String,
    pub category: Category,
    pub source_item: String,
}

fn text_field(obj: &serde_json::Map<String, Value>, keys: &[&str]) -> Option<String> {
    keys.iter().find_map(|k| match obj.get(*k)? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    })
}

impl QaRecord {
    /// Reads one dataset line. `gold_answer` may also be spelled `answer`,
    /// `source_item` may be `item` or `sample_id`; a missing category is
    /// `Unknown`.
    pub fn from_json_line(line: &str) -> Result<Self, String> {
        let value: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let Value::Object(obj) = value else {
            return Err("not a JSON object".into());
        };
        let question = text_field(&obj, &["question"]).filter(|q| !q.trim().is_empty());
        let gold = text_field(&obj, &["gold_answer", "answer"]).filter(|g| !g.trim().is_empty());
        let (Some(question), Some(gold_answer)) = (question, gold) else {
            return Err("question and gold answer must be non-empty".into());
        };
        let category = text_field(&obj, &["category"])
            .map(|c| c.parse().expect("infallible"))
            .unwrap_or(Category::Unknown);
        Ok(Self {
            question,
            gold_answer,
            category,
            source_item: text_field(&obj, &["source_item", "item", "sample_id"]).unwrap_or_default(),
        })
    }
}

/// Dataset records plus the 1-based numbers of skipped lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub records: Vec<QaRecord>,
    pub skipped_lines: Vec<usize>,
}

pub fn load_dataset(text: &str) -> Dataset {
    let mut ds = Dataset::default();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match QaRecord::from_json_line(line) {
            Ok(r) => ds.records.push(r),
            Err(e) => {
                tracing::warn!(line = n + 1, error = %e, "skipping dataset line");
                ds.skipped_lines.push(n + 1);
            }
        }
    }
    ds
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionOutcome {
    pub question: String,
    pub gold_answer: String,
    pub prediction: String,
    pub category: Category,
    pub source_item: String,
    pub f1: f64,
    pub bleu1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<SearchStats>,
}

/// F1 and BLEU-1 as percentages.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub name: String,
    pub questions: usize,
    pub f1: f64,
    pub bleu1: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub overall: ScoreRow,
    pub per_category: Vec<ScoreRow>,
    pub failed: usize,
    pub skipped_lines: Vec<usize>,
    pub aggregate: AggregateStats,
    pub outcomes: Vec<QuestionOutcome>,
}

fn score_row(name: &str, outcomes: &[&QuestionOutcome]) -> ScoreRow {
    let n = outcomes.len();
    let mean = |f: fn(&QuestionOutcome) -> f64| {
        if n == 0 {
            0.0
        } else {
            100.0 * outcomes.iter().map(|o| f(o)).sum::<f64>() / n as f64
        }
    };
    ScoreRow {
        name: name.to_string(),
        questions: n,
        f1: mean(|o| o.f1),
        bleu1: mean(|o| o.bleu1),
    }
}

impl BenchmarkReport {
    pub fn from_outcomes(outcomes: Vec<QuestionOutcome>, skipped_lines: Vec<usize>) -> Self {
        let mut by_cat: BTreeMap<Category, Vec<&QuestionOutcome>> = BTreeMap::new();
        for o in &outcomes {
            by_cat.entry(o.category).or_default().push(o);
        }
        let per_category = by_cat.iter().map(|(c, os)| score_row(c.as_str(), os)).collect();
        let all: Vec<&QuestionOutcome> = outcomes.iter().collect();
        let stats: Vec<SearchStats> = outcomes.iter().filter_map(|o| o.stats.clone()).collect();
        Self {
            overall: score_row("overall", &all),
            per_category,
            failed: outcomes.iter().filter(|o| o.error.is_some()).count(),
            skipped_lines,
            aggregate: aggregate_stats(&stats),
            outcomes,
        }
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<14} {:>6} {:>8} {:>8}", "category", "#Q", "F1", "BLEU-1");
        for row in self.per_category.iter().chain(std::iter::once(&self.overall)) {
            let _ = writeln!(out, "{:<14} {:>6} {:>8.1} {:>8.1}", row.name, row.questions, row.f1, row.bleu1);
        }
        if self.failed > 0 {
            let _ = writeln!(out, "failed questions: {}", self.failed);
        }
        if !self.skipped_lines.is_empty() {
            let _ = writeln!(out, "skipped dataset lines: {}", self.skipped_lines.len());
        }
        out.push('\n');
        out.push_str(&render_table(&self.aggregate));
        out
    }
}

/// Answers every record against `store` and scores the answers. Search
/// failures score zero and are recorded. Runs `config.bench_workers`
/// questions at a time; outcomes keep dataset order.
pub fn run_benchmark(
    dataset: &Dataset,
    store: &MemoryStore,
    gateway: &Gateway<'_>,
    embedder: &dyn Embedder,
    config: &Config,
) -> BenchmarkReport {
    let n = dataset.records.len();
    let slots: Mutex<Vec<Option<QuestionOutcome>>> = Mutex::new(vec![None; n]);
    let next = AtomicUsize::new(0);
    let work = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        let Some(record) = dataset.records.get(i) else { break };
        let outcome = answer_one(record, store, gateway, embedder, config);
        slots.lock().expect("bench slots poisoned")[i] = Some(outcome);
    };
    let workers = config.bench_workers.max(1).min(n.max(1));
    if workers == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(work);
            }
        });
    }
    let outcomes = slots
        .into_inner()
        .expect("bench slots poisoned")
        .into_iter()
        .map(|o| o.expect("every question answered"))
        .collect();
    BenchmarkReport::from_outcomes(outcomes, dataset.skipped_lines.clone())
}

fn answer_one(
    record: &QaRecord,
    store: &MemoryStore,
    gateway: &Gateway<'_>,
    embedder: &dyn Embedder,
    config: &Config,
) -> QuestionOutcome {
    let mut outcome = QuestionOutcome {
        question: record.question.clone(),
        gold_answer: record.gold_answer.clone(),
        prediction: String::new(),
        category: record.category,
        source_item: record.source_item.clone(),
        f1: 0.0,
        bleu1: 0.0,
        error: None,
        stats: None,
    };
    match run_search(&record.question, store, gateway, embedder, config) {
        Ok(result) => {
            outcome.f1 = token_f1(&result.answer, &record.gold_answer);
            outcome.bleu1 = bleu1(&result.answer, &record.gold_answer);
            outcome.prediction = result.answer;
            let mut stats = result.stats;
            stats.category = Some(record.category.to_string());
            if !record.source_item.is_empty() {
                stats.source_item = Some(record.source_item.clone());
            }
            outcome.stats = Some(stats);
        }
        Err(e) => {
            tracing::warn!(question = %record.question, error = %e, "question failed");
            outcome.error = Some(e.to_string());
        }
    }
    outcome
}
