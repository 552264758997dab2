//! Summary statistics over many searches.
//!
//! Values are rounded for presentation: percentages to one decimal,
//! times and per-query averages to two.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::search::SearchStats;

pub fn round_to(x: f64, decimals: i32) -> f64 {
    let f = 10f64.powi(decimals);
    (x * f).round() / f
}

fn pct(part: f64, whole: f64) -> f64 {
    if whole == 0.0 {
        0.0
    } else {
        round_to(100.0 * part / whole, 1)
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(f64::total_cmp);
    let mid = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[mid]
    } else {
        (xs[mid - 1] + xs[mid]) / 2.0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub length: usize,
    pub count: usize,
    pub pct: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub name: String,
    pub questions: usize,
    pub avg_time_secs: f64,
    pub avg_steps: f64,
    pub subgoal_satisfaction_pct: f64,
    pub refinement_pct: f64,
    pub avg_kept: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub questions: usize,

    pub total_time_secs: f64,
    pub avg_time_secs: f64,
    pub median_time_secs: f64,
    pub max_time_secs: f64,
    pub min_time_secs: f64,

    pub avg_subgoals: f64,
    pub avg_subgoal_satisfaction_pct: f64,
    pub fully_satisfied: usize,
    pub fully_satisfied_pct: f64,

    pub avg_retrieved_nodes: f64,
    pub avg_initial_nodes: f64,
    pub avg_similarity: f64,

    pub avg_paths: f64,
    pub avg_total_steps: f64,
    /// Mean over questions of each question's mean path length.
    pub avg_path_length: f64,
    pub max_path_length: usize,
    pub avg_exploration_rounds: f64,

    pub total_actions: u64,
    pub expand: u64,
    pub skip: u64,
    pub answer: u64,
    pub expand_pct: f64,
    pub skip_pct: f64,
    pub answer_pct: f64,

    pub avg_initial_queue_size: f64,
    pub avg_max_queue_size: f64,

    pub refinement_count: usize,
    pub refinement_rate_pct: f64,

    pub avg_kept_nodes: f64,
    pub max_kept_nodes: usize,
    pub no_kept_nodes: usize,

    /// Distribution of each question's longest path.
    pub path_length_histogram: Vec<HistogramRow>,
    pub per_item: Vec<GroupRow>,
    pub per_category: Vec<GroupRow>,
}

fn group_rows<'a>(records: &[&'a SearchStats], key: impl Fn(&'a SearchStats) -> Option<&'a str>) -> Vec<GroupRow> {
    let mut groups: BTreeMap<&str, Vec<&SearchStats>> = BTreeMap::new();
    for r in records {
        if let Some(k) = key(r) {
            groups.entry(k).or_default().push(r);
        }
    }
    groups
        .into_iter()
        .map(|(name, rs)| {
            let n = rs.len() as f64;
            GroupRow {
                name: name.to_string(),
                questions: rs.len(),
                avg_time_secs: round_to(mean(rs.iter().map(|r| r.elapsed_secs)), 2),
                avg_steps: round_to(mean(rs.iter().map(|r| r.total_steps as f64)), 1),
                subgoal_satisfaction_pct: round_to(100.0 * mean(rs.iter().map(|r| r.satisfaction_ratio())), 1),
                refinement_pct: pct(rs.iter().filter(|r| r.refined).count() as f64, n),
                avg_kept: round_to(mean(rs.iter().map(|r| r.kept_nodes as f64)), 1),
            }
        })
        .collect()
}

/// Aggregates per-question statistics. Empty input gives an all-zero
/// table.
pub fn aggregate_stats(records: &[SearchStats]) -> AggregateStats {
    if records.is_empty() {
        return AggregateStats::default();
    }
    let n = records.len() as f64;
    let times: Vec<f64> = records.iter().map(|r| r.elapsed_secs).collect();
    let avg = |f: &dyn Fn(&SearchStats) -> f64| mean(records.iter().map(f));

    let expand: u64 = records.iter().map(|r| r.actions.expand).sum();
    let skip: u64 = records.iter().map(|r| r.actions.skip).sum();
    let answer: u64 = records.iter().map(|r| r.actions.answer).sum();
    let total_actions = expand + skip + answer;

    let fully = records.iter().filter(|r| r.fully_satisfied()).count();
    let refined = records.iter().filter(|r| r.refined).count();

    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    for r in records {
        let longest = r.max_path_length();
        if longest > 0 {
            *histogram.entry(longest).or_default() += 1;
        }
    }
    let with_paths: usize = histogram.values().sum();

    let refs: Vec<&SearchStats> = records.iter().collect();
    AggregateStats {
        questions: records.len(),
        total_time_secs: round_to(times.iter().sum(), 1),
        avg_time_secs: round_to(mean(times.iter().copied()), 2),
        median_time_secs: round_to(median(times.clone()), 2),
        max_time_secs: round_to(times.iter().copied().fold(f64::MIN, f64::max), 2),
        min_time_secs: round_to(times.iter().copied().fold(f64::MAX, f64::min), 2),

        avg_subgoals: round_to(avg(&|r| r.subgoal_count as f64), 2),
        avg_subgoal_satisfaction_pct: round_to(100.0 * avg(&|r| r.satisfaction_ratio()), 1),
        fully_satisfied: fully,
        fully_satisfied_pct: pct(fully as f64, n),

        avg_retrieved_nodes: round_to(avg(&|r| r.retrieved_nodes as f64), 1),
        avg_initial_nodes: round_to(avg(&|r| r.initial_nodes as f64), 1),
        avg_similarity: round_to(avg(&|r| r.avg_similarity), 4),

        avg_paths: round_to(avg(&|r| r.paths as f64), 1),
        avg_total_steps: round_to(avg(&|r| r.total_steps as f64), 1),
        avg_path_length: round_to(
            avg(&|r| {
                if r.paths == 0 {
                    0.0
                } else {
                    r.total_steps as f64 / r.paths as f64
                }
            }),
            2,
        ),
        max_path_length: records.iter().map(SearchStats::max_path_length).max().unwrap_or(0),
        avg_exploration_rounds: round_to(avg(&|r| f64::from(r.exploration_rounds)), 1),

        total_actions,
        expand,
        skip,
        answer,
        expand_pct: pct(expand as f64, total_actions as f64),
        skip_pct: pct(skip as f64, total_actions as f64),
        answer_pct: pct(answer as f64, total_actions as f64),

        avg_initial_queue_size: round_to(avg(&|r| r.initial_queue_size as f64), 1),
        avg_max_queue_size: round_to(avg(&|r| r.max_queue_size as f64), 1),

        refinement_count: refined,
        refinement_rate_pct: pct(refined as f64, n),

        avg_kept_nodes: round_to(avg(&|r| r.kept_nodes as f64), 2),
        max_kept_nodes: records.iter().map(|r| r.kept_nodes).max().unwrap_or(0),
        no_kept_nodes: records.iter().filter(|r| r.kept_nodes == 0).count(),

        path_length_histogram: histogram
            .into_iter()
            .map(|(length, count)| HistogramRow {
                length,
                count,
                pct: pct(count as f64, with_paths as f64),
            })
            .collect(),
        per_item: group_rows(&refs, |r| r.source_item.as_deref()),
        per_category: group_rows(&refs, |r| r.category.as_deref()),
    }
}

/// Aligned two-column rendering of the table.
pub fn render_table(a: &AggregateStats) -> String {
    let mut rows: Vec<(String, String)> = Vec::new();
    let push = |rows: &mut Vec<(String, String)>, k: &str, v: String| rows.push((format!("  {k}"), v));
    rows.push(("[Questions]".into(), String::new()));
    push(&mut rows, "Total Questions", a.questions.to_string());
    rows.push(("[Time]".into(), String::new()));
    push(&mut rows, "Total Time", format!("{:.1} s", a.total_time_secs));
    push(&mut rows, "Avg. Time per Question", format!("{:.2} s", a.avg_time_secs));
    push(&mut rows, "Median Time", format!("{:.2} s", a.median_time_secs));
    push(&mut rows, "Max Time", format!("{:.2} s", a.max_time_secs));
    push(&mut rows, "Min Time", format!("{:.2} s", a.min_time_secs));
    rows.push(("[Sub-goals]".into(), String::new()));
    push(&mut rows, "Avg. Subgoals", format!("{:.2}", a.avg_subgoals));
    push(&mut rows, "Avg. Subgoal Satisfaction", format!("{:.1}%", a.avg_subgoal_satisfaction_pct));
    push(&mut rows, "Fully Satisfied", format!("{} ({:.1}%)", a.fully_satisfied, a.fully_satisfied_pct));
    rows.push(("[Retrieval]".into(), String::new()));
    push(&mut rows, "Avg. Retrieved Nodes", format!("{:.1}", a.avg_retrieved_nodes));
    push(&mut rows, "Avg. Initial Nodes", format!("{:.1}", a.avg_initial_nodes));
    push(&mut rows, "Avg. Similarity", format!("{:.4}", a.avg_similarity));
    rows.push(("[Traversal]".into(), String::new()));
    push(&mut rows, "Avg. Paths", format!("{:.1}", a.avg_paths));
    push(&mut rows, "Avg. Total Steps", format!("{:.1}", a.avg_total_steps));
    push(&mut rows, "Avg. Path Length", format!("{:.2}", a.avg_path_length));
    push(&mut rows, "Max Path Length", a.max_path_length.to_string());
    push(&mut rows, "Avg. Exploration Rounds", format!("{:.1}", a.avg_exploration_rounds));
    rows.push(("[Actions]".into(), String::new()));
    push(&mut rows, "Total Actions", a.total_actions.to_string());
    push(&mut rows, "EXPAND", format!("{} ({:.1}%)", a.expand, a.expand_pct));
    push(&mut rows, "SKIP", format!("{} ({:.1}%)", a.skip, a.skip_pct));
    push(&mut rows, "ANSWER", format!("{} ({:.1}%)", a.answer, a.answer_pct));
    rows.push(("[Queue]".into(), String::new()));
    push(&mut rows, "Avg. Initial Queue Size", format!("{:.1}", a.avg_initial_queue_size));
    push(&mut rows, "Avg. Max Queue Size", format!("{:.1}", a.avg_max_queue_size));
    rows.push(("[Refinement]".into(), String::new()));
    push(&mut rows, "Refinement Count", a.refinement_count.to_string());
    push(&mut rows, "Refinement Rate", format!("{:.1}%", a.refinement_rate_pct));
    rows.push(("[Kept Nodes]".into(), String::new()));
    push(&mut rows, "Avg. Kept Nodes", format!("{:.2}", a.avg_kept_nodes));
    push(&mut rows, "Max Kept Nodes", a.max_kept_nodes.to_string());
    push(&mut rows, "No Kept Nodes", a.no_kept_nodes.to_string());

    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in &rows {
        if v.is_empty() {
            let _ = writeln!(out, "{k}");
        } else {
            let _ = writeln!(out, "{k:<width$}  {v:>14}");
        }
    }
    if !a.path_length_histogram.is_empty() {
        let _ = writeln!(out, "[Path Length Distribution]");
        for h in &a.path_length_histogram {
            let _ = writeln!(out, "  {:>4}  {:>8}  {:>6.1}%", h.length, h.count, h.pct);
        }
    }
    for (title, groups) in [("Per Item", &a.per_item), ("Per Category", &a.per_category)] {
        if groups.is_empty() {
            continue;
        }
        let _ = writeln!(out, "[{title}]");
        let _ = writeln!(
            out,
            "  {:<20} {:>6} {:>10} {:>8} {:>9} {:>9} {:>8}",
            "name", "#Q", "avg time", "steps", "sat %", "refine %", "kept"
        );
        for g in groups.iter() {
            let _ = writeln!(
                out,
                "  {:<20} {:>6} {:>10.2} {:>8.1} {:>9.1} {:>9.1} {:>8.1}",
                g.name, g.questions, g.avg_time_secs, g.avg_steps, g.subgoal_satisfaction_pct, g.refinement_pct, g.avg_kept
            );
        }
    }
    out
}
