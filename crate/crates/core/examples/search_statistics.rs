//! Aggregates per-question search statistics into the summary table,
//! either from a log file (one stats object per line, as written by
//! `mem bench` or `mem query --trace`) or from a synthetic log.
//!
//! ```text
//! cargo run --example search_statistics
//! cargo run --example search_statistics -- path/to/log.jsonl
//! ```

use eventmem::harness::{aggregate_stats, render_table};
use eventmem::search::{ActionCounts, SearchStats};

fn synthetic(i: usize) -> SearchStats {
    let lens: Vec<usize> = (0..1 + i % 3).map(|p| 1 + (i + p) % 4).collect();
    let steps = lens.iter().sum::<usize>();
    let answer = u64::from(i % 7 == 0);
    let skip = (steps as u64 - answer) / 3;
    SearchStats {
        elapsed_secs: 2.0 + (i % 5) as f64 * 0.7,
        subgoal_count: 2 + i % 3,
        satisfied_count: 1 + i % 2,
        retrieved_nodes: 6 + i % 4,
        initial_nodes: 3,
        avg_similarity: 0.4 + (i % 10) as f64 / 50.0,
        paths: lens.len(),
        total_steps: steps,
        actions: ActionCounts {
            expand: steps as u64 - skip - answer,
            skip,
            answer,
        },
        path_lengths: lens,
        initial_queue_size: 3,
        max_queue_size: 3 + i % 4,
        exploration_rounds: 1 + (i % 4 != 0) as u32,
        refined: i % 4 != 0,
        kept_nodes: steps - skip as usize,
        category: Some(["single_hop", "multi_hop", "temporal"][i % 3].to_string()),
        source_item: Some(format!("item-{}", i % 2)),
        ..Default::default()
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let records: Vec<SearchStats> = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?,
        None => (0..40).map(synthetic).collect(),
    };
    for r in &records {
        r.check()?;
    }
    print!("{}", render_table(&aggregate_stats(&records)));
    Ok(())
}
