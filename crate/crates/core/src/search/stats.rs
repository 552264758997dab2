use serde::{Deserialize, Serialize};

use crate::llm::ActionKind;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionCounts {
    pub expand: u64,
    pub skip: u64,
    pub answer: u64,
}

impl ActionCounts {
    pub fn record(&mut self, kind: ActionKind) {
        match kind {
            ActionKind::Expand => self.expand += 1,
            ActionKind::Skip => self.skip += 1,
            ActionKind::Answer => self.answer += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.expand + self.skip + self.answer
    }
}

/// Counters for one search.
///
/// Invariants: `actions.total() == total_steps`,
/// `path_lengths.iter().sum() == total_steps`, every path length is at
/// least 1, and `kept_nodes` counts evidence before any fallback.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub elapsed_secs: f64,
    pub subgoal_count: usize,
    pub satisfied_count: usize,
    /// Candidates offered to start-node selection, summed over rounds.
    pub retrieved_nodes: usize,
    /// Start nodes seeded in the first round.
    pub initial_nodes: usize,
    /// Mean query similarity of the first round's top-k.
    pub avg_similarity: f64,
    pub paths: usize,
    pub total_steps: usize,
    pub path_lengths: Vec<usize>,
    pub actions: ActionCounts,
    pub initial_queue_size: usize,
    pub max_queue_size: usize,
    /// Exploration rounds run, refinement rounds included.
    pub exploration_rounds: u32,
    pub refined: bool,
    pub kept_nodes: usize,
    pub used_fallback: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_item: Option<String>,
}

impl SearchStats {
    /// Satisfied fraction of sub-goals in `[0, 1]`.
    pub fn satisfaction_ratio(&self) -> f64 {
        if self.subgoal_count == 0 {
            0.0
        } else {
            self.satisfied_count as f64 / self.subgoal_count as f64
        }
    }

    pub fn fully_satisfied(&self) -> bool {
        self.subgoal_count > 0 && self.satisfied_count == self.subgoal_count
    }

    pub fn max_path_length(&self) -> usize {
        self.path_lengths.iter().copied().max().unwrap_or(0)
    }

    /// Checks the counter invariants listed on the type.
    pub fn check(&self) -> Result<(), String> {
        if self.actions.total() != self.total_steps as u64 {
            return Err(format!(
                "action counts sum to {} but {} steps were taken",
                self.actions.total(),
                self.total_steps
            ));
        }
        if self.path_lengths.iter().sum::<usize>() != self.total_steps {
            return Err("path lengths do not sum to the step count".into());
        }
        if self.path_lengths.len() != self.paths || self.path_lengths.contains(&0) {
            return Err("path list is inconsistent".into());
        }
        if self.satisfied_count > self.subgoal_count {
            return Err("more satisfied sub-goals than sub-goals".into());
        }
        Ok(())
    }
}
