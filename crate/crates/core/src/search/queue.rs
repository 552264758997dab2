use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

#[derive(Debug, Clone)]
struct Entry {
    priority: f64,
    seq: u64,
    id: String,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // max-heap on priority; among equal priorities the earlier insertion wins
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Max-priority frontier shared by all explorers.
///
/// Each id is accepted at most once over the queue's lifetime. Visited ids
/// are filtered lazily when popped.
#[derive(Debug, Clone, Default)]
pub struct GlobalQueue {
    heap: BinaryHeap<Entry>,
    enqueued: HashSet<String>,
    next_seq: u64,
}

impl GlobalQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `false` when `id` was enqueued before.
    pub fn push(&mut self, id: &str, priority: f64) -> bool {
        if !self.enqueued.insert(id.to_string()) {
            return false;
        }
        self.heap.push(Entry {
            priority,
            seq: self.next_seq,
            id: id.to_string(),
        });
        self.next_seq += 1;
        true
    }

    /// Pops the highest-priority id not in `visited`.
    pub fn pop(&mut self, visited: &HashSet<String>) -> Option<(String, f64)> {
        while let Some(entry) = self.heap.pop() {
            if !visited.contains(&entry.id) {
                return Some((entry.id, entry.priority));
            }
        }
        None
    }

    pub fn was_enqueued(&self, id: &str) -> bool {
        self.enqueued.contains(id)
    }

    /// Stored entries, including ones that will be filtered at pop time.
    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Entries not yet visited.
    pub fn live_len(&self, visited: &HashSet<String>) -> usize {
        self.heap.iter().filter(|e| !visited.contains(&e.id)).count()
    }

    /// `(id, priority, insertion seq)` for every stored entry, unordered.
    pub fn entries(&self) -> impl Iterator<Item = (&str, f64, u64)> {
        self.heap.iter().map(|e| (e.id.as_str(), e.priority, e.seq))
    }
}
