use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy)]
struct Entry {
    score: f64,
    edge: usize,
    version: u32,
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
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then(self.edge.cmp(&other.edge))
            .then(self.version.cmp(&other.version))
    }
}

/// Min-queue of `(score, edge)` with lazy invalidation.
///
/// Every edge carries a version stamp; pushing or invalidating an edge bumps it, and entries
/// whose stamp is behind are dropped when they surface. Equal scores pop the smaller edge first.
#[derive(Debug, Clone)]
pub struct ScoreQueue {
    heap: BinaryHeap<Reverse<Entry>>,
    versions: Vec<u32>,
    scores: Vec<Option<f64>>,
}

impl ScoreQueue {
    pub fn new(edge_count: usize) -> Self {
        Self {
            heap: BinaryHeap::with_capacity(edge_count),
            versions: vec![0; edge_count],
            scores: vec![None; edge_count],
        }
    }

    /// Queues every edge with its score.
    pub fn from_scores(scores: &[f64]) -> Self {
        let mut q = Self::new(scores.len());
        for (edge, &s) in scores.iter().enumerate() {
            q.push(edge, s);
        }
        q
    }

    /// (Re)queues `edge`; any older entry for it becomes stale.
    pub fn push(&mut self, edge: usize, score: f64) {
        self.versions[edge] += 1;
        self.scores[edge] = Some(score);
        self.heap.push(Reverse(Entry {
            score,
            edge,
            version: self.versions[edge],
        }));
    }

    pub fn invalidate(&mut self, edge: usize) {
        self.versions[edge] += 1;
        self.scores[edge] = None;
    }

    /// Score of the live entry for `edge`, if any.
    pub fn score(&self, edge: usize) -> Option<f64> {
        self.scores[edge]
    }

    /// Removes and returns the minimum live `(edge, score)`.
    pub fn pop(&mut self) -> Option<(usize, f64)> {
        while let Some(Reverse(entry)) = self.heap.pop() {
            if entry.version == self.versions[entry.edge] {
                self.scores[entry.edge] = None;
                return Some((entry.edge, entry.score));
            }
        }
        None
    }

    /// Number of heap entries, stale ones included.
    pub fn raw_len(&self) -> usize {
        self.heap.len()
    }
}
