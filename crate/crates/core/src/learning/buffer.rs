use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;

/// One regression example: state features, per-action planner Q-values and
/// the temperature the planner used.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub targets: Vec<f64>,
    pub tau: f64,
}

/// Fixed-capacity FIFO of samples.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: VecDeque<Sample>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity,
            entries: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends, evicting the oldest entry when full.
    pub fn push(&mut self, sample: Sample) {
        if self.capacity == 0 {
            return;
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(sample);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Sample> {
        self.entries.iter()
    }

    /// `n` distinct entries chosen uniformly; `None` when fewer than `n`
    /// are stored.
    pub fn sample<R: Rng>(&self, rng: &mut R, n: usize) -> Option<Vec<&Sample>> {
        if n > self.entries.len() {
            return None;
        }
        Some(
            index::sample(rng, self.entries.len(), n)
                .into_iter()
                .map(|i| &self.entries[i])
                .collect(),
        )
    }
}
