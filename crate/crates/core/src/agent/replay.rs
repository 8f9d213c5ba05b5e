use std::collections::VecDeque;

use rand::seq::index::sample as sample_indices;
use rand::Rng;

use crate::diffusion::SeedSet;
use crate::graph::NodeId;

/// One n-step experience: from `state`, taking `action` and then following the
/// episode for `steps - 1` more actions reaches `next_state`.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub graph_id: usize,
    pub state: SeedSet,
    pub action: NodeId,
    /// Discounted sum of the `steps` rewards.
    pub reward_n: f64,
    /// Number of rewards in `reward_n`; below `n` only for episode tails.
    pub steps: usize,
    pub next_state: SeedSet,
    /// `next_state` holds the full budget; no bootstrapping past it.
    pub terminal: bool,
}

/// FIFO ring of transitions.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity: capacity.max(1),
            items: VecDeque::with_capacity(capacity.max(1)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Appends, evicting the oldest transition when full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Uniform sample of `min(batch, len)` distinct transitions.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<&Transition> {
        let k = batch.min(self.items.len());
        sample_indices(rng, self.items.len(), k)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }
}
