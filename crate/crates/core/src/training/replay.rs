//! Experience replay.

use crate::sim::state::JointState;
use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;

/// One step of experience. The states are stored in the robot-centric frame
/// the network consumes. On terminal transitions the reward is the whole
/// learning target; no bootstrap is added.
#[derive(Clone, Debug)]
pub struct Transition {
    pub state: JointState,
    pub action: usize,
    pub reward: f64,
    pub next_state: JointState,
    pub terminal: bool,
}

/// Fixed-capacity FIFO buffer of transitions.
#[derive(Debug)]
pub struct ReplayMemory {
    buffer: VecDeque<Transition>,
    capacity: usize,
    inserted: u64,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> ReplayMemory {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayMemory {
            buffer: VecDeque::with_capacity(capacity.min(1 << 20)),
            capacity,
            inserted: 0,
        }
    }

    pub fn push(&mut self, transition: Transition) {
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(transition);
        self.inserted += 1;
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    /// Oldest retained transition (eviction is strictly first-in-first-out).
    pub fn oldest(&self) -> Option<&Transition> {
        self.buffer.front()
    }

    /// Uniform sample without replacement of up to `batch_size` transitions.
    pub fn sample(&self, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<&Transition> {
        let k = batch_size.min(self.buffer.len());
        sample(rng, self.buffer.len(), k)
            .into_iter()
            .map(|i| &self.buffer[i])
            .collect()
    }
}
