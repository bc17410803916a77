//! Bounded experience replay with FIFO eviction.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::LearnError;

#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: VecDeque<T>,
    rng: ChaCha8Rng,
}

impl<T: Clone> ReplayBuffer<T> {
    /// # Panics
    /// If `capacity` is zero.
    pub fn new(capacity: usize, seed: u64) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity),
            rng: ChaCha8Rng::seed_from_u64(seed),
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

    /// Appends, evicting the oldest entry when full.
    pub fn store(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
    }

    /// Draws `k` entries uniformly with replacement.
    pub fn sample(&mut self, k: usize) -> Result<Vec<T>, LearnError> {
        if self.items.len() < k || self.items.is_empty() {
            return Err(LearnError::NotEnoughSamples {
                requested: k,
                available: self.items.len(),
            });
        }
        Ok((0..k)
            .map(|_| self.items[self.rng.gen_range(0..self.items.len())].clone())
            .collect())
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }
}
