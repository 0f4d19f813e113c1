use alloc::vec::Vec;

use rand::{Rng as _, RngCore};

use crate::error::contract;
use crate::sac::Transition;
use crate::Result;

/// FIFO ring of transitions with uniform sampling (with replacement).
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    min_size: usize,
    data: Vec<Transition>,
    /// Slot the next push overwrites once full.
    head: usize,
    pushed: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, min_size: usize) -> Result<Self> {
        contract!(capacity >= 1, "buffer capacity must be positive");
        contract!(min_size <= capacity, "min size {min_size} exceeds capacity {capacity}");
        Ok(Self { capacity, min_size, data: Vec::new(), head: 0, pushed: 0 })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total transitions ever pushed, evicted ones included.
    pub fn pushed(&self) -> u64 {
        self.pushed
    }

    pub fn ready(&self) -> bool {
        self.data.len() >= self.min_size.max(1)
    }

    pub fn push(&mut self, t: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
        self.pushed += 1;
    }

    /// Transitions from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.data[self.head..].iter().chain(self.data[..self.head].iter())
    }

    pub fn sample<R: RngCore + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        contract!(self.ready(), "sampling from a buffer of {} below min size {}", self.len(), self.min_size);
        contract!(batch >= 1, "batch size must be positive");
        Ok((0..batch).map(|_| &self.data[rng.random_range(0..self.data.len())]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_stream;
    use alloc::vec;

    fn t(r: f64) -> Transition {
        Transition { state: vec![r], action: vec![0.0], reward: r, next_state: vec![r], terminal: false }
    }

    #[test]
    fn evicts_oldest_first() {
        let mut b = ReplayBuffer::new(3, 1).unwrap();
        for i in 0..5 {
            b.push(t(i as f64));
        }
        let order: Vec<f64> = b.iter().map(|x| x.reward).collect();
        assert_eq!(order, vec![2.0, 3.0, 4.0]);
        assert_eq!(b.pushed(), 5);
        assert_eq!(b.len(), 3);
    }

    #[test]
    fn refuses_to_sample_below_min_size() {
        let mut b = ReplayBuffer::new(10, 3).unwrap();
        b.push(t(0.0));
        b.push(t(1.0));
        assert!(!b.ready());
        assert!(b.sample(4, &mut rng_stream(0, 0)).is_err());
        b.push(t(2.0));
        assert_eq!(b.sample(4, &mut rng_stream(0, 0)).unwrap().len(), 4);
    }

    #[test]
    fn sampling_covers_all_entries() {
        let mut b = ReplayBuffer::new(4, 1).unwrap();
        for i in 0..4 {
            b.push(t(i as f64));
        }
        let mut seen = [false; 4];
        for x in b.sample(200, &mut rng_stream(1, 0)).unwrap() {
            seen[x.reward as usize] = true;
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(ReplayBuffer::new(0, 0).is_err());
        assert!(ReplayBuffer::new(2, 3).is_err());
    }
}
