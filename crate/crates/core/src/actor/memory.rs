//! Bounded store of the most recent (features, decision) samples.

use rand::Rng;

use crate::resalloc::OffloadDecision;

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayMemory {
    capacity: usize,
    features: Vec<Vec<f64>>,
    decisions: Vec<Vec<f64>>,
    cursor: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay memory needs a positive capacity");
        Self {
            capacity,
            features: Vec::with_capacity(capacity),
            decisions: Vec::with_capacity(capacity),
            cursor: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Append a sample, overwriting the oldest once full.
    pub fn record(&mut self, features: Vec<f64>, x: &OffloadDecision) {
        let target = x.as_f64();
        if self.features.len() < self.capacity {
            self.features.push(features);
            self.decisions.push(target);
        } else {
            self.features[self.cursor] = features;
            self.decisions[self.cursor] = target;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn get(&self, k: usize) -> (&[f64], &[f64]) {
        (&self.features[k], &self.decisions[k])
    }

    /// Indices of a uniform batch drawn with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, rng: &mut R, size: usize) -> Vec<usize> {
        (0..size).map(|_| rng.random_range(0..self.len())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_evicts_oldest() {
        let mut m = ReplayMemory::new(2);
        for k in 0..3 {
            m.record(vec![k as f64], &OffloadDecision::from_bits(&[1, 0]));
        }
        assert_eq!(m.len(), 2);
        let stored: Vec<f64> = (0..2).map(|k| m.get(k).0[0]).collect();
        assert!(!stored.contains(&0.0));
        assert!(stored.contains(&1.0) && stored.contains(&2.0));
        assert_eq!(m.get(0).1, &[1.0, 0.0]);
    }
}
