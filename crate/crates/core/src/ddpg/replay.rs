use rand::Rng;

use crate::envs::SimRng;

/// One environment interaction as stored for off-policy updates.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// Network-facing observation of the state.
    pub state: Vec<f64>,
    /// Padded safe-polytope vertices at `state`, row-major `N × action_dim`
    /// (empty for heads that ignore vertices).
    pub vertices: Vec<f64>,
    pub action: Vec<f64>,
    /// Training reward (penalty-shaped for the baseline, scaled).
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub next_vertices: Vec<f64>,
    pub done: bool,
}

/// Fixed-capacity FIFO ring buffer with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
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

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Oldest-to-newest iteration.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    /// `batch` transitions drawn uniformly with replacement, or `None` while
    /// the buffer holds fewer than `batch` items.
    pub fn sample(&self, batch: usize, rng: &mut SimRng) -> Option<Vec<&Transition>> {
        if batch == 0 || self.items.len() < batch {
            return None;
        }
        Some(
            (0..batch)
                .map(|_| &self.items[rng.gen_range(0..self.items.len())])
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn tr(r: f64) -> Transition {
        Transition {
            state: vec![r],
            vertices: vec![],
            action: vec![0.0],
            reward: r,
            next_state: vec![r],
            next_vertices: vec![],
            done: false,
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(tr(i as f64));
        }
        assert_eq!(buf.len(), 3);
        let rewards: Vec<f64> = buf.iter().map(|t| t.reward).collect();
        assert_eq!(rewards, [2.0, 3.0, 4.0]);
    }

    #[test]
    fn sampling_waits_for_batch_and_is_reproducible() {
        let mut buf = ReplayBuffer::new(10);
        buf.push(tr(0.0));
        assert!(buf.sample(2, &mut SimRng::seed_from_u64(0)).is_none());
        for i in 1..10 {
            buf.push(tr(i as f64));
        }
        let a: Vec<f64> = buf
            .sample(6, &mut SimRng::seed_from_u64(4))
            .unwrap()
            .iter()
            .map(|t| t.reward)
            .collect();
        let b: Vec<f64> = buf
            .sample(6, &mut SimRng::seed_from_u64(4))
            .unwrap()
            .iter()
            .map(|t| t.reward)
            .collect();
        assert_eq!(a, b);
    }
}
