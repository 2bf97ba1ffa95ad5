use rand::Rng;

use crate::error::{Error, Result};
use crate::rules::ActionBounds;

/// One interaction step as stored for off-policy learning.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    /// Action sent to the environment, after saturation.
    pub action: Vec<f64>,
    /// Policy output plus exploration noise, before saturation.
    pub raw_action: Vec<f64>,
    /// Reward the critic learns from (shaped for reward-shaping agents).
    pub reward: f64,
    /// Reward returned by the environment.
    pub env_reward: f64,
    pub next_obs: Vec<f64>,
    /// True terminal state: no bootstrapping past it.
    pub done: bool,
    /// Admissible box at `obs`.
    pub bounds: ActionBounds,
}

/// Fixed-capacity ring buffer with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        Self {
            capacity,
            items: Vec::new(),
            next: 0,
            inserted: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        self.inserted += 1;
    }

    /// Oldest-first view of the stored transitions.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity {
            0
        } else {
            self.next
        };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// Draws `n` transitions uniformly with replacement. Requires at least
    /// `n` stored items.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<&Transition>> {
        if n == 0 || self.items.len() < n {
            return Err(Error::Usage(format!(
                "cannot sample a batch of {n} from {} stored transitions",
                self.items.len()
            )));
        }
        let len = self.items.len();
        Ok((0..n)
            .map(|_| &self.items[rng.random_range(0..len)])
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn item(r: f64) -> Transition {
        Transition {
            obs: vec![r],
            action: vec![0.0],
            raw_action: vec![0.0],
            reward: r,
            env_reward: r,
            next_obs: vec![r],
            done: false,
            bounds: ActionBounds::new(vec![-1.0], vec![1.0]).unwrap(),
        }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = ReplayBuffer::new(2);
        for r in [1.0, 2.0, 3.0] {
            b.push(item(r));
        }
        assert_eq!(b.len(), 2);
        assert_eq!(b.inserted(), 3);
        let kept: Vec<f64> = b.iter().map(|t| t.reward).collect();
        assert_eq!(kept, vec![2.0, 3.0]);
    }

    #[test]
    fn seeded_sampling_repeats() {
        let mut b = ReplayBuffer::new(100);
        for i in 0..50 {
            b.push(item(i as f64));
        }
        let x: Vec<f64> = b
            .sample(&mut ChaCha8Rng::seed_from_u64(8), 16)
            .unwrap()
            .iter()
            .map(|t| t.reward)
            .collect();
        let y: Vec<f64> = b
            .sample(&mut ChaCha8Rng::seed_from_u64(8), 16)
            .unwrap()
            .iter()
            .map(|t| t.reward)
            .collect();
        assert_eq!(x, y);
    }

    #[test]
    fn undersized_buffer_refuses() {
        let mut b = ReplayBuffer::new(10);
        b.push(item(0.0));
        assert!(b.sample(&mut ChaCha8Rng::seed_from_u64(0), 4).is_err());
        assert!(b.sample(&mut ChaCha8Rng::seed_from_u64(0), 1).is_ok());
    }
}
