use rand::Rng;

use super::transition::{Domain, Transition};
use crate::error::{Error, Result};

pub const DEFAULT_CAPACITY: usize = 1_000_000;

/// Ring buffer of simulator transitions with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::new(),
            cursor: 0,
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

    /// Inserts a simulator transition, overwriting the oldest one when full.
    pub fn insert(&mut self, t: Transition) -> Result<()> {
        if t.domain != Domain::Sim {
            return Err(Error::DomainContamination {
                context: "replay buffer insert",
                found: t.domain,
            });
        }
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    /// Uniform sample with replacement.
    pub fn sample<'a, R: Rng + ?Sized>(
        &'a self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<Vec<&'a Transition>> {
        sample_uniform(&self.items, batch_size, rng)
    }

    /// Contents from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity {
            0
        } else {
            self.cursor
        };
        self.items[split..].iter().chain(&self.items[..split])
    }
}

pub(crate) fn sample_uniform<'a, R: Rng + ?Sized>(
    items: &'a [Transition],
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<&'a Transition>> {
    if items.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    Ok((0..batch_size)
        .map(|_| &items[rng.random_range(0..items.len())])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SimRng;
    use rand::SeedableRng;

    fn item(tag: f64) -> Transition {
        Transition {
            s: vec![tag],
            a: vec![0.0],
            r: tag,
            s_next: vec![tag],
            terminal: false,
            domain: Domain::Sim,
        }
    }

    #[test]
    fn overwrites_oldest() {
        let mut b = ReplayBuffer::new(2);
        for i in 1..=3 {
            b.insert(item(i as f64)).unwrap();
        }
        let held: Vec<f64> = b.iter().map(|t| t.r).collect();
        assert_eq!(held, vec![2.0, 3.0]);
    }

    #[test]
    fn sample_returns_requested_count() {
        let mut b = ReplayBuffer::new(10);
        b.insert(item(1.0)).unwrap();
        let mut rng = SimRng::seed_from_u64(0);
        assert_eq!(b.sample(7, &mut rng).unwrap().len(), 7);
    }

    #[test]
    fn empty_sample_errors() {
        let b = ReplayBuffer::new(4);
        let mut rng = SimRng::seed_from_u64(0);
        assert!(matches!(b.sample(1, &mut rng), Err(Error::EmptyBuffer)));
    }

    #[test]
    fn rejects_real_transitions() {
        let mut b = ReplayBuffer::new(4);
        let mut t = item(0.0);
        t.domain = Domain::Real;
        assert!(matches!(b.insert(t), Err(Error::DomainContamination { .. })));
        assert!(b.is_empty());
    }

    #[test]
    fn sampling_is_uniform() {
        let mut b = ReplayBuffer::new(10);
        for i in 0..10 {
            b.insert(item(i as f64)).unwrap();
        }
        let mut rng = SimRng::seed_from_u64(42);
        let mut counts = [0usize; 10];
        let draws = 100_000;
        for t in b.sample(draws, &mut rng).unwrap() {
            counts[t.r as usize] += 1;
        }
        for c in counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.1).abs() < 0.01, "{freq}");
        }
    }
}
