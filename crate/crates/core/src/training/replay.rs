use alloc::rc::Rc;
use alloc::vec::Vec;

use crate::episode::{FailureMemory, MemoryMode};
use crate::error::{Error, Result};
use crate::numkit::Rng;

/// One failure-aware decision.
///
/// The memory before the decision is the episode's initial memory with every
/// action in `history` zeroed; the next memory additionally zeroes `action`.
/// The observation embedding is shared by all transitions of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub embedding: Rc<[f64]>,
    pub initial_memory: Rc<[f64]>,
    pub memory_mode: MemoryMode,
    pub history: Vec<usize>,
    pub action: usize,
    pub reward: f64,
    pub terminal: bool,
}

impl Transition {
    pub fn memory(&self) -> Result<FailureMemory> {
        FailureMemory::with_failures(&self.initial_memory, self.memory_mode, &self.history)
    }

    pub fn next_memory(&self) -> Result<FailureMemory> {
        let mut m = self.memory()?;
        m.mark_failed(self.action)?;
        Ok(m)
    }

    /// Memories seen by a recurrent head up to and including this decision.
    pub fn memory_sequence(&self, include_next: bool) -> Result<Vec<FailureMemory>> {
        let mut out = Vec::with_capacity(self.history.len() + 1);
        let mut m = FailureMemory::with_failures(&self.initial_memory, self.memory_mode, &[])?;
        for &a in &self.history {
            m.mark_failed(a)?;
            out.push(m.clone());
        }
        if include_next {
            m.mark_failed(self.action)?;
            out.push(m);
        }
        Ok(out)
    }
}

/// Fixed-capacity ring of transitions with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Argument("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            items: Vec::new(),
            next: 0,
        })
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

    /// Adds a transition, overwriting the oldest one once full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// `batch` indices drawn uniformly with replacement.
    pub fn sample_indices(&self, batch: usize, rng: &mut Rng) -> Result<Vec<usize>> {
        if self.items.is_empty() {
            return Err(Error::Argument("cannot sample an empty replay buffer".into()));
        }
        Ok((0..batch).map(|_| rng.below(self.items.len())).collect())
    }

    pub fn sample(&self, batch: usize, rng: &mut Rng) -> Result<Vec<&Transition>> {
        Ok(self
            .sample_indices(batch, rng)?
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }
}
