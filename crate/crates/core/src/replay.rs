//! Fixed-capacity experience store with uniform sampling.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// True only for genuine terminal states; time limits bootstrap normally.
    pub terminal: bool,
}

/// A sampled minibatch laid out row-per-transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    /// 1.0 for terminal transitions, 0.0 otherwise.
    pub terminals: Array1<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn from_transitions(items: &[&Transition]) -> Self {
        let n = items.len();
        let sd = items.first().map_or(0, |t| t.state.len());
        let ad = items.first().map_or(0, |t| t.action.len());
        let mut states = Array2::zeros((n, sd));
        let mut actions = Array2::zeros((n, ad));
        let mut next_states = Array2::zeros((n, sd));
        let mut rewards = Array1::zeros(n);
        let mut terminals = Array1::zeros(n);
        for (i, t) in items.iter().enumerate() {
            states.row_mut(i).assign(&ndarray::aview1(&t.state));
            actions.row_mut(i).assign(&ndarray::aview1(&t.action));
            next_states.row_mut(i).assign(&ndarray::aview1(&t.next_state));
            rewards[i] = t.reward;
            terminals[i] = if t.terminal { 1.0 } else { 0.0 };
        }
        Self {
            states,
            actions,
            rewards,
            next_states,
            terminals,
        }
    }
}

/// Ring buffer: once full, the oldest transition is overwritten first.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    storage: Vec<Transition>,
    cursor: usize,
}

const MAGIC: &[u8; 8] = b"MEPGRB01";

impl ReplayBuffer {
    pub fn new(capacity: usize, state_dim: usize, action_dim: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("replay capacity must be positive"));
        }
        Ok(Self {
            capacity,
            state_dim,
            action_dim,
            storage: Vec::with_capacity(capacity.min(1 << 16)),
            cursor: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn push(&mut self, transition: Transition) -> Result<()> {
        if transition.state.len() != self.state_dim
            || transition.next_state.len() != self.state_dim
            || transition.action.len() != self.action_dim
        {
            return Err(Error::config(format!(
                "transition dims ({}, {}, {}) do not match buffer ({}, {}, {})",
                transition.state.len(),
                transition.action.len(),
                transition.next_state.len(),
                self.state_dim,
                self.action_dim,
                self.state_dim
            )));
        }
        if !transition.reward.is_finite() {
            return Err(Error::Numeric(format!("non-finite reward {}", transition.reward)));
        }
        if self.storage.len() < self.capacity {
            self.storage.push(transition);
        } else {
            self.storage[self.cursor] = transition;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    /// Stored transitions from oldest to newest.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.storage.len() < self.capacity {
            0
        } else {
            self.cursor
        };
        self.storage[split..].iter().chain(&self.storage[..split])
    }

    /// `n` indices drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.storage.len() < n || self.storage.is_empty() {
            return Err(Error::NotReady(format!(
                "buffer holds {} transitions, batch needs {n}",
                self.storage.len()
            )));
        }
        let size = self.storage.len();
        Ok((0..n).map(|_| rng.random_range(0..size)).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Batch> {
        let idx = self.sample_indices(n, rng)?;
        let items: Vec<&Transition> = idx.iter().map(|&i| &self.storage[i]).collect();
        Ok(Batch::from_transitions(&items))
    }

    /// Like [`ReplayBuffer::sample`] but tolerates a buffer smaller than `n`,
    /// which happens when `n` exceeds the number of stored items but at least
    /// one is present (sampling is with replacement).
    pub fn sample_with_replacement<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Batch> {
        if self.storage.is_empty() {
            return Err(Error::NotReady("buffer is empty".into()));
        }
        let size = self.storage.len();
        let items: Vec<&Transition> = (0..n)
            .map(|_| &self.storage[rng.random_range(0..size)])
            .collect();
        Ok(Batch::from_transitions(&items))
    }

    /// Writes the buffer, physical layout and cursor included, so a loaded
    /// buffer samples exactly like the original.
    ///
    /// Layout (little endian): magic, capacity u64, state dim u32, action dim
    /// u32, cursor u64, count u64, then `count` records each prefixed by its
    /// byte length as u32.
    pub fn dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&(self.capacity as u64).to_le_bytes())?;
        out.write_all(&(self.state_dim as u32).to_le_bytes())?;
        out.write_all(&(self.action_dim as u32).to_le_bytes())?;
        out.write_all(&(self.cursor as u64).to_le_bytes())?;
        out.write_all(&(self.storage.len() as u64).to_le_bytes())?;
        let record_len = 8 * (2 * self.state_dim + self.action_dim + 1) + 1;
        let mut record = Vec::with_capacity(record_len);
        for t in &self.storage {
            record.clear();
            for v in t.state.iter().chain(&t.action).chain([&t.reward]).chain(&t.next_state) {
                record.extend_from_slice(&v.to_le_bytes());
            }
            record.push(u8::from(t.terminal));
            out.write_all(&(record.len() as u32).to_le_bytes())?;
            out.write_all(&record)?;
        }
        Ok(())
    }

    pub fn load<R: Read>(mut input: R) -> Result<Self> {
        let bad = |what: &str| Error::Parse(format!("replay dump: {what}"));
        let io = |e: std::io::Error| Error::Parse(format!("replay dump: {e}"));
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let capacity = read_u64(&mut input).map_err(io)? as usize;
        let state_dim = read_u32(&mut input).map_err(io)? as usize;
        let action_dim = read_u32(&mut input).map_err(io)? as usize;
        let cursor = read_u64(&mut input).map_err(io)? as usize;
        let count = read_u64(&mut input).map_err(io)? as usize;
        if capacity == 0 || count > capacity || cursor >= capacity {
            return Err(bad("inconsistent header"));
        }
        if count < capacity && cursor != count % capacity {
            return Err(bad("cursor does not match a partially filled buffer"));
        }
        let expected = 8 * (2 * state_dim + action_dim + 1) + 1;
        let mut storage = Vec::with_capacity(count);
        let mut record = vec![0u8; expected];
        for _ in 0..count {
            let len = read_u32(&mut input).map_err(io)? as usize;
            if len != expected {
                return Err(bad("record length mismatch"));
            }
            input.read_exact(&mut record).map_err(io)?;
            let mut floats = record[..len - 1]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
            let state: Vec<f64> = floats.by_ref().take(state_dim).collect();
            let action: Vec<f64> = floats.by_ref().take(action_dim).collect();
            let reward = floats.next().ok_or_else(|| bad("truncated record"))?;
            let next_state: Vec<f64> = floats.by_ref().take(state_dim).collect();
            let terminal = match record[len - 1] {
                0 => false,
                1 => true,
                _ => return Err(bad("terminal flag must be 0 or 1")),
            };
            storage.push(Transition {
                state,
                action,
                reward,
                next_state,
                terminal,
            });
        }
        Ok(Self {
            capacity,
            state_dim,
            action_dim,
            storage,
            cursor,
        })
    }
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
