//! Replay buffers with per-variant sharing.
//!
//! `Separate` keeps one buffer per agent and routes each transition to the
//! buffer of the agent that produced it. The two common modes keep a single
//! physical buffer that both agents sample from; they differ only in which
//! agent's buffer it is.

use alloc::vec::Vec;

use rand::Rng;

use crate::controller::Mode;
use crate::envs::Observation;

/// Which agent produced a transition. Same variants as [`Mode`].
pub type Actor = Mode;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Observation,
    pub action: usize,
    pub next_state: Observation,
    /// Task vector in force when the transition was collected.
    pub task_w: Vec<f64>,
    pub skill_index: Option<usize>,
    pub actor: Actor,
    pub step: usize,
    /// Goal absorption (never set during reward-free pre-training).
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BufferId {
    Exploit,
    Explor,
}

impl BufferId {
    pub fn name(self) -> &'static str {
        match self {
            BufferId::Exploit => "exploit",
            BufferId::Explor => "explor",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sharing {
    Separate,
    ExploitCommon,
    ExplorCommon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplayConfig {
    pub capacity: usize,
    pub sharing: Sharing,
    pub batch_size: usize,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        ReplayConfig {
            capacity: 100_000,
            sharing: Sharing::Separate,
            batch_size: 64,
        }
    }
}

/// FIFO ring buffer.
#[derive(Debug, Clone)]
pub struct RingBuffer<T> {
    capacity: usize,
    items: Vec<T>,
    head: usize,
}

impl<T> RingBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "capacity must be positive");
        RingBuffer {
            capacity,
            items: Vec::new(),
            head: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.head] = item;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Item by age rank, 0 = oldest.
    pub fn get(&self, i: usize) -> Option<&T> {
        if i >= self.items.len() {
            return None;
        }
        self.items.get((self.head + i) % self.items.len())
    }

    /// Oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        (0..self.items.len()).map(move |i| &self.items[(self.head + i) % self.items.len()])
    }

    fn raw(&self, slot: usize) -> &T {
        &self.items[slot]
    }
}

/// A sampled transition with the buffer it came from.
#[derive(Debug, Clone, Copy)]
pub struct Sampled<'a> {
    pub source: BufferId,
    pub transition: &'a Transition,
}

/// Returned when the assigned buffer holds fewer than `batch_size` items.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotReady {
    pub have: usize,
    pub need: usize,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffers {
    pub config: ReplayConfig,
    exploit: Option<RingBuffer<Transition>>,
    explor: Option<RingBuffer<Transition>>,
}

impl ReplayBuffers {
    pub fn new(config: ReplayConfig) -> Self {
        assert!(config.capacity >= config.batch_size, "capacity below batch size");
        let (exploit, explor) = match config.sharing {
            Sharing::Separate => (true, true),
            Sharing::ExploitCommon => (true, false),
            Sharing::ExplorCommon => (false, true),
        };
        ReplayBuffers {
            config,
            exploit: exploit.then(|| RingBuffer::new(config.capacity)),
            explor: explor.then(|| RingBuffer::new(config.capacity)),
        }
    }

    pub fn buffer(&self, id: BufferId) -> Option<&RingBuffer<Transition>> {
        match id {
            BufferId::Exploit => self.exploit.as_ref(),
            BufferId::Explor => self.explor.as_ref(),
        }
    }

    pub fn len(&self, id: BufferId) -> usize {
        self.buffer(id).map_or(0, RingBuffer::len)
    }

    /// Buffer the variant assigns to `role` for sampling.
    pub fn assigned(&self, role: Actor) -> BufferId {
        match self.config.sharing {
            Sharing::Separate => match role {
                Mode::Exploit => BufferId::Exploit,
                Mode::Explor => BufferId::Explor,
            },
            Sharing::ExploitCommon => BufferId::Exploit,
            Sharing::ExplorCommon => BufferId::Explor,
        }
    }

    /// Routes by actor under `Separate`; everything goes to the shared buffer
    /// otherwise.
    pub fn push(&mut self, transition: Transition) {
        let id = self.assigned(transition.actor);
        self.push_to(id, transition);
    }

    /// Appends to a specific buffer; ignored if that buffer does not exist in
    /// this sharing mode.
    pub fn push_to(&mut self, id: BufferId, transition: Transition) {
        let buf = match id {
            BufferId::Exploit => self.exploit.as_mut(),
            BufferId::Explor => self.explor.as_mut(),
        };
        if let Some(buf) = buf {
            buf.push(transition);
        }
    }

    /// Uniform sample with replacement from the buffer assigned to `role`.
    pub fn sample_for<R: Rng + ?Sized>(&self, role: Actor, rng: &mut R) -> Result<Vec<Sampled<'_>>, NotReady> {
        let id = self.assigned(role);
        let need = self.config.batch_size;
        let buf = match self.buffer(id) {
            Some(b) if b.len() >= need => b,
            other => {
                return Err(NotReady {
                    have: other.map_or(0, RingBuffer::len),
                    need,
                })
            }
        };
        Ok((0..need)
            .map(|_| Sampled {
                source: id,
                transition: buf.raw(rng.random_range(0..buf.len())),
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use alloc::vec;

    fn tr(step: usize, actor: Actor) -> Transition {
        Transition {
            state: Observation::Cell { index: 0, count: 1 },
            action: 0,
            next_state: Observation::Cell { index: 0, count: 1 },
            task_w: vec![1.0],
            skill_index: None,
            actor,
            step,
            terminal: false,
        }
    }

    #[test]
    fn separate_routes_by_actor() {
        let mut b = ReplayBuffers::new(ReplayConfig {
            capacity: 10,
            sharing: Sharing::Separate,
            batch_size: 1,
        });
        b.push(tr(0, Mode::Explor));
        assert_eq!(b.len(BufferId::Exploit), 0);
        assert_eq!(b.len(BufferId::Explor), 1);
    }

    #[test]
    fn common_mode_counts_everything() {
        let mut b = ReplayBuffers::new(ReplayConfig {
            capacity: 1000,
            sharing: Sharing::ExploitCommon,
            batch_size: 8,
        });
        for i in 0..100 {
            b.push(tr(i, if i % 3 == 0 { Mode::Explor } else { Mode::Exploit }));
        }
        assert_eq!(b.len(BufferId::Exploit), 100);
        assert!(b.buffer(BufferId::Explor).is_none());
    }

    #[test]
    fn overflow_evicts_oldest_in_order() {
        let mut r = RingBuffer::new(10);
        for i in 0..15 {
            r.push(i);
        }
        assert_eq!(r.len(), 10);
        assert_eq!(r.iter().copied().collect::<Vec<_>>(), (5..15).collect::<Vec<_>>());
        assert_eq!(r.get(0), Some(&5));
    }

    #[test]
    fn underfilled_buffer_is_not_ready() {
        let mut b = ReplayBuffers::new(ReplayConfig {
            capacity: 100,
            sharing: Sharing::Separate,
            batch_size: 32,
        });
        for i in 0..31 {
            b.push(tr(i, Mode::Exploit));
        }
        let mut rng = stream(0, Stream::Replay);
        assert_eq!(
            b.sample_for(Mode::Exploit, &mut rng).unwrap_err(),
            NotReady { have: 31, need: 32 }
        );
        assert!(b.sample_for(Mode::Explor, &mut rng).is_err());
    }
}
